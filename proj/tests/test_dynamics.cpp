#include "doctest.h"

#include <cmath>

#include "bulkdiff/dynamics.hpp"
#include "bulkdiff/experiment.hpp"

using namespace bulkdiff;

TEST_SUITE_BEGIN("dynamics");

namespace {

ChainParams make_params(const CoefficientModel& model, double side, double dt = 0.05) {
    ChainParams p;
    p.dt = dt;
    p.torus = Domain::torus(1, side);
    p.model = model;
    p.rho = 1.0;
    return p;
}

const CoefficientModel kIdentity(ModelKind::Identity, 1.0);
const CoefficientModel kCount(ModelKind::CountIndicator, 2.0);

GridFunction gaussian_bump(const Domain& torus, int n, double center, double sigma) {
    return GridFunction::sampled(torus, n, [&](const Vec& x) {
        const double u = torus.displacement(x, vec1(center))[0];
        return std::exp(-u * u / (2.0 * sigma * sigma));
    });
}

} // namespace

TEST_CASE("identity chain: one-particle displacement is exactly diffusive") {
    const ChainParams params = make_params(kIdentity, 12.0, 0.05);
    const double t = 1.0;
    RandomStream rng(321);
    std::vector<double> displacements;
    for (int r = 0; r < 600; ++r) {
        RandomStream rs = rng.split(r);
        Configuration mu(params.torus);
        mu.add(vec1(0.0));
        const Trajectory traj = simulate(mu, params, {t}, rs);
        const double dx =
            params.torus.displacement(traj.snapshots[0].second.point(0), vec1(0.0))[0];
        displacements.push_back(dx);
    }
    const GofResult ks = ks_test(std::move(displacements), normal_cdf, 0.0, std::sqrt(t));
    INFO("KS p-value ", ks.p_value);
    CHECK(ks.p_value >= 0.01);
}

TEST_CASE("discretized sweep kernel satisfies detailed balance to 1e-10") {
    CHECK(detailed_balance_defect(8, 0.05, kCount) < 1e-10);
    CHECK(detailed_balance_defect(8, 0.2, CoefficientModel(ModelKind::SmoothCount, 3.0)) <
          1e-10);
}

TEST_CASE("sweeps preserve the equilibrium law: window counts stay Poissonian") {
    const ChainParams params = make_params(kCount, 6.0, 0.1);
    const Domain window = Domain::box(1, 2.0);
    RandomStream rng(99);
    std::vector<std::uint64_t> counts;
    for (int r = 0; r < 500; ++r) {
        RandomStream rs = rng.split(r);
        Configuration mu = sample_poisson(params.torus, params.rho, rs);
        for (int sweep = 0; sweep < 400; ++sweep) chain_sweep(mu, params, rs);
        std::uint64_t c = 0;
        for (const auto& p : mu.points())
            if (std::abs(p[0]) < 1.0) ++c;
        counts.push_back(c);
    }
    const GofResult g = poisson_chi_square(counts, params.rho * window.volume());
    INFO("chi-square p ", g.p_value);
    CHECK(g.p_value >= 0.01);
}

TEST_CASE("trajectory bookkeeping") {
    const ChainParams params = make_params(kCount, 9.0);
    RandomStream rng(7);
    Configuration mu = sample_poisson(params.torus, 1.0, rng);
    const std::size_t n0 = mu.size();

    const Trajectory none = simulate(mu, params, {}, rng);
    CHECK(none.snapshots.empty());
    CHECK(none.initial.size() == n0);

    const Trajectory traj = simulate(mu, params, {0.25, 0.5, 1.0}, rng);
    REQUIRE(traj.snapshots.size() == 3);
    double prev = -1.0;
    for (const auto& [time, snap] : traj.snapshots) {
        CHECK(time > prev);
        prev = time;
        CHECK(snap.size() == n0); // particle count conserved on the torus
        for (const auto& p : snap.points()) CHECK(params.torus.contains(p));
    }
    CHECK_THROWS_AS(simulate(mu, params, {1.0, 0.5}, rng), std::invalid_argument);
}

TEST_CASE("distinct seeds give uncorrelated trajectories") {
    const ChainParams params = make_params(kIdentity, 9.0);
    const GridFunction f = gaussian_bump(params.torus, 144, 0.0, 1.0);
    RandomStream rng(11);
    std::vector<double> a, b;
    for (int r = 0; r < 400; ++r) {
        RandomStream ra = RandomStream(1000).split(r);
        RandomStream rb = RandomStream(2000).split(r);
        Configuration ma = sample_poisson(params.torus, 1.0, ra);
        Configuration mb = sample_poisson(params.torus, 1.0, rb);
        const Trajectory ta = simulate(ma, params, {0.5}, ra);
        const Trajectory tb = simulate(mb, params, {0.5}, rb);
        a.push_back(fluctuation_field(ta.snapshots[0].second, f, 1.0));
        b.push_back(fluctuation_field(tb.snapshots[0].second, f, 1.0));
    }
    const CovarianceEstimate cov = covariance_of(a, b);
    CHECK(std::abs(cov.cov) < 3.0 * cov.std_error);
}

TEST_CASE("fluctuation field: centering, variance, rescaling") {
    const Domain base = Domain::torus(1, 9.0);
    const GridFunction f = gaussian_bump(base, 144, 1.0, 0.8);
    RandomStream rng(2024);

    for (double scale : {1.0, 3.0}) {
        const Domain big = Domain::torus(1, 9.0 * scale);
        RunningStats mean, var;
        for (int r = 0; r < 3000; ++r) {
            RandomStream rs = rng.split(static_cast<std::uint64_t>(scale * 10000) + r);
            const Configuration mu = sample_poisson(big, 1.0, rs);
            const double y = fluctuation_field(mu, f, 1.0, scale);
            mean.add(y);
            var.add(y * y);
        }
        INFO("scale ", scale);
        CHECK(std::abs(mean.mean()) < 3.0 * mean.std_error());
        const double target = f.inner(f); // rho ||f||^2
        CHECK(std::abs(var.mean() - target) < 3.0 * var.std_error());
    }
}

TEST_CASE("fluctuation of a constant profile is the count fluctuation") {
    const Domain base = Domain::torus(1, 9.0);
    const double c = 0.7;
    const GridFunction f = GridFunction::sampled(base, 32, [&](const Vec&) { return c; });
    RandomStream rng(5150);
    RunningStats var;
    const double scale = 2.0;
    const Domain big = Domain::torus(1, 18.0);
    for (int r = 0; r < 4000; ++r) {
        RandomStream rs = rng.split(r);
        const Configuration mu = sample_poisson(big, 1.0, rs);
        const double y = fluctuation_field(mu, f, 1.0, scale);
        var.add(y * y);
    }
    const double target = c * c * 9.0; // rho c^2 |torus| / scale^d * scale^d... = rho c^2 L
    CHECK(std::abs(var.mean() - target) < 3.0 * var.std_error());
}

TEST_CASE("equal-time estimate needs no dynamics and matches rho int fg") {
    const ChainParams params = make_params(kCount, 9.0);
    const GridFunction f = gaussian_bump(params.torus, 144, -1.0, 0.9);
    const GridFunction g = gaussian_bump(params.torus, 144, 1.5, 1.2);
    const HeatKernel hk(SymMatrix::isotropic(1, 1.0), 1);
    const CorrelationEstimate est =
        two_point_estimate(f, g, 0.4, 0.4, params, 1200, 88, hk);
    CHECK(est.prediction == doctest::Approx(f.inner(g)));
    CHECK(std::abs(est.discrepancy) < 3.0 * est.std_error);
}

TEST_CASE("identity chain matches the independent-motion prediction") {
    const ChainParams params = make_params(kIdentity, 12.0);
    const GridFunction f = gaussian_bump(params.torus, 192, -1.0, 0.8);
    const GridFunction g = gaussian_bump(params.torus, 192, 0.5, 1.0);
    const HeatKernel hk(SymMatrix::isotropic(1, 1.0), 1);
    const CorrelationEstimate est = two_point_estimate(f, g, 0.5, 0.0, params, 900, 17, hk);
    INFO("estimate ", est.estimate, " prediction ", est.prediction, " se ", est.std_error);
    CHECK(std::abs(est.discrepancy) < 3.0 * est.std_error);
}

TEST_CASE("stationarity: shifted time pairs agree within noise") {
    const ChainParams params = make_params(kCount, 9.0, 0.1);
    const GridFunction f = gaussian_bump(params.torus, 144, -1.0, 0.8);
    const GridFunction g = gaussian_bump(params.torus, 144, 1.0, 0.8);
    const HeatKernel hk(SymMatrix::isotropic(1, 1.3), 1);
    const CorrelationEstimate base = two_point_estimate(f, g, 0.5, 0.0, params, 900, 5, hk);
    const CorrelationEstimate shifted =
        two_point_estimate(f, g, 1.0, 0.5, params, 900, 6, hk);
    CHECK(std::abs(base.estimate - shifted.estimate) <
          3.0 * std::hypot(base.std_error, shifted.std_error));
}

TEST_CASE("symmetry of the stationary correlation in the test pair") {
    const ChainParams params = make_params(kCount, 9.0, 0.1);
    const GridFunction f = gaussian_bump(params.torus, 144, -1.0, 0.8);
    const GridFunction g = gaussian_bump(params.torus, 144, 1.2, 1.1);
    const HeatKernel hk(SymMatrix::isotropic(1, 1.3), 1);
    const CorrelationEstimate fg = two_point_estimate(f, g, 0.4, 0.0, params, 900, 9, hk);
    const CorrelationEstimate gf = two_point_estimate(g, f, 0.4, 0.0, params, 900, 10, hk);
    CHECK(std::abs(fg.estimate - gf.estimate) <
          3.0 * std::hypot(fg.std_error, gf.std_error));
}

TEST_CASE("halving dt leaves the estimate inside the combined band (count rule)") {
    const GridFunction f =
        gaussian_bump(Domain::torus(1, 9.0), 144, -1.0, 0.8);
    const GridFunction g = gaussian_bump(Domain::torus(1, 9.0), 144, 1.0, 0.8);
    const HeatKernel hk(SymMatrix::isotropic(1, 1.3), 1);
    const CorrelationEstimate coarse = two_point_estimate(
        f, g, 0.5, 0.0, make_params(kCount, 9.0, 0.1), 1000, 12, hk);
    const CorrelationEstimate fine = two_point_estimate(
        f, g, 0.5, 0.0, make_params(kCount, 9.0, 0.05), 1000, 13, hk);
    CHECK(std::abs(coarse.estimate - fine.estimate) <
          3.0 * std::hypot(coarse.std_error, fine.std_error));
}

TEST_CASE("semigroup difference vanishes for the identity rule") {
    const ChainParams params = make_params(kIdentity, 9.0);
    const GridFunction f = gaussian_bump(params.torus, 144, 0.0, 0.8);
    const HeatKernel hk(SymMatrix::isotropic(1, 1.0), 1);
    const SemigroupDiff diff = semigroup_diff(f, 0.5, params, 900, 42, hk);
    INFO("squared ", diff.squared, " se ", diff.squared_se);
    CHECK(std::abs(diff.squared) < 3.0 * diff.squared_se);
}

TEST_CASE("semigroup difference decays in time (count rule)") {
    const ChainParams params = make_params(kCount, 9.0, 0.1);
    const GridFunction f = gaussian_bump(params.torus, 144, 0.0, 0.8);
    // homogenized reference from a quick cell estimate would drift with m;
    // a mid-band isotropic reference keeps this a pure decay check
    const HeatKernel hk(SymMatrix::isotropic(1, 1.3), 1);
    const SemigroupDiff early = semigroup_diff(f, 0.5, params, 900, 77, hk);
    const SemigroupDiff late = semigroup_diff(f, 4.0, params, 900, 78, hk);
    INFO("early ", early.squared, " late ", late.squared);
    CHECK(late.squared < early.squared + 3.0 * std::hypot(early.squared_se, late.squared_se));
}

TEST_CASE("d=2 torus: count conserved and equal-time covariance matches") {
    ChainParams params;
    params.dt = 0.1;
    params.torus = Domain::torus(2, 6.0);
    params.model = kCount;
    params.rho = 0.5;
    const GridFunction f = GridFunction::sampled(params.torus, 48, [&](const Vec& x) {
        const Vec u = params.torus.displacement(x, vec2(1.0, -1.0));
        return std::exp(-(u[0] * u[0] + u[1] * u[1]));
    });
    RandomStream rng(2026);
    RunningStats cov;
    for (int r = 0; r < 400; ++r) {
        RandomStream rs = rng.split(r);
        Configuration mu = sample_poisson(params.torus, params.rho, rs);
        const std::size_t n0 = mu.size();
        const double y0 = fluctuation_field(mu, f, params.rho);
        for (int sweep = 0; sweep < 5; ++sweep) chain_sweep(mu, params, rs);
        CHECK(mu.size() == n0);
        const double yt = fluctuation_field(mu, f, params.rho);
        cov.add(y0 * yt);
        (void)yt;
    }
    // short-time autocorrelation stays close to the static variance
    const double target = params.rho * f.inner(f);
    CHECK(cov.mean() > 0.2 * target);
    CHECK(cov.mean() < 1.5 * target);
}

TEST_CASE("anisotropic rule in d=2: equilibrium counts survive many sweeps") {
    ChainParams params;
    params.dt = 0.1;
    params.torus = Domain::torus(2, 5.0);
    params.model = CoefficientModel(ModelKind::AnisotropicCount, 2.0);
    params.rho = 0.8;
    RandomStream rng(909);
    std::vector<std::uint64_t> counts;
    for (int r = 0; r < 400; ++r) {
        RandomStream rs = rng.split(r);
        Configuration mu = sample_poisson(params.torus, params.rho, rs);
        for (int sweep = 0; sweep < 60; ++sweep) chain_sweep(mu, params, rs);
        std::uint64_t c = 0;
        for (const auto& p : mu.points())
            if (std::abs(p[0]) < 1.0 && std::abs(p[1]) < 1.0) ++c;
        counts.push_back(c);
    }
    const GofResult g = poisson_chi_square(counts, params.rho * 4.0);
    INFO("chi-square p ", g.p_value);
    CHECK(g.p_value >= 0.01);
}

TEST_CASE("plain euler scheme runs but is flagged as a distinct scheme") {
    ChainParams params = make_params(kCount, 9.0);
    params.scheme = ChainScheme::PlainEuler;
    RandomStream rng(31);
    Configuration mu = sample_poisson(params.torus, 1.0, rng);
    const std::size_t n = mu.size();
    chain_sweep(mu, params, rng);
    CHECK(mu.size() == n);
}

TEST_SUITE_END();
