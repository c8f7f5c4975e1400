#include "doctest.h"

#include <algorithm>
#include <cmath>

#include "bulkdiff/energy.hpp"
#include "bulkdiff/functional.hpp"
#include "bulkdiff/sector.hpp"

using namespace bulkdiff;

TEST_SUITE_BEGIN("function-space");

namespace {

std::shared_ptr<FeatureBasis> make_basis(double side, bool zero_boundary,
                                         double spacing = 0.25) {
    BasisSpec spec;
    spec.spacing = spacing;
    spec.zero_boundary = zero_boundary;
    return std::make_shared<FeatureBasis>(Domain::box(1, side), spec);
}

} // namespace

TEST_CASE("affine statistic sums p.x over particles in the cell") {
    auto basis = std::make_shared<FeatureBasis>(Domain::box(1, 3.0, vec1(1.5)), BasisSpec{});
    const FeatureFunctional lp = FeatureFunctional::affine(basis, vec1(1.0));
    Configuration mu(Domain::box(1, 8.0, vec1(1.5)));
    mu.add(vec1(0.5));
    mu.add(vec1(1.5));
    CHECK(lp.evaluate(mu) == doctest::Approx(2.0));
    // particle outside the cell does not contribute
    mu.add(vec1(3.5));
    CHECK(lp.evaluate(mu) == doctest::Approx(2.0));
}

TEST_CASE("zero coefficients evaluate to zero, evaluation is linear in c") {
    auto basis = make_basis(3.0, true);
    RandomStream rng(11);
    const Configuration mu = sample_poisson(Domain::box(1, 5.0), 1.0, rng);
    CHECK(FeatureFunctional::zero(basis).evaluate(mu) == 0.0);

    std::vector<double> c(static_cast<std::size_t>(basis->size()), 0.0);
    c[static_cast<std::size_t>(basis->size() / 2)] = 1.0;
    const FeatureFunctional f1(basis, c);
    for (auto& v : c) v *= 3.5;
    const FeatureFunctional f2(basis, c);
    CHECK(f2.evaluate(mu) == doctest::Approx(3.5 * f1.evaluate(mu)).epsilon(1e-14));
}

TEST_CASE("cubic spline lattice reproduces quadratics: gradient of x^2 is 2x") {
    BasisSpec spec;
    spec.spacing = 0.25;
    spec.zero_boundary = false;
    spec.interactions = false;
    auto basis = std::make_shared<FeatureBasis>(Domain::box(1, 3.0), spec);
    std::vector<double> c(static_cast<std::size_t>(basis->size()));
    for (int j = 0; j < basis->size(); ++j) {
        const double cj = basis->feature(j).center[0];
        c[static_cast<std::size_t>(j)] = cj * cj;
    }
    const FeatureFunctional f(basis, c);
    Configuration mu(Domain::box(1, 5.0));
    mu.add(vec1(0.5));
    const Vec g = f.particle_gradient(mu, 0);
    CHECK(g[0] == doctest::Approx(1.0).epsilon(1e-10));
    // value is x^2 plus the constant spline moment
    const double moment = f.evaluate(mu) - 0.25;
    Configuration mu2(Domain::box(1, 5.0));
    mu2.add(vec1(-0.8));
    CHECK(f.evaluate(mu2) == doctest::Approx(0.64 + moment).epsilon(1e-10));
}

TEST_CASE("constant-in-mu functional has zero gradient") {
    auto basis = make_basis(3.0, true);
    const FeatureFunctional f = FeatureFunctional::zero(basis);
    Configuration mu(Domain::box(1, 5.0));
    mu.add(vec1(0.2));
    const Vec g = f.particle_gradient(mu, 0);
    CHECK(g[0] == 0.0);
}

TEST_CASE("analytic particle gradient matches the displacement finite difference") {
    RandomStream rng(2025);
    for (int d = 1; d <= 2; ++d) {
        BasisSpec spec;
        spec.spacing = d == 1 ? 0.25 : 0.5;
        spec.zero_boundary = (d == 1);
        auto basis = std::make_shared<FeatureBasis>(Domain::box(d, 3.0), spec);
        const Domain window = Domain::box(d, 5.0);

        int done = 0;
        for (int trial = 0; done < 50 && trial < 500; ++trial) {
            RandomStream rs = rng.split(static_cast<std::uint64_t>(1000 * d + trial));
            Configuration mu = sample_poisson(window, 0.8, rs);
            if (mu.empty()) continue;
            // keep pair distances away from the count-ball radii so the
            // piecewise-constant count factor is locally constant
            bool near_jump = false;
            for (std::size_t i = 0; i < mu.size() && !near_jump; ++i)
                for (std::size_t j = i + 1; j < mu.size() && !near_jump; ++j) {
                    const double dist = window.distance(mu.point(i), mu.point(j));
                    for (double r : spec.radii)
                        if (std::abs(dist - r) < 1e-3) near_jump = true;
                }
            if (near_jump) continue;

            std::vector<double> c(static_cast<std::size_t>(basis->size()));
            for (auto& v : c) v = rs.uniform(-1.0, 1.0);
            const FeatureFunctional f(basis, c, vec1(0.7));
            const std::size_t pick = rs.next_u64() % mu.size();
            const Vec ga = f.particle_gradient(mu, pick);
            const Vec gf = f.particle_gradient_fd(mu, pick);
            for (int k = 0; k < d; ++k) {
                const double scale = std::max(1.0, std::abs(ga[k]));
                CHECK(std::abs(ga[k] - gf[k]) / scale < 1e-6);
            }
            ++done;
        }
        CHECK(done == 50);
    }
}

TEST_CASE("particle gradient rejects non-particles") {
    auto basis = make_basis(3.0, true);
    const FeatureFunctional f = FeatureFunctional::zero(basis);
    Configuration mu(Domain::box(1, 5.0));
    mu.add(vec1(0.0));
    CHECK_THROWS_AS(f.particle_gradient(mu, 5), std::invalid_argument);
}

TEST_CASE("dirichlet energy of the affine statistic under the identity rule is 1/2") {
    const Domain cell = Domain::cube(1, 1);
    auto basis = std::make_shared<FeatureBasis>(cell, BasisSpec{});
    const FeatureFunctional lp = FeatureFunctional::affine(basis, vec1(1.0));
    const CoefficientModel id(ModelKind::Identity, 1.0);
    const EnergyEstimate e =
        dirichlet_energy(lp, lp, id, cell, 1.0, 2000, RandomStream(909));
    CHECK(std::abs(e.value - 0.5) < 3.0 * e.std_error);
}

TEST_CASE("dirichlet energy is exactly zero against the zero functional") {
    const Domain cell = Domain::cube(1, 1);
    auto basis = make_basis(3.0, true);
    const FeatureFunctional lp = FeatureFunctional::affine(basis, vec1(1.0));
    const FeatureFunctional z = FeatureFunctional::zero(basis);
    const CoefficientModel id(ModelKind::Identity, 1.0);
    const EnergyEstimate e = dirichlet_energy(lp, z, id, cell, 1.0, 500, RandomStream(1));
    CHECK(e.value == 0.0);
    CHECK(e.std_error == 0.0);
}

TEST_CASE("dirichlet energy of the affine statistic, count-indicator rule: analytic value") {
    // (rho|U|)^{-1} E int_U 1/2 a dmu = 1/2 (1 + (L-1)(1 - exp(-2 rho)))
    const Domain cell = Domain::box(1, 3.0);
    auto basis = std::make_shared<FeatureBasis>(cell, BasisSpec{});
    const FeatureFunctional lp = FeatureFunctional::affine(basis, vec1(1.0));
    const CoefficientModel ci(ModelKind::CountIndicator, 2.0);
    const EnergyEstimate e =
        dirichlet_energy(lp, lp, ci, cell, 1.0, 6000, RandomStream(7777));
    const double expected = 0.5 * (2.0 - std::exp(-2.0));
    CHECK(std::abs(e.value - expected) < 3.0 * e.std_error);
}

TEST_CASE("dirichlet energy is bilinear on a shared sample set") {
    const Domain cell = Domain::box(1, 3.0);
    auto basis = make_basis(3.0, true);
    RandomStream rs(31337);
    std::vector<double> ca(static_cast<std::size_t>(basis->size()));
    std::vector<double> cb(static_cast<std::size_t>(basis->size()));
    for (auto& v : ca) v = rs.uniform(-1, 1);
    for (auto& v : cb) v = rs.uniform(-1, 1);
    const double alpha = 1.7, beta = -0.6;
    std::vector<double> cc(ca);
    for (std::size_t i = 0; i < cc.size(); ++i) cc[i] = alpha * ca[i] + beta * cb[i];
    const FeatureFunctional f(basis, ca), g(basis, cb), fg(basis, cc);
    const FeatureFunctional h = FeatureFunctional::affine(basis, vec1(1.0));
    const CoefficientModel ci(ModelKind::CountIndicator, 2.0);
    const RandomStream shared(5150);
    const double lhs = dirichlet_energy(fg, h, ci, cell, 1.0, 200, shared).value;
    const double rhs = alpha * dirichlet_energy(f, h, ci, cell, 1.0, 200, shared).value +
                       beta * dirichlet_energy(g, h, ci, cell, 1.0, 200, shared).value;
    CHECK(lhs == doctest::Approx(rhs).epsilon(1e-12));
}

TEST_CASE("norms: zero functional") {
    auto basis = make_basis(3.0, true);
    const H1Norms n =
        h1_norms(FeatureFunctional::zero(basis), Domain::box(1, 3.0), 1.0, 200, RandomStream(2));
    CHECK(n.l2 == 0.0);
    CHECK(n.h1 == 0.0);
    CHECK(n.normalized == 0.0);
}

TEST_CASE("norms: variance of a linear statistic is rho ||g||^2") {
    BasisSpec spec;
    spec.spacing = 0.25;
    spec.zero_boundary = true;
    spec.interactions = false;
    const Domain cell = Domain::box(1, 3.0);
    auto basis = std::make_shared<FeatureBasis>(cell, spec);
    std::vector<double> c(static_cast<std::size_t>(basis->size()), 0.0);
    const int mid = basis->size() / 2;
    c[static_cast<std::size_t>(mid)] = 1.0;
    const FeatureFunctional f(basis, c);
    const double rho = 1.3;
    const H1Norms n = h1_norms(f, cell, rho, 30000, RandomStream(808));

    // ||phi||^2 by quadrature of the bump profile
    const double w = basis->feature(mid).width;
    double norm2 = 0.0;
    const int q = 4000;
    for (int i = 0; i < q; ++i) {
        const double t = -2.0 + 4.0 * (i + 0.5) / q;
        norm2 += cubic_bspline(t) * cubic_bspline(t) * (4.0 / q) * w;
    }
    const double tol = std::max(3.0 * n.variance * std::sqrt(2.0 / 30000.0),
                                0.01 * rho * norm2);
    CHECK(std::abs(n.variance - rho * norm2) < tol);
}

TEST_CASE("norms: centered affine statistic matches the closed-form moments") {
    const Domain cell = Domain::box(1, 3.0);
    auto basis = std::make_shared<FeatureBasis>(cell, BasisSpec{});
    const FeatureFunctional lp = FeatureFunctional::affine(basis, vec1(1.0));
    const double rho = 1.0;
    const H1Norms n = h1_norms(lp, cell, rho, 30000, RandomStream(515));
    // Var = rho int x^2 = 2.25, grad energy = rho |U| = 3
    CHECK(n.variance == doctest::Approx(2.25).epsilon(0.05));
    CHECK(n.grad_energy == doctest::Approx(3.0).epsilon(0.05));
    const double expected = std::sqrt(std::pow(3.0, -2.0) * 2.25 + 3.0);
    CHECK(n.normalized_centered == doctest::Approx(expected).epsilon(0.03));
}

TEST_CASE("poincare ratio: degenerate, positive, and scale-invariant cases") {
    const Domain cell = Domain::box(1, 3.0);
    auto basis = make_basis(3.0, true);
    const double nan_ratio =
        poincare_ratio(FeatureFunctional::zero(basis), cell, 1.0, 300, RandomStream(3));
    CHECK(std::isnan(nan_ratio));

    BasisSpec spec;
    spec.spacing = 0.25;
    spec.interactions = false;
    auto b1 = std::make_shared<FeatureBasis>(cell, spec);
    std::vector<double> c(static_cast<std::size_t>(b1->size()), 0.0);
    c[static_cast<std::size_t>(b1->size() / 2)] = 1.0;
    const FeatureFunctional f(b1, c);
    const double ratio = poincare_ratio(f, cell, 1.0, 20000, RandomStream(4));
    CHECK(ratio > 0.0);
    CHECK(ratio < 10.0);

    // rescale the cell by 3 and the bump with it
    const Domain cell3 = Domain::box(1, 9.0);
    BasisSpec spec3;
    spec3.spacing = 0.75;
    spec3.interactions = false;
    auto b3 = std::make_shared<FeatureBasis>(cell3, spec3);
    std::vector<double> c3(static_cast<std::size_t>(b3->size()), 0.0);
    c3[static_cast<std::size_t>(b3->size() / 2)] = 1.0;
    const FeatureFunctional f3(b3, c3);
    const double ratio3 = poincare_ratio(f3, cell3, 1.0, 20000, RandomStream(4));
    CHECK(ratio3 == doctest::Approx(ratio).epsilon(0.2));
}

TEST_CASE("zero-boundary functionals are cell-measurable and vanish on empty cells") {
    auto basis = make_basis(3.0, true);
    RandomStream rs(606);
    std::vector<double> c(static_cast<std::size_t>(basis->size()));
    for (auto& v : c) v = rs.uniform(-1, 1);
    const FeatureFunctional f(basis, c);

    const Domain window = Domain::box(1, 5.0);
    Configuration outside_only(window);
    outside_only.add(vec1(1.9));
    outside_only.add(vec1(-2.2));
    CHECK(f.evaluate(outside_only) == 0.0);

    for (int trial = 0; trial < 20; ++trial) {
        RandomStream rt = rs.split(trial);
        Configuration mu = sample_poisson(window, 1.0, rt);
        const double before = f.evaluate(mu);
        Configuration edited = mu;
        edited.add(vec1(rt.uniform(1.55, 2.45)));
        edited.add(vec1(rt.uniform(-2.45, -1.55)));
        CHECK(f.evaluate(edited) == doctest::Approx(before).epsilon(1e-14));
    }
}

TEST_CASE("sector projection agrees with direct evaluation at O(h^2)") {
    const Domain cell = Domain::box(1, 3.0);
    BasisSpec spec;
    spec.spacing = 0.25;
    spec.zero_boundary = true;
    auto basis = std::make_shared<FeatureBasis>(cell, spec);
    RandomStream rs(7102);
    std::vector<double> c(static_cast<std::size_t>(basis->size()));
    for (auto& v : c) v = rs.uniform(-1, 1);
    const FeatureFunctional f(basis, c);

    auto max_err = [&](int n) {
        const SectorGridFunctional proj = SectorGridFunctional::project(f, cell, 2, n);
        double err = 0.0;
        int used = 0;
        for (int trial = 0; used < 200 && trial < 2000; ++trial) {
            RandomStream rt = rs.split(10000 + trial);
            Configuration mu(cell.padded(1.0));
            const int npts = static_cast<int>(rt.next_u64() % 3);
            for (int i = 0; i < npts; ++i) mu.add(vec1(rt.uniform(-1.45, 1.45)));
            if (mu.size() == 2) {
                const double dist = std::abs(mu.point(0)[0] - mu.point(1)[0]);
                bool near = false;
                for (double r : spec.radii)
                    if (std::abs(dist - r) < 4.0 * 3.0 / n) near = true;
                if (near) continue;
            }
            err = std::max(err, std::abs(proj.evaluate(mu) - f.evaluate(mu)));
            ++used;
        }
        return err;
    };

    const double e64 = max_err(64);
    const double e128 = max_err(128);
    CHECK(e64 < 0.05);
    CHECK(e128 < e64);
}

TEST_CASE("evaluation and gradients are permutation invariant") {
    auto basis = make_basis(3.0, true);
    RandomStream rs(4242);
    std::vector<double> c(static_cast<std::size_t>(basis->size()));
    for (auto& v : c) v = rs.uniform(-1, 1);
    const FeatureFunctional f(basis, c, vec1(0.3));
    const Domain window = Domain::box(1, 5.0);
    Configuration mu = sample_poisson(window, 1.5, rs);
    REQUIRE(mu.size() >= 2);
    auto pts = mu.points();
    std::reverse(pts.begin(), pts.end());
    const Configuration rev(window, pts);
    CHECK(rev.size() == mu.size());
    CHECK(f.evaluate(rev) == doctest::Approx(f.evaluate(mu)).epsilon(1e-14));
    const Vec g1 = f.particle_gradient(mu, 0);
    const Vec g2 = f.particle_gradient(rev, rev.size() - 1);
    CHECK(g1[0] == doctest::Approx(g2[0]).epsilon(1e-14));
}

TEST_CASE("functional json round trip") {
    const Domain cell = Domain::box(1, 3.0);
    BasisSpec spec;
    spec.spacing = 0.25;
    spec.zero_boundary = true;
    auto basis = std::make_shared<FeatureBasis>(cell, spec);
    RandomStream rs(99);
    std::vector<double> c(static_cast<std::size_t>(basis->size()));
    for (auto& v : c) v = rs.uniform(-1, 1);
    const FeatureFunctional f(basis, c, vec1(0.8));
    const FeatureFunctional back = FeatureFunctional::from_json(f.to_json());
    const Configuration mu = sample_poisson(Domain::box(1, 5.0), 1.0, rs);
    CHECK(back.evaluate(mu) == doctest::Approx(f.evaluate(mu)).epsilon(1e-14));
    CHECK(back.basis().size() == basis->size());
}

TEST_CASE("sector overflow is reported distinctly") {
    const Domain cell = Domain::box(1, 3.0);
    SectorGridFunctional g(cell, 2, 16);
    Configuration mu(cell.padded(1.0));
    mu.add(vec1(0.0));
    mu.add(vec1(0.5));
    mu.add(vec1(-0.5));
    CHECK_THROWS_AS(g.evaluate(mu), SectorOverflow);
    mu = Configuration(cell.padded(1.0));
    mu.add(vec1(0.0));
    mu.add(vec1(1.9)); // outside the cell: ignored
    mu.add(vec1(0.3));
    CHECK_NOTHROW(g.evaluate(mu));
}

TEST_SUITE_END();
