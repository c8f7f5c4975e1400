// Acceptance suite: exactly-solvable and structural checks at pinned
// tolerances. Prints one PASS/FAIL line per criterion and exits nonzero on
// any failure.

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <string>
#include <vector>

#include "bulkdiff/cell.hpp"
#include "bulkdiff/dynamics.hpp"
#include "bulkdiff/experiment.hpp"
#include "bulkdiff/greenkubo.hpp"
#include "bulkdiff/pde.hpp"
#include "bulkdiff/sector.hpp"

using namespace bulkdiff;

namespace {

int g_failed = 0;
std::uint64_t g_seed_offset = 0;

void report(int criterion, const std::string& name, bool pass, const std::string& detail) {
    std::printf("%s  criterion %d: %s%s%s\n", pass ? "PASS" : "FAIL", criterion,
                name.c_str(), detail.empty() ? "" : "  -- ", detail.c_str());
    std::fflush(stdout);
    if (!pass) ++g_failed;
}

std::string fmt(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.5g", v);
    return buf;
}

const CoefficientModel kIdentity(ModelKind::Identity, 1.0);
const CoefficientModel kCount(ModelKind::CountIndicator, 2.0);

CellProblemSpec spec_d1(int m, const CoefficientModel& model, std::uint64_t seed,
                        std::size_t samples) {
    CellProblemSpec s;
    s.cell = Domain::cube(1, m);
    s.rho = 1.0;
    s.model = model;
    s.direction = vec1(1.0);
    s.samples = samples;
    s.seed = seed + g_seed_offset;
    s.workers = 2;
    return s;
}

GridFunction torus_bump(const Domain& torus, int n, double center, double sigma) {
    return GridFunction::sampled(torus, n, [&](const Vec& x) {
        const double u = torus.displacement(x, vec1(center))[0];
        return std::exp(-u * u / (2.0 * sigma * sigma));
    });
}

// 1. flat-rule exactness: cell values, matrices, gap, transport bracket,
//    and the chain-versus-kernel two-point table
void criterion_identity_exactness() {
    bool pass = true;
    std::string detail;

    for (int m : {0, 1, 2}) {
        const CellSolution nu = solve_nu(spec_d1(m, kIdentity, 1001 + m, 2500));
        if (std::abs(nu.value - 0.5) > 3.0 * nu.std_error) {
            pass = false;
            detail += "nu(m=" + std::to_string(m) + ")=" + fmt(nu.value) + " ";
        }
    }

    {
        const AbarEstimate est = assemble_abar(spec_d1(1, kIdentity, 1010, 2500));
        if (std::abs(est.abar.matrix(0, 0) - 1.0) > 3.0 * est.abar.std_err(0, 0)) {
            pass = false;
            detail += "abar=" + fmt(est.abar.matrix(0, 0)) + " ";
        }
        if (std::abs(est.gaps[0].j) > 3.0 * est.gaps[0].j_std_error) {
            pass = false;
            detail += "gap=" + fmt(est.gaps[0].j) + " ";
        }
    }

    {
        CellProblemSpec s2 = spec_d1(1, kIdentity, 1011, 1200);
        s2.cell = Domain::cube(2, 1);
        s2.direction = vec2(1.0, 0.0);
        const AbarEstimate est2 = assemble_abar(s2);
        for (int i = 0; i < 2 && pass; ++i)
            for (int j = 0; j < 2; ++j) {
                const double target = i == j ? 1.0 : 0.0;
                if (std::abs(est2.abar.matrix(i, j) - target) >
                    3.0 * est2.abar.std_err(i, j) + 1e-9) {
                    pass = false;
                    detail += "abar2d(" + std::to_string(i) + std::to_string(j) +
                              ")=" + fmt(est2.abar.matrix(i, j)) + " ";
                    break;
                }
            }
    }

    {
        const CellProblemSpec s = spec_d1(1, kIdentity, 1012, 2500);
        const CellSolution ref = solve_nu(s);
        for (double lam : {0.0, 0.1, 1.0, 10.0}) {
            const GKReport rep = gk_bracket(s, lam, ref.value, ref.std_error, 1.0, 10000);
            if (std::abs(rep.bracket) > 3.0 * rep.bracket_se) {
                pass = false;
                detail += "bracket(l=" + fmt(lam) + ")=" + fmt(rep.bracket) + " ";
            }
        }
    }

    {
        ChainParams params;
        params.dt = 0.05;
        params.torus = Domain::torus(1, 27.0);
        params.model = kIdentity;
        params.rho = 1.0;
        const GridFunction f = torus_bump(params.torus, 432, -4.0, 1.0);
        const GridFunction g = torus_bump(params.torus, 432, 3.0, 1.3);
        const HeatKernel hk(SymMatrix::isotropic(1, 1.0), 1);
        for (double gap : {0.5, 1.0}) {
            const CorrelationEstimate est = two_point_estimate(
                f, g, gap, 0.0, params, 2000,
                1013 + static_cast<int>(10 * gap) + g_seed_offset, hk, 2);
            detail += "z(dt=" + fmt(gap) + ")=" + fmt(est.discrepancy / est.std_error) + " ";
            if (std::abs(est.discrepancy) > 3.0 * est.std_error) pass = false;
        }
    }

    report(1, "flat-rule exactness (values 1/2, unit matrices, zero gap and bracket, "
              "kernel-matched two-point)",
           pass, detail);
}

// 2. structural order for the count rule: matrix bounds, scale monotonicity,
//    decaying duality gap
void criterion_structural_order() {
    bool pass = true;
    std::string detail;

    // samples scale with the cell so the optimization noise-energy bias
    // stays uniform across m
    std::vector<AbarEstimate> table;
    for (int m : {0, 1, 2, 3}) {
        table.push_back(
            assemble_abar(spec_d1(m, kCount, 2001, 3500 * static_cast<std::size_t>(m + 1))));
    }

    double prev_nu = 1e300, prev_se = 0.0;
    for (std::size_t i = 0; i < table.size(); ++i) {
        const double nu = table[i].nu_values[0];
        const double se = table[i].nu_std_errors[0];
        const double astar = table[i].abar_star.matrix(0, 0);
        const double astar_se = table[i].abar_star.std_err(0, 0);
        const double abar = table[i].abar.matrix(0, 0);
        const double abar_se = table[i].abar.std_err(0, 0);
        if (astar < 1.0 - 3.0 * astar_se) {
            pass = false;
            detail += "astar(m=" + std::to_string(i) + ")=" + fmt(astar) + " ";
        }
        if (abar > 2.0 + 3.0 * abar_se) {
            pass = false;
            detail += "abar(m=" + std::to_string(i) + ")=" + fmt(abar) + " ";
        }
        if (nu > prev_nu + 3.0 * std::hypot(se, prev_se)) {
            pass = false;
            detail += "nu not decreasing at m=" + std::to_string(i) + " ";
        }
        prev_nu = nu;
        prev_se = se;
    }

    // gap log-slope over the first three scales, quadratic-form route.
    // NOTE: this clause fails by construction of the admissible classes; the
    // measured gap is dominated by the class limit, which cannot decay with
    // the scale (see the decisions record shipped alongside the review).
    std::vector<double> xs, ys;
    std::string jtable = "J(n)=";
    for (int n : {0, 1, 2}) {
        const double j = table[static_cast<std::size_t>(n)].gaps[0].j_quadratic;
        jtable += fmt(j) + (n < 2 ? "," : " ");
        if (j <= 0.0) {
            pass = false;
            detail += "gap(n=" + std::to_string(n) + ") nonpositive ";
            break;
        }
        xs.push_back(n);
        ys.push_back(std::log(j));
    }
    if (xs.size() == 3) {
        const LineFit fit = fit_line(xs, ys);
        const bool bounds_ok = detail.empty();
        if (bounds_ok) detail += "bounds and monotonicity ok; ";
        if (!(fit.slope < 0.0)) {
            pass = false;
            detail += "gap slope clause red (class-limited, see decisions record): ";
        }
        detail += jtable + "log-slope=" + fmt(fit.slope);
    }

    report(2, "structural order for the count rule (matrix bounds, scale "
              "monotonicity, decaying gap)",
           pass, detail);
}

// 3. oracle equivalence: truncated feature solve against the grid oracle
void criterion_oracle_equivalence() {
    const Domain cell = Domain::box(1, 3.0);
    const SectorOracleResult oracle = sector_cell_oracle(cell, kCount, 1.0, 1.0, 2, 96);
    CellProblemSpec spec = spec_d1(1, kCount, 3001, 20000);
    spec.max_points = 2;
    const CellSolution feat = solve_nu(spec);
    const double rel = std::abs(feat.value - oracle.value) / oracle.value;
    const bool pass = rel < 0.05 && feat.value >= oracle.value - 3.0 * feat.std_error;
    report(3, "oracle equivalence of the truncated cell problem",
           pass, "oracle=" + fmt(oracle.value) + " feature=" + fmt(feat.value) +
                     " rel=" + fmt(100.0 * rel) + "%");
}

// 4. equal-time white noise: E[Y(f) Y(g)] = rho int f g
void criterion_white_noise() {
    const Domain torus = Domain::torus(1, 9.0);
    const double rho = 1.0;
    struct Pair {
        double c1, s1, c2, s2;
    };
    const std::vector<Pair> fixtures = {{0.0, 0.8, 0.0, 0.8},
                                        {-2.0, 0.6, 2.0, 0.9},
                                        {1.0, 1.2, 1.5, 0.7},
                                        {-3.0, 1.0, -2.5, 1.0},
                                        {0.5, 0.5, -0.5, 1.4}};
    bool pass = true;
    std::string detail;
    RandomStream rng(4001 + g_seed_offset);
    int fi = 0;
    for (const auto& fx : fixtures) {
        const GridFunction f = torus_bump(torus, 144, fx.c1, fx.s1);
        const GridFunction g = torus_bump(torus, 144, fx.c2, fx.s2);
        RunningStats acc;
        for (int r = 0; r < 3000; ++r) {
            RandomStream rs = rng.split(static_cast<std::uint64_t>(fi) * 100000 + r);
            const Configuration mu = sample_poisson(torus, rho, rs);
            acc.add(fluctuation_field(mu, f, rho) * fluctuation_field(mu, g, rho));
        }
        const double target = rho * f.inner(g);
        if (std::abs(acc.mean() - target) > 3.0 * acc.std_error()) {
            pass = false;
            detail += "fixture " + std::to_string(fi) + ": " + fmt(acc.mean()) + " vs " +
                      fmt(target) + " ";
        }
        ++fi;
    }
    report(4, "equal-time white-noise covariance", pass, detail);
}

// 5. kernel and solver determinism: normalization, composition, second-order
//    convergence, parameter formulas
void criterion_kernel_pde() {
    bool pass = true;
    std::string detail;

    const HeatKernel hk(SymMatrix::isotropic(1, 1.0), 1);
    {
        double mass = 0.0;
        const int q = 60000;
        for (int i = 0; i < q; ++i) {
            const double x = -24.0 + 48.0 * (i + 0.5) / q;
            mass += hk.density(1.3, vec1(x)) * 48.0 / q;
        }
        if (std::abs(mass - 1.0) > 1e-6) {
            pass = false;
            detail += "mass=" + fmt(mass) + " ";
        }
    }
    {
        const Domain torus = Domain::torus(1, 12.0);
        GridFunction g = GridFunction::sampled(torus, 240, [](const Vec& x) {
            return std::exp(-2.0 * x[0] * x[0]) + 0.2 * std::sin(2.0 * M_PI * x[0] / 12.0);
        });
        const auto two = apply_heat_semigroup(apply_heat_semigroup(g, 0.45, hk).value,
                                              0.3, hk);
        const auto one = apply_heat_semigroup(g, 0.75, hk);
        double err = 0.0;
        for (int i = 0; i < 240; ++i)
            err = std::max(err, std::abs(two.value.at(i) - one.value.at(i)));
        if (err > 1e-6) {
            pass = false;
            detail += "composition=" + fmt(err) + " ";
        }
    }
    {
        const Domain box = Domain::box(1, 3.0);
        const double k = M_PI / 3.0;
        auto exact = [&](const Vec& x) { return std::sin(k * (x[0] + 1.5)); };
        double errs[2];
        int idx = 0;
        for (int n : {48, 96}) {
            const GridFunction f = GridFunction::sampled(
                box, n, [&](const Vec& x) { return k * k * exact(x); }, true);
            const DirichletSolution sol =
                solve_homog_dirichlet(f, SymMatrix::isotropic(1, 1.0));
            double e = 0.0;
            for (int i = 0; i <= n; ++i)
                e = std::max(e, std::abs(sol.u.at(i) - exact(sol.u.node(i))));
            errs[idx++] = e;
        }
        if (!(errs[0] / errs[1] > 3.2 && errs[0] / errs[1] < 4.8)) {
            pass = false;
            detail += "convergence ratio=" + fmt(errs[0] / errs[1]) + " ";
        }
    }
    {
        const ParabolicParameters p1 = parabolic_parameters(1.0, 0.8);
        const ParabolicParameters p2 = parabolic_parameters(std::pow(3.0, 16.0), 0.8);
        const ParabolicParameters p3 = parabolic_parameters(std::pow(3.0, 32.0), 0.8);
        if (!(p1.tau == 1.0 && p1.n == 0 &&
              std::abs(p2.tau - std::pow(3.0, 12.0)) < 1e-3 && p2.n == 1 && p3.n == 2)) {
            pass = false;
            detail += "parabolic parameters ";
        }
    }
    report(5, "kernel normalization and composition, second-order source solver, "
              "parabolic parameter formulas",
           pass, detail);
}

// 6. reversibility certificate and step-size robustness
void criterion_reversibility() {
    bool pass = true;
    std::string detail;

    const double defect = detailed_balance_defect(8, 0.05, kCount);
    if (!(defect < 1e-10)) {
        pass = false;
        detail += "defect=" + fmt(defect) + " ";
    }

    const Domain torus = Domain::torus(1, 9.0);
    const GridFunction f = torus_bump(torus, 144, -1.0, 0.8);
    const GridFunction g = torus_bump(torus, 144, 1.0, 0.9);
    const HeatKernel hk(SymMatrix::isotropic(1, 1.3), 1);
    auto estimate = [&](const CoefficientModel& model, double dt, std::uint64_t seed) {
        ChainParams params;
        params.dt = dt;
        params.torus = torus;
        params.model = model;
        params.rho = 1.0;
        return two_point_estimate(f, g, 0.5, 0.0, params, 1200, seed, hk, 2);
    };
    for (const auto& model : {kIdentity, kCount}) {
        const CorrelationEstimate coarse = estimate(model, 0.1, 6001 + g_seed_offset);
        const CorrelationEstimate fine = estimate(model, 0.05, 6002 + g_seed_offset);
        if (std::abs(coarse.estimate - fine.estimate) >
            3.0 * std::hypot(coarse.std_error, fine.std_error)) {
            pass = false;
            detail += std::string("dt drift (") + to_string(model.kind()) + ")=" +
                      fmt(coarse.estimate - fine.estimate) + " ";
        }
    }
    report(6, "reversibility certificate and step-size robustness", pass, detail);
}

// 7. reported parameter formulas
void criterion_formulas() {
    bool pass = true;
    std::string detail;
    for (double alpha : {0.3, 0.8, 1.7}) {
        if (parabolic_parameters(2.0, alpha).beta != std::min(alpha, 1.0) / 16.0) {
            pass = false;
            detail += "beta(alpha=" + fmt(alpha) + ") ";
        }
        for (int m : {2, 4, 5}) {
            if (elliptic_mesoscale(m, alpha) !=
                static_cast<int>(std::floor(m / (1.0 + alpha)))) {
                pass = false;
                detail += "mesoscale(m=" + std::to_string(m) + ") ";
            }
        }
        const int m = 2;
        const double t2 = gk_regime_threshold(alpha, m);
        if (std::abs(t2 - std::pow(3.0, -2.0 * (1.0 + alpha) * m)) > 1e-15) {
            pass = false;
            detail += "threshold ";
        }
        if (!(gk_regime(1.0, alpha, m) == "constant" &&
              gk_regime(0.5 * (1.0 + t2), alpha, m) == "lambda^(alpha/(2(1+alpha)))" &&
              gk_regime(0.5 * t2, alpha, m) == "3^(-alpha*m)")) {
            pass = false;
            detail += "labels ";
        }
    }
    report(7, "reported rate and mesoscale formulas, regime thresholds and labels", pass,
           detail);
}

// 8. cross-route consistency: transport reconstruction against the
//    variational value at lambda zero
void criterion_cross_route() {
    const CellProblemSpec spec = spec_d1(2, kCount, 8001, 6000);
    const CellSolution nu = solve_nu(spec);
    const GKReport rep = gk_bracket(spec, 0.0, nu.value, nu.std_error, 1.0, 40000);
    const double diff = rep.reconstructed - nu.value;
    const double band = 3.0 * std::hypot(rep.reconstructed_se, nu.std_error);
    const bool pass = std::abs(diff) < band;
    report(8, "cross-route consistency of the transport identity at lambda zero", pass,
           "reconstructed=" + fmt(rep.reconstructed) + " variational=" + fmt(nu.value) +
               " diff=" + fmt(diff) + " band=" + fmt(band));
}

} // namespace

int main(int argc, char** argv) {
    if (argc > 1) g_seed_offset = static_cast<std::uint64_t>(std::atoll(argv[1]));
    std::printf("acceptance suite (tolerances pinned in source)%s\n",
                g_seed_offset ? (" [seed offset " + std::to_string(g_seed_offset) + "]").c_str()
                              : "");
    criterion_identity_exactness();
    criterion_structural_order();
    criterion_oracle_equivalence();
    criterion_white_noise();
    criterion_kernel_pde();
    criterion_reversibility();
    criterion_formulas();
    criterion_cross_route();
    if (g_failed == 0) {
        std::printf("acceptance: all criteria passed\n");
        return 0;
    }
    std::printf("acceptance: %d criteria FAILED\n", g_failed);
    return 1;
}
