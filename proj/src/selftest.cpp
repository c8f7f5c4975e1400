#include <cmath>
#include <functional>
#include <ostream>
#include <vector>

#include "bulkdiff/dynamics.hpp"
#include "bulkdiff/experiment.hpp"
#include "bulkdiff/greenkubo.hpp"
#include "bulkdiff/pde.hpp"

namespace bulkdiff {

AuditResult ellipticity_audit(const CoefficientModel& model, int trials, std::uint64_t seed) {
    AuditResult res;
    res.invariant = "uniform-ellipticity";
    RandomStream rng(seed);
    for (int t = 0; t < trials; ++t) {
        RandomStream rs = rng.split(t);
        const int d = 1 + static_cast<int>(rs.next_u64() % 2);
        const Domain u = Domain::box(d, 4.0);
        const Configuration mu = sample_poisson(u, 1.5, rs);
        Vec xi;
        double norm = 0.0;
        for (int k = 0; k < d; ++k) {
            xi[k] = rs.normal();
            norm += xi[k] * xi[k];
        }
        if (norm == 0.0) continue;
        for (int k = 0; k < d; ++k) xi[k] /= std::sqrt(norm);
        const Vec x = d == 1 ? vec1(rs.uniform(-1, 1)) : vec2(rs.uniform(-1, 1), rs.uniform(-1, 1));
        const SymMatrix a = model.evaluate(mu, x);
        const double q = a.quad(xi);
        if (q < 1.0 - 1e-12 || q > model.lambda() + 1e-12 || a.max_asymmetry() != 0.0) {
            res.pass = false;
            res.message = "spectrum left [1, lambda] for " + model.describe();
            return res;
        }
    }
    res.message = "spectrum within [1, lambda] over " + std::to_string(trials) + " trials";
    return res;
}

AuditResult locality_audit(const CoefficientModel& model, int trials, std::uint64_t seed) {
    AuditResult res;
    res.invariant = "finite-range";
    RandomStream rng(seed);
    for (int t = 0; t < trials; ++t) {
        RandomStream rs = rng.split(t);
        const Domain u = Domain::box(1, 6.0);
        Configuration mu = sample_poisson(u, 1.0, rs);
        const Vec x = vec1(rs.uniform(-1.0, 1.0));
        const SymMatrix before = model.evaluate(mu, x);
        mu.add(vec1(x[0] + rs.uniform(1.0, 1.9)));
        mu.add(vec1(x[0] - rs.uniform(1.0, 1.9)));
        const SymMatrix after = model.evaluate(mu, x);
        for (int i = 0; i < 4; ++i)
            if (before.a[static_cast<std::size_t>(i)] != after.a[static_cast<std::size_t>(i)]) {
                res.pass = false;
                res.message = "rule depends on points outside the unit ball: " +
                              model.describe();
                return res;
            }
    }
    res.message = "unit-ball locality holds over " + std::to_string(trials) + " trials";
    return res;
}

double detailed_balance_defect(int sites, double dt, const CoefficientModel& model) {
    // two particles on a discretized circle; the sweep kernel averages the
    // two visit orders, mirroring the random-permutation sweep
    const double side = 4.0;
    const double h = side / sites;
    const Domain torus = Domain::torus(1, side);
    const int states = sites * sites;

    auto site_x = [&](int s) { return vec1(-side / 2 + s * h); };
    auto config_of = [&](int s1, int s2) {
        Configuration mu(torus);
        mu.add(site_x(s1));
        mu.add(site_x(s2));
        return mu;
    };
    auto wrapped_weight = [&](int delta_sites, double variance) {
        double w = 0.0;
        for (int k = -3; k <= 3; ++k) {
            const double u = delta_sites * h + k * side;
            w += std::exp(-u * u / (2.0 * variance));
        }
        return w;
    };

    // single-particle move kernel for particle `which`
    auto move_kernel = [&](int which) {
        std::vector<double> K(static_cast<std::size_t>(states) * states, 0.0);
        for (int s1 = 0; s1 < sites; ++s1) {
            for (int s2 = 0; s2 < sites; ++s2) {
                const int from = s1 * sites + s2;
                const int moving = which == 0 ? s1 : s2;
                const Configuration mu = config_of(s1, s2);
                const SymMatrix a = model.evaluate(mu, site_x(moving));
                const double var = a(0, 0) * dt;
                // proposal over all sites
                std::vector<double> q(static_cast<std::size_t>(sites));
                double z = 0.0;
                for (int tgt = 0; tgt < sites; ++tgt) {
                    int delta = tgt - moving;
                    if (delta > sites / 2) delta -= sites;
                    if (delta < -sites / 2) delta += sites;
                    q[static_cast<std::size_t>(tgt)] = wrapped_weight(delta, var);
                    z += q[static_cast<std::size_t>(tgt)];
                }
                for (auto& v : q) v /= z;

                double stay = 0.0;
                for (int tgt = 0; tgt < sites; ++tgt) {
                    if (tgt == moving) continue;
                    const int n1 = which == 0 ? tgt : s1;
                    const int n2 = which == 0 ? s2 : tgt;
                    const Configuration nu = config_of(n1, n2);
                    const SymMatrix ap = model.evaluate(nu, site_x(tgt));
                    const double var_p = ap(0, 0) * dt;
                    // reverse proposal probability from the moved state
                    std::vector<double> qr(static_cast<std::size_t>(sites));
                    double zr = 0.0;
                    for (int back = 0; back < sites; ++back) {
                        int delta = back - tgt;
                        if (delta > sites / 2) delta -= sites;
                        if (delta < -sites / 2) delta += sites;
                        qr[static_cast<std::size_t>(back)] = wrapped_weight(delta, var_p);
                        zr += qr[static_cast<std::size_t>(back)];
                    }
                    const double fwd = q[static_cast<std::size_t>(tgt)];
                    const double rev = qr[static_cast<std::size_t>(moving)] / zr;
                    const double acc = std::min(1.0, rev / fwd);
                    const int to = n1 * sites + n2;
                    K[static_cast<std::size_t>(from) * states + to] += fwd * acc;
                    stay += fwd * (1.0 - acc);
                }
                K[static_cast<std::size_t>(from) * states + from] +=
                    stay + q[static_cast<std::size_t>(moving)];
            }
        }
        return K;
    };

    const std::vector<double> k1 = move_kernel(0);
    const std::vector<double> k2 = move_kernel(1);
    auto matmul = [&](const std::vector<double>& A, const std::vector<double>& B) {
        std::vector<double> C(static_cast<std::size_t>(states) * states, 0.0);
        for (int i = 0; i < states; ++i)
            for (int k = 0; k < states; ++k) {
                const double a = A[static_cast<std::size_t>(i) * states + k];
                if (a == 0.0) continue;
                for (int j = 0; j < states; ++j)
                    C[static_cast<std::size_t>(i) * states + j] +=
                        a * B[static_cast<std::size_t>(k) * states + j];
            }
        return C;
    };
    const std::vector<double> k12 = matmul(k1, k2);
    const std::vector<double> k21 = matmul(k2, k1);

    // uniform stationary law: detailed balance means the averaged kernel is
    // a symmetric matrix
    double defect = 0.0;
    for (int i = 0; i < states; ++i)
        for (int j = 0; j < states; ++j) {
            const double kij = 0.5 * (k12[static_cast<std::size_t>(i) * states + j] +
                                      k21[static_cast<std::size_t>(i) * states + j]);
            const double kji = 0.5 * (k12[static_cast<std::size_t>(j) * states + i] +
                                      k21[static_cast<std::size_t>(j) * states + i]);
            defect = std::max(defect, std::abs(kij - kji));
        }
    return defect;
}

namespace {

struct Check {
    std::string name;
    std::function<std::pair<bool, std::string>()> fn;
};

} // namespace

SelftestReport run_selftest(std::ostream& log) {
    SelftestReport rep;
    const std::vector<CoefficientModel> catalog = {
        CoefficientModel(ModelKind::Identity, 1.0),
        CoefficientModel(ModelKind::CountIndicator, 2.0),
        CoefficientModel(ModelKind::SmoothCount, 2.0),
        CoefficientModel(ModelKind::AnisotropicCount, 2.0),
    };

    std::vector<Check> checks;

    checks.push_back({"uniform-ellipticity audit", [&] {
        for (const auto& m : catalog) {
            const AuditResult r = ellipticity_audit(m, 600, 11);
            if (!r.pass) return std::make_pair(false, r.invariant + ": " + r.message);
        }
        return std::make_pair(true, std::string("catalog spectra within [1, lambda]"));
    }});

    checks.push_back({"finite-range audit", [&] {
        for (const auto& m : catalog) {
            const AuditResult r = locality_audit(m, 300, 13);
            if (!r.pass) return std::make_pair(false, r.invariant + ": " + r.message);
        }
        return std::make_pair(true, std::string("catalog rules are unit-ball local"));
    }});

    checks.push_back({"poisson count moments", [] {
        const Domain u = Domain::box(1, 3.0);
        RandomStream rng(17);
        RunningStats counts;
        for (int r = 0; r < 1200; ++r) {
            RandomStream rs = rng.split(r);
            counts.add(static_cast<double>(sample_poisson(u, 1.0, rs).size()));
        }
        const bool ok = std::abs(counts.mean() - 3.0) < 3.0 * counts.std_error();
        return std::make_pair(ok, "mean count " + std::to_string(counts.mean()));
    }});

    checks.push_back({"displacement-derivative finite difference", [] {
        BasisSpec spec;
        spec.spacing = 0.25;
        auto basis = std::make_shared<FeatureBasis>(Domain::box(1, 3.0), spec);
        RandomStream rng(23);
        for (int t = 0; t < 10; ++t) {
            RandomStream rs = rng.split(t);
            Configuration mu = sample_poisson(Domain::box(1, 5.0), 0.8, rs);
            if (mu.empty()) continue;
            std::vector<double> c(static_cast<std::size_t>(basis->size()));
            for (auto& v : c) v = rs.uniform(-1, 1);
            const FeatureFunctional f(basis, c, vec1(0.5));
            bool near = false;
            for (std::size_t i = 0; i < mu.size() && !near; ++i)
                for (std::size_t j = i + 1; j < mu.size() && !near; ++j)
                    for (double r : spec.radii)
                        if (std::abs(mu.domain().distance(mu.point(i), mu.point(j)) - r) <
                            1e-3)
                            near = true;
            if (near) continue;
            const std::size_t pick = rs.next_u64() % mu.size();
            const Vec ga = f.particle_gradient(mu, pick);
            const Vec gf = f.particle_gradient_fd(mu, pick);
            if (std::abs(ga[0] - gf[0]) / std::max(1.0, std::abs(ga[0])) > 1e-6)
                return std::make_pair(false, std::string("gradient mismatch"));
        }
        return std::make_pair(true, std::string("analytic gradients match differencing"));
    }});

    checks.push_back({"flat-rule cell value", [] {
        CellProblemSpec spec;
        spec.cell = Domain::cube(1, 0);
        spec.model = CoefficientModel(ModelKind::Identity, 1.0);
        spec.samples = 800;
        spec.seed = 29;
        const CellSolution sol = solve_nu(spec);
        const bool ok = std::abs(sol.value - 0.5) < 3.0 * sol.std_error + 1e-3;
        return std::make_pair(ok, "value " + std::to_string(sol.value));
    }});

    checks.push_back({"kernel mass and composition", [] {
        const HeatKernel hk(SymMatrix::isotropic(1, 1.0), 1);
        const Domain torus = Domain::torus(1, 12.0);
        GridFunction g = GridFunction::sampled(torus, 192, [](const Vec& x) {
            return std::exp(-x[0] * x[0]);
        });
        const auto once = apply_heat_semigroup(g, 0.3, hk);
        const auto twice = apply_heat_semigroup(once.value, 0.2, hk);
        const auto direct = apply_heat_semigroup(g, 0.5, hk);
        double err = 0.0;
        for (int i = 0; i < 192; ++i)
            err = std::max(err, std::abs(twice.value.at(i) - direct.value.at(i)));
        const bool ok = err < 1e-6 && once.truncation_error < 1e-6;
        return std::make_pair(ok, "composition error " + std::to_string(err));
    }});

    checks.push_back({"source-problem sine fixture", [] {
        const Domain box = Domain::box(1, 3.0);
        const double k = M_PI / 3.0;
        auto exact = [&](const Vec& x) { return std::sin(k * (x[0] + 1.5)); };
        double errs[2];
        int idx = 0;
        for (int n : {64, 128}) {
            const GridFunction f = GridFunction::sampled(
                box, n, [&](const Vec& x) { return k * k * exact(x); }, true);
            const DirichletSolution sol = solve_homog_dirichlet(f, SymMatrix::isotropic(1, 1.0));
            double e = 0.0;
            for (int i = 0; i <= n; ++i)
                e = std::max(e, std::abs(sol.u.at(i) - exact(sol.u.node(i))));
            errs[idx++] = e;
        }
        const bool ok = errs[1] < errs[0] / 3.0 && errs[1] < 1e-3;
        return std::make_pair(ok, "errors " + std::to_string(errs[0]) + " -> " +
                                      std::to_string(errs[1]));
    }});

    checks.push_back({"parabolic parameter formulas", [] {
        const ParabolicParameters p1 = parabolic_parameters(1.0, 0.7);
        const ParabolicParameters p2 = parabolic_parameters(std::pow(3.0, 16), 0.7);
        const bool ok = p1.tau == 1.0 && p1.n == 0 &&
                        std::abs(p2.tau - std::pow(3.0, 12)) < 1e-6 && p2.n == 1 &&
                        p1.beta == 0.7 / 16.0 &&
                        parabolic_parameters(5.0, 2.0).beta == 1.0 / 16.0;
        return std::make_pair(ok, std::string("regularization and mesoscale match"));
    }});

    checks.push_back({"transport regime labels", [] {
        const double alpha = 0.5;
        const int m = 2;
        const bool ok = gk_regime(1.0, alpha, m) == "constant" &&
                        gk_regime(0.1, alpha, m) == "lambda^(alpha/(2(1+alpha)))" &&
                        gk_regime(gk_regime_threshold(alpha, m) / 2.0, alpha, m) ==
                            "3^(-alpha*m)" &&
                        gk_mesoscale(1.0, alpha, 5) == 0 &&
                        gk_mesoscale(std::pow(3.0, -2.0 * 1.5), alpha, 5) == 1;
        return std::make_pair(ok, std::string("labels and mesoscale agree"));
    }});

    checks.push_back({"equal-time white noise", [] {
        const Domain torus = Domain::torus(1, 9.0);
        const GridFunction f = GridFunction::sampled(torus, 144, [](const Vec& x) {
            return std::exp(-x[0] * x[0]);
        });
        RandomStream rng(31);
        RunningStats acc;
        for (int r = 0; r < 2500; ++r) {
            RandomStream rs = rng.split(r);
            const Configuration mu = sample_poisson(torus, 1.0, rs);
            const double y = fluctuation_field(mu, f, 1.0);
            acc.add(y * y);
        }
        const double target = f.inner(f);
        const double se = 3.0 * acc.std_error();
        const bool ok = std::abs(acc.mean() - target) < se;
        return std::make_pair(ok, "variance " + std::to_string(acc.mean()) + " target " +
                                      std::to_string(target));
    }});

    checks.push_back({"detailed balance of the discretized chain", [] {
        const double defect =
            detailed_balance_defect(8, 0.05, CoefficientModel(ModelKind::CountIndicator, 2.0));
        return std::make_pair(defect < 1e-10, "defect " + std::to_string(defect));
    }});

    checks.push_back({"resolvent reduces to the cell solve", [] {
        CellProblemSpec spec;
        spec.cell = Domain::cube(1, 0);
        spec.model = CoefficientModel(ModelKind::CountIndicator, 2.0);
        spec.samples = 500;
        spec.seed = 37;
        const CellSolution nu = solve_nu(spec);
        const CellSolution res = solve_resolvent(spec, 0.0);
        for (std::size_t i = 0; i < nu.coeffs.size(); ++i)
            if (nu.coeffs[i] != res.coeffs[i])
                return std::make_pair(false, std::string("coefficients differ"));
        return std::make_pair(true, std::string("identical linear systems"));
    }});

    for (const auto& c : checks) {
        std::pair<bool, std::string> r;
        try {
            r = c.fn();
        } catch (const std::exception& e) {
            r = {false, std::string("exception: ") + e.what()};
        }
        const std::string line = std::string(r.first ? "PASS" : "FAIL") + "  " + c.name +
                                 (r.second.empty() ? "" : "  (" + r.second + ")");
        rep.lines.push_back(line);
        log << line << "\n";
        if (r.first)
            ++rep.passed;
        else
            ++rep.failed;
    }
    log << (rep.failed == 0 ? "selftest passed" : "selftest FAILED") << ": " << rep.passed
        << " passed, " << rep.failed << " failed\n";
    return rep;
}

} // namespace bulkdiff
