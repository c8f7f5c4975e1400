#include "bulkdiff/cell.hpp"

#include <Eigen/IterativeLinearSolvers>
#include <algorithm>
#include <cmath>

#include "bulkdiff/parallel.hpp"
#include "bulkdiff/sector.hpp"
#include "json.hpp"

namespace bulkdiff {

namespace {

Eigen::VectorXd to_eigen(const Vec& v, int d) {
    Eigen::VectorXd e(d);
    for (int k = 0; k < d; ++k) e(k) = v[k];
    return e;
}

constexpr int kDenseLimit = 2000;

} // namespace

FeatureFunctional CellSolution::functional() const {
    if (kind == CellProblemKind::NuStar) return FeatureFunctional(basis, coeffs);
    return FeatureFunctional(basis, coeffs, direction);
}

FeatureFunctional CellSolution::corrector() const { return FeatureFunctional(basis, coeffs); }

std::string CellSolution::to_json() const {
    nlohmann::json j;
    switch (kind) {
    case CellProblemKind::Nu: j["kind"] = "nu"; break;
    case CellProblemKind::NuStar: j["kind"] = "nu-star"; break;
    case CellProblemKind::Resolvent: j["kind"] = "resolvent"; break;
    }
    j["value"] = value;
    j["std_error"] = std_error;
    j["value_insample"] = value_insample;
    j["bound"] = bound == BoundDirection::Upper   ? "upper"
                 : bound == BoundDirection::Lower ? "lower"
                                                  : "none";
    j["lambda"] = lambda;
    const int d = basis->cell().dimension();
    j["direction"] = d == 1 ? std::vector<double>{direction[0]}
                            : std::vector<double>{direction[0], direction[1]};
    j["corrector_energy"] = corrector_energy;
    j["mean_count"] = mean_count;
    j["samples"] = samples;
    j["seed"] = seed;
    j["cell"] = {{"d", d},
                 {"side", basis->cell().side()},
                 {"center", std::vector<double>{basis->cell().center()[0],
                                                basis->cell().center()[1]}}};
    nlohmann::json feats = nlohmann::json::array();
    for (int k = 0; k < basis->size(); ++k) {
        const Feature& f = basis->feature(k);
        feats.push_back({{"center", std::vector<double>{f.center[0], f.center[1]}},
                         {"width", f.width},
                         {"radius", f.radius},
                         {"min_count", f.min_count}});
    }
    j["features"] = std::move(feats);
    j["coefficients"] = coeffs;
    return j.dump(2);
}

CellSystem::CellSystem(const CellProblemSpec& spec, CellProblemKind kind, bool with_mass)
    : spec_(spec), kind_(kind) {
    if (spec_.cell.geometry() != Geometry::Box)
        throw std::invalid_argument("CellSystem: cell must be a box");
    if (spec_.samples == 0) throw std::invalid_argument("CellSystem: sample count is zero");

    BasisSpec bs = spec_.basis;
    bs.zero_boundary = kind != CellProblemKind::NuStar;
    basis_ = std::make_shared<FeatureBasis>(spec_.cell, bs);
    if (basis_->size() == 0) throw std::invalid_argument("CellSystem: empty basis");

    const RandomStream root(spec_.seed);
    solve_ = cell_samples(spec_.cell, spec_.rho, spec_.samples, root.split(0), spec_.max_points);
    const std::size_t ec = spec_.eval_samples ? spec_.eval_samples : spec_.samples;
    eval_ = cell_samples(spec_.cell, spec_.rho, ec, root.split(1), spec_.max_points);

    norm_ = spec_.max_points
                ? 1.0 / truncated_occupancy(spec_.cell, spec_.rho, *spec_.max_points)
                          .mean_count_in_cell
                : 1.0 / (spec_.rho * spec_.cell.volume());

    const bool need_mass = with_mass || kind == CellProblemKind::Resolvent;
    mats_ = assemble_cell_matrices(*basis_, spec_.model, solve_, need_mass, spec_.workers);

    const int K = basis_->size();
    const double ridge = spec_.ridge_rel * mats_.stiff.trace() / static_cast<double>(K);
    stiff_ridged_ = mats_.stiff;
    stiff_ridged_.diagonal().array() += ridge;
    use_dense_ = K <= kDenseLimit;
    if (use_dense_) {
        stiff_factor_.compute(stiff_ridged_);
        if (stiff_factor_.info() != Eigen::Success)
            throw std::runtime_error("CellSystem: Gram factorization failed beyond ridge");
    }
}

Eigen::VectorXd CellSystem::solve_system(const Eigen::MatrixXd& lhs,
                                         const Eigen::VectorXd& rhs) const {
    Eigen::VectorXd c;
    if (lhs.rows() <= kDenseLimit) {
        Eigen::LDLT<Eigen::MatrixXd> f(lhs);
        if (f.info() != Eigen::Success)
            throw std::runtime_error("cell solve: factorization failed beyond ridge");
        c = f.solve(rhs);
    } else {
        Eigen::ConjugateGradient<Eigen::MatrixXd, Eigen::Lower | Eigen::Upper> cg;
        cg.setTolerance(1e-12);
        cg.setMaxIterations(5000);
        cg.compute(lhs);
        c = cg.solve(rhs);
        if (cg.info() != Eigen::Success)
            throw std::runtime_error("cell solve: conjugate gradient did not converge");
    }
    if (!c.allFinite()) throw std::runtime_error("cell solve: singular system beyond ridge");
    return c;
}

CellSolution CellSystem::solve(const Vec& direction, double lambda) const {
    const int d = spec_.cell.dimension();
    const int K = basis_->size();
    const Eigen::VectorXd dir = to_eigen(direction, d);

    CellSolution sol;
    sol.kind = kind_;
    sol.lambda = lambda;
    sol.direction = direction;
    sol.basis = basis_;
    sol.mean_count = mats_.mean_count;
    sol.samples = spec_.samples;
    sol.seed = spec_.seed;

    Eigen::VectorXd c(K);
    if (kind_ == CellProblemKind::NuStar) {
        if (lambda != 0.0)
            throw std::invalid_argument("dual problem has no resolvent mode");
        const Eigen::VectorXd r = mats_.slope_mean.transpose() * dir;
        c = use_dense_ ? Eigen::VectorXd(stiff_factor_.solve(0.5 * r))
                       : solve_system(stiff_ridged_, Eigen::VectorXd(0.5 * r));
        if (!c.allFinite())
            throw std::runtime_error("cell solve: singular system beyond ridge");
        sol.value_insample = norm_ * (r.dot(c) - c.dot(mats_.stiff * c));
        sol.bound = BoundDirection::Lower;
    } else {
        if (lambda < 0.0) throw std::invalid_argument("resolvent weight must be >= 0");
        const Eigen::VectorXd cur = mats_.current_axes.transpose() * dir;
        if (kind_ == CellProblemKind::Resolvent && lambda > 0.0) {
            Eigen::MatrixXd lhs = stiff_ridged_ + lambda * mats_.mass;
            c = solve_system(lhs, Eigen::VectorXd(-cur));
        } else {
            c = use_dense_ ? Eigen::VectorXd(stiff_factor_.solve(-cur))
                           : solve_system(stiff_ridged_, Eigen::VectorXd(-cur));
        }
        if (!c.allFinite())
            throw std::runtime_error("cell solve: singular system beyond ridge");
        const double flux_pp = mats_.flux.quad(direction);
        sol.value_insample =
            norm_ * (flux_pp + 2.0 * cur.dot(c) + c.dot(mats_.stiff * c));
        sol.bound = kind_ == CellProblemKind::Nu ? BoundDirection::Upper : BoundDirection::None;
    }

    sol.coeffs.assign(c.data(), c.data() + K);
    sol.corrector_energy = norm_ * c.dot(mats_.stiff * c);

    const CellObjective obj =
        kind_ == CellProblemKind::NuStar ? CellObjective::NuStar : CellObjective::Nu;
    const std::optional<Vec> affine =
        kind_ == CellProblemKind::NuStar ? std::nullopt : std::optional<Vec>(direction);
    const EstimatorResult est = cell_objective_estimate(
        *basis_, sol.coeffs, affine, direction, obj, spec_.model, eval_, norm_, spec_.workers);
    sol.value = est.value;
    sol.std_error = est.std_error;
    return sol;
}

SymMatrix CellSystem::insample_dual_matrix() const {
    const int d = spec_.cell.dimension();
    Eigen::MatrixXd sol;
    if (use_dense_)
        sol = stiff_factor_.solve(mats_.slope_mean.transpose());
    else {
        sol.resize(basis_->size(), d);
        for (int k = 0; k < d; ++k)
            sol.col(k) = solve_system(stiff_ridged_,
                                      Eigen::VectorXd(mats_.slope_mean.row(k).transpose()));
    }
    const Eigen::MatrixXd m = 0.5 * norm_ * (mats_.slope_mean * sol);
    SymMatrix out;
    out.d = d;
    for (int i = 0; i < d; ++i)
        for (int j = 0; j < d; ++j) out.at(i, j) = 0.5 * (m(i, j) + m(j, i));
    return out;
}

CellSolution solve_nu(const CellProblemSpec& spec) {
    return CellSystem(spec, CellProblemKind::Nu).solve(spec.direction);
}

CellSolution solve_nu_star(const CellProblemSpec& spec) {
    return CellSystem(spec, CellProblemKind::NuStar).solve(spec.direction);
}

CellSolution solve_resolvent(const CellProblemSpec& spec, double lambda) {
    return CellSystem(spec, CellProblemKind::Resolvent).solve(spec.direction, lambda);
}

EstimatorResult gap_quadratic_form(const CellSolution& nu_sol, const CellSolution& star_sol,
                                   const CoefficientModel& model, const SampleSpec& samples,
                                   double normalization, int workers) {
    const FeatureBasis& bn = *nu_sol.basis;
    const FeatureBasis& bs = *star_sol.basis;
    const int d = bn.cell().dimension();
    const Vec p = nu_sol.direction;

    auto kernel = [&](const Configuration& mu) {
        std::vector<std::vector<int>> cn, cs;
        bn.neighbor_counts(mu, cn);
        bs.neighbor_counts(mu, cs);
        std::vector<ActiveFeature> act;
        double s = 0.0;
        for (std::size_t i = 0; i < mu.size(); ++i) {
            if (!bn.cell_contains(mu.domain(), mu.point(i))) continue;
            Vec g;
            for (int k = 0; k < d; ++k) g[k] = p[k];
            act.clear();
            bn.collect(mu, i, cn, act);
            for (const auto& af : act)
                for (int k = 0; k < d; ++k)
                    g[k] += nu_sol.coeffs[static_cast<std::size_t>(af.index)] * af.grad[k];
            act.clear();
            bs.collect(mu, i, cs, act);
            for (const auto& af : act)
                for (int k = 0; k < d; ++k)
                    g[k] -= star_sol.coeffs[static_cast<std::size_t>(af.index)] * af.grad[k];
            const SymMatrix a = model.evaluate(mu, mu.point(i));
            s += 0.5 * a.quad(g);
        }
        return normalization * s;
    };
    return mc_estimate(samples, kernel, workers);
}

DualityGap duality_gap(const CellSolution& nu_sol, const CellSolution& star_sol) {
    DualityGap g;
    const int d = nu_sol.basis->cell().dimension();
    double pq = 0.0;
    for (int k = 0; k < d; ++k) pq += nu_sol.direction[k] * star_sol.direction[k];
    g.j = nu_sol.value + star_sol.value - pq;
    g.j_std_error = std::sqrt(nu_sol.std_error * nu_sol.std_error +
                              star_sol.std_error * star_sol.std_error);
    return g;
}

AbarEstimate assemble_abar(const CellProblemSpec& spec) {
    const int d = spec.cell.dimension();
    const CellSystem nu_sys(spec, CellProblemKind::Nu);
    const CellSystem star_sys(spec, CellProblemKind::NuStar);

    std::vector<Vec> axes;
    axes.push_back(d == 1 ? vec1(1.0) : vec2(1.0, 0.0));
    if (d == 2) axes.push_back(vec2(0.0, 1.0));

    AbarEstimate out;
    out.m = static_cast<int>(std::lround(std::log(spec.cell.side()) / std::log(3.0)));
    out.rho = spec.rho;
    out.abar.matrix.d = d;
    out.abar.std_err.d = d;
    out.abar_star.matrix.d = d;
    out.abar_star.std_err.d = d;

    std::vector<CellSolution> nu_axis, star_axis;
    for (const Vec& e : axes) {
        nu_axis.push_back(nu_sys.solve(e));
        star_axis.push_back(star_sys.solve(e));
        out.nu_values.push_back(nu_axis.back().value);
        out.nu_std_errors.push_back(nu_axis.back().std_error);
    }

    // polarization: nu(U,p) = p . abar p / 2
    SymMatrix minv; // dual matrix: 2 nu*(q) = q . minv q
    minv.d = d;
    for (int i = 0; i < d; ++i) {
        out.abar.matrix.at(i, i) = 2.0 * nu_axis[static_cast<std::size_t>(i)].value;
        out.abar.std_err.at(i, i) = 2.0 * nu_axis[static_cast<std::size_t>(i)].std_error;
        minv.at(i, i) = 2.0 * star_axis[static_cast<std::size_t>(i)].value;
    }
    SymMatrix minv_se;
    minv_se.d = d;
    for (int i = 0; i < d; ++i)
        minv_se.at(i, i) = 2.0 * star_axis[static_cast<std::size_t>(i)].std_error;

    if (d == 2) {
        const Vec mixed = vec2(1.0, 1.0);
        const CellSolution nu_m = nu_sys.solve(mixed);
        const CellSolution star_m = star_sys.solve(mixed);
        const double off = nu_m.value - nu_axis[0].value - nu_axis[1].value;
        const double off_se =
            std::sqrt(nu_m.std_error * nu_m.std_error +
                      nu_axis[0].std_error * nu_axis[0].std_error +
                      nu_axis[1].std_error * nu_axis[1].std_error);
        out.abar.matrix.at(0, 1) = off;
        out.abar.matrix.at(1, 0) = off;
        out.abar.std_err.at(0, 1) = off_se;
        out.abar.std_err.at(1, 0) = off_se;
        const double soff = star_m.value - star_axis[0].value - star_axis[1].value;
        const double soff_se =
            std::sqrt(star_m.std_error * star_m.std_error +
                      star_axis[0].std_error * star_axis[0].std_error +
                      star_axis[1].std_error * star_axis[1].std_error);
        minv.at(0, 1) = soff;
        minv.at(1, 0) = soff;
        minv_se.at(0, 1) = soff_se;
        minv_se.at(1, 0) = soff_se;
    }

    out.abar_star.matrix = minv.inverse();
    // first-order propagation through the inverse
    {
        const SymMatrix& inv = out.abar_star.matrix;
        for (int i = 0; i < d; ++i)
            for (int j = 0; j < d; ++j) {
                double s2 = 0.0;
                for (int k = 0; k < d; ++k)
                    for (int l = 0; l < d; ++l) {
                        const double coef = inv(i, k) * inv(l, j);
                        s2 += coef * coef * minv_se(k, l) * minv_se(k, l);
                    }
                out.abar_star.std_err.at(i, j) = std::sqrt(s2);
            }
    }

    // duality gaps at the matched dual directions q_i = abar_star e_i
    const RandomStream root(spec.seed);
    const SampleSpec gap_samples =
        cell_samples(spec.cell, spec.rho, spec.samples, root.split(2), spec.max_points);
    for (int i = 0; i < d; ++i) {
        Vec q;
        for (int k = 0; k < d; ++k) q[k] = out.abar_star.matrix(k, i);
        const CellSolution star_q = star_sys.solve(q);
        DualityGap g = duality_gap(nu_axis[static_cast<std::size_t>(i)], star_q);
        const EstimatorResult quad =
            gap_quadratic_form(nu_axis[static_cast<std::size_t>(i)], star_q, spec.model,
                               gap_samples, nu_sys.normalization(), spec.workers);
        g.j_quadratic = quad.value;
        g.j_quadratic_se = quad.std_error;
        out.gaps.push_back(g);
    }
    return out;
}

std::string AbarEstimate::to_json() const {
    nlohmann::json j;
    j["m"] = m;
    j["rho"] = rho;
    const int d = abar.matrix.d;
    auto put = [&](const char* name, const MatrixEstimate& me) {
        nlohmann::json rows = nlohmann::json::array();
        for (int i = 0; i < d; ++i)
            for (int k = 0; k < d; ++k)
                rows.push_back({{"i", i},
                                {"j", k},
                                {"value", me.matrix(i, k)},
                                {"std_error", me.std_err(i, k)}});
        j[name] = rows;
    };
    put("abar", abar);
    put("abar_star", abar_star);
    nlohmann::json gs = nlohmann::json::array();
    for (const auto& g : gaps)
        gs.push_back({{"j", g.j},
                      {"j_std_error", g.j_std_error},
                      {"j_quadratic", g.j_quadratic},
                      {"j_quadratic_se", g.j_quadratic_se}});
    j["duality_gaps"] = gs;
    j["nu_values"] = nu_values;
    j["nu_std_errors"] = nu_std_errors;
    return j.dump(2);
}

CovarianceEstimate corrector_covariance(const CellProblemSpec& base, int n, const Vec& z,
                                        const Vec& zp, int axis) {
    const int d = base.cell.dimension();
    const double side = std::pow(3.0, n);
    bool same = true;
    double dist2 = 0.0;
    for (int k = 0; k < d; ++k) {
        const double dk = z[k] - zp[k];
        dist2 += dk * dk;
        if (dk != 0.0) same = false;
    }
    if (!same && std::sqrt(dist2) <= side)
        throw std::invalid_argument("corrector_covariance: cells overlap");

    CellProblemSpec cspec = base;
    cspec.cell = Domain::box(d, side);
    Vec e;
    e[axis] = 1.0;
    cspec.direction = e;
    const CellSolution sol = solve_nu(cspec);

    auto bz = sol.basis->translated(z);
    auto bzp = sol.basis->translated(zp);

    // sampling window covering both padded cells
    Vec mid;
    double span = 0.0;
    for (int k = 0; k < d; ++k) {
        mid[k] = 0.5 * (z[k] + zp[k]);
        span = std::max(span, std::abs(z[k] - zp[k]));
    }
    SampleSpec samples;
    samples.window = Domain::box(d, span + side + 2.0, mid);
    samples.rho = base.rho;
    samples.count = base.samples;
    samples.stream = RandomStream(base.seed).split(7);

    auto energy_of = [&](const FeatureBasis& b, const Configuration& mu,
                         const std::vector<std::vector<int>>& counts) {
        std::vector<ActiveFeature> act;
        double s = 0.0;
        for (std::size_t i = 0; i < mu.size(); ++i) {
            if (!b.cell_contains(mu.domain(), mu.point(i))) continue;
            Vec g;
            act.clear();
            b.collect(mu, i, counts, act);
            for (const auto& af : act)
                for (int k = 0; k < d; ++k)
                    g[k] += sol.coeffs[static_cast<std::size_t>(af.index)] * af.grad[k];
            for (int k = 0; k < d; ++k) s += g[k] * g[k];
        }
        return s;
    };

    std::vector<double> xs, ys;
    xs.reserve(samples.count);
    ys.reserve(samples.count);
    for (std::size_t s = 0; s < samples.count; ++s) {
        const Configuration mu = samples.draw(s);
        std::vector<std::vector<int>> c1, c2;
        bz->neighbor_counts(mu, c1);
        bzp->neighbor_counts(mu, c2);
        xs.push_back(energy_of(*bz, mu, c1));
        ys.push_back(energy_of(*bzp, mu, c2));
    }
    return covariance_of(xs, ys);
}

ExtrapolationResult extrapolate_abar(const std::vector<AbarEstimate>& estimates) {
    if (estimates.size() < 3)
        throw std::invalid_argument("extrapolate_abar: need at least three scales");
    std::vector<AbarEstimate> es = estimates;
    std::sort(es.begin(), es.end(),
              [](const AbarEstimate& a, const AbarEstimate& b) { return a.m < b.m; });

    ExtrapolationResult out;
    const int d = es.front().abar.matrix.d;
    for (const auto& e : es) {
        out.m_values.push_back(e.m);
        out.table.push_back(e.abar.matrix);
    }

    const std::size_t ndiff = es.size() - 1;
    std::vector<double> dnorm(ndiff, 0.0), dnoise(ndiff, 0.0);
    std::vector<SymMatrix> diffs(ndiff);
    for (std::size_t i = 0; i < ndiff; ++i) {
        SymMatrix diff;
        diff.d = d;
        double nrm = 0.0, noise = 0.0;
        for (int r = 0; r < d; ++r)
            for (int c = 0; c < d; ++c) {
                diff.at(r, c) = es[i].abar.matrix(r, c) - es[i + 1].abar.matrix(r, c);
                nrm = std::max(nrm, std::abs(diff(r, c)));
                noise = std::max(noise,
                                 std::hypot(es[i].abar.std_err(r, c),
                                            es[i + 1].abar.std_err(r, c)));
            }
        diffs[i] = diff;
        dnorm[i] = nrm;
        dnoise[i] = noise;
    }

    bool all_noise = true;
    for (std::size_t i = 0; i < ndiff; ++i)
        if (dnorm[i] > 3.0 * dnoise[i]) all_noise = false;
    if (all_noise) {
        out.accepted = true;
        out.alpha_hat = std::nan("");
        out.limit = es.back().abar.matrix;
        out.note = "differences at noise floor; rate undefined, limit taken from the "
                   "largest scale";
        return out;
    }

    for (std::size_t i = 0; i + 1 < ndiff; ++i) {
        if (dnorm[i + 1] > dnorm[i] + 3.0 * std::hypot(dnoise[i], dnoise[i + 1])) {
            out.accepted = false;
            out.note = "difference sequence is non-monotone beyond noise; extrapolation "
                       "refused";
            return out;
        }
    }

    std::vector<double> xs, ys;
    for (std::size_t i = 0; i < ndiff; ++i) {
        if (dnorm[i] <= 0.0) continue;
        xs.push_back(static_cast<double>(es[i].m));
        ys.push_back(std::log(dnorm[i]));
    }
    if (xs.size() < 2) {
        out.accepted = false;
        out.note = "not enough resolvable differences to fit a rate";
        return out;
    }
    const LineFit fit = fit_line(xs, ys);
    const double alpha = -fit.slope / std::log(3.0);
    if (!(alpha > 0.0)) {
        out.accepted = false;
        out.note = "fitted rate is not positive; extrapolation refused";
        return out;
    }
    out.accepted = true;
    out.alpha_hat = alpha;
    out.fit_residual = fit.rms_residual;
    const double r = std::pow(3.0, -alpha);
    const double tail = r / (1.0 - r);
    SymMatrix limit = es.back().abar.matrix;
    for (int i = 0; i < d; ++i)
        for (int j = 0; j < d; ++j) limit.at(i, j) -= diffs.back()(i, j) * tail;
    out.limit = limit;
    out.note = "geometric-tail extrapolation";
    return out;
}

std::string ExtrapolationResult::to_json() const {
    nlohmann::json j;
    j["accepted"] = accepted;
    if (std::isnan(alpha_hat))
        j["alpha_hat"] = nullptr;
    else
        j["alpha_hat"] = alpha_hat;
    j["fit_residual"] = fit_residual;
    j["note"] = note;
    j["m_values"] = m_values;
    const int d = limit.d;
    nlohmann::json lim = nlohmann::json::array();
    for (int r = 0; r < d; ++r)
        for (int c = 0; c < d; ++c)
            lim.push_back({{"i", r}, {"j", c}, {"value", limit(r, c)}});
    j["limit"] = lim;
    nlohmann::json tab = nlohmann::json::array();
    for (std::size_t t = 0; t < table.size(); ++t) {
        nlohmann::json entry;
        entry["m"] = m_values[t];
        nlohmann::json mat = nlohmann::json::array();
        for (int r = 0; r < table[t].d; ++r)
            for (int c = 0; c < table[t].d; ++c)
                mat.push_back({{"i", r}, {"j", c}, {"value", table[t](r, c)}});
        entry["abar"] = mat;
        tab.push_back(entry);
    }
    j["table"] = tab;
    return j.dump(2);
}

} // namespace bulkdiff
