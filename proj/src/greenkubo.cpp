#include "bulkdiff/greenkubo.hpp"

#include <cmath>

#include "json.hpp"

namespace bulkdiff {

EstimatorResult current_apply(const CurrentFunctional& cur, const FeatureFunctional& v,
                              std::size_t samples, std::uint64_t seed, int workers) {
    if (samples == 0) throw std::invalid_argument("current_apply: sample count is zero");
    if (!v.zero_boundary())
        throw std::invalid_argument("current_apply: test functional must be zero-boundary");
    const Domain& cell = cur.cell;
    const int d = cell.dimension();
    const SampleSpec spec = cell_samples(cell, cur.rho, samples, RandomStream(seed).split(0));
    const FeatureBasis& b = v.basis();

    auto kernel = [&](const Configuration& mu) {
        std::vector<std::vector<int>> counts;
        b.neighbor_counts(mu, counts);
        std::vector<ActiveFeature> act;
        double s = 0.0;
        for (std::size_t i = 0; i < mu.size(); ++i) {
            const Vec rel = mu.domain().displacement(mu.point(i), cell.center());
            bool in = true;
            for (int k = 0; k < d; ++k)
                if (rel[k] <= -cell.side() / 2 || rel[k] >= cell.side() / 2) in = false;
            if (!in) continue;
            Vec g;
            act.clear();
            b.collect(mu, i, counts, act);
            for (const auto& af : act)
                for (int k = 0; k < d; ++k)
                    g[k] += v.coeffs()[static_cast<std::size_t>(af.index)] * af.grad[k];
            const SymMatrix a = cur.model.evaluate(mu, mu.point(i));
            s += -0.5 * a.bilinear(cur.direction, g);
        }
        return s;
    };
    return mc_estimate(spec, kernel, workers);
}

EstimatorResult current_apply_corrector(const CellSolution& nu_sol,
                                        const FeatureFunctional& v,
                                        const CoefficientModel& model, double rho,
                                        std::size_t samples, std::uint64_t seed,
                                        int workers) {
    const Domain& cell = nu_sol.basis->cell();
    const EnergyEstimate e = dirichlet_energy(nu_sol.corrector(), v, model, cell, rho,
                                              samples, RandomStream(seed).split(0),
                                              /*normalize=*/false, workers);
    EstimatorResult r;
    r.value = e.value;
    r.std_error = e.std_error;
    r.samples = e.samples;
    r.seed = seed;
    return r;
}

GkIntegral gk_integral_value(const CellProblemSpec& spec, double lambda) {
    if (lambda < 0.0) throw std::invalid_argument("gk_integral_value: lambda must be >= 0");
    const CellSystem sys(spec, CellProblemKind::Resolvent);
    GkIntegral out{EstimatorResult{}, sys.solve(spec.direction, lambda)};

    const FeatureBasis& b = *out.resolvent.basis;
    const Domain cell = spec.cell;
    const int d = cell.dimension();
    const Vec p = spec.direction;
    const std::vector<double>& c = out.resolvent.coeffs;

    // integrand: 1/2 p.a p - 1/2 p.a (p + grad corrector) = -1/2 p.a grad corrector
    auto kernel = [&](const Configuration& mu) {
        std::vector<std::vector<int>> counts;
        b.neighbor_counts(mu, counts);
        std::vector<ActiveFeature> act;
        double s = 0.0;
        for (std::size_t i = 0; i < mu.size(); ++i) {
            const Vec rel = mu.domain().displacement(mu.point(i), cell.center());
            bool in = true;
            for (int k = 0; k < d; ++k)
                if (rel[k] <= -cell.side() / 2 || rel[k] >= cell.side() / 2) in = false;
            if (!in) continue;
            Vec g;
            act.clear();
            b.collect(mu, i, counts, act);
            for (const auto& af : act)
                for (int k = 0; k < d; ++k)
                    g[k] += c[static_cast<std::size_t>(af.index)] * af.grad[k];
            const SymMatrix a = spec.model.evaluate(mu, mu.point(i));
            s += -0.5 * a.bilinear(p, g);
        }
        return s;
    };
    out.value = mc_estimate(sys.eval_samples(), kernel, spec.workers);
    out.value.seed = spec.seed;
    return out;
}

EstimatorResult palm_flux(const CoefficientModel& model, double rho, const Vec& p, int d,
                          std::size_t samples, std::uint64_t seed, int workers) {
    if (samples == 0) throw std::invalid_argument("palm_flux: sample count is zero");
    SampleSpec sp;
    sp.window = Domain::box(d, 4.0); // covers the unit ball around the added atom
    sp.rho = rho;
    sp.count = samples;
    sp.stream = RandomStream(seed).split(0);
    auto kernel = [&](const Configuration& mu) {
        Configuration palm = mu;
        palm.add(Vec{});
        const SymMatrix a = model.evaluate(palm, Vec{});
        return 0.5 * a.quad(p);
    };
    return mc_estimate(sp, kernel, workers);
}

int gk_mesoscale(double lambda, double alpha, int m) {
    if (!(lambda > 0.0)) throw std::invalid_argument("gk_mesoscale: lambda must be positive");
    if (!(alpha > 0.0)) throw std::invalid_argument("gk_mesoscale: alpha must be positive");
    const double n_real = -std::log(lambda) / (2.0 * (1.0 + alpha) * std::log(3.0));
    int n = static_cast<int>(std::lround(n_real));
    n = std::max(0, std::min(m, n));
    return n;
}

double gk_regime_threshold(double alpha, int m) {
    return std::pow(3.0, -2.0 * (1.0 + alpha) * m);
}

std::string gk_regime(double lambda, double alpha, int m) {
    if (lambda >= 1.0) return "constant";
    if (lambda > gk_regime_threshold(alpha, m)) return "lambda^(alpha/(2(1+alpha)))";
    return "3^(-alpha*m)";
}

GKReport gk_bracket(const CellProblemSpec& spec, double lambda, double half_p_abar_ref,
                    double ref_se, double alpha_used, std::size_t palm_samples) {
    GKReport r;
    r.m = static_cast<int>(std::lround(std::log(spec.cell.side()) / std::log(3.0)));
    r.lambda = lambda;
    r.rho = spec.rho;
    r.alpha_used = alpha_used;
    r.half_p_abar_ref = half_p_abar_ref;
    r.half_p_abar_ref_se = ref_se;

    const std::size_t ps = palm_samples ? palm_samples : 4 * spec.samples;
    const EstimatorResult palm =
        palm_flux(spec.model, spec.rho, spec.direction, spec.cell.dimension(), ps,
                   spec.seed + 11, spec.workers);
    r.palm = palm.value;
    r.palm_se = palm.std_error;

    const GkIntegral integral = gk_integral_value(spec, lambda);
    r.integral = integral.value.value;
    r.integral_se = integral.value.std_error;
    const double norm = 1.0 / (spec.rho * spec.cell.volume());
    r.integral_normalized = r.integral * norm;

    r.bracket = r.half_p_abar_ref - r.palm + r.integral_normalized;
    r.bracket_se = std::sqrt(ref_se * ref_se + r.palm_se * r.palm_se +
                             norm * norm * r.integral_se * r.integral_se);
    r.reconstructed = r.palm - r.integral_normalized;
    r.reconstructed_se =
        std::sqrt(r.palm_se * r.palm_se + norm * norm * r.integral_se * r.integral_se);
    r.regime = gk_regime(lambda, alpha_used, r.m);
    return r;
}

std::string GKReport::to_json() const {
    nlohmann::json j;
    j["m"] = m;
    j["lambda"] = lambda;
    j["rho"] = rho;
    j["palm_flux"] = palm;
    j["palm_flux_se"] = palm_se;
    j["integral"] = integral;
    j["integral_se"] = integral_se;
    j["integral_normalized"] = integral_normalized;
    j["half_p_abar_ref"] = half_p_abar_ref;
    j["half_p_abar_ref_se"] = half_p_abar_ref_se;
    j["bracket"] = bracket;
    j["bracket_se"] = bracket_se;
    j["reconstructed_half_p_abar"] = reconstructed;
    j["reconstructed_se"] = reconstructed_se;
    j["regime"] = regime;
    j["alpha_used"] = alpha_used;
    return j.dump(2);
}

} // namespace bulkdiff
