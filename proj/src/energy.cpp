#include "bulkdiff/energy.hpp"

#include <cmath>
#include <stdexcept>

#include "bulkdiff/parallel.hpp"

namespace bulkdiff {

Configuration SampleSpec::draw(std::size_t index) const {
    RandomStream rs = stream.split(index);
    if (!max_points) return sample_poisson(window, rho, rs);
    for (long attempt = 0; attempt < 2000000; ++attempt) {
        Configuration mu = sample_poisson(window, rho, rs);
        if (mu.size() <= static_cast<std::size_t>(*max_points)) return mu;
    }
    throw std::runtime_error("SampleSpec: truncated-occupancy rejection never accepted; "
                             "the occupancy cap is too tight for this intensity");
}

SampleSpec cell_samples(const Domain& cell, double rho, std::size_t count,
                        const RandomStream& stream, std::optional<int> max_points) {
    SampleSpec s;
    s.window = cell.geometry() == Geometry::Torus ? cell : cell.padded(1.0);
    s.rho = rho;
    s.count = count;
    s.stream = stream;
    s.max_points = max_points;
    return s;
}

EstimatorResult mc_estimate(const SampleSpec& spec,
                            const std::function<double(const Configuration&)>& kernel,
                            int workers) {
    RunningStats total;
    ordered_block_reduce<RunningStats>(
        spec.count, 64, workers,
        [&](std::size_t i, RunningStats& part) { part.add(kernel(spec.draw(i))); },
        [&](RunningStats&& part) { total.merge(part); });
    return total.result();
}

namespace {

/// Caches per-configuration neighbor counts for one functional so repeated
/// per-particle gradient queries stay O(active features).
class GradEvaluator {
public:
    explicit GradEvaluator(const FeatureFunctional& f) : f_(f) {}

    void bind(const Configuration& mu) { f_.basis().neighbor_counts(mu, counts_); }

    Vec grad(const Configuration& mu, std::size_t i) {
        Vec g;
        const Domain& dom = mu.domain();
        if (!f_.basis().cell_contains(dom, mu.point(i))) return g;
        if (f_.affine_slope())
            for (int k = 0; k < dom.dimension(); ++k) g[k] = (*f_.affine_slope())[k];
        act_.clear();
        f_.basis().collect(mu, i, counts_, act_);
        const auto& c = f_.coeffs();
        for (const auto& af : act_)
            for (int k = 0; k < dom.dimension(); ++k)
                g[k] += c[static_cast<std::size_t>(af.index)] * af.grad[k];
        return g;
    }

private:
    const FeatureFunctional& f_;
    std::vector<std::vector<int>> counts_;
    std::vector<ActiveFeature> act_;
};

bool in_cell(const Domain& ambient, const Domain& cell, const Vec& x) {
    const Vec r = ambient.displacement(x, cell.center());
    for (int k = 0; k < cell.dimension(); ++k)
        if (r[k] <= -cell.side() / 2 || r[k] >= cell.side() / 2) return false;
    return true;
}

} // namespace

EnergyEstimate dirichlet_energy(const FeatureFunctional& f, const FeatureFunctional& g,
                                const CoefficientModel& model, const Domain& cell,
                                double rho, std::size_t samples, const RandomStream& stream,
                                bool normalize, int workers) {
    if (samples == 0) throw std::invalid_argument("dirichlet_energy: sample count is zero");
    const SampleSpec spec = cell_samples(cell, rho, samples, stream);
    const double norm = normalize ? 1.0 / (rho * cell.volume()) : 1.0;
    const bool same = &f == &g;

    auto kernel = [&](const Configuration& mu) {
        GradEvaluator ef(f);
        GradEvaluator eg(g);
        ef.bind(mu);
        if (!same) eg.bind(mu);
        double s = 0.0;
        for (std::size_t i = 0; i < mu.size(); ++i) {
            if (!in_cell(mu.domain(), cell, mu.point(i))) continue;
            const Vec gf = ef.grad(mu, i);
            const Vec gg = same ? gf : eg.grad(mu, i);
            const SymMatrix a = model.evaluate(mu, mu.point(i));
            s += 0.5 * a.bilinear(gf, gg);
        }
        return norm * s;
    };

    const EstimatorResult r = mc_estimate(spec, kernel, workers);
    EnergyEstimate e;
    e.value = r.value;
    e.std_error = r.std_error;
    e.samples = r.samples;
    e.normalized = normalize;
    return e;
}

H1Norms h1_norms(const FeatureFunctional& f, const Domain& cell, double rho,
                 std::size_t samples, const RandomStream& stream) {
    if (samples == 0) throw std::invalid_argument("h1_norms: sample count is zero");
    SampleSpec spec;
    spec.window = cell;
    spec.rho = rho;
    spec.count = samples;
    spec.stream = stream;

    RunningStats val, sq, grad2;
    GradEvaluator ev(f);
    for (std::size_t s = 0; s < samples; ++s) {
        const Configuration mu = spec.draw(s);
        const double v = f.evaluate(mu);
        val.add(v);
        sq.add(v * v);
        ev.bind(mu);
        double ge = 0.0;
        for (std::size_t i = 0; i < mu.size(); ++i) {
            const Vec g = ev.grad(mu, i);
            for (int k = 0; k < cell.dimension(); ++k) ge += g[k] * g[k];
        }
        grad2.add(ge);
    }
    H1Norms n;
    n.samples = samples;
    n.l2 = std::sqrt(std::max(0.0, sq.mean()));
    n.h1 = std::sqrt(std::max(0.0, sq.mean() + grad2.mean()));
    n.variance = val.variance();
    n.grad_energy = grad2.mean();
    const double vol = cell.volume();
    const double scale = std::pow(vol, -2.0 / cell.dimension());
    n.normalized = std::sqrt(std::max(0.0, scale * sq.mean() + grad2.mean()));
    n.normalized_centered = std::sqrt(std::max(0.0, scale * n.variance + grad2.mean()));
    return n;
}

double poincare_ratio(const FeatureFunctional& f, const Domain& cell, double rho,
                      std::size_t samples, const RandomStream& stream) {
    if (samples == 0) throw std::invalid_argument("poincare_ratio: sample count is zero");
    SampleSpec spec;
    spec.window = cell;
    spec.rho = rho;
    spec.count = samples;
    spec.stream = stream;

    RunningStats val, grad2;
    GradEvaluator ev(f);
    for (std::size_t s = 0; s < samples; ++s) {
        const Configuration mu = spec.draw(s);
        val.add(f.evaluate(mu));
        ev.bind(mu);
        double ge = 0.0;
        for (std::size_t i = 0; i < mu.size(); ++i) {
            const Vec g = ev.grad(mu, i);
            for (int k = 0; k < cell.dimension(); ++k) ge += g[k] * g[k];
        }
        grad2.add(ge);
    }
    const double var = val.variance();
    const double denom = cell.diameter() * cell.diameter() * grad2.mean();
    if (denom <= 0.0) {
        if (var <= 1e-14) return std::nan("");
        throw std::runtime_error("poincare_ratio: zero gradient energy with nonzero variance");
    }
    return var / denom;
}

namespace {

struct AssemblyPartial {
    Eigen::MatrixXd stiff;
    Eigen::MatrixXd current;
    Eigen::MatrixXd slope;
    Eigen::MatrixXd mass;
    SymMatrix flux;
    double count_sum = 0.0;
    bool init = false;
};

} // namespace

CellMatrices assemble_cell_matrices(const FeatureBasis& basis, const CoefficientModel& model,
                                    const SampleSpec& spec, bool with_mass, int workers) {
    if (spec.count == 0)
        throw std::invalid_argument("assemble_cell_matrices: sample count is zero");
    const int K = basis.size();
    const int d = basis.cell().dimension();
    const Domain cell = basis.cell();

    CellMatrices out;
    out.stiff = Eigen::MatrixXd::Zero(K, K);
    out.current_axes = Eigen::MatrixXd::Zero(d, K);
    out.slope_mean = Eigen::MatrixXd::Zero(d, K);
    out.flux.d = d;
    if (with_mass) out.mass = Eigen::MatrixXd::Zero(K, K);
    out.samples = spec.count;

    auto process = [&](std::size_t s, AssemblyPartial& part) {
        if (!part.init) {
            part.stiff = Eigen::MatrixXd::Zero(K, K);
            part.current = Eigen::MatrixXd::Zero(d, K);
            part.slope = Eigen::MatrixXd::Zero(d, K);
            if (with_mass) part.mass = Eigen::MatrixXd::Zero(K, K);
            part.flux.d = d;
            part.init = true;
        }
        const Configuration mu = spec.draw(s);
        std::vector<std::vector<int>> counts;
        basis.neighbor_counts(mu, counts);
        std::vector<ActiveFeature> act;
        std::vector<double> vals;
        std::vector<int> touched;
        if (with_mass) vals.assign(static_cast<std::size_t>(K), 0.0);

        for (std::size_t i = 0; i < mu.size(); ++i) {
            if (!in_cell(mu.domain(), cell, mu.point(i))) continue;
            part.count_sum += 1.0;
            act.clear();
            basis.collect(mu, i, counts, act);
            const SymMatrix a = model.evaluate(mu, mu.point(i));
            for (int r = 0; r < d; ++r)
                for (int c = 0; c < d; ++c) part.flux.at(r, c) += 0.5 * a(r, c);
            for (const auto& af : act) {
                const Vec ag = a.apply(af.grad);
                for (int k = 0; k < d; ++k) {
                    part.current(k, af.index) += 0.5 * ag[k];
                    part.slope(k, af.index) += af.grad[k];
                }
                if (with_mass) {
                    if (vals[static_cast<std::size_t>(af.index)] == 0.0)
                        touched.push_back(af.index);
                    vals[static_cast<std::size_t>(af.index)] += af.value;
                }
            }
            for (std::size_t u = 0; u < act.size(); ++u) {
                const Vec au = a.apply(act[u].grad);
                for (std::size_t v = 0; v < act.size(); ++v) {
                    part.stiff(act[u].index, act[v].index) +=
                        0.5 * (au[0] * act[v].grad[0] + au[1] * act[v].grad[1]);
                }
            }
        }
        if (with_mass) {
            for (int ju : touched)
                for (int jv : touched)
                    part.mass(ju, jv) +=
                        vals[static_cast<std::size_t>(ju)] * vals[static_cast<std::size_t>(jv)];
        }
    };

    double count_sum = 0.0;
    ordered_block_reduce<AssemblyPartial>(
        spec.count, 64, workers, process, [&](AssemblyPartial&& part) {
            if (!part.init) return;
            out.stiff += part.stiff;
            out.current_axes += part.current;
            out.slope_mean += part.slope;
            if (with_mass) out.mass += part.mass;
            count_sum += part.count_sum;
            out.flux += part.flux;
        });

    const double inv = 1.0 / static_cast<double>(spec.count);
    out.stiff *= inv;
    out.current_axes *= inv;
    out.slope_mean *= inv;
    if (with_mass) out.mass *= inv;
    out.flux = out.flux.scaled(inv);
    out.mean_count = count_sum * inv;
    return out;
}

EstimatorResult cell_objective_estimate(const FeatureBasis& basis,
                                        const std::vector<double>& coeffs,
                                        std::optional<Vec> affine_slope, const Vec& direction,
                                        CellObjective kind, const CoefficientModel& model,
                                        const SampleSpec& spec, double normalization,
                                        int workers) {
    if (spec.count == 0)
        throw std::invalid_argument("cell_objective_estimate: sample count is zero");
    const Domain cell = basis.cell();
    const int d = cell.dimension();

    auto kernel = [&](const Configuration& mu) {
        std::vector<std::vector<int>> counts;
        basis.neighbor_counts(mu, counts);
        std::vector<ActiveFeature> act;
        double s = 0.0;
        for (std::size_t i = 0; i < mu.size(); ++i) {
            if (!in_cell(mu.domain(), cell, mu.point(i))) continue;
            Vec g;
            if (affine_slope)
                for (int k = 0; k < d; ++k) g[k] = (*affine_slope)[k];
            act.clear();
            basis.collect(mu, i, counts, act);
            for (const auto& af : act)
                for (int k = 0; k < d; ++k)
                    g[k] += coeffs[static_cast<std::size_t>(af.index)] * af.grad[k];
            const SymMatrix a = model.evaluate(mu, mu.point(i));
            if (kind == CellObjective::Nu) {
                s += 0.5 * a.quad(g);
            } else {
                double qg = 0.0;
                for (int k = 0; k < d; ++k) qg += direction[k] * g[k];
                s += qg - 0.5 * a.quad(g);
            }
        }
        return normalization * s;
    };

    return mc_estimate(spec, kernel, workers);
}

} // namespace bulkdiff
