#include "bulkdiff/dynamics.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "bulkdiff/parallel.hpp"

namespace bulkdiff {

void ChainParams::validate() const {
    if (!(dt > 0.0)) throw std::invalid_argument("ChainParams: dt must be positive");
    if (torus.geometry() != Geometry::Torus)
        throw std::invalid_argument("ChainParams: bulk dynamics runs on a torus");
    if (!(rho >= 0.0)) throw std::invalid_argument("ChainParams: negative intensity");
}

double wrapped_normal_pdf(double delta, double variance, double side) {
    const double sigma = std::sqrt(variance);
    const int images = std::max(1, static_cast<int>(std::ceil(8.0 * sigma / side)));
    double s = 0.0;
    for (int k = -images; k <= images; ++k) {
        const double u = delta + k * side;
        s += std::exp(-u * u / (2.0 * variance));
    }
    return s / std::sqrt(2.0 * M_PI * variance);
}

void chain_sweep(Configuration& mu, const ChainParams& params, RandomStream& rng) {
    const int d = params.torus.dimension();
    const double side = params.torus.side();
    const auto order = rng.permutation(static_cast<std::uint32_t>(mu.size()));

    for (std::uint32_t idx : order) {
        const Vec x = mu.point(idx);
        const SymMatrix a = params.model.evaluate(mu, x);
        Vec xp = x;
        Vec delta;
        for (int k = 0; k < d; ++k) {
            delta[k] = std::sqrt(a(k, k) * params.dt) * rng.normal();
            xp[k] = x[k] + delta[k];
        }
        xp = params.torus.canonical(xp);

        if (params.scheme == ChainScheme::PlainEuler) {
            mu.set_point(idx, xp);
            continue;
        }

        // reverse-move coefficient: the configuration with the particle moved
        mu.set_point(idx, xp);
        const SymMatrix ap = params.model.evaluate(mu, xp);
        double log_ratio = 0.0;
        for (int k = 0; k < d; ++k) {
            const double fwd = wrapped_normal_pdf(delta[k], a(k, k) * params.dt, side);
            const double rev = wrapped_normal_pdf(delta[k], ap(k, k) * params.dt, side);
            log_ratio += std::log(rev) - std::log(fwd);
        }
        if (log_ratio >= 0.0 || std::log(rng.uniform()) < log_ratio) {
            // accepted; particle already moved
        } else {
            mu.set_point(idx, x);
        }
    }
}

Trajectory simulate(const Configuration& initial, const ChainParams& params,
                    const std::vector<double>& times, RandomStream rng,
                    std::uint64_t seed_label) {
    params.validate();
    for (std::size_t i = 1; i < times.size(); ++i)
        if (times[i] < times[i - 1])
            throw std::invalid_argument("simulate: times must be sorted");

    Trajectory out;
    out.initial = initial;
    out.seed = seed_label;
    Configuration state = initial;
    long done = 0;
    for (double t : times) {
        const long target = std::lround(t / params.dt);
        for (; done < target; ++done) chain_sweep(state, params, rng);
        out.snapshots.emplace_back(static_cast<double>(done) * params.dt, state);
    }
    return out;
}

double fluctuation_field(const Configuration& mu, const GridFunction& f, double rho,
                         double scale) {
    if (scale < 1.0) throw std::invalid_argument("fluctuation_field: scale must be >= 1");
    const Domain& fd = f.domain();
    if (fd.geometry() != Geometry::Torus)
        throw std::invalid_argument("fluctuation_field: profile must live on a torus");
    const int d = fd.dimension();
    const double expected_side = scale * fd.side();
    if (std::abs(mu.domain().side() - expected_side) > 1e-9 * expected_side)
        throw std::invalid_argument("fluctuation_field: configuration torus must have side "
                                    "scale * profile side");
    double s = 0.0;
    for (const auto& p : mu.points()) {
        Vec y;
        for (int k = 0; k < d; ++k) y[k] = p[k] / scale;
        s += f.value(y);
    }
    const double mean = rho * std::pow(scale, d) * f.integral();
    return (s - mean) / std::pow(scale, d / 2.0);
}

CorrelationEstimate two_point_estimate(const GridFunction& f, const GridFunction& g,
                                       double t, double s, const ChainParams& params,
                                       std::size_t replicas, std::uint64_t seed,
                                       const HeatKernel& hk, int workers) {
    params.validate();
    if (replicas == 0) throw std::invalid_argument("two_point_estimate: no replicas");
    if (!(t >= s && s >= 0.0))
        throw std::invalid_argument("two_point_estimate: needs t >= s >= 0");

    const RandomStream root(seed);
    RunningStats acc;
    ordered_block_reduce<RunningStats>(
        replicas, 16, workers,
        [&](std::size_t r, RunningStats& part) {
            RandomStream rs = root.split(r);
            Configuration mu0 = sample_poisson(params.torus, params.rho, rs);
            const Trajectory traj = simulate(mu0, params, {s, t}, rs, seed);
            const double ys = fluctuation_field(traj.snapshots[0].second, g, params.rho);
            const double yt = fluctuation_field(traj.snapshots[1].second, f, params.rho);
            part.add(ys * yt);
        },
        [&](RunningStats&& part) { acc.merge(part); });

    CorrelationEstimate out;
    out.t = t;
    out.s = s;
    out.estimate = acc.mean();
    out.std_error = acc.std_error();
    out.replicas = replicas;
    const TwoPointPrediction pred = two_point_prediction(f, g, t - s, hk, params.rho);
    out.prediction = pred.value;
    out.prediction_error = pred.quadrature_error;
    out.discrepancy = out.estimate - out.prediction;
    return out;
}

SemigroupDiff semigroup_diff(const GridFunction& f, double t, const ChainParams& params,
                             std::size_t replicas, std::uint64_t seed, const HeatKernel& hk,
                             int workers) {
    params.validate();
    if (replicas == 0) throw std::invalid_argument("semigroup_diff: no replicas");
    if (!(t > 0.0)) throw std::invalid_argument("semigroup_diff: time must be positive");

    const GridFunction f_t = apply_heat_semigroup(f, t, hk).value;
    // homogenized term <F, Pbar_{2t} F> = rho int f (Psi_2t * f)
    const double homog = two_point_prediction(f, f, 2.0 * t, hk, params.rho).value;

    const RandomStream root(seed);
    RunningStats acc;
    ordered_block_reduce<RunningStats>(
        replicas, 16, workers,
        [&](std::size_t r, RunningStats& part) {
            RandomStream rs = root.split(r);
            Configuration mu0 = sample_poisson(params.torus, params.rho, rs);
            const double y0 = fluctuation_field(mu0, f, params.rho);
            const double y0conv = fluctuation_field(mu0, f_t, params.rho);
            const Trajectory traj = simulate(mu0, params, {t, 2.0 * t}, rs, seed);
            const double yt = fluctuation_field(traj.snapshots[0].second, f, params.rho);
            const double y2t = fluctuation_field(traj.snapshots[1].second, f, params.rho);
            part.add(y0 * y2t - 2.0 * y0conv * yt);
        },
        [&](RunningStats&& part) { acc.merge(part); });

    SemigroupDiff out;
    out.squared = acc.mean() + homog;
    out.squared_se = acc.std_error();
    if (out.squared > 0.0) {
        out.value = std::sqrt(out.squared);
        out.value_se = out.squared_se / (2.0 * out.value);
    } else {
        out.value = 0.0;
        out.value_se = std::sqrt(std::max(out.squared_se, 0.0));
    }
    return out;
}

} // namespace bulkdiff
