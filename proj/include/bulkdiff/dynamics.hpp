#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "bulkdiff/coefficient.hpp"
#include "bulkdiff/configuration.hpp"
#include "bulkdiff/grid.hpp"
#include "bulkdiff/pde.hpp"
#include "bulkdiff/stats.hpp"

namespace bulkdiff {

enum class ChainScheme { MetropolisGaussian, PlainEuler };

/// Particle chain on a torus. One sweep visits every particle in a uniformly
/// random permutation; each particle proposes a Gaussian displacement with
/// per-axis variance a_kk(mu, x) dt frozen at proposal time and accepts with
/// the ratio of wrapped proposal densities, which makes the sweep kernel
/// exactly reversible for the uniform (Poisson-conditional) law. The plain
/// Euler scheme skips the accept step and is biased at finite dt.
struct ChainParams {
    double dt = 0.05;
    ChainScheme scheme = ChainScheme::MetropolisGaussian;
    Domain torus = Domain::torus(1, 27.0);
    CoefficientModel model;
    double rho = 1.0;

    void validate() const;
};

/// Advances the configuration by one sweep (time dt).
void chain_sweep(Configuration& mu, const ChainParams& params, RandomStream& rng);

/// Wrapped (image-summed) Gaussian density on a circle of circumference side.
double wrapped_normal_pdf(double delta, double variance, double side);

struct Trajectory {
    Configuration initial;
    std::vector<std::pair<double, Configuration>> snapshots;
    std::uint64_t seed = 0;
};

/// Snapshots at the requested (sorted) times, rounded to sweep boundaries.
Trajectory simulate(const Configuration& initial, const ChainParams& params,
                    const std::vector<double>& times, RandomStream rng,
                    std::uint64_t seed_label = 0);

/// Centered, diffusively rescaled linear statistic: the profile f lives on a
/// torus of side L and the configuration on the torus of side scale * L.
double fluctuation_field(const Configuration& mu, const GridFunction& f, double rho,
                         double scale = 1.0);

struct CorrelationEstimate {
    double t = 0.0;
    double s = 0.0;
    double estimate = 0.0;
    double std_error = 0.0;
    std::size_t replicas = 0;
    double prediction = 0.0;
    double prediction_error = 0.0;
    double discrepancy = 0.0; // estimate - prediction
};

/// E[Y_t(f) Y_s(g)] over independent equilibrium replicas, with the kernel
/// prediction for the time gap attached.
CorrelationEstimate two_point_estimate(const GridFunction& f, const GridFunction& g,
                                       double t, double s, const ChainParams& params,
                                       std::size_t replicas, std::uint64_t seed,
                                       const HeatKernel& hk, int workers = 1);

struct SemigroupDiff {
    double value = 0.0;     // estimated L2 distance, clipped at zero
    double value_se = 0.0;  // delta-method standard error of the distance
    double squared = 0.0;   // three-term combination before clipping
    double squared_se = 0.0;
};

/// || (P_t - Pbar_t) F ||_{L2} for the centered statistic of f, through the
/// three-term polarization: the chain supplies the stationary correlations
/// and the kernel supplies the homogenized terms, on common random numbers.
SemigroupDiff semigroup_diff(const GridFunction& f, double t, const ChainParams& params,
                             std::size_t replicas, std::uint64_t seed, const HeatKernel& hk,
                             int workers = 1);

} // namespace bulkdiff
