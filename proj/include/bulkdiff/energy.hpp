#pragma once

#include <Eigen/Dense>
#include <functional>
#include <optional>

#include "bulkdiff/coefficient.hpp"
#include "bulkdiff/functional.hpp"
#include "bulkdiff/rng.hpp"
#include "bulkdiff/stats.hpp"

namespace bulkdiff {

/// Monte Carlo energy estimate; `normalized` records whether the value was
/// divided by rho * |cell|.
struct EnergyEstimate {
    double value = 0.0;
    double std_error = 0.0;
    std::size_t samples = 0;
    bool normalized = true;
};

/// How configurations are drawn for an estimate: the sampling window (the
/// cell padded by the interaction radius, or the ambient torus), intensity,
/// sample count, and stream. Setting `max_points` conditions the point
/// process on at most that many points in the window (rejection sampling);
/// this is the regime the low-occupancy grid oracle can integrate exactly.
struct SampleSpec {
    Domain window = Domain::box(1, 1.0);
    double rho = 1.0;
    std::size_t count = 0;
    RandomStream stream;
    std::optional<int> max_points;

    Configuration draw(std::size_t index) const;
};

/// Sampling window for a cell problem: the cell padded by the unit
/// interaction radius (torus cells use the ambient torus itself).
SampleSpec cell_samples(const Domain& cell, double rho, std::size_t count,
                        const RandomStream& stream,
                        std::optional<int> max_points = std::nullopt);

/// Deterministic parallel MC mean of a per-configuration kernel.
EstimatorResult mc_estimate(const SampleSpec& spec,
                            const std::function<double(const Configuration&)>& kernel,
                            int workers = 1);

/// E[(rho|U|)^{-1} sum_{x in U} 1/2 grad f . a grad g] over samples.
/// Symmetric in (f,g) and bilinear in the coefficients.
EnergyEstimate dirichlet_energy(const FeatureFunctional& f, const FeatureFunctional& g,
                                const CoefficientModel& model, const Domain& cell,
                                double rho, std::size_t samples, const RandomStream& stream,
                                bool normalize = true, int workers = 1);

struct H1Norms {
    double l2 = 0.0;        // sqrt E[f^2]
    double h1 = 0.0;        // (E[f^2] + E[int |grad f|^2 dmu])^(1/2)
    double normalized = 0.0; // (|U|^{-2/d} E[f^2] + E[int |grad f|^2 dmu])^(1/2)
    double variance = 0.0;  // Var f (for centered statistics)
    double grad_energy = 0.0; // E[int |grad f|^2 dmu]
    /// normalized norm of f - E[f]: (|U|^{-2/d} Var f + grad_energy)^(1/2)
    double normalized_centered = 0.0;
    std::size_t samples = 0;
};

H1Norms h1_norms(const FeatureFunctional& f, const Domain& cell, double rho,
                 std::size_t samples, const RandomStream& stream);

/// Var(f) / (diam(U)^2 E[int_U |grad f|^2 dmu]); NaN when both sides vanish.
double poincare_ratio(const FeatureFunctional& f, const Domain& cell, double rho,
                      std::size_t samples, const RandomStream& stream);

/// Shared-sample quadratic data of a cell problem over one basis:
/// stiffness    S_jk  = E[sum_x 1/2 grad Bj . a grad Bk],
/// current_axes C_kj  = E[sum_x 1/2 (a e_k) . grad Bj]  (so the affine current
///                      for slope p is p^T C),
/// flux               = E[sum_x 1/2 a]  (affine-affine energy as a matrix),
/// slope_mean   G_kj  = E[sum_x e_k . grad Bj],
/// optionally mass M_jk = E[Bj Bk].
/// All entries are raw sample means, not normalized by rho |cell|.
struct CellMatrices {
    Eigen::MatrixXd stiff;
    Eigen::MatrixXd current_axes; // d x K
    Eigen::MatrixXd slope_mean;   // d x K
    SymMatrix flux;
    double mean_count = 0.0; // mean number of points in the cell
    Eigen::MatrixXd mass;    // empty unless requested
    std::size_t samples = 0;
};

CellMatrices assemble_cell_matrices(const FeatureBasis& basis, const CoefficientModel& model,
                                    const SampleSpec& samples, bool with_mass,
                                    int workers = 1);

/// Per-sample energy of a fixed candidate v = (affine p +) sum c_j B_j:
///   kind Nu:        sum_{x in U} 1/2 grad v . a grad v
///   kind NuStar:    sum_{x in U} (-1/2 grad v . a grad v + q . grad v)
/// used for out-of-sample value estimates that preserve bound directions.
enum class CellObjective { Nu, NuStar };

EstimatorResult cell_objective_estimate(const FeatureBasis& basis,
                                        const std::vector<double>& coeffs,
                                        std::optional<Vec> affine_slope, const Vec& direction,
                                        CellObjective kind, const CoefficientModel& model,
                                        const SampleSpec& samples, double normalization,
                                        int workers = 1);

} // namespace bulkdiff
