#pragma once

#include <Eigen/Dense>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "bulkdiff/energy.hpp"

namespace bulkdiff {

enum class CellProblemKind { Nu, NuStar, Resolvent };
enum class BoundDirection { Upper, Lower, None };

/// One finite-volume variational problem: minimize the Dirichlet energy over
/// affine-plus-zero-boundary candidates (Nu), maximize the dual objective
/// over interior-measurable candidates (NuStar), or solve the lambda-weighted
/// resolvent system on the Nu class.
struct CellProblemSpec {
    Domain cell = Domain::cube(1, 0);
    double rho = 1.0;
    CoefficientModel model;
    Vec direction = vec1(1.0);
    BasisSpec basis;                 // zero_boundary is forced per problem kind
    std::size_t samples = 4000;      // quadratic-form sample count
    std::size_t eval_samples = 0;    // 0: same as samples
    std::uint64_t seed = 1;
    double ridge_rel = 1e-10;
    std::optional<int> max_points;   // truncated-occupancy companion mode
    int workers = 1;
};

struct CellSolution {
    CellProblemKind kind = CellProblemKind::Nu;
    double value = 0.0;       // normalized objective at the solution,
                              // estimated on an independent evaluation set
    double std_error = 0.0;
    double value_insample = 0.0;
    BoundDirection bound = BoundDirection::None;
    double lambda = 0.0;
    Vec direction;
    std::vector<double> coeffs;
    std::shared_ptr<const FeatureBasis> basis;
    double corrector_energy = 0.0; // normalized energy of the non-affine part
    double mean_count = 0.0;
    std::size_t samples = 0;
    std::uint64_t seed = 0;

    /// The solved functional: affine + features for Nu/Resolvent (the
    /// corrector is the feature part alone), features only for NuStar.
    FeatureFunctional functional() const;
    FeatureFunctional corrector() const;

    std::string to_json() const;
};

/// Shared-sample quadratic systems for one cell: assembles the Gram data once
/// and solves for any direction (and any lambda in resolvent mode)
/// deterministically given the spec seed.
class CellSystem {
public:
    CellSystem(const CellProblemSpec& spec, CellProblemKind kind, bool with_mass = false);

    CellSolution solve(const Vec& direction, double lambda = 0.0) const;

    const FeatureBasis& basis() const { return *basis_; }
    const CellProblemSpec& spec() const { return spec_; }
    double normalization() const { return norm_; }
    /// In-sample dual matrix (NuStar): q . M q = 2 nu*(q) on the solve set.
    SymMatrix insample_dual_matrix() const;
    const SampleSpec& solve_samples() const { return solve_; }
    const SampleSpec& eval_samples() const { return eval_; }

private:
    CellProblemSpec spec_;
    CellProblemKind kind_;
    std::shared_ptr<FeatureBasis> basis_;
    SampleSpec solve_;
    SampleSpec eval_;
    double norm_ = 1.0;
    CellMatrices mats_;
    Eigen::MatrixXd stiff_ridged_;
    Eigen::LDLT<Eigen::MatrixXd> stiff_factor_; // used when K <= dense_limit
    bool use_dense_ = true;

    Eigen::VectorXd solve_system(const Eigen::MatrixXd& lhs, const Eigen::VectorXd& rhs) const;
};

CellSolution solve_nu(const CellProblemSpec& spec);
CellSolution solve_nu_star(const CellProblemSpec& spec);
CellSolution solve_resolvent(const CellProblemSpec& spec, double lambda);

struct MatrixEstimate {
    SymMatrix matrix;
    SymMatrix std_err;
};

struct DualityGap {
    double j = 0.0;          // nu + nu* - p.q combination
    double j_std_error = 0.0;
    double j_quadratic = 0.0; // energy of the corrector difference
    double j_quadratic_se = 0.0;
};

struct AbarEstimate {
    int m = 0;
    double rho = 1.0;
    MatrixEstimate abar;       // polarization of nu values (upper-type bound)
    MatrixEstimate abar_star;  // inverse of the dual matrix (ge the true one)
    std::vector<double> nu_values;       // per direction e_i
    std::vector<double> nu_std_errors;
    std::vector<DualityGap> gaps;        // per axis direction
    std::string to_json() const;
};

/// Runs nu and nu* for axis directions (and the mixed direction in d=2),
/// recovers both matrices by polarization, and computes the per-axis duality
/// gaps at the matched dual directions.
AbarEstimate assemble_abar(const CellProblemSpec& spec);

/// Energy of the corrector difference at matched directions
/// (cross-validation route for the duality gap).
EstimatorResult gap_quadratic_form(const CellSolution& nu_sol, const CellSolution& star_sol,
                                   const CoefficientModel& model, const SampleSpec& samples,
                                   double normalization, int workers = 1);

/// Duality gap from a matched pair of solutions: q must be the dual direction
/// a*_hat e_i used for star_sol.
DualityGap duality_gap(const CellSolution& nu_sol, const CellSolution& star_sol);

/// Monte Carlo covariance of the local corrector gradient energies over two
/// scale-n cells centered at z and zp; rejects overlapping distinct cells.
CovarianceEstimate corrector_covariance(const CellProblemSpec& base, int n, const Vec& z,
                                        const Vec& zp, int axis);

struct ExtrapolationResult {
    bool accepted = false;
    double alpha_hat = 0.0;
    double fit_residual = 0.0;
    SymMatrix limit;
    std::string note;
    std::vector<int> m_values;
    std::vector<SymMatrix> table;
    std::string to_json() const;
};

/// Fits log |abar(m) - abar(m+1)| against m and extrapolates the geometric
/// tail. Differences at the noise floor leave alpha undefined and return the
/// last table entry; non-monotone differences beyond noise refuse to
/// extrapolate and return the raw table.
ExtrapolationResult extrapolate_abar(const std::vector<AbarEstimate>& estimates);

} // namespace bulkdiff
