#pragma once

#include <optional>
#include <vector>

#include "bulkdiff/cell.hpp"
#include "bulkdiff/coefficient.hpp"
#include "bulkdiff/configuration.hpp"
#include "bulkdiff/grid.hpp"

namespace bulkdiff {

/// Gaussian transition density of the constant-coefficient diffusion with
/// matrix abar: covariance abar * t.
class HeatKernel {
public:
    HeatKernel(SymMatrix abar, int d);
    double density(double t, const Vec& x) const;
    const SymMatrix& matrix() const { return abar_; }
    int dimension() const { return d_; }

private:
    SymMatrix abar_;
    SymMatrix inv_;
    double det_;
    int d_;
};

struct ConvolutionResult {
    GridFunction value;
    /// Kernel mass missing from the window (zero-extension truncation on
    /// boxes; image-sum cutoff on tori, usually at machine precision).
    double truncation_error = 0.0;
};

/// Kernel smoothing of a grid profile: periodic (image-summed) on tori,
/// zero-extended on boxes. t = 0 returns the input.
ConvolutionResult apply_heat_semigroup(const GridFunction& g, double t, const HeatKernel& hk);

struct DirichletSolution {
    GridFunction u;
    double residual_rel = 0.0; // discrete residual over the source norm
    double h1_seminorm = 0.0;
    double h2_seminorm = 0.0;
    int iterations = 0;
};

/// Second-order finite differences for the constant-coefficient problem
/// -div(abar grad u) = f with zero boundary values on a box.
DirichletSolution solve_homog_dirichlet(const GridFunction& f, const SymMatrix& abar);

/// Centered linear statistic of a Euclidean profile:
/// mu -> sum_i g(x_i) - rho int g. Zero mean under the matching point process.
class LiftedStatistic {
public:
    LiftedStatistic() = default;
    LiftedStatistic(GridFunction g, double rho);

    /// Lift for the source-problem pipeline: requires int g = 0 (within the
    /// quadrature tolerance) and a zero-boundary grid.
    static LiftedStatistic centered_source_lift(GridFunction g, double rho);

    double evaluate(const Configuration& mu) const;
    Vec particle_gradient(const Configuration& mu, std::size_t i) const;
    const GridFunction& profile() const { return g_; }
    double rho() const { return rho_; }
    double offset() const { return offset_; }
    bool zero_boundary() const { return g_.zero_boundary(); }

private:
    GridFunction g_;
    double rho_ = 1.0;
    double offset_ = 0.0; // rho int g
};

struct TwoPointPrediction {
    double value = 0.0;
    double quadrature_error = 0.0;
};

/// rho int f(x) Psi_{dt}(x-y) g(y) dx dy; at dt = 0 this is rho int f g.
TwoPointPrediction two_point_prediction(const GridFunction& f, const GridFunction& g,
                                        double dt, const HeatKernel& hk, double rho);

/// Homogenized lift plus cell-averaged slopes times per-cell correctors.
class TwoScaleExpansion {
public:
    struct Term {
        double weight;
        FeatureFunctional corrector;
    };

    double evaluate(const Configuration& mu) const;
    Vec particle_gradient(const Configuration& mu, std::size_t i) const;
    const LiftedStatistic& homogenized() const { return lift_; }
    int mesoscale() const { return n_; }
    std::size_t term_count() const { return terms_.size(); }
    const std::vector<Term>& terms() const { return terms_; }
    bool zero_boundary() const { return lift_.zero_boundary(); }

    friend TwoScaleExpansion build_two_scale(const GridFunction&, double, int,
                                             const std::vector<CellSolution>&);

private:
    LiftedStatistic lift_;
    std::vector<Term> terms_;
    int n_ = 0;
};

/// Assembles the expansion over the scale-n mesoscopic cells of the profile's
/// domain. correctors_per_axis must hold one solved corrector per axis
/// direction on the centered scale-n cell; translated copies serve the cells.
TwoScaleExpansion build_two_scale(const GridFunction& homogenized, double rho, int n,
                                  const std::vector<CellSolution>& correctors_per_axis);

/// Default mesoscale for the source-problem expansion: floor(m / (1 + alpha)).
int elliptic_mesoscale(int m, double alpha);

struct ParabolicParameters {
    double tau = 0.0; // regularization time t^(3/4)
    int n = 0;        // mesoscale with 3^n of order t^(1/16)
    double beta = 0.0; // reported rate exponent min(alpha,1)/16
};
ParabolicParameters parabolic_parameters(double t, double alpha);

} // namespace bulkdiff
