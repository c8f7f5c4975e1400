#pragma once

#include <string>

#include "bulkdiff/cell.hpp"
#include "bulkdiff/energy.hpp"

namespace bulkdiff {

/// Integrated particle current over a cubic cell in direction p, realized as
/// the linear form v -> E[sum_{x in cell} -1/2 p . a grad v] on zero-boundary
/// functionals.
struct CurrentFunctional {
    Vec direction = vec1(1.0);
    Domain cell = Domain::cube(1, 0);
    CoefficientModel model;
    double rho = 1.0;
};

/// Pairing <F, v> by direct Monte Carlo over the padded cell window.
EstimatorResult current_apply(const CurrentFunctional& cur, const FeatureFunctional& v,
                              std::size_t samples, std::uint64_t seed, int workers = 1);

/// Same pairing through the corrector energy representation
/// (the form applied to the solved corrector against v).
EstimatorResult current_apply_corrector(const CellSolution& nu_sol,
                                        const FeatureFunctional& v,
                                        const CoefficientModel& model, double rho,
                                        std::size_t samples, std::uint64_t seed,
                                        int workers = 1);

struct GkIntegral {
    EstimatorResult value; // raw expectation E[sum (p.a p - p.a grad U)/2]
    CellSolution resolvent;
};

/// Exponentially weighted time integral of the current correlation, computed
/// through its resolvent characterization; no chain is simulated.
GkIntegral gk_integral_value(const CellProblemSpec& spec, double lambda);

/// 1/2 E[p . a(mu + delta_0) p] by Monte Carlo over the particle-centered law.
EstimatorResult palm_flux(const CoefficientModel& model, double rho, const Vec& p, int d,
                          std::size_t samples, std::uint64_t seed, int workers = 1);

/// Mesoscale for a given resolvent weight: 3^n of order lambda^(-1/(2(1+alpha))),
/// clamped to [0, m].
int gk_mesoscale(double lambda, double alpha, int m);

/// Regime classification of the error bound.
std::string gk_regime(double lambda, double alpha, int m);
double gk_regime_threshold(double alpha, int m); // 3^(-2(1+alpha)m)

struct GKReport {
    int m = 0;
    double lambda = 0.0;
    double rho = 1.0;
    double palm = 0.0;
    double palm_se = 0.0;
    double integral = 0.0;    // raw expectation
    double integral_se = 0.0;
    double integral_normalized = 0.0; // divided by rho |cell|
    double half_p_abar_ref = 0.0;     // reference value of p.abar p / 2
    double half_p_abar_ref_se = 0.0;
    double bracket = 0.0; // ref - palm + normalized integral
    double bracket_se = 0.0;
    double reconstructed = 0.0; // palm - normalized integral (a p.abar p/2 estimate)
    double reconstructed_se = 0.0;
    std::string regime;
    double alpha_used = 0.0;

    std::string to_json() const;
};

/// Assembles the localized transport-coefficient bracket at one (m, lambda),
/// with propagated standard errors and the regime label.
GKReport gk_bracket(const CellProblemSpec& spec, double lambda, double half_p_abar_ref,
                    double ref_se, double alpha_used, std::size_t palm_samples = 0);

} // namespace bulkdiff
