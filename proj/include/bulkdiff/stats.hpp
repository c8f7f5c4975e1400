#pragma once

#include <cstddef>
#include <cstdint>
#include <cmath>
#include <vector>

namespace bulkdiff {

/// Monte Carlo scalar estimate: value, standard error of the mean, sample
/// count, and the seed that produced it.
struct EstimatorResult {
    double value = 0.0;
    double std_error = 0.0;
    std::size_t samples = 0;
    std::uint64_t seed = 0;

    bool within(double target, double n_se) const {
        return std::abs(value - target) <= n_se * std_error;
    }
};

/// Streaming mean/variance accumulator (Welford).
class RunningStats {
public:
    void add(double x) {
        ++n_;
        const double d = x - mean_;
        mean_ += d / static_cast<double>(n_);
        m2_ += d * (x - mean_);
    }
    std::size_t count() const { return n_; }
    double mean() const { return mean_; }
    double variance() const { return n_ > 1 ? m2_ / static_cast<double>(n_ - 1) : 0.0; }
    double std_error() const {
        return n_ > 1 ? std::sqrt(variance() / static_cast<double>(n_)) : 0.0;
    }
    EstimatorResult result(std::uint64_t seed = 0) const {
        return EstimatorResult{mean(), std_error(), n_, seed};
    }
    /// Merge two accumulators (deterministic given operand order).
    void merge(const RunningStats& o);

private:
    std::size_t n_ = 0;
    double mean_ = 0.0;
    double m2_ = 0.0;
};

double mean_of(const std::vector<double>& xs);
double std_error_of(const std::vector<double>& xs);

/// Covariance of paired samples plus the standard error of the covariance
/// estimate itself.
struct CovarianceEstimate {
    double cov = 0.0;
    double std_error = 0.0;
    std::size_t samples = 0;
};
CovarianceEstimate covariance_of(const std::vector<double>& xs, const std::vector<double>& ys);

/// Regularized incomplete gamma functions P(a,x), Q(a,x).
double gamma_p(double a, double x);
double gamma_q(double a, double x);

/// Survival function of the chi-square distribution with df degrees of freedom.
double chi_square_sf(double stat, double df);

struct GofResult {
    double statistic = 0.0;
    double df = 0.0;
    double p_value = 1.0;
};

/// Chi-square goodness of fit of integer counts against a Poisson law.
/// Bins with expected count below 5 are pooled into their neighbors.
GofResult poisson_chi_square(const std::vector<std::uint64_t>& counts, double mean);

/// One-sample Kolmogorov-Smirnov test; cdf is evaluated at each sample.
GofResult ks_test(std::vector<double> samples, double (*cdf)(double, double, double),
                  double p1, double p2);

double normal_cdf(double x, double mean, double sd);

/// Least squares fit y = a + b*x. Returns (a, b, rms residual).
struct LineFit {
    double intercept = 0.0;
    double slope = 0.0;
    double rms_residual = 0.0;
};
LineFit fit_line(const std::vector<double>& x, const std::vector<double>& y);

} // namespace bulkdiff
