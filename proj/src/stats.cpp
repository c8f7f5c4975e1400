#include "bulkdiff/stats.hpp"

#include <algorithm>
#include <limits>
#include <stdexcept>

namespace bulkdiff {

void RunningStats::merge(const RunningStats& o) {
    if (o.n_ == 0) return;
    if (n_ == 0) {
        *this = o;
        return;
    }
    const double na = static_cast<double>(n_), nb = static_cast<double>(o.n_);
    const double delta = o.mean_ - mean_;
    const double nt = na + nb;
    mean_ += delta * nb / nt;
    m2_ += o.m2_ + delta * delta * na * nb / nt;
    n_ += o.n_;
}

double mean_of(const std::vector<double>& xs) {
    RunningStats s;
    for (double x : xs) s.add(x);
    return s.mean();
}

double std_error_of(const std::vector<double>& xs) {
    RunningStats s;
    for (double x : xs) s.add(x);
    return s.std_error();
}

CovarianceEstimate covariance_of(const std::vector<double>& xs, const std::vector<double>& ys) {
    if (xs.size() != ys.size() || xs.size() < 2)
        throw std::invalid_argument("covariance_of: need paired samples");
    const double mx = mean_of(xs), my = mean_of(ys);
    RunningStats prod;
    for (std::size_t i = 0; i < xs.size(); ++i) prod.add((xs[i] - mx) * (ys[i] - my));
    const double n = static_cast<double>(xs.size());
    CovarianceEstimate c;
    c.cov = prod.mean() * n / (n - 1.0);
    c.std_error = prod.std_error();
    c.samples = xs.size();
    return c;
}

namespace {

double gamma_p_series(double a, double x) {
    double sum = 1.0 / a, term = sum, ap = a;
    for (int i = 0; i < 500; ++i) {
        ap += 1.0;
        term *= x / ap;
        sum += term;
        if (std::abs(term) < std::abs(sum) * 1e-15) break;
    }
    return sum * std::exp(-x + a * std::log(x) - std::lgamma(a));
}

double gamma_q_contfrac(double a, double x) {
    const double tiny = 1e-300;
    double b = x + 1.0 - a, c = 1.0 / tiny, d = 1.0 / b, h = d;
    for (int i = 1; i <= 500; ++i) {
        const double an = -static_cast<double>(i) * (static_cast<double>(i) - a);
        b += 2.0;
        d = an * d + b;
        if (std::abs(d) < tiny) d = tiny;
        c = b + an / c;
        if (std::abs(c) < tiny) c = tiny;
        d = 1.0 / d;
        const double del = d * c;
        h *= del;
        if (std::abs(del - 1.0) < 1e-15) break;
    }
    return h * std::exp(-x + a * std::log(x) - std::lgamma(a));
}

} // namespace

double gamma_p(double a, double x) {
    if (x < 0.0 || a <= 0.0) throw std::invalid_argument("gamma_p: bad arguments");
    if (x == 0.0) return 0.0;
    return x < a + 1.0 ? gamma_p_series(a, x) : 1.0 - gamma_q_contfrac(a, x);
}

double gamma_q(double a, double x) { return 1.0 - gamma_p(a, x); }

double chi_square_sf(double stat, double df) {
    if (df <= 0.0) return 1.0;
    return gamma_q(df / 2.0, stat / 2.0);
}

GofResult poisson_chi_square(const std::vector<std::uint64_t>& counts, double mean) {
    if (counts.empty()) throw std::invalid_argument("poisson_chi_square: no data");
    const double n = static_cast<double>(counts.size());
    std::uint64_t kmax = 0;
    for (auto c : counts) kmax = std::max(kmax, c);

    // Poisson pmf table up to kmax, remainder in the tail bin.
    std::vector<double> pmf(kmax + 1);
    double p = std::exp(-mean);
    double csum = 0.0;
    for (std::uint64_t k = 0; k <= kmax; ++k) {
        if (k > 0) p *= mean / static_cast<double>(k);
        pmf[k] = p;
        csum += p;
    }
    std::vector<double> expected(kmax + 2);
    std::vector<double> observed(kmax + 2, 0.0);
    for (std::uint64_t k = 0; k <= kmax; ++k) expected[k] = n * pmf[k];
    expected[kmax + 1] = n * std::max(0.0, 1.0 - csum);
    for (auto c : counts) observed[c] += 1.0;

    // pool adjacent bins until every pooled bin has expected >= 5
    std::vector<double> eb, ob;
    double ea = 0.0, oa = 0.0;
    for (std::size_t k = 0; k < expected.size(); ++k) {
        ea += expected[k];
        oa += observed[k];
        if (ea >= 5.0) {
            eb.push_back(ea);
            ob.push_back(oa);
            ea = oa = 0.0;
        }
    }
    if (ea > 0.0 || oa > 0.0) {
        if (eb.empty()) {
            eb.push_back(ea);
            ob.push_back(oa);
        } else {
            eb.back() += ea;
            ob.back() += oa;
        }
    }

    GofResult r;
    if (eb.size() < 2) {
        r.df = 0.0;
        r.p_value = 1.0;
        return r;
    }
    for (std::size_t i = 0; i < eb.size(); ++i) {
        const double d = ob[i] - eb[i];
        r.statistic += d * d / eb[i];
    }
    r.df = static_cast<double>(eb.size() - 1);
    r.p_value = chi_square_sf(r.statistic, r.df);
    return r;
}

double normal_cdf(double x, double mean, double sd) {
    return 0.5 * std::erfc(-(x - mean) / (sd * std::sqrt(2.0)));
}

GofResult ks_test(std::vector<double> samples, double (*cdf)(double, double, double),
                  double p1, double p2) {
    if (samples.empty()) throw std::invalid_argument("ks_test: no data");
    std::sort(samples.begin(), samples.end());
    const double n = static_cast<double>(samples.size());
    double d = 0.0;
    for (std::size_t i = 0; i < samples.size(); ++i) {
        const double f = cdf(samples[i], p1, p2);
        d = std::max(d, std::abs(f - static_cast<double>(i) / n));
        d = std::max(d, std::abs(static_cast<double>(i + 1) / n - f));
    }
    const double lambda = (std::sqrt(n) + 0.12 + 0.11 / std::sqrt(n)) * d;
    double q = 0.0;
    for (int k = 1; k <= 100; ++k) {
        const double term = 2.0 * (k % 2 == 1 ? 1.0 : -1.0) *
                            std::exp(-2.0 * k * k * lambda * lambda);
        q += term;
        if (std::abs(term) < 1e-12) break;
    }
    GofResult r;
    r.statistic = d;
    r.df = n;
    r.p_value = std::clamp(q, 0.0, 1.0);
    return r;
}

LineFit fit_line(const std::vector<double>& x, const std::vector<double>& y) {
    if (x.size() != y.size() || x.size() < 2)
        throw std::invalid_argument("fit_line: need at least two points");
    const double n = static_cast<double>(x.size());
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sx += x[i];
        sy += y[i];
        sxx += x[i] * x[i];
        sxy += x[i] * y[i];
    }
    const double denom = n * sxx - sx * sx;
    if (std::abs(denom) < 1e-14) throw std::invalid_argument("fit_line: degenerate abscissae");
    LineFit f;
    f.slope = (n * sxy - sx * sy) / denom;
    f.intercept = (sy - f.slope * sx) / n;
    double ss = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double r = y[i] - (f.intercept + f.slope * x[i]);
        ss += r * r;
    }
    f.rms_residual = std::sqrt(ss / n);
    return f;
}

} // namespace bulkdiff
