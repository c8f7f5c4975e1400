#include "bulkdiff/coefficient.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

namespace bulkdiff {

SymMatrix SymMatrix::inverse() const {
    SymMatrix m;
    m.d = d;
    const double dt = det();
    if (std::abs(dt) < 1e-300) throw std::runtime_error("SymMatrix: singular");
    if (d == 1) {
        m.a[0] = 1.0 / a[0];
    } else {
        m.a = {a[3] / dt, -a[1] / dt, -a[2] / dt, a[0] / dt};
    }
    return m;
}

std::array<double, 2> SymMatrix::eigenvalues() const {
    if (d == 1) return {a[0], a[0]};
    const double tr = a[0] + a[3];
    const double dt = a[0] * a[3] - a[1] * a[2];
    const double disc = std::sqrt(std::max(0.0, tr * tr / 4.0 - dt));
    return {tr / 2.0 - disc, tr / 2.0 + disc};
}

ModelKind model_kind_from_string(const std::string& s) {
    if (s == "identity") return ModelKind::Identity;
    if (s == "count-indicator") return ModelKind::CountIndicator;
    if (s == "smooth-count") return ModelKind::SmoothCount;
    if (s == "anisotropic-count") return ModelKind::AnisotropicCount;
    throw std::invalid_argument("unknown coefficient model kind: " + s);
}

std::string to_string(ModelKind k) {
    switch (k) {
    case ModelKind::Identity: return "identity";
    case ModelKind::CountIndicator: return "count-indicator";
    case ModelKind::SmoothCount: return "smooth-count";
    case ModelKind::AnisotropicCount: return "anisotropic-count";
    }
    return "?";
}

CoefficientModel::CoefficientModel(ModelKind kind, double lambda, int threshold,
                                   double smoothing)
    : kind_(kind), lambda_(lambda), threshold_(threshold), smoothing_(smoothing) {
    if (lambda < 1.0)
        throw std::invalid_argument("CoefficientModel: ellipticity ceiling must be >= 1");
    if (threshold < 1)
        throw std::invalid_argument("CoefficientModel: threshold must be >= 1");
    if (smoothing <= 0.0 || smoothing >= 1.0)
        throw std::invalid_argument("CoefficientModel: smoothing width must be in (0,1)");
}

CoefficientModel CoefficientModel::make_unchecked(ModelKind kind, double lambda,
                                                  int threshold, double smoothing) {
    CoefficientModel m;
    m.kind_ = kind;
    m.lambda_ = lambda;
    m.threshold_ = threshold;
    m.smoothing_ = smoothing;
    return m;
}

namespace {

double smoothstep01(double t) {
    if (t <= 0.0) return 0.0;
    if (t >= 1.0) return 1.0;
    return t * t * (3.0 - 2.0 * t);
}

} // namespace

SymMatrix CoefficientModel::evaluate(const Configuration& mu, const Vec& x) const {
    const int d = mu.domain().dimension();
    switch (kind_) {
    case ModelKind::Identity:
        return SymMatrix::identity(d);

    case ModelKind::CountIndicator: {
        const std::size_t n = mu.count_in_ball(x, 1.0);
        const double v = n >= static_cast<std::size_t>(threshold_) ? lambda_ : 1.0;
        return SymMatrix::isotropic(d, v);
    }

    case ModelKind::SmoothCount: {
        // mollified count: each point in B_1 contributes eta(|y-x|), a ramp
        // from 1 (inside radius 1-w) to 0 (at radius 1)
        double s = 0.0;
        const Domain& dom = mu.domain();
        for (const auto& p : mu.points()) {
            const double r = dom.distance(p, x);
            if (r >= 1.0) continue;
            s += 1.0 - smoothstep01((r - (1.0 - smoothing_)) / smoothing_);
        }
        const double g = smoothstep01(s - (static_cast<double>(threshold_) - 1.0));
        return SymMatrix::isotropic(d, 1.0 + (lambda_ - 1.0) * g);
    }

    case ModelKind::AnisotropicCount: {
        // per-axis counts over double cones of half-angle pi/4; the center
        // particle (displacement 0) counts toward every axis
        const Domain& dom = mu.domain();
        const double c = std::sqrt(0.5);
        std::array<std::size_t, 2> n{0, 0};
        for (const auto& p : mu.points()) {
            const Vec delta = dom.displacement(p, x);
            double r2 = 0.0;
            for (int k = 0; k < d; ++k) r2 += delta[k] * delta[k];
            if (r2 >= 1.0) continue;
            if (r2 == 0.0) {
                for (int k = 0; k < d; ++k) ++n[static_cast<std::size_t>(k)];
                continue;
            }
            const double r = std::sqrt(r2);
            for (int k = 0; k < d; ++k)
                if (std::abs(delta[k]) >= c * r) ++n[static_cast<std::size_t>(k)];
        }
        SymMatrix m = SymMatrix::identity(d);
        for (int k = 0; k < d; ++k)
            if (n[static_cast<std::size_t>(k)] >= static_cast<std::size_t>(threshold_))
                m.at(k, k) = lambda_;
        return m;
    }
    }
    return SymMatrix::identity(d);
}

std::string CoefficientModel::describe() const {
    std::ostringstream os;
    os << to_string(kind_) << "(lambda=" << lambda_;
    if (kind_ == ModelKind::CountIndicator || kind_ == ModelKind::AnisotropicCount ||
        kind_ == ModelKind::SmoothCount)
        os << ",threshold=" << threshold_;
    if (kind_ == ModelKind::SmoothCount) os << ",smoothing=" << smoothing_;
    os << ")";
    return os.str();
}

} // namespace bulkdiff
