#pragma once

#include <array>
#include <string>

#include "bulkdiff/configuration.hpp"
#include "bulkdiff/geometry.hpp"

namespace bulkdiff {

/// Symmetric d x d matrix (d in {1,2}), dimensionless entries.
struct SymMatrix {
    int d = 1;
    // row-major, only the upper-left d x d block is meaningful
    std::array<double, 4> a{0.0, 0.0, 0.0, 0.0};

    static SymMatrix identity(int d) {
        SymMatrix m;
        m.d = d;
        m.a = {1.0, 0.0, 0.0, d == 2 ? 1.0 : 0.0};
        return m;
    }
    static SymMatrix isotropic(int d, double v) {
        SymMatrix m = identity(d);
        m.a[0] = v;
        if (d == 2) m.a[3] = v;
        return m;
    }
    static SymMatrix diagonal(int d, double v0, double v1) {
        SymMatrix m;
        m.d = d;
        m.a = {v0, 0.0, 0.0, d == 2 ? v1 : 0.0};
        return m;
    }

    double operator()(int i, int j) const { return a[static_cast<std::size_t>(2 * i + j)]; }
    double& at(int i, int j) { return a[static_cast<std::size_t>(2 * i + j)]; }

    Vec apply(const Vec& x) const {
        Vec y;
        for (int i = 0; i < d; ++i) {
            double s = 0.0;
            for (int j = 0; j < d; ++j) s += (*this)(i, j) * x[j];
            y[i] = s;
        }
        return y;
    }

    double quad(const Vec& x) const {
        double s = 0.0;
        for (int i = 0; i < d; ++i)
            for (int j = 0; j < d; ++j) s += x[i] * (*this)(i, j) * x[j];
        return s;
    }

    double bilinear(const Vec& x, const Vec& y) const {
        double s = 0.0;
        for (int i = 0; i < d; ++i)
            for (int j = 0; j < d; ++j) s += x[i] * (*this)(i, j) * y[j];
        return s;
    }

    double det() const { return d == 1 ? a[0] : a[0] * a[3] - a[1] * a[2]; }
    double trace() const { return d == 1 ? a[0] : a[0] + a[3]; }

    SymMatrix inverse() const;
    /// Eigenvalues in increasing order (closed form, d <= 2).
    std::array<double, 2> eigenvalues() const;
    double max_asymmetry() const { return d == 1 ? 0.0 : std::abs(a[1] - a[2]); }

    SymMatrix& operator+=(const SymMatrix& o) {
        for (std::size_t i = 0; i < 4; ++i) a[i] += o.a[i];
        return *this;
    }
    SymMatrix scaled(double s) const {
        SymMatrix m = *this;
        for (auto& v : m.a) v *= s;
        return m;
    }
};

enum class ModelKind { Identity, CountIndicator, SmoothCount, AnisotropicCount };

ModelKind model_kind_from_string(const std::string& s);
std::string to_string(ModelKind k);

/// Rule mu -> a(mu): symmetric, eigenvalues in [1, lambda], and depending on
/// the configuration only through the open unit ball around the evaluation
/// point. Count-based rules include the center particle in their counts.
class CoefficientModel {
public:
    CoefficientModel() = default;
    CoefficientModel(ModelKind kind, double lambda, int threshold = 2,
                     double smoothing = 0.25);

    /// Bypasses parameter validation; exists so audits can be exercised on
    /// deliberately broken models.
    static CoefficientModel make_unchecked(ModelKind kind, double lambda,
                                           int threshold = 2, double smoothing = 0.25);

    ModelKind kind() const { return kind_; }
    double lambda() const { return lambda_; }
    int threshold() const { return threshold_; }
    double smoothing() const { return smoothing_; }
    bool is_identity() const { return kind_ == ModelKind::Identity; }
    /// All catalog rules produce diagonal matrices.
    bool is_diagonal() const { return true; }

    /// a(mu, x): the rule applied to the configuration seen from x.
    SymMatrix evaluate(const Configuration& mu, const Vec& x) const;

    /// The rule applied at the origin, i.e. evaluate(mu, 0).
    SymMatrix evaluate_at_origin(const Configuration& mu) const {
        return evaluate(mu, Vec{});
    }

    std::string describe() const;

private:
    ModelKind kind_ = ModelKind::Identity;
    double lambda_ = 1.0;
    int threshold_ = 2;
    double smoothing_ = 0.25;
};

} // namespace bulkdiff
