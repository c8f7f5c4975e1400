#pragma once

#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "bulkdiff/configuration.hpp"
#include "bulkdiff/geometry.hpp"

namespace bulkdiff {

/// Cubic B-spline bump b: support [-2,2], C^2, b(0) = 2/3.
double cubic_bspline(double t);
double cubic_bspline_deriv(double t);

/// One basis feature: sum over particles x in the home cell of
///   phi(x) * psi(count of other points in B_radius(x)),
/// with phi a tensor-product cubic spline bump and psi(n) = 1{n >= min_count}.
/// radius == 0 means a plain linear statistic (psi == 1).
struct Feature {
    Vec center;
    double width = 0.5;
    double radius = 0.0;
    int min_count = 0;
    bool clip_count_ball = false; // count only neighbors inside the cell
};

/// Layout parameters for a spline feature lattice over one cubic cell.
struct BasisSpec {
    double spacing = 0.0;                 // 0 => pick from the cell side
    std::vector<double> radii = {0.5, 1.0};
    std::vector<int> thresholds = {1, 2};
    bool zero_boundary = true; // buffer so bumps (and count balls) stay inside
    bool interactions = true;
    /// free mode only: let count balls see the exterior configuration
    /// (drops cell-measurability; used to probe the dual-class restriction)
    bool exterior_counts = false;

    static double default_spacing(int d, double side);
};

struct ActiveFeature {
    int index;
    double value;
    Vec grad;
};

/// A lattice of spline features over one cubic cell, possibly embedded in a
/// torus (then membership and distances wrap). In zero-boundary mode every
/// feature vanishes continuously as a particle crosses the cell boundary and
/// its count ball stays inside the cell; in free mode bumps may straddle the
/// boundary and evaluation is clipped to particles inside the cell.
class FeatureBasis {
public:
    FeatureBasis(Domain cell, const BasisSpec& spec,
                 std::optional<double> ambient_torus_side = std::nullopt);

    int size() const { return static_cast<int>(features_.size()); }
    const Feature& feature(int j) const { return features_[static_cast<std::size_t>(j)]; }
    const Domain& cell() const { return cell_; }
    const BasisSpec& spec() const { return spec_; }
    bool zero_boundary() const { return spec_.zero_boundary; }
    std::optional<double> ambient_side() const { return ambient_; }

    /// Same lattice shifted by z (for mesoscopic cells of a larger domain).
    std::shared_ptr<FeatureBasis> translated(const Vec& z) const;

    /// Membership in the cell; distances wrap when the ambient domain is a torus.
    bool cell_contains(const Domain& ambient, const Vec& x) const;

    /// Per-particle neighbor counts for each configured radius.
    /// counts[r][i] = #(mu in B_radius[r](x_i) \ {x_i}), metric wrapping on tori.
    void neighbor_counts(const Configuration& mu,
                         std::vector<std::vector<int>>& counts) const;

    /// Features active at particle i (value and gradient), given the
    /// precomputed neighbor counts. Appends to `out`.
    void collect(const Configuration& mu, std::size_t i,
                 const std::vector<std::vector<int>>& counts,
                 std::vector<ActiveFeature>& out) const;

    /// Values of all features on a configuration: out[j] = B_j(mu).
    void feature_values(const Configuration& mu, std::vector<double>& out) const;

private:
    struct VariantLattice {
        double radius;
        int min_count;
        int radius_slot; // index into spec_.radii, -1 for the plain variant
        Vec origin;      // center of lattice node (0,...,0)
        int n0 = 0, n1 = 0;
        int offset = 0; // first feature index of this lattice
    };

    void append_lattice(double radius, int min_count, int radius_slot);
    void collect_lattice(const VariantLattice& lat, const Vec& xl, double psi,
                         std::vector<ActiveFeature>& out) const;

    Domain cell_;
    BasisSpec spec_;
    std::optional<double> ambient_;
    double width_;
    std::vector<Feature> features_;
    std::vector<VariantLattice> lattices_;
};

/// Real functional of configurations: optional affine part (slope p over the
/// cell) plus a coefficient vector over a shared feature basis. Immutable
/// after construction; evaluation and gradients are permutation-invariant.
class FeatureFunctional {
public:
    FeatureFunctional() = default;
    FeatureFunctional(std::shared_ptr<const FeatureBasis> basis, std::vector<double> coeffs,
                      std::optional<Vec> affine_slope = std::nullopt);

    static FeatureFunctional zero(std::shared_ptr<const FeatureBasis> basis);
    static FeatureFunctional affine(std::shared_ptr<const FeatureBasis> basis, const Vec& p);

    const FeatureBasis& basis() const { return *basis_; }
    std::shared_ptr<const FeatureBasis> basis_ptr() const { return basis_; }
    const std::vector<double>& coeffs() const { return coeffs_; }
    std::optional<Vec> affine_slope() const { return affine_; }
    bool zero_boundary() const { return basis_->zero_boundary() && !affine_; }

    double evaluate(const Configuration& mu) const;

    /// Gradient under displacement of particle i (which must belong to mu).
    Vec particle_gradient(const Configuration& mu, std::size_t i) const;

    /// Symmetric finite difference of the defining displacement derivative;
    /// test reference for particle_gradient.
    Vec particle_gradient_fd(const Configuration& mu, std::size_t i, double h = 1e-5) const;

    /// Basis descriptor plus coefficient array; round-trips through from_json.
    std::string to_json() const;
    static FeatureFunctional from_json(const std::string& text);

private:
    std::shared_ptr<const FeatureBasis> basis_;
    std::vector<double> coeffs_;
    std::optional<Vec> affine_;
};

/// Weighted sum of functionals sharing a domain (two-scale expansions, lifted
/// statistics with correctors). Terms may carry distinct bases.
class CompositeFunctional {
public:
    void add(double weight, FeatureFunctional f) {
        terms_.push_back({weight, std::move(f)});
    }
    void add_constant(double c) { constant_ += c; }
    std::size_t term_count() const { return terms_.size(); }

    double evaluate(const Configuration& mu) const {
        double s = constant_;
        for (const auto& t : terms_) s += t.weight * t.f.evaluate(mu);
        return s;
    }
    Vec particle_gradient(const Configuration& mu, std::size_t i) const {
        Vec g;
        for (const auto& t : terms_) {
            const Vec gi = t.f.particle_gradient(mu, i);
            for (int k = 0; k < 2; ++k) g[k] += t.weight * gi[k];
        }
        return g;
    }

private:
    struct Term {
        double weight;
        FeatureFunctional f;
    };
    std::vector<Term> terms_;
    double constant_ = 0.0;
};

} // namespace bulkdiff
