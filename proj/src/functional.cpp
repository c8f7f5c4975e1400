#include "bulkdiff/functional.hpp"

#include <algorithm>
#include <cmath>

#include "json.hpp"

namespace bulkdiff {

double cubic_bspline(double t) {
    const double a = std::abs(t);
    if (a >= 2.0) return 0.0;
    if (a >= 1.0) {
        const double u = 2.0 - a;
        return u * u * u / 6.0;
    }
    return 2.0 / 3.0 - a * a + a * a * a / 2.0;
}

double cubic_bspline_deriv(double t) {
    const double a = std::abs(t);
    if (a >= 2.0) return 0.0;
    const double s = t < 0.0 ? -1.0 : 1.0;
    if (a >= 1.0) {
        const double u = 2.0 - a;
        return -s * u * u / 2.0;
    }
    return s * (-2.0 * a + 1.5 * a * a);
}

double BasisSpec::default_spacing(int d, double side) {
    const double base = d == 1 ? 0.25 : 0.5;
    return std::min(base, side / 8.0);
}

FeatureBasis::FeatureBasis(Domain cell, const BasisSpec& spec,
                           std::optional<double> ambient_torus_side)
    : cell_(cell), spec_(spec), ambient_(ambient_torus_side) {
    if (cell_.geometry() != Geometry::Box)
        throw std::invalid_argument("FeatureBasis: cell must be a box");
    width_ = spec_.spacing > 0.0
                 ? spec_.spacing
                 : BasisSpec::default_spacing(cell_.dimension(), cell_.side());
    spec_.spacing = width_;

    append_lattice(0.0, 0, -1);
    if (spec_.interactions) {
        for (std::size_t r = 0; r < spec_.radii.size(); ++r)
            for (int thr : spec_.thresholds)
                append_lattice(spec_.radii[r], thr, static_cast<int>(r));
    }
}

void FeatureBasis::append_lattice(double radius, int min_count, int radius_slot) {
    const int d = cell_.dimension();
    const double half = cell_.side() / 2.0;
    double limit;
    if (spec_.zero_boundary) {
        // bump support, and for interaction features the count ball, must
        // stay strictly inside the cell
        limit = half - 2.0 * width_ - radius;
    } else {
        limit = half + 2.0 * width_ - 1e-9;
    }
    if (limit < 0.0) return; // cell too small for this variant

    const int k = static_cast<int>(std::floor(limit / width_ + 1e-9));
    VariantLattice lat;
    lat.radius = radius;
    lat.min_count = min_count;
    lat.radius_slot = radius_slot;
    lat.n0 = 2 * k + 1;
    lat.n1 = d == 2 ? 2 * k + 1 : 1;
    lat.origin = cell_.center();
    lat.origin[0] -= k * width_;
    if (d == 2) lat.origin[1] -= k * width_;
    lat.offset = static_cast<int>(features_.size());

    for (int j = 0; j < lat.n1; ++j) {
        for (int i = 0; i < lat.n0; ++i) {
            Feature f;
            f.center = lat.origin;
            f.center[0] += i * width_;
            if (d == 2) f.center[1] += j * width_;
            f.width = width_;
            f.radius = radius;
            f.min_count = min_count;
            f.clip_count_ball = !spec_.zero_boundary && !spec_.exterior_counts;
            features_.push_back(f);
        }
    }
    lattices_.push_back(lat);
}

std::shared_ptr<FeatureBasis> FeatureBasis::translated(const Vec& z) const {
    auto out = std::make_shared<FeatureBasis>(*this);
    Vec c = cell_.center();
    for (int k = 0; k < cell_.dimension(); ++k) c[k] += z[k];
    out->cell_ = Domain::box(cell_.dimension(), cell_.side(), c);
    for (auto& f : out->features_)
        for (int k = 0; k < cell_.dimension(); ++k) f.center[k] += z[k];
    for (auto& lat : out->lattices_)
        for (int k = 0; k < cell_.dimension(); ++k) lat.origin[k] += z[k];
    return out;
}

bool FeatureBasis::cell_contains(const Domain& ambient, const Vec& x) const {
    const Vec r = ambient.displacement(x, cell_.center());
    for (int k = 0; k < cell_.dimension(); ++k)
        if (r[k] <= -cell_.side() / 2 || r[k] >= cell_.side() / 2) return false;
    return true;
}

void FeatureBasis::neighbor_counts(const Configuration& mu,
                                   std::vector<std::vector<int>>& counts) const {
    counts.assign(spec_.radii.size(), std::vector<int>(mu.size(), 0));
    if (!spec_.interactions || spec_.radii.empty()) return;
    const Domain& dom = mu.domain();
    const bool clip = !spec_.zero_boundary && !spec_.exterior_counts;
    const double rmax = *std::max_element(spec_.radii.begin(), spec_.radii.end());
    for (std::size_t i = 0; i < mu.size(); ++i) {
        for (std::size_t j = i + 1; j < mu.size(); ++j) {
            const double dist = dom.distance(mu.point(i), mu.point(j));
            if (dist >= rmax) continue;
            for (std::size_t r = 0; r < spec_.radii.size(); ++r) {
                if (dist < spec_.radii[r]) {
                    if (!clip || cell_contains(dom, mu.point(j)))
                        ++counts[r][i];
                    if (!clip || cell_contains(dom, mu.point(i)))
                        ++counts[r][j];
                }
            }
        }
    }
}

void FeatureBasis::collect_lattice(const VariantLattice& lat, const Vec& xl, double psi,
                                   std::vector<ActiveFeature>& out) const {
    const int d = cell_.dimension();
    // node index window whose bump support contains xl
    int lo[2] = {0, 0}, hi[2] = {-1, -1};
    double rel[2] = {0.0, 0.0};
    const int n[2] = {lat.n0, lat.n1};
    for (int k = 0; k < d; ++k) {
        rel[k] = xl[k] - (lat.origin[k] - cell_.center()[k]);
        lo[k] = std::max(0, static_cast<int>(std::ceil(rel[k] / width_ - 2.0 + 1e-12)));
        hi[k] = std::min(n[k] - 1, static_cast<int>(std::floor(rel[k] / width_ + 2.0 - 1e-12)));
        if (lo[k] > hi[k]) return;
    }
    if (d == 1) {
        for (int i = lo[0]; i <= hi[0]; ++i) {
            const double t = (rel[0] - i * width_) / width_;
            const double v = cubic_bspline(t);
            if (v == 0.0) continue;
            ActiveFeature af;
            af.index = lat.offset + i;
            af.value = psi * v;
            af.grad = vec1(psi * cubic_bspline_deriv(t) / width_);
            out.push_back(af);
        }
    } else {
        for (int j = lo[1]; j <= hi[1]; ++j) {
            const double t1 = (rel[1] - j * width_) / width_;
            const double v1 = cubic_bspline(t1);
            if (v1 == 0.0) continue;
            const double g1 = cubic_bspline_deriv(t1) / width_;
            for (int i = lo[0]; i <= hi[0]; ++i) {
                const double t0 = (rel[0] - i * width_) / width_;
                const double v0 = cubic_bspline(t0);
                if (v0 == 0.0) continue;
                ActiveFeature af;
                af.index = lat.offset + j * lat.n0 + i;
                af.value = psi * v0 * v1;
                af.grad = vec2(psi * cubic_bspline_deriv(t0) / width_ * v1, psi * v0 * g1);
                out.push_back(af);
            }
        }
    }
}

void FeatureBasis::collect(const Configuration& mu, std::size_t i,
                           const std::vector<std::vector<int>>& counts,
                           std::vector<ActiveFeature>& out) const {
    const Domain& dom = mu.domain();
    const Vec& x = mu.point(i);
    if (!cell_contains(dom, x)) return;
    const Vec xl = dom.displacement(x, cell_.center());
    for (const auto& lat : lattices_) {
        double psi = 1.0;
        if (lat.radius_slot >= 0) {
            const int c = counts[static_cast<std::size_t>(lat.radius_slot)][i];
            psi = c >= lat.min_count ? 1.0 : 0.0;
        }
        if (psi == 0.0) continue;
        collect_lattice(lat, xl, psi, out);
    }
}

void FeatureBasis::feature_values(const Configuration& mu, std::vector<double>& out) const {
    out.assign(static_cast<std::size_t>(size()), 0.0);
    std::vector<std::vector<int>> counts;
    neighbor_counts(mu, counts);
    std::vector<ActiveFeature> act;
    for (std::size_t i = 0; i < mu.size(); ++i) {
        act.clear();
        collect(mu, i, counts, act);
        for (const auto& af : act) out[static_cast<std::size_t>(af.index)] += af.value;
    }
}

FeatureFunctional::FeatureFunctional(std::shared_ptr<const FeatureBasis> basis,
                                     std::vector<double> coeffs, std::optional<Vec> affine_slope)
    : basis_(std::move(basis)), coeffs_(std::move(coeffs)), affine_(affine_slope) {
    if (coeffs_.size() != static_cast<std::size_t>(basis_->size()))
        throw std::invalid_argument("FeatureFunctional: coefficient count mismatch");
}

FeatureFunctional FeatureFunctional::zero(std::shared_ptr<const FeatureBasis> basis) {
    std::vector<double> c(static_cast<std::size_t>(basis->size()), 0.0);
    return FeatureFunctional(std::move(basis), std::move(c));
}

FeatureFunctional FeatureFunctional::affine(std::shared_ptr<const FeatureBasis> basis,
                                            const Vec& p) {
    std::vector<double> c(static_cast<std::size_t>(basis->size()), 0.0);
    return FeatureFunctional(std::move(basis), std::move(c), p);
}

double FeatureFunctional::evaluate(const Configuration& mu) const {
    const Domain& dom = mu.domain();
    if (affine_ && dom.geometry() == Geometry::Torus)
        throw std::invalid_argument("affine part is only defined on box domains");
    double s = 0.0;
    std::vector<std::vector<int>> counts;
    basis_->neighbor_counts(mu, counts);
    std::vector<ActiveFeature> act;
    for (std::size_t i = 0; i < mu.size(); ++i) {
        if (affine_ && basis_->cell_contains(dom, mu.point(i))) {
            const Vec& x = mu.point(i);
            for (int k = 0; k < dom.dimension(); ++k) s += (*affine_)[k] * x[k];
        }
        act.clear();
        basis_->collect(mu, i, counts, act);
        for (const auto& af : act) s += coeffs_[static_cast<std::size_t>(af.index)] * af.value;
    }
    return s;
}

Vec FeatureFunctional::particle_gradient(const Configuration& mu, std::size_t i) const {
    if (i >= mu.size())
        throw std::invalid_argument("particle_gradient: index is not a particle of mu");
    const Domain& dom = mu.domain();
    Vec g;
    if (!basis_->cell_contains(dom, mu.point(i))) return g;
    if (affine_)
        for (int k = 0; k < dom.dimension(); ++k) g[k] = (*affine_)[k];
    std::vector<std::vector<int>> counts;
    basis_->neighbor_counts(mu, counts);
    std::vector<ActiveFeature> act;
    basis_->collect(mu, i, counts, act);
    for (const auto& af : act)
        for (int k = 0; k < dom.dimension(); ++k)
            g[k] += coeffs_[static_cast<std::size_t>(af.index)] * af.grad[k];
    return g;
}

std::string FeatureFunctional::to_json() const {
    nlohmann::json j;
    const Domain& cell = basis_->cell();
    j["cell"] = {{"d", cell.dimension()},
                 {"side", cell.side()},
                 {"center", std::vector<double>{cell.center()[0], cell.center()[1]}}};
    const BasisSpec& spec = basis_->spec();
    j["basis"] = {{"spacing", spec.spacing},
                  {"radii", spec.radii},
                  {"thresholds", spec.thresholds},
                  {"zero_boundary", spec.zero_boundary},
                  {"interactions", spec.interactions},
                  {"exterior_counts", spec.exterior_counts}};
    nlohmann::json feats = nlohmann::json::array();
    for (int k = 0; k < basis_->size(); ++k) {
        const Feature& f = basis_->feature(k);
        feats.push_back({{"center", std::vector<double>{f.center[0], f.center[1]}},
                         {"width", f.width},
                         {"radius", f.radius},
                         {"min_count", f.min_count}});
    }
    j["features"] = std::move(feats);
    j["coefficients"] = coeffs_;
    if (affine_)
        j["affine_slope"] = std::vector<double>{(*affine_)[0], (*affine_)[1]};
    else
        j["affine_slope"] = nullptr;
    return j.dump(2);
}

FeatureFunctional FeatureFunctional::from_json(const std::string& text) {
    const nlohmann::json j = nlohmann::json::parse(text);
    const auto& jc = j.at("cell");
    const auto center = jc.at("center").get<std::vector<double>>();
    const Domain cell = Domain::box(jc.at("d").get<int>(), jc.at("side").get<double>(),
                                    vec2(center.at(0), center.at(1)));
    BasisSpec spec;
    const auto& jb = j.at("basis");
    spec.spacing = jb.at("spacing").get<double>();
    spec.radii = jb.at("radii").get<std::vector<double>>();
    spec.thresholds = jb.at("thresholds").get<std::vector<int>>();
    spec.zero_boundary = jb.at("zero_boundary").get<bool>();
    spec.interactions = jb.at("interactions").get<bool>();
    spec.exterior_counts = jb.value("exterior_counts", false);
    auto basis = std::make_shared<FeatureBasis>(cell, spec);
    auto coeffs = j.at("coefficients").get<std::vector<double>>();
    if (coeffs.size() != static_cast<std::size_t>(basis->size()))
        throw std::invalid_argument("functional json: coefficient count mismatch");
    std::optional<Vec> affine;
    if (!j.at("affine_slope").is_null()) {
        const auto a = j.at("affine_slope").get<std::vector<double>>();
        affine = vec2(a.at(0), a.at(1));
    }
    return FeatureFunctional(std::move(basis), std::move(coeffs), affine);
}

Vec FeatureFunctional::particle_gradient_fd(const Configuration& mu, std::size_t i,
                                            double h) const {
    const Domain& dom = mu.domain();
    Vec g;
    for (int k = 0; k < dom.dimension(); ++k) {
        Configuration plus = mu, minus = mu;
        Vec xp = mu.point(i), xm = mu.point(i);
        xp[k] += h;
        xm[k] -= h;
        plus.set_point(i, dom.canonical(xp));
        minus.set_point(i, dom.canonical(xm));
        g[k] = (evaluate(plus) - evaluate(minus)) / (2.0 * h);
    }
    return g;
}

} // namespace bulkdiff
