#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <vector>

namespace bulkdiff {

/// Spatial point for d in {1,2}; unused coordinates stay zero.
struct Vec {
    std::array<double, 2> c{0.0, 0.0};

    double& operator[](int i) { return c[static_cast<std::size_t>(i)]; }
    double operator[](int i) const { return c[static_cast<std::size_t>(i)]; }
};

inline Vec vec1(double x) { return Vec{{x, 0.0}}; }
inline Vec vec2(double x, double y) { return Vec{{x, y}}; }

enum class Geometry { Box, Torus };

/// Open box of the dyadic family side 3^m centered at the origin, a general
/// centered box, or a torus [-side/2, side/2)^d. Lengths are in units of the
/// interaction radius, which is fixed at 1.
class Domain {
public:
    static Domain cube(int d, int m) {
        return Domain(d, Geometry::Box, std::pow(3.0, m), Vec{});
    }
    static Domain box(int d, double side, Vec center = Vec{}) {
        return Domain(d, Geometry::Box, side, center);
    }
    static Domain torus(int d, double side) {
        if (side <= 2.0)
            throw std::invalid_argument("Domain: torus side must exceed 2 (interaction range)");
        return Domain(d, Geometry::Torus, side, Vec{});
    }

    int dimension() const { return d_; }
    Geometry geometry() const { return geom_; }
    double side() const { return side_; }
    Vec center() const { return center_; }
    double volume() const { return d_ == 1 ? side_ : side_ * side_; }
    double diameter() const { return side_ * std::sqrt(static_cast<double>(d_)); }

    bool contains(const Vec& x) const {
        for (int k = 0; k < d_; ++k) {
            const double r = x[k] - center_[k];
            if (geom_ == Geometry::Torus) {
                if (r < -side_ / 2 || r >= side_ / 2) return false;
            } else {
                if (r <= -side_ / 2 || r >= side_ / 2) return false;
            }
        }
        return true;
    }

    /// Signed displacement a-b, wrapped to (-side/2, side/2] on a torus.
    Vec displacement(const Vec& a, const Vec& b) const {
        Vec r;
        for (int k = 0; k < d_; ++k) {
            double v = a[k] - b[k];
            if (geom_ == Geometry::Torus) v = wrap_coord(v);
            r[k] = v;
        }
        return r;
    }

    double distance(const Vec& a, const Vec& b) const {
        const Vec r = displacement(a, b);
        double s = 0.0;
        for (int k = 0; k < d_; ++k) s += r[k] * r[k];
        return std::sqrt(s);
    }

    /// Map a point back into the torus fundamental cell; identity on boxes.
    Vec canonical(const Vec& x) const {
        if (geom_ != Geometry::Torus) return x;
        Vec r = x;
        for (int k = 0; k < d_; ++k) r[k] = center_[k] + wrap_coord(r[k] - center_[k]);
        return r;
    }

    /// Box enlarged by pad on every side (sampling window for coefficient
    /// locality). Torus domains are returned unchanged.
    Domain padded(double pad) const {
        if (geom_ == Geometry::Torus) return *this;
        return Domain(d_, Geometry::Box, side_ + 2.0 * pad, center_);
    }

    bool operator==(const Domain& o) const {
        return d_ == o.d_ && geom_ == o.geom_ && side_ == o.side_ &&
               center_.c == o.center_.c;
    }

private:
    Domain(int d, Geometry g, double side, Vec center)
        : d_(d), geom_(g), side_(side), center_(center) {
        if (d != 1 && d != 2) throw std::invalid_argument("Domain: dimension must be 1 or 2");
        if (side <= 0.0) throw std::invalid_argument("Domain: side must be positive");
    }

    double wrap_coord(double v) const {
        v = std::fmod(v + side_ / 2, side_);
        if (v < 0) v += side_;
        return v - side_ / 2;
    }

    int d_;
    Geometry geom_;
    double side_;
    Vec center_;
};

/// Centers of the scale-n mesoscopic cells tiling a scale-m cube (or a torus
/// whose side is a multiple of 3^n). Each center z carries the cell z + box(3^n).
std::vector<Vec> mesoscopic_grid(const Domain& dom, int n);

} // namespace bulkdiff
