#include "bulkdiff/grid.hpp"

#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace bulkdiff {

GridFunction::GridFunction(Domain dom, int intervals_per_axis, bool zero_boundary)
    : dom_(dom), n_(intervals_per_axis), zero_boundary_(zero_boundary) {
    if (n_ < 2) throw std::invalid_argument("GridFunction: need at least two intervals");
    h_ = dom_.side() / n_;
    axis_nodes_ = dom_.geometry() == Geometry::Torus ? n_ : n_ + 1;
    const std::size_t total = dom_.dimension() == 1
                                  ? static_cast<std::size_t>(axis_nodes_)
                                  : static_cast<std::size_t>(axis_nodes_) * axis_nodes_;
    v_.assign(total, 0.0);
}

GridFunction GridFunction::sampled(Domain dom, int intervals_per_axis,
                                   const std::function<double(const Vec&)>& f,
                                   bool zero_boundary) {
    GridFunction g(dom, intervals_per_axis, zero_boundary);
    const int d = dom.dimension();
    for (int j = 0; j < (d == 2 ? g.axis_nodes_ : 1); ++j)
        for (int i = 0; i < g.axis_nodes_; ++i) g.at(i, j) = f(g.node(i, j));
    if (zero_boundary) g.enforce_zero_boundary();
    return g;
}

int GridFunction::index(int i, int j) const { return j * axis_nodes_ + i; }

double& GridFunction::at(int i, int j) { return v_[static_cast<std::size_t>(index(i, j))]; }
double GridFunction::at(int i, int j) const {
    return v_[static_cast<std::size_t>(index(i, j))];
}

Vec GridFunction::node(int i, int j) const {
    Vec x;
    x[0] = dom_.center()[0] - dom_.side() / 2 + i * h_;
    if (dom_.dimension() == 2) x[1] = dom_.center()[1] - dom_.side() / 2 + j * h_;
    return x;
}

namespace {

struct AxisCoord {
    int cell;
    double t;
    bool outside;
};

AxisCoord locate_axis(double x, double lo, double h, int n, bool torus) {
    AxisCoord c{0, 0.0, false};
    double u = (x - lo) / h;
    if (torus) {
        u = std::fmod(u, static_cast<double>(n));
        if (u < 0) u += n;
        c.cell = std::min(n - 1, static_cast<int>(u));
        c.t = u - c.cell;
    } else {
        if (u < 0.0 || u > static_cast<double>(n)) {
            c.outside = true;
            return c;
        }
        c.cell = std::min(n - 1, static_cast<int>(u));
        c.t = u - c.cell;
    }
    return c;
}

} // namespace

double GridFunction::value(const Vec& x) const {
    const bool torus = dom_.geometry() == Geometry::Torus;
    const double lo0 = dom_.center()[0] - dom_.side() / 2;
    const AxisCoord a = locate_axis(x[0], lo0, h_, n_, torus);
    if (a.outside) return 0.0;
    auto wrap = [&](int i) { return torus ? (i % n_ + n_) % n_ : i; };
    if (dom_.dimension() == 1) {
        return (1 - a.t) * at(wrap(a.cell)) + a.t * at(wrap(a.cell + 1));
    }
    const double lo1 = dom_.center()[1] - dom_.side() / 2;
    const AxisCoord b = locate_axis(x[1], lo1, h_, n_, torus);
    if (b.outside) return 0.0;
    return (1 - a.t) * (1 - b.t) * at(wrap(a.cell), wrap(b.cell)) +
           a.t * (1 - b.t) * at(wrap(a.cell + 1), wrap(b.cell)) +
           (1 - a.t) * b.t * at(wrap(a.cell), wrap(b.cell + 1)) +
           a.t * b.t * at(wrap(a.cell + 1), wrap(b.cell + 1));
}

Vec GridFunction::gradient(const Vec& x) const {
    const bool torus = dom_.geometry() == Geometry::Torus;
    const double lo0 = dom_.center()[0] - dom_.side() / 2;
    const AxisCoord a = locate_axis(x[0], lo0, h_, n_, torus);
    Vec g;
    if (a.outside) return g;
    auto wrap = [&](int i) { return torus ? (i % n_ + n_) % n_ : i; };
    if (dom_.dimension() == 1) {
        g[0] = (at(wrap(a.cell + 1)) - at(wrap(a.cell))) / h_;
        return g;
    }
    const double lo1 = dom_.center()[1] - dom_.side() / 2;
    const AxisCoord b = locate_axis(x[1], lo1, h_, n_, torus);
    if (b.outside) return g;
    const double f00 = at(wrap(a.cell), wrap(b.cell));
    const double f10 = at(wrap(a.cell + 1), wrap(b.cell));
    const double f01 = at(wrap(a.cell), wrap(b.cell + 1));
    const double f11 = at(wrap(a.cell + 1), wrap(b.cell + 1));
    g[0] = ((f10 - f00) * (1 - b.t) + (f11 - f01) * b.t) / h_;
    g[1] = ((f01 - f00) * (1 - a.t) + (f11 - f10) * a.t) / h_;
    return g;
}

double GridFunction::integral() const {
    const int d = dom_.dimension();
    const bool torus = dom_.geometry() == Geometry::Torus;
    double s = 0.0;
    if (torus) {
        for (double v : v_) s += v;
        return s * (d == 1 ? h_ : h_ * h_);
    }
    auto w = [&](int i) { return (i == 0 || i == n_) ? 0.5 : 1.0; };
    if (d == 1) {
        for (int i = 0; i <= n_; ++i) s += w(i) * at(i);
        return s * h_;
    }
    for (int j = 0; j <= n_; ++j)
        for (int i = 0; i <= n_; ++i) s += w(i) * w(j) * at(i, j);
    return s * h_ * h_;
}

double GridFunction::inner(const GridFunction& g) const {
    if (g.v_.size() != v_.size())
        throw std::invalid_argument("GridFunction::inner: incompatible grids");
    const int d = dom_.dimension();
    const bool torus = dom_.geometry() == Geometry::Torus;
    double s = 0.0;
    if (torus) {
        for (std::size_t i = 0; i < v_.size(); ++i) s += v_[i] * g.v_[i];
        return s * (d == 1 ? h_ : h_ * h_);
    }
    auto w = [&](int i) { return (i == 0 || i == n_) ? 0.5 : 1.0; };
    if (d == 1) {
        for (int i = 0; i <= n_; ++i) s += w(i) * at(i) * g.at(i);
        return s * h_;
    }
    for (int j = 0; j <= n_; ++j)
        for (int i = 0; i <= n_; ++i) s += w(i) * w(j) * at(i, j) * g.at(i, j);
    return s * h_ * h_;
}

double GridFunction::l2_norm() const { return std::sqrt(std::max(0.0, inner(*this))); }

double GridFunction::max_abs() const {
    double m = 0.0;
    for (double v : v_) m = std::max(m, std::abs(v));
    return m;
}

double GridFunction::grad_l2() const {
    const int d = dom_.dimension();
    const bool torus = dom_.geometry() == Geometry::Torus;
    auto get = [&](int i, int j) {
        if (torus) return at((i % n_ + n_) % n_, d == 2 ? (j % n_ + n_) % n_ : 0);
        if (i < 0 || i > n_ || (d == 2 && (j < 0 || j > n_))) return 0.0;
        return at(i, j);
    };
    double s = 0.0;
    const int jmax = d == 2 ? n_ : 1;
    for (int j = 0; j < jmax; ++j)
        for (int i = 0; i < n_; ++i) {
            const double gx = (get(i + 1, j) - get(i, j)) / h_;
            s += gx * gx;
            if (d == 2) {
                const double gy = (get(i, j + 1) - get(i, j)) / h_;
                s += gy * gy;
            }
        }
    return std::sqrt(s * (d == 1 ? h_ : h_ * h_));
}

double GridFunction::hess_l2() const {
    const int d = dom_.dimension();
    const bool torus = dom_.geometry() == Geometry::Torus;
    auto get = [&](int i, int j) {
        if (torus) return at((i % n_ + n_) % n_, d == 2 ? (j % n_ + n_) % n_ : 0);
        return at(i, j);
    };
    double s = 0.0;
    // boxes: centered stencils on interior nodes only, so no ghost values enter
    const int lo = torus ? 0 : 1;
    const int jlo = d == 2 ? lo : 0;
    const int jhi = d == 2 ? n_ : 1;
    for (int j = jlo; j < jhi; ++j)
        for (int i = lo; i < n_; ++i) {
            const double uxx = (get(i + 1, j) - 2 * get(i, j) + get(i - 1, j)) / (h_ * h_);
            s += uxx * uxx;
            if (d == 2) {
                const double uyy =
                    (get(i, j + 1) - 2 * get(i, j) + get(i, j - 1)) / (h_ * h_);
                const double uxy = (get(i + 1, j + 1) + get(i - 1, j - 1) -
                                    get(i + 1, j - 1) - get(i - 1, j + 1)) /
                                   (4 * h_ * h_);
                s += uyy * uyy + 2 * uxy * uxy;
            }
        }
    return std::sqrt(s * (d == 1 ? h_ : h_ * h_));
}

double GridFunction::cell_average_slope(int axis, const Vec& cell_center,
                                        double cell_side) const {
    // midpoint per overlapped grid cell is exact for the linear interpolant
    const int d = dom_.dimension();
    const double lo0 = cell_center[0] - cell_side / 2;
    const double lo1 = d == 2 ? cell_center[1] - cell_side / 2 : 0.0;
    const int per_axis = std::max(1, static_cast<int>(std::lround(cell_side / h_)));
    double s = 0.0;
    int cnt = 0;
    const int jmax = d == 2 ? per_axis : 1;
    for (int j = 0; j < jmax; ++j)
        for (int i = 0; i < per_axis; ++i) {
            Vec x;
            x[0] = lo0 + (i + 0.5) * cell_side / per_axis;
            if (d == 2) x[1] = lo1 + (j + 0.5) * cell_side / per_axis;
            s += gradient(x)[axis];
            ++cnt;
        }
    return s / cnt;
}

GridFunction& GridFunction::operator+=(const GridFunction& g) {
    if (g.v_.size() != v_.size())
        throw std::invalid_argument("GridFunction::operator+=: incompatible grids");
    for (std::size_t i = 0; i < v_.size(); ++i) v_[i] += g.v_[i];
    return *this;
}

GridFunction& GridFunction::operator*=(double s) {
    for (auto& v : v_) v *= s;
    return *this;
}

void GridFunction::enforce_zero_boundary() {
    if (dom_.geometry() == Geometry::Torus) return;
    const int d = dom_.dimension();
    if (d == 1) {
        at(0) = 0.0;
        at(n_) = 0.0;
        return;
    }
    for (int i = 0; i <= n_; ++i) {
        at(i, 0) = 0.0;
        at(i, n_) = 0.0;
        at(0, i) = 0.0;
        at(n_, i) = 0.0;
    }
}

void GridFunction::write_csv(const std::string& path) const {
    std::ofstream os(path);
    if (!os) throw std::runtime_error("cannot open " + path);
    os.precision(17);
    const int d = dom_.dimension();
    os << "# d=" << d
       << " geometry=" << (dom_.geometry() == Geometry::Torus ? "torus" : "box")
       << " side=" << dom_.side() << " intervals=" << n_
       << " zero_boundary=" << (zero_boundary_ ? 1 : 0) << "\n";
    os << (d == 1 ? "# x,value" : "# x,y,value") << "\n";
    const int jmax = d == 2 ? axis_nodes_ : 1;
    for (int j = 0; j < jmax; ++j)
        for (int i = 0; i < axis_nodes_; ++i) {
            const Vec x = node(i, j);
            os << x[0];
            if (d == 2) os << "," << x[1];
            os << "," << at(i, j) << "\n";
        }
}

GridFunction GridFunction::read_csv(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw std::runtime_error("cannot open " + path);
    std::string line;
    if (!std::getline(is, line) || line.rfind("# d=", 0) != 0)
        throw std::runtime_error("grid csv: missing header");
    int d = 0, n = 0, zb = 0;
    char geom[16] = {0};
    double side = 0.0;
    if (std::sscanf(line.c_str(), "# d=%d geometry=%15s side=%lf intervals=%d zero_boundary=%d",
                    &d, geom, &side, &n, &zb) != 5)
        throw std::runtime_error("grid csv: malformed header");
    const Domain dom =
        std::string(geom) == "torus" ? Domain::torus(d, side) : Domain::box(d, side);
    GridFunction g(dom, n, zb != 0);
    std::size_t written = 0;
    while (std::getline(is, line)) {
        if (line.empty() || line[0] == '#') continue;
        std::istringstream ls(line);
        std::string tok;
        std::vector<double> cols;
        while (std::getline(ls, tok, ',')) cols.push_back(std::stod(tok));
        if (cols.size() != static_cast<std::size_t>(d + 1))
            throw std::runtime_error("grid csv: malformed row");
        if (written >= g.v_.size()) throw std::runtime_error("grid csv: too many rows");
        g.v_[written++] = cols.back();
    }
    if (written != g.v_.size()) throw std::runtime_error("grid csv: missing rows");
    return g;
}

} // namespace bulkdiff
