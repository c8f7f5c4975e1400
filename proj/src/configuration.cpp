#include "bulkdiff/configuration.hpp"

#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace bulkdiff {

std::size_t Configuration::count_in_ball(const Vec& x, double r) const {
    std::size_t n = 0;
    for (const auto& p : pts_)
        if (dom_.distance(p, x) < r) ++n;
    return n;
}

std::size_t Configuration::count_in(const Domain& region) const {
    std::size_t n = 0;
    for (const auto& p : pts_)
        if (region.contains(p)) ++n;
    return n;
}

Configuration sample_poisson(const Domain& dom, double rho, RandomStream& rng) {
    if (rho < 0.0) throw std::invalid_argument("sample_poisson: negative intensity");
    Configuration mu(dom);
    if (rho == 0.0) return mu;

    const int d = dom.dimension();
    // subdivide each axis so each cell has mean count <= 16
    const double side = dom.side();
    int cells = std::max(1, static_cast<int>(std::ceil(side * std::pow(rho, 1.0 / d) / 2.0)));
    const double h = side / cells;
    const double cell_vol = (d == 1) ? h : h * h;
    const double lo0 = dom.center()[0] - side / 2;
    const double lo1 = dom.center()[1] - side / 2;

    const int jmax = (d == 1) ? 1 : cells;
    for (int j = 0; j < jmax; ++j) {
        for (int i = 0; i < cells; ++i) {
            const std::uint64_t n = rng.poisson(rho * cell_vol);
            for (std::uint64_t k = 0; k < n; ++k) {
                Vec p;
                p[0] = lo0 + (static_cast<double>(i) + rng.uniform()) * h;
                if (d == 2) p[1] = lo1 + (static_cast<double>(j) + rng.uniform()) * h;
                mu.add(p);
            }
        }
    }
    return mu;
}

Configuration sample_palm(const Domain& dom, double rho, RandomStream& rng) {
    if (!dom.contains(Vec{}))
        throw std::invalid_argument("sample_palm: origin must lie in the domain");
    Configuration mu = sample_poisson(dom, rho, rng);
    mu.add(Vec{});
    return mu;
}

Configuration translate(const Configuration& mu, const Vec& x) {
    const Domain& src = mu.domain();
    Domain dst = src.geometry() == Geometry::Torus
                     ? src
                     : Domain::box(src.dimension(), src.side());
    Configuration out(dst);
    for (const auto& p : mu.points()) out.add(dst.canonical(src.displacement(p, x)));
    return out;
}

Configuration translate_restrict(const Configuration& mu, const Vec& x, const Domain& a) {
    const Domain& src = mu.domain();
    Configuration out(a);
    for (const auto& p : mu.points()) {
        const Vec q = src.displacement(p, x);
        if (a.contains(q)) out.add(q);
    }
    return out;
}

Configuration translate_restrict_ball(const Configuration& mu, const Vec& x, double r) {
    const Domain& src = mu.domain();
    Configuration out(Domain::box(src.dimension(), 2.0 * r));
    for (const auto& p : mu.points()) {
        const Vec q = src.displacement(p, x);
        double s = 0.0;
        for (int k = 0; k < src.dimension(); ++k) s += q[k] * q[k];
        if (std::sqrt(s) < r) out.add(q);
    }
    return out;
}

void write_snapshot(std::ostream& os, const Configuration& mu, std::optional<double> time) {
    const Domain& dom = mu.domain();
    os << "# d=" << dom.dimension()
       << " geometry=" << (dom.geometry() == Geometry::Torus ? "torus" : "box")
       << " side=" << dom.side() << "\n";
    if (time) os << "# t=" << *time << "\n";
    os.precision(17);
    for (const auto& p : mu.points()) {
        os << p[0];
        if (dom.dimension() == 2) os << " " << p[1];
        os << "\n";
    }
}

Configuration read_snapshot(std::istream& is, std::optional<double>* time) {
    std::string line;
    if (!std::getline(is, line) || line.rfind("# d=", 0) != 0)
        throw std::runtime_error("snapshot: missing header");
    int d = 0;
    char geom[16] = {0};
    double side = 0.0;
    if (std::sscanf(line.c_str(), "# d=%d geometry=%15s side=%lf", &d, geom, &side) != 3)
        throw std::runtime_error("snapshot: malformed header");
    const Domain dom = std::string(geom) == "torus" ? Domain::torus(d, side)
                                                    : Domain::box(d, side);
    Configuration mu(dom);
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        if (line[0] == '#') {
            double t = 0.0;
            if (time && std::sscanf(line.c_str(), "# t=%lf", &t) == 1) *time = t;
            continue;
        }
        std::istringstream ls(line);
        Vec p;
        ls >> p[0];
        if (d == 2) ls >> p[1];
        if (ls.fail()) throw std::runtime_error("snapshot: malformed point line");
        mu.add(p);
    }
    return mu;
}

void save_snapshot(const std::string& path, const Configuration& mu, std::optional<double> time) {
    std::ofstream os(path);
    if (!os) throw std::runtime_error("cannot open " + path);
    write_snapshot(os, mu, time);
}

Configuration load_snapshot(const std::string& path, std::optional<double>* time) {
    std::ifstream is(path);
    if (!is) throw std::runtime_error("cannot open " + path);
    return read_snapshot(is, time);
}

} // namespace bulkdiff
