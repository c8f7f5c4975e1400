#include "bulkdiff/sector.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "json.hpp"

namespace bulkdiff {

SectorGridFunctional::SectorGridFunctional(Domain cell, int max_particles, int grid_intervals)
    : cell_(cell), k_(max_particles), n_(grid_intervals) {
    if (cell_.dimension() != 1 || cell_.geometry() != Geometry::Box)
        throw std::invalid_argument("SectorGridFunctional: cell must be a d=1 box");
    if (k_ < 1 || k_ > 3)
        throw std::invalid_argument("SectorGridFunctional: max particles must be in [1,3]");
    if (n_ < 2) throw std::invalid_argument("SectorGridFunctional: grid too coarse");
    h_ = cell_.side() / n_;
    w1_.assign(static_cast<std::size_t>(n_ + 1), 0.0);
    if (k_ >= 2) e2_.assign(static_cast<std::size_t>((n_ + 1) * (n_ + 1)), 0.0);
    if (k_ >= 3)
        e3_.assign(static_cast<std::size_t>((n_ + 1) * (n_ + 1) * (n_ + 1)), 0.0);
}

double& SectorGridFunctional::e3(int i, int j, int k) {
    return e3_[static_cast<std::size_t>((i * (n_ + 1) + j) * (n_ + 1) + k)];
}
double SectorGridFunctional::e3(int i, int j, int k) const {
    return e3_[static_cast<std::size_t>((i * (n_ + 1) + j) * (n_ + 1) + k)];
}

SectorGridFunctional SectorGridFunctional::project(const FeatureFunctional& f,
                                                   const Domain& cell, int max_particles,
                                                   int grid_intervals) {
    SectorGridFunctional g(cell, max_particles, grid_intervals);
    const Domain window = cell.padded(1.0);
    const double lo = cell.center()[0] - cell.side() / 2;

    auto node = [&](int i) { return lo + i * g.h_; };
    auto value = [&](std::initializer_list<double> xs) {
        Configuration mu(window);
        for (double x : xs) mu.add(vec1(x));
        return f.evaluate(mu);
    };

    for (int i = 0; i <= g.n_; ++i) g.w1(i) = value({node(i)});
    if (max_particles >= 2) {
        for (int i = 0; i <= g.n_; ++i)
            for (int j = 0; j <= g.n_; ++j)
                g.e2(i, j) = value({node(i), node(j)}) - g.w1(i) - g.w1(j);
    }
    if (max_particles >= 3) {
        for (int i = 0; i <= g.n_; ++i)
            for (int j = 0; j <= g.n_; ++j)
                for (int k = 0; k <= g.n_; ++k)
                    g.e3(i, j, k) = value({node(i), node(j), node(k)}) - g.w1(i) - g.w1(j) -
                                    g.w1(k) - g.e2(i, j) - g.e2(i, k) - g.e2(j, k);
    }
    return g;
}

namespace {

struct CellCoord {
    int cell;
    double t;
};

CellCoord locate(double x, double lo, double h, int n) {
    double u = (x - lo) / h;
    u = std::clamp(u, 0.0, static_cast<double>(n) - 1e-12);
    const int c = std::min(n - 1, static_cast<int>(u));
    return {c, u - c};
}

} // namespace

double SectorGridFunctional::interp1(double x) const {
    const double lo = cell_.center()[0] - cell_.side() / 2;
    const CellCoord c = locate(x, lo, h_, n_);
    return (1.0 - c.t) * w1(c.cell) + c.t * w1(c.cell + 1);
}

double SectorGridFunctional::interp2(double x, double y) const {
    const double lo = cell_.center()[0] - cell_.side() / 2;
    const CellCoord a = locate(x, lo, h_, n_);
    const CellCoord b = locate(y, lo, h_, n_);
    return (1 - a.t) * (1 - b.t) * e2(a.cell, b.cell) + a.t * (1 - b.t) * e2(a.cell + 1, b.cell) +
           (1 - a.t) * b.t * e2(a.cell, b.cell + 1) + a.t * b.t * e2(a.cell + 1, b.cell + 1);
}

double SectorGridFunctional::interp3(double x, double y, double z) const {
    const double lo = cell_.center()[0] - cell_.side() / 2;
    const CellCoord a = locate(x, lo, h_, n_);
    const CellCoord b = locate(y, lo, h_, n_);
    const CellCoord c = locate(z, lo, h_, n_);
    double s = 0.0;
    for (int ia = 0; ia < 2; ++ia)
        for (int ib = 0; ib < 2; ++ib)
            for (int ic = 0; ic < 2; ++ic) {
                const double w = (ia ? a.t : 1 - a.t) * (ib ? b.t : 1 - b.t) *
                                 (ic ? c.t : 1 - c.t);
                s += w * e3(a.cell + ia, b.cell + ib, c.cell + ic);
            }
    return s;
}

double SectorGridFunctional::evaluate(const Configuration& mu) const {
    std::vector<double> xs;
    for (const auto& p : mu.points())
        if (cell_.contains(p)) xs.push_back(p[0]);
    if (static_cast<int>(xs.size()) > k_)
        throw SectorOverflow("sector overflow: " + std::to_string(xs.size()) +
                             " particles in cell, representation holds " + std::to_string(k_));
    double s = 0.0;
    for (double x : xs) s += interp1(x);
    if (k_ >= 2)
        for (std::size_t i = 0; i < xs.size(); ++i)
            for (std::size_t j = i + 1; j < xs.size(); ++j) s += interp2(xs[i], xs[j]);
    if (k_ >= 3 && xs.size() == 3) s += interp3(xs[0], xs[1], xs[2]);
    return s;
}

void SectorGridFunctional::symmetrize() {
    if (k_ < 2) return;
    for (int i = 0; i <= n_; ++i)
        for (int j = i + 1; j <= n_; ++j) {
            const double v = 0.5 * (e2(i, j) + e2(j, i));
            e2(i, j) = v;
            e2(j, i) = v;
        }
}

void SectorGridFunctional::save(const std::string& binary_path,
                                const std::string& sidecar_path) const {
    std::ofstream os(binary_path, std::ios::binary);
    if (!os) throw std::runtime_error("cannot open " + binary_path);
    auto put = [&](const std::vector<double>& v) {
        os.write(reinterpret_cast<const char*>(v.data()),
                 static_cast<std::streamsize>(v.size() * sizeof(double)));
    };
    put(w1_);
    put(e2_);
    put(e3_);

    nlohmann::json side;
    side["k"] = k_;
    side["h"] = h_;
    side["grid_intervals"] = n_;
    side["cell_side"] = cell_.side();
    side["cell_center"] = cell_.center()[0];
    side["sections"] = {{"w1", w1_.size()}, {"e2", e2_.size()}, {"e3", e3_.size()}};
    std::ofstream js(sidecar_path);
    if (!js) throw std::runtime_error("cannot open " + sidecar_path);
    js << side.dump(2) << "\n";
}

SectorGridFunctional SectorGridFunctional::load(const std::string& binary_path,
                                                const std::string& sidecar_path) {
    std::ifstream js(sidecar_path);
    if (!js) throw std::runtime_error("cannot open " + sidecar_path);
    nlohmann::json side = nlohmann::json::parse(js);
    const int k = side.at("k").get<int>();
    const int n = side.at("grid_intervals").get<int>();
    const double cside = side.at("cell_side").get<double>();
    const double ccenter = side.value("cell_center", 0.0);
    SectorGridFunctional g(Domain::box(1, cside, vec1(ccenter)), k, n);

    std::ifstream is(binary_path, std::ios::binary);
    if (!is) throw std::runtime_error("cannot open " + binary_path);
    auto get = [&](std::vector<double>& v) {
        is.read(reinterpret_cast<char*>(v.data()),
                static_cast<std::streamsize>(v.size() * sizeof(double)));
        if (!is) throw std::runtime_error("sector dump truncated: " + binary_path);
    };
    get(g.w1_);
    if (k >= 2) get(g.e2_);
    if (k >= 3) get(g.e3_);
    return g;
}

TruncatedOccupancy truncated_occupancy(const Domain& cell, double rho, int max_points) {
    if (max_points < 1 || max_points > 3)
        throw std::invalid_argument("truncated_occupancy: max points must be in [1,3]");
    const Domain window = cell.padded(1.0);
    const double lam = rho * window.volume();
    TruncatedOccupancy occ;
    occ.window_volume = window.volume();
    double z = 0.0, term = 1.0;
    std::array<double, 4> raw{0, 0, 0, 0};
    for (int k = 0; k <= max_points; ++k) {
        raw[static_cast<std::size_t>(k)] = term;
        z += term;
        term *= lam / (k + 1);
    }
    const double frac = cell.volume() / window.volume();
    for (int k = 0; k <= max_points; ++k) {
        occ.pi[static_cast<std::size_t>(k)] = raw[static_cast<std::size_t>(k)] / z;
        occ.mean_count_in_cell += occ.pi[static_cast<std::size_t>(k)] * k * frac;
    }
    return occ;
}

namespace {

/// One quadrature node of the two-particle energy. Both displacement
/// derivatives are integrated, so the pair excess is not implicitly
/// symmetrized; the minimizer comes out symmetric because the data are.
struct QuadPoint2 {
    int i;      // x1 cell index in the window grid
    int j;      // x2 cell index in the window grid
    float t1;
    float t2;
    double w;   // quadrature weight including the pair measure factor
    double a1;  // coefficient seen from x1
    double a2;  // coefficient seen from x2
};

struct OracleWorkspace {
    int n = 0;   // cell intervals
    int pad = 0; // padding intervals per side
    double h = 0.0;
    double slope = 0.0;
    std::vector<QuadPoint2> q2;
    std::vector<int> q1_cell;  // one-particle quadrature: cell index
    std::vector<double> q1_aw; // coefficient * weight
};

/// Gradient of the quadratic energy at x (plus the affine source when
/// include_source), accumulated into out; optionally also the energy value.
void oracle_apply(const OracleWorkspace& ws, bool with_e2, const std::vector<double>& x,
                  std::vector<double>& out, bool include_source, double* energy) {
    const int n = ws.n;
    const double inv_h = 1.0 / ws.h;
    auto w1_at = [&](int node) -> double {
        return (node <= 0 || node >= n) ? 0.0 : x[static_cast<std::size_t>(node - 1)];
    };
    const int e2_off = n - 1;
    auto e2_at = [&](int ni, int nj) -> double {
        if (ni <= 0 || ni >= n || nj <= 0 || nj >= n) return 0.0;
        return x[static_cast<std::size_t>(e2_off + (ni - 1) * (n - 1) + (nj - 1))];
    };
    auto add_w1 = [&](int node, double v) {
        if (node > 0 && node < n) out[static_cast<std::size_t>(node - 1)] += v;
    };
    auto add_e2 = [&](int ni, int nj, double v) {
        if (ni > 0 && ni < n && nj > 0 && nj < n)
            out[static_cast<std::size_t>(e2_off + (ni - 1) * (n - 1) + (nj - 1))] += v;
    };

    const double src = include_source ? ws.slope : 0.0;
    double en = 0.0;

    for (std::size_t q = 0; q < ws.q1_cell.size(); ++q) {
        const int i = ws.q1_cell[q];
        const double r = src + (w1_at(i + 1) - w1_at(i)) * inv_h;
        const double s = ws.q1_aw[q] * r;
        en += 0.5 * s * r;
        add_w1(i + 1, s * inv_h);
        add_w1(i, -s * inv_h);
    }

    for (const auto& qp : ws.q2) {
        const int iu = qp.i - ws.pad; // cell-grid indices (may be outside [0,n))
        const int ju = qp.j - ws.pad;
        const bool in1 = iu >= 0 && iu < n;
        const bool in2 = ju >= 0 && ju < n;

        if (in1) {
            // derivative in the first particle
            double r = src + (w1_at(iu + 1) - w1_at(iu)) * inv_h;
            double c00 = 0, c10 = 0, c01 = 0, c11 = 0;
            const bool pair = with_e2 && in2;
            if (pair) {
                c10 = (1.0 - qp.t2) * inv_h;
                c00 = -c10;
                c11 = qp.t2 * inv_h;
                c01 = -c11;
                r += c00 * e2_at(iu, ju) + c10 * e2_at(iu + 1, ju) +
                     c01 * e2_at(iu, ju + 1) + c11 * e2_at(iu + 1, ju + 1);
            }
            const double s = qp.w * qp.a1 * r;
            en += 0.5 * s * r;
            add_w1(iu + 1, s * inv_h);
            add_w1(iu, -s * inv_h);
            if (pair) {
                add_e2(iu, ju, s * c00);
                add_e2(iu + 1, ju, s * c10);
                add_e2(iu, ju + 1, s * c01);
                add_e2(iu + 1, ju + 1, s * c11);
            }
        }
        if (in2) {
            // derivative in the second particle
            double r = src + (w1_at(ju + 1) - w1_at(ju)) * inv_h;
            double c00 = 0, c10 = 0, c01 = 0, c11 = 0;
            const bool pair = with_e2 && in1;
            if (pair) {
                c10 = (1.0 - qp.t1) * inv_h; // d/dx2 of bilinear e2(x1, x2)
                c00 = -c10;
                c11 = qp.t1 * inv_h;
                c01 = -c11;
                r += c00 * e2_at(iu, ju) + c10 * e2_at(iu, ju + 1) +
                     c01 * e2_at(iu + 1, ju) + c11 * e2_at(iu + 1, ju + 1);
            }
            const double s = qp.w * qp.a2 * r;
            en += 0.5 * s * r;
            add_w1(ju + 1, s * inv_h);
            add_w1(ju, -s * inv_h);
            if (pair) {
                add_e2(iu, ju, s * c00);
                add_e2(iu, ju + 1, s * c10);
                add_e2(iu + 1, ju, s * c01);
                add_e2(iu + 1, ju + 1, s * c11);
            }
        }
    }
    if (energy) *energy = en;
}

} // namespace

SectorOracleResult sector_cell_oracle(const Domain& cell, const CoefficientModel& model,
                                      double rho, double slope, int max_points,
                                      int grid_intervals) {
    if (cell.dimension() != 1 || cell.geometry() != Geometry::Box)
        throw std::invalid_argument("sector_cell_oracle: cell must be a d=1 box");
    if (max_points < 1 || max_points > 2)
        throw std::invalid_argument("sector_cell_oracle: max points must be 1 or 2");

    const int n = grid_intervals;
    const double side = cell.side();
    const double h = side / n;
    const Domain window = cell.padded(1.0);
    const int pad = static_cast<int>(std::lround(1.0 / h));
    if (std::abs(pad * h - 1.0) > 1e-9)
        throw std::invalid_argument("sector_cell_oracle: grid must divide the unit padding");
    const int nw = n + 2 * pad;

    const TruncatedOccupancy occ = truncated_occupancy(cell, rho, max_points);

    OracleWorkspace ws;
    ws.n = n;
    ws.pad = pad;
    ws.h = h;
    ws.slope = slope;

    const double lo = cell.center()[0] - side / 2;
    const double wlo = lo - 1.0;
    const double volw = window.volume();
    const double g2a = 0.5 - 0.5 / std::sqrt(3.0), g2b = 0.5 + 0.5 / std::sqrt(3.0);

    // one-particle sector: pi_1 / |D| over the cell, 2-pt Gauss per cell
    const double f1 = occ.pi[1] / volw;
    for (int i = 0; i < n; ++i) {
        for (double t : {g2a, g2b}) {
            const double x = lo + (i + t) * h;
            Configuration mu(window);
            mu.add(vec1(x));
            const double a = model.evaluate(mu, vec1(x))(0, 0);
            ws.q1_cell.push_back(i);
            ws.q1_aw.push_back(a * f1 * 0.5 * h);
        }
    }

    // two-particle sector: pi_2 / |D|^2 over the window squared
    if (max_points >= 2) {
        const double f2 = occ.pi[2] / (volw * volw);
        const double discont = model.kind() == ModelKind::Identity ||
                                       model.kind() == ModelKind::SmoothCount
                                   ? -1.0
                                   : 1.0; // radius where count rules jump
        for (int i = 0; i < nw; ++i) {
            const double x1a = wlo + i * h, x1b = x1a + h;
            const bool in1 = i >= pad && i < pad + n;
            for (int j = 0; j < nw; ++j) {
                const bool in2 = j >= pad && j < pad + n;
                if (!in1 && !in2) continue;
                const double x2a = wlo + j * h, x2b = x2a + h;
                bool cut = false;
                if (discont > 0.0) {
                    const double dmin = std::max(0.0, std::max(x1a - x2b, x2a - x1b));
                    const double dmax = std::max(x1b - x2a, x2b - x1a);
                    cut = dmin < discont && dmax > discont;
                }
                // local quadrature: tensor Gauss on smooth cells; on cells the
                // discontinuity crosses (always along a node diagonal, since
                // the jump radius is a whole number of grid steps) an interior
                // 3-point rule per triangle, exact for the quadratic integrand
                std::vector<std::array<double, 3>> nodes; // t1, t2, weight
                if (!cut) {
                    for (double t1 : {g2a, g2b})
                        for (double t2 : {g2a, g2b}) nodes.push_back({t1, t2, h * h / 4.0});
                } else {
                    const double w6 = h * h / 6.0;
                    nodes = {{1.0 / 3, 1.0 / 6, w6}, {5.0 / 6, 1.0 / 6, w6},
                             {5.0 / 6, 2.0 / 3, w6}, {1.0 / 6, 1.0 / 3, w6},
                             {1.0 / 6, 5.0 / 6, w6}, {2.0 / 3, 5.0 / 6, w6}};
                }
                for (const auto& nd : nodes) {
                    const double x1 = x1a + nd[0] * h, x2 = x2a + nd[1] * h;
                    Configuration mu(window);
                    mu.add(vec1(x1));
                    mu.add(vec1(x2));
                    QuadPoint2 qp;
                    qp.i = i;
                    qp.j = j;
                    qp.t1 = static_cast<float>(nd[0]);
                    qp.t2 = static_cast<float>(nd[1]);
                    qp.w = nd[2] * f2;
                    qp.a1 = model.evaluate(mu, vec1(x1))(0, 0);
                    qp.a2 = model.evaluate(mu, vec1(x2))(0, 0);
                    ws.q2.push_back(qp);
                }
            }
        }
    }

    const bool with_e2 = max_points >= 2;
    const int dof = (n - 1) + (with_e2 ? (n - 1) * (n - 1) : 0);
    std::vector<double> x(static_cast<std::size_t>(dof), 0.0);
    std::vector<double> b(static_cast<std::size_t>(dof), 0.0);
    oracle_apply(ws, with_e2, x, b, true, nullptr); // b = gradient at zero

    // Jacobi preconditioner from the form's diagonal
    std::vector<double> diag(static_cast<std::size_t>(dof), 0.0);
    {
        const double inv_h2 = 1.0 / (h * h);
        auto add_d = [&](int idx, double v) {
            if (idx >= 0) diag[static_cast<std::size_t>(idx)] += v;
        };
        auto w1_idx = [&](int node) { return (node > 0 && node < n) ? node - 1 : -1; };
        auto e2_idx = [&](int ni, int nj) {
            return (ni > 0 && ni < n && nj > 0 && nj < n)
                       ? (n - 1) + (ni - 1) * (n - 1) + (nj - 1)
                       : -1;
        };
        for (std::size_t q = 0; q < ws.q1_cell.size(); ++q) {
            const int i = ws.q1_cell[q];
            add_d(w1_idx(i + 1), ws.q1_aw[q] * inv_h2);
            add_d(w1_idx(i), ws.q1_aw[q] * inv_h2);
        }
        for (const auto& qp : ws.q2) {
            const int iu = qp.i - pad, ju = qp.j - pad;
            const bool in1 = iu >= 0 && iu < n, in2 = ju >= 0 && ju < n;
            if (in1) {
                const double c = qp.w * qp.a1;
                add_d(w1_idx(iu + 1), c * inv_h2);
                add_d(w1_idx(iu), c * inv_h2);
                if (with_e2 && in2) {
                    const double cA = (1.0 - qp.t2) * (1.0 - qp.t2) * inv_h2;
                    const double cB = qp.t2 * qp.t2 * inv_h2;
                    add_d(e2_idx(iu, ju), c * cA);
                    add_d(e2_idx(iu + 1, ju), c * cA);
                    add_d(e2_idx(iu, ju + 1), c * cB);
                    add_d(e2_idx(iu + 1, ju + 1), c * cB);
                }
            }
            if (in2) {
                const double c = qp.w * qp.a2;
                add_d(w1_idx(ju + 1), c * inv_h2);
                add_d(w1_idx(ju), c * inv_h2);
                if (with_e2 && in1) {
                    const double cA = (1.0 - qp.t1) * (1.0 - qp.t1) * inv_h2;
                    const double cB = qp.t1 * qp.t1 * inv_h2;
                    add_d(e2_idx(iu, ju), c * cA);
                    add_d(e2_idx(iu, ju + 1), c * cA);
                    add_d(e2_idx(iu + 1, ju), c * cB);
                    add_d(e2_idx(iu + 1, ju + 1), c * cB);
                }
            }
        }
        for (auto& v : diag)
            if (v <= 0.0) v = 1.0;
    }

    // preconditioned CG on A x = -b
    std::vector<double> r(b), z(static_cast<std::size_t>(dof)), p(static_cast<std::size_t>(dof)),
        ap(static_cast<std::size_t>(dof));
    for (auto& v : r) v = -v;
    double b2 = 0.0;
    for (double v : b) b2 += v * v;
    double rz = 0.0;
    for (int i = 0; i < dof; ++i) {
        z[static_cast<std::size_t>(i)] =
            r[static_cast<std::size_t>(i)] / diag[static_cast<std::size_t>(i)];
        rz += r[static_cast<std::size_t>(i)] * z[static_cast<std::size_t>(i)];
    }
    p = z;
    int iters = 0;
    double rnorm = std::sqrt(b2);
    const double tol = 1e-11 * std::max(1.0, std::sqrt(b2));
    const int max_iter = std::min(50000, std::max(500, 20 * dof));
    for (; iters < max_iter && rnorm > tol; ++iters) {
        std::fill(ap.begin(), ap.end(), 0.0);
        oracle_apply(ws, with_e2, p, ap, false, nullptr);
        double pap = 0.0;
        for (int i = 0; i < dof; ++i)
            pap += p[static_cast<std::size_t>(i)] * ap[static_cast<std::size_t>(i)];
        if (pap <= 0.0) break;
        const double alpha = rz / pap;
        double r2 = 0.0;
        for (int i = 0; i < dof; ++i) {
            x[static_cast<std::size_t>(i)] += alpha * p[static_cast<std::size_t>(i)];
            r[static_cast<std::size_t>(i)] -= alpha * ap[static_cast<std::size_t>(i)];
            r2 += r[static_cast<std::size_t>(i)] * r[static_cast<std::size_t>(i)];
        }
        rnorm = std::sqrt(r2);
        double rz_new = 0.0;
        for (int i = 0; i < dof; ++i) {
            z[static_cast<std::size_t>(i)] =
                r[static_cast<std::size_t>(i)] / diag[static_cast<std::size_t>(i)];
            rz_new += r[static_cast<std::size_t>(i)] * z[static_cast<std::size_t>(i)];
        }
        const double beta = rz_new / rz;
        rz = rz_new;
        for (int i = 0; i < dof; ++i)
            p[static_cast<std::size_t>(i)] =
                z[static_cast<std::size_t>(i)] + beta * p[static_cast<std::size_t>(i)];
    }

    double raw_energy = 0.0;
    std::vector<double> dump(static_cast<std::size_t>(dof), 0.0);
    oracle_apply(ws, with_e2, x, dump, true, &raw_energy);

    SectorOracleResult res{0.0, 0.0, SectorGridFunctional(cell, max_points, n),
                           occ, iters, rnorm};
    res.raw_value = raw_energy;
    res.value = raw_energy / occ.mean_count_in_cell;
    for (int i = 1; i < n; ++i) res.minimizer.w1(i) = x[static_cast<std::size_t>(i - 1)];
    if (with_e2) {
        for (int i = 1; i < n; ++i)
            for (int j = 1; j < n; ++j)
                res.minimizer.e2(i, j) =
                    x[static_cast<std::size_t>((n - 1) + (i - 1) * (n - 1) + (j - 1))];
        res.minimizer.symmetrize();
    }
    return res;
}

} // namespace bulkdiff
