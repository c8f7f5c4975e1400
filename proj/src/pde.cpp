#include "bulkdiff/pde.hpp"

#include <cmath>
#include <stdexcept>

namespace bulkdiff {

HeatKernel::HeatKernel(SymMatrix abar, int d) : abar_(abar), d_(d) {
    abar_.d = d;
    det_ = abar_.det();
    if (!(det_ > 0.0)) throw std::invalid_argument("HeatKernel: matrix must be positive");
    const auto ev = abar_.eigenvalues();
    if (!(ev[0] > 0.0)) throw std::invalid_argument("HeatKernel: matrix must be positive");
    inv_ = abar_.inverse();
}

double HeatKernel::density(double t, const Vec& x) const {
    if (!(t > 0.0)) throw std::invalid_argument("HeatKernel: time must be positive");
    const double q = inv_.quad(x) / (2.0 * t);
    const double norm = std::sqrt(std::pow(2.0 * M_PI * t, d_) * det_);
    return std::exp(-q) / norm;
}

namespace {

/// 1-d kernel offset table: K(i h + image shifts) for |i| <= n_half.
/// Used on tori (image sum) and boxes (plain offsets).
std::vector<double> kernel_table_1d(const HeatKernel& hk, double t, double h, int n,
                                    bool torus, double side) {
    std::vector<double> tab(static_cast<std::size_t>(n), 0.0);
    const double sigma = std::sqrt(hk.matrix()(0, 0) * t);
    const int images = torus ? std::max(1, static_cast<int>(std::ceil((10.0 * sigma) / side)))
                             : 0;
    for (int i = 0; i < n; ++i) {
        double delta = i * h;
        if (torus && delta > side / 2) delta -= side;
        double s = 0.0;
        for (int k = -images; k <= images; ++k)
            s += hk.density(t, vec1(delta + k * side));
        tab[static_cast<std::size_t>(i)] = s;
    }
    return tab;
}

} // namespace

ConvolutionResult apply_heat_semigroup(const GridFunction& g, double t, const HeatKernel& hk) {
    if (t < 0.0) throw std::invalid_argument("apply_heat_semigroup: negative time");
    ConvolutionResult out{g, 0.0};
    if (t == 0.0) return out;

    const Domain& dom = g.domain();
    const int d = dom.dimension();
    const bool torus = dom.geometry() == Geometry::Torus;
    const int nodes = g.nodes_per_axis();
    const double h = g.spacing();
    GridFunction res(dom, g.intervals(), g.zero_boundary());

    if (d == 1) {
        const auto tab = torus ? kernel_table_1d(hk, t, h, nodes, true, dom.side())
                               : std::vector<double>();
        if (torus) {
            const int n = nodes;
            double mass = 0.0;
            for (double v : tab) mass += v * h;
            out.truncation_error = std::abs(1.0 - mass);
            for (int i = 0; i < n; ++i) {
                double s = 0.0;
                for (int j = 0; j < n; ++j) s += tab[static_cast<std::size_t>((i - j + n) % n)] * g.at(j);
                res.at(i) = s * h;
            }
        } else {
            // zero extension; trapezoid weights on the source
            double worst_deficit = 0.0;
            for (int i = 0; i < nodes; ++i) {
                double s = 0.0, mass = 0.0;
                for (int j = 0; j < nodes; ++j) {
                    const double w = (j == 0 || j == nodes - 1) ? 0.5 : 1.0;
                    const double k = hk.density(t, vec1((i - j) * h));
                    s += w * k * g.at(j);
                    mass += w * k * h;
                }
                res.at(i) = s * h;
                worst_deficit = std::max(worst_deficit, std::abs(1.0 - mass));
            }
            out.truncation_error = worst_deficit;
        }
    } else {
        const int n = nodes;
        const double side = dom.side();
        const double sigma =
            std::sqrt(std::max(hk.matrix()(0, 0), hk.matrix()(1, 1)) * t);
        if (torus) {
            // wrapped offset table indexed by (di, dj) in [0, n)^2
            const int images = std::max(1, static_cast<int>(std::ceil(10.0 * sigma / side)));
            std::vector<double> tab(static_cast<std::size_t>(n) * n);
            double mass = 0.0;
            for (int dj = 0; dj < n; ++dj) {
                for (int di = 0; di < n; ++di) {
                    double d0 = di * h, d1 = dj * h;
                    if (d0 > side / 2) d0 -= side;
                    if (d1 > side / 2) d1 -= side;
                    double s = 0.0;
                    for (int kx = -images; kx <= images; ++kx)
                        for (int ky = -images; ky <= images; ++ky)
                            s += hk.density(t, vec2(d0 + kx * side, d1 + ky * side));
                    tab[static_cast<std::size_t>(dj * n + di)] = s;
                    mass += s * h * h;
                }
            }
            out.truncation_error = std::abs(1.0 - mass);
            for (int j = 0; j < n; ++j)
                for (int i = 0; i < n; ++i) {
                    double s = 0.0;
                    for (int jj = 0; jj < n; ++jj) {
                        const int dj = ((j - jj) % n + n) % n;
                        const double* row = tab.data() + static_cast<std::size_t>(dj) * n;
                        for (int ii = 0; ii < n; ++ii)
                            s += row[((i - ii) % n + n) % n] * g.at(ii, jj);
                    }
                    res.at(i, j) = s * h * h;
                }
        } else {
            // zero extension; offset table over [-(n-1), n-1]^2
            const int w2 = 2 * n - 1;
            std::vector<double> tab(static_cast<std::size_t>(w2) * w2);
            for (int dj = -(n - 1); dj <= n - 1; ++dj)
                for (int di = -(n - 1); di <= n - 1; ++di)
                    tab[static_cast<std::size_t>((dj + n - 1) * w2 + (di + n - 1))] =
                        hk.density(t, vec2(di * h, dj * h));
            for (int j = 0; j < n; ++j)
                for (int i = 0; i < n; ++i) {
                    double s = 0.0;
                    for (int jj = 0; jj < n; ++jj) {
                        const double wj = (jj == 0 || jj == n - 1) ? 0.5 : 1.0;
                        const double* row =
                            tab.data() + static_cast<std::size_t>(j - jj + n - 1) * w2;
                        for (int ii = 0; ii < n; ++ii) {
                            const double wgt =
                                wj * ((ii == 0 || ii == n - 1) ? 0.5 : 1.0);
                            s += wgt * row[i - ii + n - 1] * g.at(ii, jj);
                        }
                    }
                    res.at(i, j) = s * h * h;
                }
            // deficit at the center node as the reported truncation
            double cmass = 0.0;
            const int c = n / 2;
            for (int jj = 0; jj < n; ++jj)
                for (int ii = 0; ii < n; ++ii)
                    cmass += tab[static_cast<std::size_t>((c - jj + n - 1) * w2 +
                                                          (c - ii + n - 1))] *
                             h * h;
            out.truncation_error = std::abs(1.0 - cmass);
        }
    }
    if (g.zero_boundary() && !torus) res.enforce_zero_boundary();
    out.value = std::move(res);
    return out;
}

DirichletSolution solve_homog_dirichlet(const GridFunction& f, const SymMatrix& abar) {
    const Domain& dom = f.domain();
    if (dom.geometry() != Geometry::Box)
        throw std::invalid_argument("solve_homog_dirichlet: needs a box domain");
    const int d = dom.dimension();
    const int n = f.intervals();
    const double h = f.spacing();
    DirichletSolution out{GridFunction(dom, n, true), 0.0, 0.0, 0.0, 0};

    if (d == 1) {
        // tridiagonal Thomas solve of -a u'' = f
        const double a = abar(0, 0);
        const int m = n - 1;
        std::vector<double> diag(static_cast<std::size_t>(m), 2.0 * a / (h * h));
        std::vector<double> off(static_cast<std::size_t>(m), -a / (h * h));
        std::vector<double> rhs(static_cast<std::size_t>(m));
        for (int i = 1; i < n; ++i) rhs[static_cast<std::size_t>(i - 1)] = f.at(i);
        for (int i = 1; i < m; ++i) {
            const double w = off[static_cast<std::size_t>(i)] / diag[static_cast<std::size_t>(i - 1)];
            diag[static_cast<std::size_t>(i)] -= w * off[static_cast<std::size_t>(i - 1)];
            rhs[static_cast<std::size_t>(i)] -= w * rhs[static_cast<std::size_t>(i - 1)];
        }
        std::vector<double> u(static_cast<std::size_t>(m));
        u[static_cast<std::size_t>(m - 1)] =
            rhs[static_cast<std::size_t>(m - 1)] / diag[static_cast<std::size_t>(m - 1)];
        for (int i = m - 2; i >= 0; --i)
            u[static_cast<std::size_t>(i)] = (rhs[static_cast<std::size_t>(i)] -
                                              off[static_cast<std::size_t>(i)] *
                                                  u[static_cast<std::size_t>(i + 1)]) /
                                             diag[static_cast<std::size_t>(i)];
        for (int i = 1; i < n; ++i) out.u.at(i) = u[static_cast<std::size_t>(i - 1)];
        out.iterations = 1;
    } else {
        // matrix-free CG on the 9-point stencil of -div(abar grad u)
        const double a11 = abar(0, 0), a22 = abar(1, 1), a12 = abar(0, 1);
        const int m = n - 1; // interior nodes per axis
        auto idx = [m](int i, int j) { return (j - 1) * m + (i - 1); };
        const std::size_t dof = static_cast<std::size_t>(m) * m;
        std::vector<double> u(dof, 0.0), r(dof), p(dof), ap(dof), rhs(dof);
        for (int j = 1; j < n; ++j)
            for (int i = 1; i < n; ++i) rhs[static_cast<std::size_t>(idx(i, j))] = f.at(i, j);

        auto apply = [&](const std::vector<double>& x, std::vector<double>& y) {
            auto get = [&](int i, int j) -> double {
                if (i <= 0 || i >= n || j <= 0 || j >= n) return 0.0;
                return x[static_cast<std::size_t>(idx(i, j))];
            };
            for (int j = 1; j < n; ++j) {
                for (int i = 1; i < n; ++i) {
                    const double uxx = (get(i + 1, j) - 2 * get(i, j) + get(i - 1, j));
                    const double uyy = (get(i, j + 1) - 2 * get(i, j) + get(i, j - 1));
                    const double uxy = (get(i + 1, j + 1) + get(i - 1, j - 1) -
                                        get(i + 1, j - 1) - get(i - 1, j + 1)) /
                                       4.0;
                    y[static_cast<std::size_t>(idx(i, j))] =
                        -(a11 * uxx + 2.0 * a12 * uxy + a22 * uyy) / (h * h);
                }
            }
        };

        apply(u, ap);
        double rr = 0.0;
        for (std::size_t k = 0; k < dof; ++k) {
            r[k] = rhs[k] - ap[k];
            rr += r[k] * r[k];
        }
        p = r;
        double rhs2 = 0.0;
        for (double v : rhs) rhs2 += v * v;
        const double tol2 = 1e-24 * std::max(1.0, rhs2);
        int it = 0;
        const int max_iter = 20000;
        while (rr > tol2 && it < max_iter) {
            apply(p, ap);
            double pap = 0.0;
            for (std::size_t k = 0; k < dof; ++k) pap += p[k] * ap[k];
            if (pap <= 0.0) break;
            const double alpha = rr / pap;
            double rr_new = 0.0;
            for (std::size_t k = 0; k < dof; ++k) {
                u[k] += alpha * p[k];
                r[k] -= alpha * ap[k];
                rr_new += r[k] * r[k];
            }
            const double beta = rr_new / rr;
            rr = rr_new;
            for (std::size_t k = 0; k < dof; ++k) p[k] = r[k] + beta * p[k];
            ++it;
        }
        out.iterations = it;
        if (it >= max_iter)
            throw std::runtime_error("solve_homog_dirichlet: solver did not converge");
        for (int j = 1; j < n; ++j)
            for (int i = 1; i < n; ++i) out.u.at(i, j) = u[static_cast<std::size_t>(idx(i, j))];
    }

    // discrete residual
    {
        const double a11 = abar(0, 0);
        const double a22 = d == 2 ? abar(1, 1) : 0.0;
        const double a12 = d == 2 ? abar(0, 1) : 0.0;
        auto get = [&](int i, int j) -> double {
            if (i < 0 || i > n || (d == 2 && (j < 0 || j > n))) return 0.0;
            return out.u.at(i, d == 2 ? j : 0);
        };
        double num = 0.0, den = 0.0;
        const int jmax = d == 2 ? n : 1;
        for (int j = d == 2 ? 1 : 0; j < jmax; ++j) {
            for (int i = 1; i < n; ++i) {
                double lhs;
                if (d == 1) {
                    lhs = -a11 * (get(i + 1, 0) - 2 * get(i, 0) + get(i - 1, 0)) / (h * h);
                } else {
                    const double uxx = get(i + 1, j) - 2 * get(i, j) + get(i - 1, j);
                    const double uyy = get(i, j + 1) - 2 * get(i, j) + get(i, j - 1);
                    const double uxy = (get(i + 1, j + 1) + get(i - 1, j - 1) -
                                        get(i + 1, j - 1) - get(i - 1, j + 1)) /
                                       4.0;
                    lhs = -(a11 * uxx + 2.0 * a12 * uxy + a22 * uyy) / (h * h);
                }
                const double src = f.at(i, d == 2 ? j : 0);
                num += (lhs - src) * (lhs - src);
                den += src * src;
            }
        }
        out.residual_rel = den > 0 ? std::sqrt(num / den) : std::sqrt(num);
    }
    out.h1_seminorm = out.u.grad_l2();
    out.h2_seminorm = out.u.hess_l2();
    return out;
}

LiftedStatistic::LiftedStatistic(GridFunction g, double rho) : g_(std::move(g)), rho_(rho) {
    offset_ = rho_ * g_.integral();
}

LiftedStatistic LiftedStatistic::centered_source_lift(GridFunction g, double rho) {
    const double mean = g.integral();
    const double scale = std::max(1.0, g.max_abs() * g.domain().volume());
    if (std::abs(mean) > 1e-8 * scale)
        throw std::invalid_argument("centered_source_lift: profile must integrate to zero");
    if (g.domain().geometry() == Geometry::Box && !g.zero_boundary())
        throw std::invalid_argument("centered_source_lift: profile must vanish on the boundary");
    return LiftedStatistic(std::move(g), rho);
}

double LiftedStatistic::evaluate(const Configuration& mu) const {
    double s = -offset_;
    for (const auto& p : mu.points()) s += g_.value(p);
    return s;
}

Vec LiftedStatistic::particle_gradient(const Configuration& mu, std::size_t i) const {
    if (i >= mu.size())
        throw std::invalid_argument("particle_gradient: index is not a particle of mu");
    return g_.gradient(mu.point(i));
}

TwoPointPrediction two_point_prediction(const GridFunction& f, const GridFunction& g,
                                        double dt, const HeatKernel& hk, double rho) {
    TwoPointPrediction out;
    if (dt < 0.0) throw std::invalid_argument("two_point_prediction: negative time gap");
    if (dt == 0.0) {
        out.value = rho * f.inner(g);
        return out;
    }
    const ConvolutionResult conv = apply_heat_semigroup(g, dt, hk);
    out.value = rho * f.inner(conv.value);
    out.quadrature_error =
        std::abs(rho) * conv.truncation_error * f.l2_norm() * g.l2_norm();
    return out;
}

double TwoScaleExpansion::evaluate(const Configuration& mu) const {
    double s = lift_.evaluate(mu);
    for (const auto& t : terms_) s += t.weight * t.corrector.evaluate(mu);
    return s;
}

Vec TwoScaleExpansion::particle_gradient(const Configuration& mu, std::size_t i) const {
    Vec g = lift_.particle_gradient(mu, i);
    for (const auto& t : terms_) {
        const Vec gc = t.corrector.particle_gradient(mu, i);
        for (int k = 0; k < 2; ++k) g[k] += t.weight * gc[k];
    }
    return g;
}

TwoScaleExpansion build_two_scale(const GridFunction& homogenized, double rho, int n,
                                  const std::vector<CellSolution>& correctors_per_axis) {
    const Domain& dom = homogenized.domain();
    const int d = dom.dimension();
    if (static_cast<int>(correctors_per_axis.size()) != d)
        throw std::invalid_argument("build_two_scale: need one corrector per axis");
    const double cell_side = std::pow(3.0, n);
    for (const auto& c : correctors_per_axis) {
        if (std::abs(c.basis->cell().side() - cell_side) > 1e-9)
            throw std::invalid_argument("build_two_scale: corrector cell scale mismatch");
    }

    TwoScaleExpansion w;
    w.n_ = n;
    w.lift_ = LiftedStatistic(homogenized, rho);
    const std::vector<Vec> centers = mesoscopic_grid(dom, n);
    for (const Vec& z : centers) {
        for (int axis = 0; axis < d; ++axis) {
            const double slope = homogenized.cell_average_slope(axis, z, cell_side);
            if (slope == 0.0) continue;
            auto basis =
                correctors_per_axis[static_cast<std::size_t>(axis)].basis->translated(z);
            w.terms_.push_back(
                {slope, FeatureFunctional(
                            basis, correctors_per_axis[static_cast<std::size_t>(axis)].coeffs)});
        }
    }
    return w;
}

int elliptic_mesoscale(int m, double alpha) {
    if (!(alpha > 0.0)) throw std::invalid_argument("elliptic_mesoscale: alpha must be > 0");
    return static_cast<int>(std::floor(static_cast<double>(m) / (1.0 + alpha)));
}

ParabolicParameters parabolic_parameters(double t, double alpha) {
    if (!(t > 0.0)) throw std::invalid_argument("parabolic_parameters: time must be positive");
    ParabolicParameters p;
    p.tau = std::pow(t, 0.75);
    const double n_real = std::log(t) / (16.0 * std::log(3.0));
    p.n = std::max(0, static_cast<int>(std::lround(n_real)));
    p.beta = std::min(alpha, 1.0) / 16.0;
    return p;
}

} // namespace bulkdiff
