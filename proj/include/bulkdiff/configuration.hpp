#pragma once

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "bulkdiff/geometry.hpp"
#include "bulkdiff/rng.hpp"

namespace bulkdiff {

/// Finite point configuration in a domain. The point list is kept in sampling
/// order but every operation treats it as a multiset.
class Configuration {
public:
    Configuration() : dom_(Domain::box(1, 1.0)) {}
    explicit Configuration(Domain dom) : dom_(dom) {}
    Configuration(Domain dom, std::vector<Vec> pts) : dom_(dom), pts_(std::move(pts)) {}

    const Domain& domain() const { return dom_; }
    std::size_t size() const { return pts_.size(); }
    bool empty() const { return pts_.empty(); }
    const Vec& point(std::size_t i) const { return pts_[i]; }
    const std::vector<Vec>& points() const { return pts_; }
    void add(const Vec& x) { pts_.push_back(x); }
    void set_point(std::size_t i, const Vec& x) { pts_[i] = x; }

    /// Number of points with |y - x| < r (open ball, torus-aware metric).
    std::size_t count_in_ball(const Vec& x, double r) const;

    /// Number of points inside the given region.
    std::size_t count_in(const Domain& region) const;

private:
    Domain dom_;
    std::vector<Vec> pts_;
};

/// Poisson point process with constant intensity rho on the domain.
/// Rejects negative rho. Counts per unit-volume cell are independent
/// Poisson draws, so the total is Poisson(rho * |domain|) exactly.
Configuration sample_poisson(const Domain& dom, double rho, RandomStream& rng);

/// Poisson sample plus a deterministic atom at the origin: the point process
/// seen from a typical particle (Slivnyak-Mecke).
Configuration sample_palm(const Domain& dom, double rho, RandomStream& rng);

/// tau_{-x} mu restricted to A: translate so x becomes the origin (wrapping on
/// a torus), then drop points outside A. The result lives on A.
Configuration translate_restrict(const Configuration& mu, const Vec& x, const Domain& a);

/// tau_{-x} mu restricted to the open ball B_r(0); the result lives on the
/// bounding box of the ball.
Configuration translate_restrict_ball(const Configuration& mu, const Vec& x, double r);

/// Translation without restriction; result keeps the source domain shape
/// recentered at the origin.
Configuration translate(const Configuration& mu, const Vec& x);

/// Snapshot text format: "# d=<d> geometry=<box|torus> side=<float>" header,
/// optionally "# t=<float>", then one whitespace-separated point per line.
void write_snapshot(std::ostream& os, const Configuration& mu,
                    std::optional<double> time = std::nullopt);
Configuration read_snapshot(std::istream& is, std::optional<double>* time = nullptr);
void save_snapshot(const std::string& path, const Configuration& mu,
                   std::optional<double> time = std::nullopt);
Configuration load_snapshot(const std::string& path, std::optional<double>* time = nullptr);

} // namespace bulkdiff
