#pragma once

#include <array>
#include <stdexcept>
#include <string>
#include <vector>

#include "bulkdiff/coefficient.hpp"
#include "bulkdiff/configuration.hpp"
#include "bulkdiff/functional.hpp"

namespace bulkdiff {

/// Raised when a configuration has more particles in the cell than the
/// sector representation covers, so callers can resample or truncate.
struct SectorOverflow : std::runtime_error {
    explicit SectorOverflow(const std::string& what) : std::runtime_error(what) {}
};

/// d=1 brute-force representation of a configuration functional restricted
/// to at most K particles in a cell, on a uniform grid of spacing h.
/// Storage is the telescoping excess decomposition
///   v({x})        = w1(x)
///   v({x1,x2})    = w1(x1) + w1(x2) + e2(x1,x2)
///   v({x1,x2,x3}) = sum_i w1(xi) + sum_{i<j} e2(xi,xj) + e3(x1,x2,x3)
/// so each excess vanishes as its last particle reaches the cell boundary;
/// this is exactly the zero-boundary compatibility structure.
class SectorGridFunctional {
public:
    SectorGridFunctional(Domain cell, int max_particles, int grid_intervals);

    static SectorGridFunctional project(const FeatureFunctional& f, const Domain& cell,
                                        int max_particles, int grid_intervals);

    const Domain& cell() const { return cell_; }
    int max_particles() const { return k_; }
    int grid_intervals() const { return n_; }
    double spacing() const { return h_; }

    double& w1(int i) { return w1_[static_cast<std::size_t>(i)]; }
    double& e2(int i, int j) { return e2_[static_cast<std::size_t>(i * (n_ + 1) + j)]; }
    double w1(int i) const { return w1_[static_cast<std::size_t>(i)]; }
    double e2(int i, int j) const { return e2_[static_cast<std::size_t>(i * (n_ + 1) + j)]; }
    double& e3(int i, int j, int k);
    double e3(int i, int j, int k) const;

    /// Piecewise-multilinear evaluation; throws SectorOverflow when the cell
    /// holds more than max_particles points. Points outside the cell are
    /// ignored (the functional is cell-measurable).
    double evaluate(const Configuration& mu) const;

    void symmetrize();

    /// Flat binary dump (doubles, native endianness) plus a JSON sidecar
    /// describing k, h and the cell.
    void save(const std::string& binary_path, const std::string& sidecar_path) const;
    static SectorGridFunctional load(const std::string& binary_path,
                                     const std::string& sidecar_path);

private:
    double interp1(double x) const;
    double interp2(double x, double y) const;
    double interp3(double x, double y, double z) const;

    Domain cell_;
    int k_;
    int n_;
    double h_;
    std::vector<double> w1_; // n+1 nodes
    std::vector<double> e2_; // (n+1)^2, symmetric
    std::vector<double> e3_; // (n+1)^3 when k_ >= 3
};

/// Conditional occupancy data of the truncated point process on the padded
/// window of a cell: P(N=k | N <= K) and the resulting mean count in the cell.
struct TruncatedOccupancy {
    std::array<double, 4> pi{0, 0, 0, 0}; // conditional P(N_window = k)
    double mean_count_in_cell = 0.0;
    double window_volume = 0.0;
};
TruncatedOccupancy truncated_occupancy(const Domain& cell, double rho, int max_points);

struct SectorOracleResult {
    double value = 0.0;          // cell value, normalized by the conditional mean count
    double raw_value = 0.0;      // without the normalization
    SectorGridFunctional minimizer;
    TruncatedOccupancy occupancy;
    int cg_iterations = 0;
    double cg_residual = 0.0;
};

/// Exact-quadrature finite-difference minimization of the cell problem over
/// all compatible (zero-boundary) sector functions with at most K particles
/// in the padded window, K <= 2, d = 1: the independent oracle for the
/// feature-basis solver run under the same conditioning.
SectorOracleResult sector_cell_oracle(const Domain& cell, const CoefficientModel& model,
                                      double rho, double slope, int max_points,
                                      int grid_intervals);

} // namespace bulkdiff
