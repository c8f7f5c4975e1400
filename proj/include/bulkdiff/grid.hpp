#pragma once

#include <functional>
#include <string>
#include <vector>

#include "bulkdiff/geometry.hpp"

namespace bulkdiff {

/// Nodal values on a uniform grid over a box (nodes include the boundary) or
/// a torus (periodic, no duplicate boundary node). Evaluation interpolates
/// (bi)linearly; gradients are cell slopes.
class GridFunction {
public:
    GridFunction() : dom_(Domain::box(1, 1.0)) {}
    GridFunction(Domain dom, int intervals_per_axis, bool zero_boundary = false);

    static GridFunction sampled(Domain dom, int intervals_per_axis,
                                const std::function<double(const Vec&)>& f,
                                bool zero_boundary = false);

    const Domain& domain() const { return dom_; }
    int intervals() const { return n_; }
    double spacing() const { return h_; }
    bool zero_boundary() const { return zero_boundary_; }
    int nodes_per_axis() const { return axis_nodes_; }
    std::size_t node_count() const { return v_.size(); }

    double& at(int i, int j = 0);
    double at(int i, int j = 0) const;
    Vec node(int i, int j = 0) const;

    double value(const Vec& x) const;
    Vec gradient(const Vec& x) const;

    /// Quadrature of the nodal values (trapezoid on boxes, plain sum on tori).
    double integral() const;
    double inner(const GridFunction& g) const; // integral of the product
    double l2_norm() const;
    double max_abs() const;

    /// Discrete Sobolev seminorms from forward first and centered second
    /// differences (boxes extend by the zero boundary).
    double grad_l2() const;
    double hess_l2() const;

    /// Mean cell value of the axis-k slope over the box [center-side/2]^d + z.
    double cell_average_slope(int axis, const Vec& cell_center, double cell_side) const;

    GridFunction& operator+=(const GridFunction& g);
    GridFunction& operator*=(double s);

    void enforce_zero_boundary();

    /// CSV rows "x[,y],value" with '#' metadata header lines.
    void write_csv(const std::string& path) const;
    static GridFunction read_csv(const std::string& path);

private:
    int index(int i, int j) const;
    Domain dom_;
    int n_ = 0;          // intervals per axis
    int axis_nodes_ = 0; // nodes per axis
    double h_ = 0.0;
    bool zero_boundary_ = false;
    std::vector<double> v_;
};

} // namespace bulkdiff
