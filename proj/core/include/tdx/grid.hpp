// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <vector>

#include "tdx/error.hpp"

namespace tdx {

/// Uniform grid on [0,1]: x_k = k/(n-1).
struct Grid1D {
    int n = 0;

    explicit Grid1D(int n_points = 0) : n(n_points) {
        if (n_points < 0) throw TdxError("Grid1D: negative point count");
    }

    double x(int k) const { return static_cast<double>(k) / static_cast<double>(n - 1); }
    double dx() const { return 1.0 / static_cast<double>(n - 1); }

    bool operator==(const Grid1D& o) const { return n == o.n; }
};

/// Real- or vector-valued function sampled on a Grid1D; point-major storage.
struct GridFunction {
    Grid1D grid;
    int dim = 1;
    std::vector<double> values;

    GridFunction() = default;
    GridFunction(Grid1D g, int d = 1) : grid(g), dim(d), values(static_cast<size_t>(g.n) * d, 0.0) {}
    GridFunction(Grid1D g, std::vector<double> v, int d = 1) : grid(g), dim(d), values(std::move(v)) {
        if (static_cast<int64_t>(values.size()) != static_cast<int64_t>(g.n) * d) {
            throw ShapeError("GridFunction: values length " + std::to_string(values.size()) +
                             " != grid n " + std::to_string(g.n) + " x dim " + std::to_string(d));
        }
    }

    double& at(int k, int c = 0) { return values[static_cast<size_t>(k) * dim + c]; }
    double at(int k, int c = 0) const { return values[static_cast<size_t>(k) * dim + c]; }
    int n() const { return grid.n; }

    bool all_finite() const;
    double max_abs() const;
};

} // namespace tdx
