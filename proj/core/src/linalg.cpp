// SPDX-License-Identifier: Apache-2.0
#include "tdx/linalg.hpp"

#include <cmath>

#include "tdx/error.hpp"

namespace tdx {

bool cholesky_factor(std::vector<double>& a, int n) {
    if (static_cast<int64_t>(a.size()) != static_cast<int64_t>(n) * n) {
        throw TdxError("cholesky_factor: matrix size does not match n");
    }
    for (int j = 0; j < n; ++j) {
        double d = a[j * n + j];
        for (int k = 0; k < j; ++k) d -= a[j * n + k] * a[j * n + k];
        if (d <= 0.0 || !std::isfinite(d)) return false;
        const double ljj = std::sqrt(d);
        a[j * n + j] = ljj;
        for (int i = j + 1; i < n; ++i) {
            double s = a[i * n + j];
            for (int k = 0; k < j; ++k) s -= a[i * n + k] * a[j * n + k];
            a[i * n + j] = s / ljj;
        }
    }
    return true;
}

void cholesky_solve(const std::vector<double>& chol, int n, std::vector<double>& b) {
    cholesky_solve_multi(chol, n, b, 1);
}

void cholesky_solve_multi(const std::vector<double>& chol, int n, std::vector<double>& b, int k) {
    if (static_cast<int64_t>(b.size()) != static_cast<int64_t>(n) * k) {
        throw TdxError("cholesky_solve_multi: rhs size does not match n*k");
    }
    // forward: L y = b
    for (int i = 0; i < n; ++i) {
        for (int c = 0; c < k; ++c) {
            double s = b[i * k + c];
            for (int j = 0; j < i; ++j) s -= chol[i * n + j] * b[j * k + c];
            b[i * k + c] = s / chol[i * n + i];
        }
    }
    // backward: L^T x = y
    for (int i = n - 1; i >= 0; --i) {
        for (int c = 0; c < k; ++c) {
            double s = b[i * k + c];
            for (int j = i + 1; j < n; ++j) s -= chol[j * n + i] * b[j * k + c];
            b[i * k + c] = s / chol[i * n + i];
        }
    }
}

std::vector<double> lower_tri_apply(const std::vector<double>& chol, int n, const std::vector<double>& z) {
    if (static_cast<int>(z.size()) != n) throw TdxError("lower_tri_apply: vector size does not match n");
    std::vector<double> y(n, 0.0);
    for (int i = 0; i < n; ++i) {
        double s = 0.0;
        for (int j = 0; j <= i; ++j) s += chol[i * n + j] * z[j];
        y[i] = s;
    }
    return y;
}

} // namespace tdx
