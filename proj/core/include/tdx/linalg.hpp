// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <vector>

namespace tdx {

/// In-place Cholesky factorization of a symmetric matrix stored row-major.
/// On success the lower triangle holds L with A = L L^T (upper left as-is).
/// Returns false if a non-positive pivot is hit.
bool cholesky_factor(std::vector<double>& a, int n);

/// Solves L L^T x = b in place given the factor from cholesky_factor.
void cholesky_solve(const std::vector<double>& chol, int n, std::vector<double>& b);

/// Solves for k right-hand sides stored row-major as b[n][k].
void cholesky_solve_multi(const std::vector<double>& chol, int n, std::vector<double>& b, int k);

/// y = L z for the lower-triangular factor (used to color white noise).
std::vector<double> lower_tri_apply(const std::vector<double>& chol, int n, const std::vector<double>& z);

} // namespace tdx
