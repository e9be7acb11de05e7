// SPDX-License-Identifier: Apache-2.0
#include "tdx/random_fields.hpp"

#include <cmath>
#include <string>

#include "tdx/linalg.hpp"

namespace tdx {

Tensor covariance_matrix(const Grid1D& grid, double l) {
    if (l <= 0.0) throw TdxError("covariance_matrix: correlation length must be > 0, got " + std::to_string(l));
    const int n = grid.n;
    Tensor k = Tensor::zeros({n, n});
    const double inv = 1.0 / (2.0 * l * l);
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j <= i; ++j) {
            const double d = grid.x(i) - grid.x(j);
            const double v = std::exp(-d * d * inv);
            k.at(i, j) = v;
            k.at(j, i) = v;
        }
    }
    return k;
}

GrfSampler::GrfSampler(const Grid1D& grid, double l) : grid_(grid) {
    Tensor k = covariance_matrix(grid, l);
    const int n = grid.n;
    for (double jitter = kJitterStart; jitter <= kJitterMax * 1.0000001; jitter *= 10.0) {
        std::vector<double> a = k.values();
        for (int i = 0; i < n; ++i) a[static_cast<size_t>(i) * n + i] += jitter;
        if (cholesky_factor(a, n)) {
            chol_ = std::move(a);
            jitter_ = jitter;
            return;
        }
    }
    throw NumericError("GrfSampler: covariance Cholesky failed up to jitter " + std::to_string(kJitterMax));
}

GridFunction GrfSampler::sample(RngStream& rng) const {
    const int n = grid_.n;
    std::vector<double> z(static_cast<size_t>(n));
    for (double& v : z) v = rng.normal();
    return GridFunction(grid_, lower_tri_apply(chol_, n, z));
}

GridFunction sample_grf(const Grid1D& grid, double l, RngStream& rng) {
    return GrfSampler(grid, l).sample(rng);
}

GridFunction boundary_mask(const Grid1D& grid) {
    GridFunction m(grid);
    for (int k = 0; k < grid.n; ++k) {
        const double c = 2.0 * grid.x(k) - 1.0;
        double p = 1.0;
        for (int e = 0; e < 10; ++e) p *= c;
        m.at(k) = 1.0 - p;
    }
    return m;
}

AdrCoefficients sample_adr_coefficients(const GrfSampler& sampler, RngStream& rng,
                                        double k_min, double k_max) {
    const Grid1D grid = sampler.grid();
    const GridFunction mask = boundary_mask(grid);
    const GridFunction u = sampler.sample(rng);
    const GridFunction y = sampler.sample(rng);
    AdrCoefficients c;
    c.delta = GridFunction(grid);
    c.nu = GridFunction(grid);
    for (int k = 0; k < grid.n; ++k) {
        c.delta.at(k) = 0.01 * u.at(k) * u.at(k) * mask.at(k);
        c.nu.at(k) = 0.05 * y.at(k) * mask.at(k);
    }
    c.k_reaction = rng.uniform(k_min, k_max);
    return c;
}

AdrCoefficients sample_adr_coefficients(const Grid1D& grid, double l, RngStream& rng,
                                        double k_min, double k_max) {
    return sample_adr_coefficients(GrfSampler(grid, l), rng, k_min, k_max);
}

GridFunction sample_initial_state(const GrfSampler& sampler, RngStream& rng) {
    const Grid1D grid = sampler.grid();
    const GridFunction mask = boundary_mask(grid);
    GridFunction v = sampler.sample(rng);
    for (int k = 0; k < grid.n; ++k) v.at(k) *= mask.at(k);
    v.at(0) = 0.0;
    v.at(grid.n - 1) = 0.0;
    return v;
}

GridFunction sample_initial_state(const Grid1D& grid, double l, RngStream& rng) {
    return sample_initial_state(GrfSampler(grid, l), rng);
}

} // namespace tdx
