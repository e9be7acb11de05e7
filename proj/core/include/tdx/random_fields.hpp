// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "tdx/grid.hpp"
#include "tdx/rng.hpp"
#include "tdx/tensor.hpp"

namespace tdx {

/// Squared-exponential covariance K[i][j] = exp(-(x_i-x_j)^2 / (2 l^2)).
Tensor covariance_matrix(const Grid1D& grid, double l);

/// Spatially varying advection-diffusion-reaction coefficients.
/// delta and nu vanish at the domain endpoints; k_reaction >= 0.
struct AdrCoefficients {
    GridFunction delta;
    GridFunction nu;
    double k_reaction = 0.0;
};

/// Draws zero-mean Gaussian fields with covariance k_l via a cached Cholesky
/// factor of K + jitter*I. Jitter starts at 1e-9 and escalates x10 up to 1e-5
/// before construction fails.
class GrfSampler {
  public:
    GrfSampler(const Grid1D& grid, double l);

    GridFunction sample(RngStream& rng) const;

    double jitter() const { return jitter_; }
    const Grid1D& grid() const { return grid_; }

    static constexpr double kJitterStart = 1e-9;
    static constexpr double kJitterMax = 1e-5;

  private:
    Grid1D grid_;
    std::vector<double> chol_;
    double jitter_ = 0.0;
};

/// One-shot GRF draw (builds a sampler internally).
GridFunction sample_grf(const Grid1D& grid, double l, RngStream& rng);

/// m(x) = 1 - (2x - 1)^10; zero at both endpoints, one at the center.
GridFunction boundary_mask(const Grid1D& grid);

/// delta = 0.01 * u^2 * m, nu = 0.05 * y * m with independent GRF draws u, y;
/// k uniform on [k_min, k_max]. Draw order: u, y, k.
AdrCoefficients sample_adr_coefficients(const Grid1D& grid, double l, RngStream& rng,
                                        double k_min = 0.0, double k_max = 0.3);
AdrCoefficients sample_adr_coefficients(const GrfSampler& sampler, RngStream& rng,
                                        double k_min = 0.0, double k_max = 0.3);

/// Initial state m(x) * u(x) with u a fresh GRF draw; endpoints exactly zero.
GridFunction sample_initial_state(const Grid1D& grid, double l, RngStream& rng);
GridFunction sample_initial_state(const GrfSampler& sampler, RngStream& rng);

} // namespace tdx
