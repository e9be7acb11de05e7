// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "tdx/grid.hpp"
#include "tdx/random_fields.hpp"
#include "tdx/rng.hpp"

namespace tdx {

/// One forward-Euler step of
///   ds/dt = div(delta grad s) + nu grad s + k s^2
/// with conservative central differences on the interior (face-averaged
/// delta) and homogeneous Dirichlet endpoints held at zero.
GridFunction adr_step(const GridFunction& state, const AdrCoefficients& coeffs, double dt);

/// Integrates round(t/dt) Euler steps. Throws NumericError with the failing
/// step index if the state leaves finite range.
GridFunction adr_solve(const GridFunction& v0, const AdrCoefficients& coeffs, double t,
                       double dt = 1e-2);

/// Same integration, returning every intermediate state (index 0 = v0).
std::vector<GridFunction> adr_solve_trajectory(const GridFunction& v0, const AdrCoefficients& coeffs,
                                               double t, double dt = 1e-2);

/// Largest dt the explicit scheme tolerates for these coefficients
/// (diffusion + advection + reaction bound, with a 0.8 safety factor).
double stable_dt_bound(const AdrCoefficients& coeffs, const Grid1D& grid);

struct FunctionPair {
    GridFunction v;
    GridFunction u;
};

/// All example pairs for one operator, with generation provenance.
struct OperatorDataset {
    Grid1D grid;
    std::vector<FunctionPair> pairs;
    AdrCoefficients coeffs;
    double target_time = 1.0;
    double dt_used = 1e-2;
    uint64_t seed = 0;

    int size() const { return static_cast<int>(pairs.size()); }
};

struct MetaGenConfig {
    int n_datasets = 64;
    int pairs_per_dataset = 32;
    double t = 1.0;
    double l = 0.2;
    int grid_n = 100;
    uint64_t seed = 0;
    double dt = 1e-2;
    /// When set, per-dataset dt is lowered to the explicit stability bound
    /// (and rounded so it divides t); the requested dt is an upper bound.
    bool clamp_dt = true;
    double k_min = 0.0;
    double k_max = 0.3;
    int max_retries = 20;
};

struct MetaDataset {
    std::vector<OperatorDataset> datasets;
    std::string split; // "meta-train" / "meta-test"
    MetaGenConfig config;

    int size() const { return static_cast<int>(datasets.size()); }
};

/// n_pairs initial states drawn from the GRF prior and integrated to time t.
/// A trajectory that leaves finite range is rejected and its initial state
/// resampled, at most max_retries times per pair.
OperatorDataset generate_operator_dataset(const AdrCoefficients& coeffs, int n_pairs, double t,
                                          const GrfSampler& state_sampler, RngStream& rng,
                                          double dt = 1e-2, int max_retries = 20);

/// N independent coefficient draws expanded to operator datasets.
/// Deterministic under config.seed; dataset i uses streams derived from
/// (seed, i) so generation order never matters.
MetaDataset generate_meta_dataset(const MetaGenConfig& config, const std::string& split = "meta-train");

} // namespace tdx
