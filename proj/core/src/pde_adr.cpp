// SPDX-License-Identifier: Apache-2.0
#include "tdx/pde_adr.hpp"

#include <cmath>

namespace tdx {

namespace {

void adr_step_into(const GridFunction& s, const AdrCoefficients& c, double dt, GridFunction& out) {
    const int n = s.n();
    const double dx = s.grid.dx();
    const double inv_dx2 = 1.0 / (dx * dx);
    const double inv_2dx = 1.0 / (2.0 * dx);
    out.at(0) = 0.0;
    out.at(n - 1) = 0.0;
    for (int i = 1; i < n - 1; ++i) {
        const double dp = 0.5 * (c.delta.at(i) + c.delta.at(i + 1));
        const double dm = 0.5 * (c.delta.at(i) + c.delta.at(i - 1));
        const double diffusion = (dp * (s.at(i + 1) - s.at(i)) - dm * (s.at(i) - s.at(i - 1))) * inv_dx2;
        const double advection = c.nu.at(i) * (s.at(i + 1) - s.at(i - 1)) * inv_2dx;
        const double reaction = c.k_reaction * s.at(i) * s.at(i);
        out.at(i) = s.at(i) + dt * (diffusion + advection + reaction);
    }
}

} // namespace

GridFunction adr_step(const GridFunction& state, const AdrCoefficients& coeffs, double dt) {
    if (dt <= 0.0) throw TdxError("adr_step: dt must be > 0");
    if (state.dim != 1) throw ShapeError("adr_step: scalar states only");
    if (state.n() != coeffs.delta.n() || state.n() != coeffs.nu.n()) {
        throw ShapeError("adr_step: state and coefficient grids differ");
    }
    GridFunction out(state.grid);
    adr_step_into(state, coeffs, dt, out);
    if (!out.all_finite()) throw NumericError("adr_step: non-finite state produced");
    return out;
}

namespace {

int64_t step_count(double t, double dt) {
    if (t < 0.0) throw TdxError("adr_solve: target time must be >= 0");
    if (dt <= 0.0) throw TdxError("adr_solve: dt must be > 0");
    return std::llround(t / dt);
}

} // namespace

GridFunction adr_solve(const GridFunction& v0, const AdrCoefficients& coeffs, double t, double dt) {
    const int64_t steps = step_count(t, dt);
    GridFunction a = v0;
    GridFunction b(v0.grid);
    for (int64_t m = 0; m < steps; ++m) {
        adr_step_into(a, coeffs, dt, b);
        if (!b.all_finite()) {
            throw NumericError("adr_solve: instability at step " + std::to_string(m + 1) + " (t=" +
                               std::to_string(static_cast<double>(m + 1) * dt) + ", dt=" +
                               std::to_string(dt) + ")");
        }
        std::swap(a, b);
    }
    return a;
}

std::vector<GridFunction> adr_solve_trajectory(const GridFunction& v0, const AdrCoefficients& coeffs,
                                               double t, double dt) {
    const int64_t steps = step_count(t, dt);
    std::vector<GridFunction> traj;
    traj.reserve(static_cast<size_t>(steps) + 1);
    traj.push_back(v0);
    for (int64_t m = 0; m < steps; ++m) {
        traj.push_back(adr_step(traj.back(), coeffs, dt));
    }
    return traj;
}

double stable_dt_bound(const AdrCoefficients& coeffs, const Grid1D& grid) {
    const double dx = grid.dx();
    double max_delta = 0.0, max_nu = 0.0;
    for (int i = 0; i < grid.n; ++i) {
        max_delta = std::max(max_delta, coeffs.delta.at(i));
        max_nu = std::max(max_nu, std::abs(coeffs.nu.at(i)));
    }
    // worst-case linearized rate: 2 delta/dx^2 + |nu|/dx + reaction slope
    const double rate = 2.0 * max_delta / (dx * dx) + max_nu / dx + 2.0 * coeffs.k_reaction;
    if (rate <= 0.0) return 1.0;
    return 0.8 / rate;
}

OperatorDataset generate_operator_dataset(const AdrCoefficients& coeffs, int n_pairs, double t,
                                          const GrfSampler& state_sampler, RngStream& rng,
                                          double dt, int max_retries) {
    if (n_pairs < 1) throw TdxError("generate_operator_dataset: need at least one pair");
    OperatorDataset ds;
    ds.grid = state_sampler.grid();
    ds.coeffs = coeffs;
    ds.target_time = t;
    ds.dt_used = dt;
    ds.seed = rng.seed();
    ds.pairs.reserve(static_cast<size_t>(n_pairs));
    for (int p = 0; p < n_pairs; ++p) {
        bool done = false;
        for (int attempt = 0; attempt <= max_retries; ++attempt) {
            GridFunction v0 = sample_initial_state(state_sampler, rng);
            try {
                GridFunction u = adr_solve(v0, coeffs, t, dt);
                ds.pairs.push_back({std::move(v0), std::move(u)});
                done = true;
                break;
            } catch (const NumericError&) {
                // blown-up trajectory: draw a fresh initial state
            }
        }
        if (!done) {
            throw NumericError("generate_operator_dataset: retry budget (" + std::to_string(max_retries) +
                               ") exhausted for pair " + std::to_string(p) +
                               "; coefficients unstable at dt=" + std::to_string(dt));
        }
    }
    return ds;
}

MetaDataset generate_meta_dataset(const MetaGenConfig& config, const std::string& split) {
    if (config.n_datasets < 1) throw TdxError("generate_meta_dataset: need at least one dataset");
    const Grid1D grid(config.grid_n);
    const GrfSampler sampler(grid, config.l);
    MetaDataset meta;
    meta.split = split;
    meta.config = config;
    meta.datasets.reserve(static_cast<size_t>(config.n_datasets));
    for (int i = 0; i < config.n_datasets; ++i) {
        RngStream coeff_rng = RngStream::from_seed(config.seed, 2 * static_cast<uint64_t>(i));
        RngStream state_rng = RngStream::from_seed(config.seed, 2 * static_cast<uint64_t>(i) + 1);
        const AdrCoefficients coeffs =
            sample_adr_coefficients(sampler, coeff_rng, config.k_min, config.k_max);
        double dt = config.dt;
        if (config.clamp_dt) {
            const double bound = stable_dt_bound(coeffs, grid);
            if (bound < dt) {
                // uniform dt that divides the target time exactly
                const int64_t steps = static_cast<int64_t>(std::ceil(config.t / bound));
                dt = config.t / static_cast<double>(steps);
            }
        }
        OperatorDataset ds = generate_operator_dataset(coeffs, config.pairs_per_dataset, config.t,
                                                       sampler, state_rng, dt, config.max_retries);
        ds.seed = config.seed;
        meta.datasets.push_back(std::move(ds));
    }
    return meta;
}

} // namespace tdx
