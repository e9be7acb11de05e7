// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <cmath>

#include "tdx/random_fields.hpp"
#include "test_util.hpp"

using namespace tdx;

TEST_CASE("covariance matrix values") {
    const Grid1D grid(101);
    CHECK_THROWS_AS(covariance_matrix(grid, 0.0), TdxError);
    const double l = 0.25;
    const Tensor k = covariance_matrix(grid, l);
    for (int i = 0; i < grid.n; ++i) CHECK(k.at(i, i) == 1.0);
    // |x_i - x_j| == l at 25 grid steps
    CHECK(k.at(0, 25) == doctest::Approx(std::exp(-0.5)).epsilon(1e-12));
    for (int i = 0; i < grid.n; ++i)
        for (int j = 0; j < grid.n; ++j) CHECK(k.at(i, j) == k.at(j, i));
}

TEST_CASE("grf sampler moments (Monte Carlo)") {
    const Grid1D grid(50);
    const double l = 0.2;
    const GrfSampler sampler(grid, l);
    CHECK(sampler.jitter() <= 1e-5);

    const int n_draws = 10000;
    RngStream rng(42, 0);
    std::vector<double> mean(static_cast<size_t>(grid.n), 0.0);
    std::vector<double> cov(static_cast<size_t>(grid.n) * grid.n, 0.0);
    for (int d = 0; d < n_draws; ++d) {
        const GridFunction u = sampler.sample(rng);
        for (int i = 0; i < grid.n; ++i) {
            mean[static_cast<size_t>(i)] += u.at(i);
            for (int j = 0; j <= i; ++j) cov[static_cast<size_t>(i) * grid.n + j] += u.at(i) * u.at(j);
        }
    }
    const Tensor k = covariance_matrix(grid, l);
    double worst_mean = 0.0, worst_cov = 0.0;
    for (int i = 0; i < grid.n; ++i) {
        worst_mean = std::max(worst_mean, std::abs(mean[static_cast<size_t>(i)] / n_draws));
        for (int j = 0; j <= i; ++j) {
            const double c = cov[static_cast<size_t>(i) * grid.n + j] / n_draws;
            worst_cov = std::max(worst_cov, std::abs(c - k.at(i, j)));
        }
    }
    CHECK(worst_mean < 0.05);
    CHECK(worst_cov < 0.05);
}

TEST_CASE("grf determinism") {
    const Grid1D grid(64);
    RngStream a(9, 3), b(9, 3);
    const GridFunction ua = sample_grf(grid, 0.2, a);
    const GridFunction ub = sample_grf(grid, 0.2, b);
    for (int i = 0; i < grid.n; ++i) CHECK(ua.at(i) == ub.at(i));
}

TEST_CASE("distinct streams are uncorrelated") {
    const Grid1D grid(10);
    const GrfSampler sampler(grid, 0.2);
    RngStream s1(123, 1), s2(123, 2);
    const int n = 10000;
    double sum1 = 0, sum2 = 0, sum12 = 0, sq1 = 0, sq2 = 0;
    for (int i = 0; i < n; ++i) {
        const double a = sampler.sample(s1).at(5);
        const double b = sampler.sample(s2).at(5);
        sum1 += a;
        sum2 += b;
        sum12 += a * b;
        sq1 += a * a;
        sq2 += b * b;
    }
    const double c12 = sum12 / n - (sum1 / n) * (sum2 / n);
    const double v1 = sq1 / n - (sum1 / n) * (sum1 / n);
    const double v2 = sq2 / n - (sum2 / n) * (sum2 / n);
    CHECK(std::abs(c12 / std::sqrt(v1 * v2)) < 0.05);
}

TEST_CASE("boundary mask") {
    const Grid1D grid(101);
    const GridFunction m = boundary_mask(grid);
    CHECK(m.at(0) == 0.0);
    CHECK(m.at(100) == 0.0);
    CHECK(m.at(50) == 1.0);
    // m(0.25) = 1 - 0.5^10
    CHECK(m.at(25) == doctest::Approx(1.0 - std::pow(0.5, 10)).epsilon(1e-12));
    for (int i = 0; i < grid.n; ++i) {
        CHECK(m.at(i) >= 0.0);
        CHECK(m.at(i) <= 1.0);
    }
}

TEST_CASE("adr coefficient invariants over many seeds") {
    const Grid1D grid(100);
    const GrfSampler sampler(grid, 0.2);
    double k_sum = 0.0;
    const int draws = 1000;
    for (int s = 0; s < draws; ++s) {
        RngStream rng(static_cast<uint64_t>(s), 0);
        const AdrCoefficients c = sample_adr_coefficients(sampler, rng);
        for (int i = 0; i < grid.n; ++i) CHECK(c.delta.at(i) >= 0.0);
        CHECK(c.delta.at(0) == 0.0);
        CHECK(c.delta.at(grid.n - 1) == 0.0);
        CHECK(c.nu.at(0) == 0.0);
        CHECK(c.nu.at(grid.n - 1) == 0.0);
        CHECK(c.k_reaction >= 0.0);
        CHECK(c.k_reaction <= 0.3);
        k_sum += c.k_reaction;
    }
    CHECK(k_sum / draws == doctest::Approx(0.15).epsilon(0.07)); // 0.15 +- ~0.01
}

TEST_CASE("initial state: endpoints, smoothness, determinism") {
    const Grid1D grid(100);
    const GrfSampler sampler(grid, 0.2);
    double worst_step = 0.0;
    for (int s = 0; s < 1000; ++s) {
        RngStream rng(static_cast<uint64_t>(s), 7);
        const GridFunction v = sample_initial_state(sampler, rng);
        CHECK(v.at(0) == 0.0);
        CHECK(v.at(grid.n - 1) == 0.0);
        for (int i = 0; i + 1 < grid.n; ++i) {
            worst_step = std::max(worst_step, std::abs(v.at(i + 1) - v.at(i)));
        }
    }
    CHECK(worst_step < 0.5);

    RngStream r1(77, 0), r2(77, 0);
    const GridFunction a = sample_initial_state(sampler, r1);
    const GridFunction b = sample_initial_state(sampler, r2);
    for (int i = 0; i < grid.n; ++i) CHECK(a.at(i) == b.at(i));
}
