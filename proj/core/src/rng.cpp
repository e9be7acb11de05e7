// SPDX-License-Identifier: Apache-2.0
#include "tdx/rng.hpp"

#include <cmath>
#include <numbers>

#include "tdx/error.hpp"

namespace tdx {

namespace {

uint64_t splitmix64(uint64_t& state) {
    state += 0x9E3779B97F4A7C15ULL;
    uint64_t z = state;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

uint64_t rotl(uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }

} // namespace

RngStream::RngStream(uint64_t seed, uint64_t stream_id) : seed_(seed), stream_id_(stream_id) {
    uint64_t sm = seed ^ (0xD6E8FEB86659FD93ULL * (stream_id + 1));
    for (auto& w : s_) w = splitmix64(sm);
    // all-zero state is invalid for xoshiro
    if ((s_[0] | s_[1] | s_[2] | s_[3]) == 0) s_[0] = 1;
}

RngStream RngStream::split(uint64_t child_id) const {
    uint64_t sm = seed_ ^ (0xA3EC647659359ACDULL * (stream_id_ + 1));
    uint64_t derived = splitmix64(sm) ^ (0x9E3779B97F4A7C15ULL * (child_id + 1));
    return RngStream(derived, child_id);
}

uint64_t RngStream::next_u64() {
    // xoshiro256++
    const uint64_t result = rotl(s_[0] + s_[3], 23) + s_[0];
    const uint64_t t = s_[1] << 17;
    s_[2] ^= s_[0];
    s_[3] ^= s_[1];
    s_[1] ^= s_[2];
    s_[0] ^= s_[3];
    s_[2] ^= t;
    s_[3] = rotl(s_[3], 45);
    return result;
}

double RngStream::uniform() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

double RngStream::uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

double RngStream::normal() {
    // Box-Muller; u clamped away from 0 so log stays finite
    double u = uniform();
    if (u <= 0.0) u = 0x1.0p-53;
    double v = uniform();
    return std::sqrt(-2.0 * std::log(u)) * std::cos(2.0 * std::numbers::pi * v);
}

uint64_t RngStream::below(uint64_t bound) {
    if (bound == 0) throw TdxError("RngStream::below: bound must be positive");
    // rejection sampling to avoid modulo bias
    const uint64_t limit = UINT64_MAX - UINT64_MAX % bound;
    uint64_t x;
    do {
        x = next_u64();
    } while (x >= limit);
    return x % bound;
}

std::vector<int> RngStream::sample_indices(int n, int k) {
    if (k < 0 || k > n) throw TdxError("sample_indices: need 0 <= k <= n");
    std::vector<int> idx(n);
    for (int i = 0; i < n; ++i) idx[i] = i;
    for (int i = 0; i < k; ++i) {
        int j = i + static_cast<int>(below(static_cast<uint64_t>(n - i)));
        std::swap(idx[i], idx[j]);
    }
    idx.resize(k);
    return idx;
}

std::vector<int> RngStream::permutation(int n) { return sample_indices(n, n); }

} // namespace tdx
