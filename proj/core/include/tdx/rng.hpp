// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <cstdint>
#include <vector>

namespace tdx {

/// Deterministic random stream: xoshiro256++ core, seeded through splitmix64
/// from a (seed, stream id) pair. Same pair, same build -> same sequence.
/// Distinct stream ids from one seed give independent streams; a stream must
/// not be shared across concurrent tasks.
class RngStream {
  public:
    RngStream() : RngStream(0, 0) {}
    RngStream(uint64_t seed, uint64_t stream_id);

    static RngStream from_seed(uint64_t seed, uint64_t stream_id = 0) {
        return RngStream(seed, stream_id);
    }

    /// Child stream derived from this stream's identity, independent of
    /// how much of the parent has been consumed.
    RngStream split(uint64_t child_id) const;

    uint64_t next_u64();

    /// Uniform in [0, 1), 53-bit resolution.
    double uniform();
    double uniform(double lo, double hi);

    /// Standard normal via Box-Muller; draws two uniforms per call, no cache.
    double normal();

    /// Unbiased integer in [0, bound).
    uint64_t below(uint64_t bound);

    /// First k entries of a uniformly random permutation of 0..n-1.
    std::vector<int> sample_indices(int n, int k);

    std::vector<int> permutation(int n);

    uint64_t seed() const { return seed_; }
    uint64_t stream_id() const { return stream_id_; }

  private:
    std::array<uint64_t, 4> s_{};
    uint64_t seed_ = 0;
    uint64_t stream_id_ = 0;
};

} // namespace tdx
