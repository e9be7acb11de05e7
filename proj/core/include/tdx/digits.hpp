// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <vector>

#include "tdx/model.hpp"
#include "tdx/rng.hpp"
#include "tdx/training.hpp"

namespace tdx {

/// Labeled classification set with flat image vectors in [0,1].
struct LabeledSet {
    int input_dim = 0;
    int n_classes = 0;
    std::vector<std::vector<double>> images;
    std::vector<int> labels;

    int size() const { return static_cast<int>(images.size()); }
};

/// Deterministic synthetic stand-in for 8x8 downsampled digits: ten fixed
/// glyph prototypes per (seed), each sample a noisy copy. Good enough to
/// exercise the permuted-classification meta-task without external files.
LabeledSet synthetic_digits(int per_class, uint64_t seed, double noise = 0.15);

struct PermutedEpisodeConfig {
    int context_per_class = 4;
    int query_count = 10;
    /// Identity permutations when false (meta-test protocol).
    bool permute = true;
};

/// Builds one episode: a pixel permutation and a class permutation (fresh
/// from rng when enabled), applied consistently to context and queries.
/// Outputs are one-hot encodings of the permuted labels.
Episode make_permuted_episode(const LabeledSet& data, const PermutedEpisodeConfig& config,
                              RngStream& rng, std::vector<int>* query_labels_out = nullptr);

} // namespace tdx
