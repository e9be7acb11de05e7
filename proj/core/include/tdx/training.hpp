// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "tdx/model.hpp"
#include "tdx/pde_adr.hpp"
#include "tdx/spectral.hpp"

namespace tdx {

struct TrainConfig {
    int64_t steps = 2000;
    /// When > 0, overrides steps with epochs * meta-set size (one epoch = one
    /// pass of single-operator steps over the meta-train set).
    int64_t epochs = 0;
    int batch_operators = 1;
    int query_count = 10;
    int context_min = 20;
    int context_max = 100;
    double learning_rate = 1e-4;
    /// Steps at which the learning rate halves; empty picks 50%, 75% and 90%
    /// of the budget.
    std::vector<int64_t> lr_milestones;
    double adam_beta1 = 0.9;
    double adam_beta2 = 0.999;
    double adam_eps = 1e-8;
    uint64_t seed = 0;
    /// Train against grid values after spectral reconstruction (default), or
    /// directly in mode space when false.
    bool grid_space_loss = true;
    int64_t checkpoint_every = 0;
};

struct AdamState {
    std::vector<Tensor> m;
    std::vector<Tensor> v;
    int64_t t = 0;

    static AdamState zeros_like(const std::vector<Tensor>& params);
};

struct CurvePoint {
    int64_t step = 0;
    double loss = 0.0;
    double lr = 0.0;
    double seconds = 0.0;
};

struct TrainResult {
    TransducerParams params;
    AdamState adam;
    std::vector<CurvePoint> curve;
};

/// Base LR halved once per crossed milestone.
double lr_at(const std::vector<int64_t>& milestones, int64_t step, double base);

/// Standard bias-corrected Adam update; increments state.t once per call.
void adam_step(std::vector<Tensor>& params, const std::vector<Tensor>& grads, AdamState& state,
               double lr, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8);

/// Disjoint uniformly-random (context, query) index sets.
std::pair<std::vector<int>, std::vector<int>> split_episode(int dataset_size, int context_n,
                                                            int query_count, RngStream& rng);

/// Mean squared error between the forward prediction and targets. With a
/// reconstruction matrix the prediction is mapped to grid space first;
/// targets must already live in the chosen space.
Value episode_loss(Tape& tape, const std::vector<Value>& params, const ModelConfig& config,
                   const EpisodeInput& episode, const Tensor& targets, const Tensor* recon_matrix);

/// Mode-space features of one operator dataset plus grid-space truths.
struct EncodedOperator {
    Tensor v_modes; // [pairs x 2M]
    Tensor u_modes; // [pairs x 2M]
    Tensor u_grid;  // [pairs x n]
};

EncodedOperator encode_operator(const OperatorDataset& ds, int modes);

/// One training episode produced by a sampler: inputs plus loss-space targets.
struct Episode {
    EpisodeInput input;
    Tensor targets;
    std::string label; // provenance for error messages
};

using EpisodeSampler = std::function<Episode(int64_t step, int slot, RngStream& rng)>;
using CheckpointSink =
    std::function<void(int64_t step, const TransducerParams&, const AdamState&, const std::vector<CurvePoint>&)>;

/// Generic meta-training loop: per step, batch_operators episodes from the
/// sampler, one backward pass, one Adam update. Step s consumes the stream
/// (seed, s), so runs resumed from a checkpoint replay the uninterrupted
/// trajectory exactly.
TrainResult train_episodes(const EpisodeSampler& sampler, const ModelConfig& model_config,
                           const TrainConfig& train_config, const Tensor* recon_matrix,
                           const CheckpointSink& on_checkpoint = {},
                           std::optional<TrainResult> resume_from = std::nullopt);

/// Meta-training over an ADR meta-dataset (episodes = random context/query
/// splits of one operator per batch slot).
TrainResult train(const MetaDataset& meta, const ModelConfig& model_config,
                  const TrainConfig& train_config, const CheckpointSink& on_checkpoint = {},
                  std::optional<TrainResult> resume_from = std::nullopt);

} // namespace tdx
