// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "tdx/autodiff.hpp"
#include "tdx/rng.hpp"
#include "tdx/tensor.hpp"

namespace tdx {

enum class KernelVariant { kExpDot, kRbf, kL2 };

KernelVariant kernel_variant_from_string(const std::string& name);
std::string to_string(KernelVariant v);

/// Pre-normalization score between a query projection q and a key
/// projection k:
///   exp_dot: exp(q.k / tau)
///   rbf:     exp(-|q-k|^2 / tau)
///   l2:      |q-k|^2
/// The scalar form; the model computes the same quantity matrix-wise.
double kernel_score(KernelVariant variant, const std::vector<double>& q, const std::vector<double>& k,
                    double tau);

struct ModelConfig {
    int depth = 4;
    int heads = 32;
    int head_dim = 16;
    int value_dim = 16;
    int in_dim = 50;
    int out_dim = 50;
    int mlp_dim = 100;
    KernelVariant kernel = KernelVariant::kExpDot;
    /// 0 picks the variant default: sqrt(head_dim) for exp_dot, head_dim for
    /// rbf, 1 for l2 (unused there).
    double temperature = 0.0;
    bool tie_weights = false;
    /// Finite-dimensional mode disables the output-stream residual block G.
    bool use_g = true;
    /// Context rows attend to themselves unless disabled.
    bool context_self_attention = true;

    double effective_temperature() const;
    int stored_layers() const { return tie_weights ? 1 : depth; }
    void validate() const;
};

struct ParamSpec {
    std::string name;
    std::vector<int64_t> shape;
};

/// The flat serialization order every parameter container follows:
/// per stored layer: for each head (Q, K, V), then W, then F's
/// (ln_gain, ln_bias, w1, b1, w2, b2), then G's (same, when use_g).
std::vector<ParamSpec> param_layout(const ModelConfig& config);

struct TransducerParams {
    ModelConfig config;
    std::vector<Tensor> tensors;
    std::vector<std::string> names;

    static TransducerParams init(const ModelConfig& config, RngStream& rng);

    int64_t scalar_count() const;
    /// Closed-form count implied by the config (cross-check for init).
    static int64_t expected_scalar_count(const ModelConfig& config);
};

/// One regression episode in feature space: context pairs plus query inputs.
struct EpisodeInput {
    Tensor context_v; // [nc x in_dim]
    Tensor context_u; // [nc x out_dim]
    Tensor query_v;   // [nq x in_dim]
};

/// Layers of the forward pass recorded on a caller-owned tape so the same
/// code path serves training (params as tape leaves) and inference.
/// Returns the query rows of the final output stream [nq x out_dim].
Value transducer_forward(Tape& tape, const std::vector<Value>& params, const ModelConfig& config,
                         const EpisodeInput& episode);

/// Convenience inference: records on a scratch tape and returns the values.
Tensor transducer_predict(const TransducerParams& params, const EpisodeInput& episode);

/// One layer's attention increment for every row (context and query), given
/// the representations after F. Exposed for the scalar-oracle tests. When
/// weights_out is non-null it receives the normalized per-head attention
/// weights [n x n_context].
Value kernel_attention(Tape& tape, const std::vector<Value>& params, int stored_layer,
                       const ModelConfig& config, Value v_all, Value u_tilde, int64_t n_context,
                       std::vector<Tensor>* weights_out = nullptr);

/// Normalized per-head attention weights of the first layer for an episode
/// (diagnostic surface for the weight-normalization invariants).
std::vector<Tensor> first_layer_attention_weights(const TransducerParams& params,
                                                  const EpisodeInput& episode);

} // namespace tdx
