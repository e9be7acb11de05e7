// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <vector>

#include "tdx/tensor.hpp"

namespace tdx {

class Tape;

/// Handle to a node on a Tape. Cheap to copy; valid as long as the tape lives.
struct Value {
    Tape* tape = nullptr;
    int node = -1;

    bool valid() const { return tape != nullptr && node >= 0; }
};

/// Adjoints produced by one backward sweep, addressable by Value.
class Gradients {
  public:
    Gradients(const Tape* tape, std::vector<Tensor> adjoints)
        : tape_(tape), adjoints_(std::move(adjoints)) {}

    const Tensor& at(Value v) const;

  private:
    const Tape* tape_;
    std::vector<Tensor> adjoints_;
};

/// Reverse-mode autodiff over dense double tensors. Nodes are recorded in
/// topological order (parents strictly earlier); a tape is confined to one
/// logical task and rebuilt per training step.
class Tape {
  public:
    Tape() = default;
    Tape(const Tape&) = delete;
    Tape& operator=(const Tape&) = delete;

    // ---- leaves -------------------------------------------------------
    Value constant(Tensor t);
    /// Leaf registered for gradient extraction; same recording semantics as
    /// constant, kept distinct so callers can enumerate trainables.
    Value param(Tensor t);

    // ---- elementwise --------------------------------------------------
    Value add(Value a, Value b);
    Value sub(Value a, Value b);
    Value mul(Value a, Value b);
    Value scale(Value a, double s);
    Value exp(Value a);
    Value negate(Value a);
    Value gelu(Value a);

    // ---- linear algebra ----------------------------------------------
    Value matmul(Value a, Value b);
    Value transpose(Value a);
    /// x [n x d] + row vector b [d], broadcast over rows.
    Value add_rowvec(Value x, Value b);
    /// x [n x m] - column vector c [n], broadcast over columns.
    Value sub_colvec(Value x, Value c);
    /// D[i][j] = ||q_i - k_j||^2 for q [n x d], k [m x d].
    Value pairwise_sqdist(Value q, Value k);
    /// Rows [r0, r1) of a rank-2 value.
    Value slice_rows(Value x, int64_t r0, int64_t r1);

    // ---- reductions ---------------------------------------------------
    Value sum(Value a);
    Value mean(Value a);
    Value sum_axis(Value a, int axis);
    Value mean_axis(Value a, int axis);

    // ---- normalization ------------------------------------------------
    /// Per-row normalization to zero mean / unit variance (epsilon inside the
    /// square root), then affine gain/bias. x [n x d], gain/bias [d].
    Value layer_norm(Value x, Value gain, Value bias);
    /// Row-wise s_ij / sum_j s_ij over unmasked entries; masked entries are
    /// exactly zero. mask is a [q x c] tensor of 0/1. A row whose unmasked
    /// scores sum to zero yields uniform weights with zero adjoint.
    Value masked_normalize(Value scores, const Tensor& mask);

    // ---- introspection / backward --------------------------------------
    const Tensor& value(Value v) const;
    const std::vector<int64_t>& shape(Value v) const;
    size_t size() const { return nodes_.size(); }
    const std::vector<Value>& params() const { return params_; }

    /// Reverse sweep from a scalar root. Adjoints are freshly zeroed each
    /// call, so repeated calls give identical results.
    Gradients backward(Value root) const;

    /// Layer-norm variance epsilon (named constant per contract).
    static constexpr double kLayerNormEps = 1e-5;

  private:
    friend class Gradients;

    enum class Op {
        kConstant,
        kAdd,
        kSub,
        kMul,
        kScale,
        kExp,
        kNegate,
        kGelu,
        kMatmul,
        kTranspose,
        kAddRowvec,
        kSubColvec,
        kPairwiseSqdist,
        kSliceRows,
        kSum,
        kMean,
        kSumAxis,
        kLayerNorm,
        kMaskedNormalize,
    };

    struct Node {
        Op op;
        int a = -1;
        int b = -1;
        int c = -1;
        Tensor value;
        double scalar = 0.0;        // scale factor / axis payload
        int64_t i0 = 0, i1 = 0;     // slice bounds / axis
        std::vector<Tensor> cache;  // op-specific forward state for adjoints
    };

    Value emit(Node node, const char* op_name);
    const Node& node(Value v) const;
    static const char* op_name(Op op);

    std::vector<Node> nodes_;
    std::vector<Value> params_;
};

} // namespace tdx
