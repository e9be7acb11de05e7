// SPDX-License-Identifier: Apache-2.0
#include "tdx/model.hpp"

#include <cmath>

namespace tdx {

KernelVariant kernel_variant_from_string(const std::string& name) {
    if (name == "exp_dot") return KernelVariant::kExpDot;
    if (name == "rbf") return KernelVariant::kRbf;
    if (name == "l2") return KernelVariant::kL2;
    throw TdxError("unknown kernel variant '" + name + "' (expected exp_dot | rbf | l2)");
}

std::string to_string(KernelVariant v) {
    switch (v) {
        case KernelVariant::kExpDot: return "exp_dot";
        case KernelVariant::kRbf: return "rbf";
        case KernelVariant::kL2: return "l2";
    }
    return "?";
}

double kernel_score(KernelVariant variant, const std::vector<double>& q, const std::vector<double>& k,
                    double tau) {
    if (q.size() != k.size()) throw ShapeError("kernel_score: projection sizes differ");
    if (tau <= 0.0) throw TdxError("kernel_score: temperature must be > 0");
    double dot = 0.0, sq = 0.0;
    for (size_t i = 0; i < q.size(); ++i) {
        dot += q[i] * k[i];
        const double d = q[i] - k[i];
        sq += d * d;
    }
    switch (variant) {
        case KernelVariant::kExpDot: return std::exp(dot / tau);
        case KernelVariant::kRbf: return std::exp(-sq / tau);
        case KernelVariant::kL2: return sq;
    }
    return 0.0;
}

double ModelConfig::effective_temperature() const {
    if (temperature > 0.0) return temperature;
    switch (kernel) {
        case KernelVariant::kExpDot: return std::sqrt(static_cast<double>(head_dim));
        case KernelVariant::kRbf: return static_cast<double>(head_dim);
        case KernelVariant::kL2: return 1.0;
    }
    return 1.0;
}

void ModelConfig::validate() const {
    auto positive = [](int v, const char* name) {
        if (v < 1) throw TdxError(std::string("ModelConfig: ") + name + " must be >= 1");
    };
    positive(depth, "depth");
    positive(heads, "heads");
    positive(head_dim, "head_dim");
    positive(value_dim, "value_dim");
    positive(in_dim, "in_dim");
    positive(out_dim, "out_dim");
    positive(mlp_dim, "mlp_dim");
    if (temperature < 0.0) throw TdxError("ModelConfig: temperature must be >= 0");
}

namespace {

// tensors per stored layer: 3 per head, W, 6 for F, 6 for G when present
int layer_tensor_count(const ModelConfig& c) { return 3 * c.heads + 7 + (c.use_g ? 6 : 0); }

bool ends_with(const std::string& s, const std::string& suffix) {
    return s.size() >= suffix.size() && s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

} // namespace

std::vector<ParamSpec> param_layout(const ModelConfig& config) {
    config.validate();
    std::vector<ParamSpec> layout;
    const int64_t dv = config.in_dim, du = config.out_dim;
    const int64_t dh = config.head_dim, p = config.value_dim, mlp = config.mlp_dim;
    auto push_ffn = [&layout, mlp](const std::string& prefix, int64_t dim) {
        layout.push_back({prefix + ".ln_gain", {dim}});
        layout.push_back({prefix + ".ln_bias", {dim}});
        layout.push_back({prefix + ".w1", {dim, mlp}});
        layout.push_back({prefix + ".b1", {mlp}});
        layout.push_back({prefix + ".w2", {mlp, dim}});
        layout.push_back({prefix + ".b2", {dim}});
    };
    for (int l = 0; l < config.stored_layers(); ++l) {
        const std::string lp = "layer" + std::to_string(l);
        for (int h = 0; h < config.heads; ++h) {
            const std::string hp = lp + ".head" + std::to_string(h);
            layout.push_back({hp + ".Q", {dv, dh}});
            layout.push_back({hp + ".K", {dv, dh}});
            layout.push_back({hp + ".V", {du, p}});
        }
        layout.push_back({lp + ".W", {static_cast<int64_t>(config.heads) * p, du}});
        push_ffn(lp + ".F", dv);
        if (config.use_g) push_ffn(lp + ".G", du);
    }
    return layout;
}

TransducerParams TransducerParams::init(const ModelConfig& config, RngStream& rng) {
    TransducerParams params;
    params.config = config;
    for (const ParamSpec& spec : param_layout(config)) {
        params.names.push_back(spec.name);
        if (ends_with(spec.name, ".ln_gain")) {
            params.tensors.push_back(Tensor::ones(spec.shape));
        } else if (spec.shape.size() == 1) {
            params.tensors.push_back(Tensor::zeros(spec.shape)); // biases
        } else {
            Tensor t = Tensor::zeros(spec.shape);
            const double std = 1.0 / std::sqrt(static_cast<double>(spec.shape[0]));
            for (int64_t i = 0; i < t.numel(); ++i) t[i] = std * rng.normal();
            params.tensors.push_back(std::move(t));
        }
    }
    return params;
}

int64_t TransducerParams::scalar_count() const {
    int64_t n = 0;
    for (const Tensor& t : tensors) n += t.numel();
    return n;
}

int64_t TransducerParams::expected_scalar_count(const ModelConfig& c) {
    const int64_t heads = c.heads, dh = c.head_dim, p = c.value_dim;
    const int64_t dv = c.in_dim, du = c.out_dim, mlp = c.mlp_dim;
    int64_t per_layer = heads * (2 * dv * dh + du * p); // Q, K, V
    per_layer += heads * p * du;                        // W
    per_layer += 2 * dv + dv * mlp + mlp + mlp * dv + dv; // F
    if (c.use_g) per_layer += 2 * du + du * mlp + mlp + mlp * du + du;
    return per_layer * c.stored_layers();
}

namespace {

struct LayerView {
    // offsets into the flat tensor list for one stored layer
    int base = 0;
    const ModelConfig* config = nullptr;

    int q(int head) const { return base + 3 * head; }
    int k(int head) const { return base + 3 * head + 1; }
    int v(int head) const { return base + 3 * head + 2; }
    int w() const { return base + 3 * config->heads; }
    int f(int i) const { return base + 3 * config->heads + 1 + i; }
    int g(int i) const { return base + 3 * config->heads + 7 + i; }
};

Value ffn_residual(Tape& tape, Value x, const std::vector<Value>& params, int first) {
    Value ln = tape.layer_norm(x, params[first], params[first + 1]);
    Value h = tape.gelu(tape.add_rowvec(tape.matmul(ln, params[first + 2]), params[first + 3]));
    Value out = tape.add_rowvec(tape.matmul(h, params[first + 4]), params[first + 5]);
    return tape.add(x, out);
}

Tensor attention_mask(int64_t n, int64_t n_context, bool self_attention) {
    Tensor mask = Tensor::ones({n, n_context});
    if (!self_attention) {
        for (int64_t i = 0; i < n_context; ++i) mask.at(i, i) = 0.0;
    }
    return mask;
}

} // namespace

Value kernel_attention(Tape& tape, const std::vector<Value>& params, int stored_layer,
                       const ModelConfig& config, Value v_all, Value u_tilde, int64_t n_context,
                       std::vector<Tensor>* weights_out) {
    if (n_context < 1) throw TdxError("kernel_attention: need at least one context element");
    LayerView lv{stored_layer * layer_tensor_count(config), &config};
    const int64_t n = tape.value(v_all).rows();
    const double tau = config.effective_temperature();
    const Tensor mask = attention_mask(n, n_context, config.context_self_attention);

    Value keys_in = tape.slice_rows(v_all, 0, n_context);
    Value values_in = tape.slice_rows(u_tilde, 0, n_context);

    Value increment{};
    for (int h = 0; h < config.heads; ++h) {
        Value qm = tape.matmul(v_all, params[lv.q(h)]);
        Value km = tape.matmul(keys_in, params[lv.k(h)]);
        Value scores{};
        if (config.kernel == KernelVariant::kL2) {
            scores = tape.pairwise_sqdist(qm, km);
        } else {
            Value logits = config.kernel == KernelVariant::kExpDot
                               ? tape.scale(tape.matmul(qm, tape.transpose(km)), 1.0 / tau)
                               : tape.scale(tape.pairwise_sqdist(qm, km), -1.0 / tau);
            // per-row max subtraction keeps the exponentials in range and is
            // exact under the normalization that follows
            const Tensor& lt = tape.value(logits);
            Tensor row_max = Tensor::zeros({n});
            for (int64_t i = 0; i < n; ++i) {
                double m = lt.at(i, 0);
                for (int64_t j = 1; j < n_context; ++j) m = std::max(m, lt.at(i, j));
                row_max[i] = m;
            }
            scores = tape.exp(tape.sub_colvec(logits, tape.constant(std::move(row_max))));
        }
        Value weights = tape.masked_normalize(scores, mask);
        if (weights_out != nullptr) weights_out->push_back(tape.value(weights));
        Value head_out = tape.matmul(weights, tape.matmul(values_in, params[lv.v(h)]));
        Value w_rows = tape.slice_rows(params[lv.w()], static_cast<int64_t>(h) * config.value_dim,
                                       static_cast<int64_t>(h + 1) * config.value_dim);
        Value inc_h = tape.matmul(head_out, w_rows);
        increment = (h == 0) ? inc_h : tape.add(increment, inc_h);
    }
    return increment;
}

Value transducer_forward(Tape& tape, const std::vector<Value>& params, const ModelConfig& config,
                         const EpisodeInput& episode) {
    config.validate();
    const Tensor& cv = episode.context_v;
    const Tensor& cu = episode.context_u;
    const Tensor& qv = episode.query_v;
    if (cv.rank() != 2 || cu.rank() != 2 || qv.rank() != 2) {
        throw ShapeError("transducer_forward: episode tensors must be rank 2");
    }
    if (cv.rows() < 1) throw TdxError("transducer_forward: context must be nonempty");
    if (cv.rows() != cu.rows()) {
        throw ShapeError("transducer_forward: context pairs mismatch " + cv.shape_str() + " vs " +
                         cu.shape_str());
    }
    if (cv.cols() != config.in_dim || qv.cols() != config.in_dim || cu.cols() != config.out_dim) {
        throw ShapeError("transducer_forward: episode dims do not match config (in_dim=" +
                         std::to_string(config.in_dim) + ", out_dim=" + std::to_string(config.out_dim) +
                         ", got v " + cv.shape_str() + ", u " + cu.shape_str() + ", q " + qv.shape_str() +
                         ")");
    }
    const int expected = layer_tensor_count(config) * config.stored_layers();
    if (static_cast<int>(params.size()) != expected) {
        throw TdxError("transducer_forward: expected " + std::to_string(expected) +
                       " parameter tensors, got " + std::to_string(params.size()));
    }

    const int64_t nc = cv.rows(), nq = qv.rows(), n = nc + nq;
    Tensor v0 = Tensor::zeros({n, static_cast<int64_t>(config.in_dim)});
    for (int64_t i = 0; i < nc; ++i)
        for (int64_t j = 0; j < config.in_dim; ++j) v0.at(i, j) = cv.at(i, j);
    for (int64_t i = 0; i < nq; ++i)
        for (int64_t j = 0; j < config.in_dim; ++j) v0.at(nc + i, j) = qv.at(i, j);
    // query outputs enter as the zero element of the output space
    Tensor u0 = Tensor::zeros({n, static_cast<int64_t>(config.out_dim)});
    for (int64_t i = 0; i < nc; ++i)
        for (int64_t j = 0; j < config.out_dim; ++j) u0.at(i, j) = cu.at(i, j);

    Value v = tape.constant(std::move(v0));
    Value u = tape.constant(std::move(u0));

    for (int l = 0; l < config.depth; ++l) {
        const int sl = config.tie_weights ? 0 : l;
        LayerView lv{sl * layer_tensor_count(config), &config};
        v = ffn_residual(tape, v, params, lv.f(0));
        Value ut = config.use_g ? ffn_residual(tape, u, params, lv.g(0)) : u;
        Value inc = kernel_attention(tape, params, sl, config, v, ut, nc);
        u = tape.add(ut, inc);
    }
    return tape.slice_rows(u, nc, n);
}

Tensor transducer_predict(const TransducerParams& params, const EpisodeInput& episode) {
    Tape tape;
    std::vector<Value> vals;
    vals.reserve(params.tensors.size());
    for (const Tensor& t : params.tensors) vals.push_back(tape.constant(t));
    Value pred = transducer_forward(tape, vals, params.config, episode);
    return tape.value(pred);
}

std::vector<Tensor> first_layer_attention_weights(const TransducerParams& params,
                                                  const EpisodeInput& episode) {
    const ModelConfig& config = params.config;
    Tape tape;
    std::vector<Value> vals;
    vals.reserve(params.tensors.size());
    for (const Tensor& t : params.tensors) vals.push_back(tape.constant(t));

    const int64_t nc = episode.context_v.rows(), nq = episode.query_v.rows();
    Tensor v0 = Tensor::zeros({nc + nq, static_cast<int64_t>(config.in_dim)});
    for (int64_t i = 0; i < nc; ++i)
        for (int64_t j = 0; j < config.in_dim; ++j) v0.at(i, j) = episode.context_v.at(i, j);
    for (int64_t i = 0; i < nq; ++i)
        for (int64_t j = 0; j < config.in_dim; ++j) v0.at(nc + i, j) = episode.query_v.at(i, j);
    Tensor u0 = Tensor::zeros({nc + nq, static_cast<int64_t>(config.out_dim)});
    for (int64_t i = 0; i < nc; ++i)
        for (int64_t j = 0; j < config.out_dim; ++j) u0.at(i, j) = episode.context_u.at(i, j);

    LayerView lv{0, &config};
    Value v = ffn_residual(tape, tape.constant(std::move(v0)), vals, lv.f(0));
    Value ut = config.use_g ? ffn_residual(tape, tape.constant(std::move(u0)), vals, lv.g(0))
                            : tape.constant(std::move(u0));
    std::vector<Tensor> weights;
    kernel_attention(tape, vals, 0, config, v, ut, nc, &weights);
    return weights;
}

} // namespace tdx
