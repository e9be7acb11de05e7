// SPDX-License-Identifier: Apache-2.0
#include "tdx/training.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>

namespace tdx {

AdamState AdamState::zeros_like(const std::vector<Tensor>& params) {
    AdamState s;
    s.m.reserve(params.size());
    s.v.reserve(params.size());
    for (const Tensor& p : params) {
        s.m.push_back(Tensor::zeros(p.shape()));
        s.v.push_back(Tensor::zeros(p.shape()));
    }
    return s;
}

double lr_at(const std::vector<int64_t>& milestones, int64_t step, double base) {
    if (step < 0) throw TdxError("lr_at: step must be >= 0");
    double lr = base;
    for (int64_t m : milestones) {
        if (step >= m) lr *= 0.5;
    }
    return lr;
}

void adam_step(std::vector<Tensor>& params, const std::vector<Tensor>& grads, AdamState& state,
               double lr, double beta1, double beta2, double eps) {
    if (params.size() != grads.size() || params.size() != state.m.size()) {
        throw ShapeError("adam_step: parameter/gradient/state counts differ");
    }
    state.t += 1;
    const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(state.t));
    const double bc2 = 1.0 - std::pow(beta2, static_cast<double>(state.t));
    for (size_t i = 0; i < params.size(); ++i) {
        require_same_shape(params[i], grads[i], "adam_step");
        Tensor& p = params[i];
        Tensor& m = state.m[i];
        Tensor& v = state.v[i];
        const Tensor& g = grads[i];
        for (int64_t j = 0; j < p.numel(); ++j) {
            m[j] = beta1 * m[j] + (1.0 - beta1) * g[j];
            v[j] = beta2 * v[j] + (1.0 - beta2) * g[j] * g[j];
            const double mhat = m[j] / bc1;
            const double vhat = v[j] / bc2;
            p[j] -= lr * mhat / (std::sqrt(vhat) + eps);
        }
    }
}

std::pair<std::vector<int>, std::vector<int>> split_episode(int dataset_size, int context_n,
                                                            int query_count, RngStream& rng) {
    if (context_n < 1 || query_count < 1) throw TdxError("split_episode: context and query counts must be >= 1");
    if (context_n + query_count > dataset_size) {
        throw TdxError("split_episode: dataset of size " + std::to_string(dataset_size) +
                       " too small for context " + std::to_string(context_n) + " + query " +
                       std::to_string(query_count));
    }
    std::vector<int> drawn = rng.sample_indices(dataset_size, context_n + query_count);
    std::vector<int> context(drawn.begin(), drawn.begin() + context_n);
    std::vector<int> query(drawn.begin() + context_n, drawn.end());
    return {std::move(context), std::move(query)};
}

Value episode_loss(Tape& tape, const std::vector<Value>& params, const ModelConfig& config,
                   const EpisodeInput& episode, const Tensor& targets, const Tensor* recon_matrix) {
    Value pred = transducer_forward(tape, params, config, episode);
    if (recon_matrix != nullptr) {
        pred = tape.matmul(pred, tape.constant(*recon_matrix));
    }
    Value diff = tape.sub(pred, tape.constant(targets));
    return tape.mean(tape.mul(diff, diff));
}

EncodedOperator encode_operator(const OperatorDataset& ds, int modes) {
    if (ds.size() < 1) throw TdxError("encode_operator: empty dataset");
    const int n = ds.grid.n;
    const int pairs = ds.size();
    EncodedOperator enc;
    enc.v_modes = Tensor::zeros({pairs, 2 * static_cast<int64_t>(modes)});
    enc.u_modes = Tensor::zeros({pairs, 2 * static_cast<int64_t>(modes)});
    enc.u_grid = Tensor::zeros({pairs, n});
    for (int i = 0; i < pairs; ++i) {
        const ModeVector vm = encode_modes(ds.pairs[static_cast<size_t>(i)].v, modes);
        const ModeVector um = encode_modes(ds.pairs[static_cast<size_t>(i)].u, modes);
        for (int j = 0; j < 2 * modes; ++j) {
            enc.v_modes.at(i, j) = vm.features[static_cast<size_t>(j)];
            enc.u_modes.at(i, j) = um.features[static_cast<size_t>(j)];
        }
        for (int k = 0; k < n; ++k) enc.u_grid.at(i, k) = ds.pairs[static_cast<size_t>(i)].u.at(k);
    }
    return enc;
}

namespace {

Tensor gather_rows(const Tensor& src, const std::vector<int>& rows) {
    Tensor out = Tensor::zeros({static_cast<int64_t>(rows.size()), src.cols()});
    for (size_t i = 0; i < rows.size(); ++i)
        for (int64_t j = 0; j < src.cols(); ++j) out.at(static_cast<int64_t>(i), j) = src.at(rows[i], j);
    return out;
}

} // namespace

TrainResult train_episodes(const EpisodeSampler& sampler, const ModelConfig& model_config,
                           const TrainConfig& train_config, const Tensor* recon_matrix,
                           const CheckpointSink& on_checkpoint, std::optional<TrainResult> resume_from) {
    model_config.validate();
    if (train_config.learning_rate <= 0.0) throw TdxError("train: learning rate must be > 0");
    if (train_config.batch_operators < 1) throw TdxError("train: batch_operators must be >= 1");
    const int64_t total_steps = train_config.steps;
    if (total_steps < 1) throw TdxError("train: step budget must be >= 1");

    std::vector<int64_t> milestones = train_config.lr_milestones;
    if (milestones.empty()) {
        milestones = {total_steps / 2, total_steps * 3 / 4, total_steps * 9 / 10};
    }

    TrainResult result;
    int64_t start_step = 0;
    if (resume_from.has_value()) {
        result = std::move(*resume_from);
        start_step = result.adam.t;
    } else {
        RngStream init_rng = RngStream::from_seed(train_config.seed, UINT64_C(0xA11CE));
        result.params = TransducerParams::init(model_config, init_rng);
        result.adam = AdamState::zeros_like(result.params.tensors);
    }

    const auto t0 = std::chrono::steady_clock::now();
    for (int64_t step = start_step; step < total_steps; ++step) {
        RngStream step_rng = RngStream::from_seed(train_config.seed, static_cast<uint64_t>(step) + 1);
        Tape tape;
        std::vector<Value> pv;
        pv.reserve(result.params.tensors.size());
        for (const Tensor& t : result.params.tensors) pv.push_back(tape.param(t));

        Value total{};
        std::string labels;
        try {
            for (int b = 0; b < train_config.batch_operators; ++b) {
                Episode ep = sampler(step, b, step_rng);
                if (!labels.empty()) labels += ",";
                labels += ep.label;
                Value loss = episode_loss(tape, pv, model_config, ep.input, ep.targets, recon_matrix);
                total = (b == 0) ? loss : tape.add(total, loss);
            }
            if (train_config.batch_operators > 1) {
                total = tape.scale(total, 1.0 / train_config.batch_operators);
            }
        } catch (const NumericError& e) {
            throw NumericError("train: non-finite loss at step " + std::to_string(step) + " (episode " +
                               labels + "): " + e.what());
        }

        const double loss_value = tape.value(total).scalar_value();
        Gradients grads = tape.backward(total);
        std::vector<Tensor> g;
        g.reserve(pv.size());
        for (const Value& p : pv) g.push_back(grads.at(p));

        const double lr = lr_at(milestones, step, train_config.learning_rate);
        adam_step(result.params.tensors, g, result.adam, lr, train_config.adam_beta1,
                  train_config.adam_beta2, train_config.adam_eps);

        const double secs =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        result.curve.push_back({step, loss_value, lr, secs});

        if (on_checkpoint && train_config.checkpoint_every > 0 &&
            ((step + 1) % train_config.checkpoint_every == 0 || step + 1 == total_steps)) {
            on_checkpoint(step + 1, result.params, result.adam, result.curve);
        }
    }
    return result;
}

TrainResult train(const MetaDataset& meta, const ModelConfig& model_config,
                  const TrainConfig& train_config, const CheckpointSink& on_checkpoint,
                  std::optional<TrainResult> resume_from) {
    if (meta.size() < 1) throw TdxError("train: empty meta-dataset");
    model_config.validate();
    if (model_config.in_dim != model_config.out_dim || model_config.in_dim % 2 != 0) {
        throw TdxError("train: operator mode requires in_dim == out_dim == 2*modes");
    }
    const int modes = model_config.in_dim / 2;
    const int grid_n = meta.datasets.front().grid.n;

    std::vector<EncodedOperator> encoded;
    encoded.reserve(static_cast<size_t>(meta.size()));
    for (const OperatorDataset& ds : meta.datasets) {
        if (ds.grid.n != grid_n) throw TdxError("train: meta-dataset grids are not homogeneous");
        encoded.push_back(encode_operator(ds, modes));
    }
    const Tensor recon = reconstruction_matrix(modes, grid_n);

    TrainConfig tc = train_config;
    if (tc.epochs > 0) tc.steps = tc.epochs * meta.size();

    EpisodeSampler sampler = [&meta, &encoded, &tc](int64_t /*step*/, int /*slot*/, RngStream& rng) {
        const int d = static_cast<int>(rng.below(static_cast<uint64_t>(meta.size())));
        const EncodedOperator& enc = encoded[static_cast<size_t>(d)];
        const int size = meta.datasets[static_cast<size_t>(d)].size();
        const int max_ctx = std::min(tc.context_max, size - tc.query_count);
        if (max_ctx < 1) {
            throw TdxError("train: dataset " + std::to_string(d) + " too small for " +
                           std::to_string(tc.query_count) + " queries");
        }
        const int min_ctx = std::min(tc.context_min, max_ctx);
        const int ctx = min_ctx + static_cast<int>(rng.below(static_cast<uint64_t>(max_ctx - min_ctx + 1)));
        auto [ci, qi] = split_episode(size, ctx, tc.query_count, rng);
        Episode ep;
        ep.input.context_v = gather_rows(enc.v_modes, ci);
        ep.input.context_u = gather_rows(enc.u_modes, ci);
        ep.input.query_v = gather_rows(enc.v_modes, qi);
        ep.targets = tc.grid_space_loss ? gather_rows(enc.u_grid, qi) : gather_rows(enc.u_modes, qi);
        ep.label = "dataset " + std::to_string(d);
        return ep;
    };

    return train_episodes(sampler, model_config, tc, tc.grid_space_loss ? &recon : nullptr,
                          on_checkpoint, std::move(resume_from));
}

} // namespace tdx
