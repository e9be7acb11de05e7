// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <cmath>

#include "tdx/training.hpp"
#include "test_util.hpp"

using namespace tdx;
using test::max_abs_diff;
using test::random_tensor;

namespace {

ModelConfig small_model() {
    ModelConfig c;
    c.depth = 2;
    c.heads = 4;
    c.head_dim = 6;
    c.value_dim = 6;
    c.in_dim = 16; // 8 modes
    c.out_dim = 16;
    c.mlp_dim = 24;
    return c;
}

MetaDataset small_meta(int n_datasets, int pairs, uint64_t seed) {
    MetaGenConfig cfg;
    cfg.n_datasets = n_datasets;
    cfg.pairs_per_dataset = pairs;
    cfg.grid_n = 64;
    cfg.seed = seed;
    return generate_meta_dataset(cfg);
}

} // namespace

TEST_CASE("split_episode: disjoint, sized, seeded") {
    RngStream rng(1, 0);
    auto [ctx, qry] = split_episode(50, 20, 10, rng);
    CHECK(ctx.size() == 20);
    CHECK(qry.size() == 10);
    std::vector<bool> seen(50, false);
    for (int i : ctx) {
        CHECK(!seen[static_cast<size_t>(i)]);
        seen[static_cast<size_t>(i)] = true;
    }
    for (int i : qry) {
        CHECK(!seen[static_cast<size_t>(i)]);
        seen[static_cast<size_t>(i)] = true;
    }
    CHECK_THROWS_AS(split_episode(25, 20, 10, rng), TdxError);

    RngStream r1(9, 9), r2(9, 9);
    auto a = split_episode(50, 20, 10, r1);
    auto b = split_episode(50, 20, 10, r2);
    CHECK(a.first == b.first);
    CHECK(a.second == b.second);
}

TEST_CASE("lr schedule") {
    const std::vector<int64_t> milestones{100, 200};
    CHECK(lr_at(milestones, 0, 1e-4) == 1e-4);
    CHECK(lr_at(milestones, 99, 1e-4) == 1e-4);
    CHECK(lr_at(milestones, 100, 1e-4) == 5e-5);
    CHECK(lr_at(milestones, 250, 1e-4) == 2.5e-5);
    CHECK(lr_at({}, 1000, 1e-4) == 1e-4);
}

TEST_CASE("adam: zero grad, first-step magnitude, determinism") {
    std::vector<Tensor> params{Tensor::scalar(1.0)};
    AdamState state = AdamState::zeros_like(params);
    adam_step(params, {Tensor::scalar(0.0)}, state, 0.1);
    CHECK(params[0][0] == 1.0);
    CHECK(state.t == 1);

    // first step with g=0.5: decrement is lr*(1 - eps-level correction)
    std::vector<Tensor> p2{Tensor::scalar(1.0)};
    AdamState s2 = AdamState::zeros_like(p2);
    adam_step(p2, {Tensor::scalar(0.5)}, s2, 0.1);
    CHECK(std::abs((1.0 - p2[0][0]) - 0.1) < 1e-7);

    // identical runs give identical trajectories
    auto run = []() {
        RngStream rng(2, 0);
        std::vector<Tensor> p{random_tensor({3, 3}, rng)};
        AdamState s = AdamState::zeros_like(p);
        for (int i = 0; i < 25; ++i) {
            Tensor g = Tensor::zeros({3, 3});
            for (int64_t j = 0; j < 9; ++j) g[j] = 0.1 * p[0][j] + 0.01 * i;
            adam_step(p, {g}, s, 1e-2);
        }
        return p[0];
    };
    CHECK(max_abs_diff(run(), run()) == 0.0);
}

TEST_CASE("adam converges on a scalar quadratic") {
    // minimize (x - 3)^2 from x=0
    std::vector<Tensor> p{Tensor::scalar(0.0)};
    AdamState s = AdamState::zeros_like(p);
    for (int i = 0; i < 5000; ++i) {
        const double g = 2.0 * (p[0][0] - 3.0);
        adam_step(p, {Tensor::scalar(g)}, s, 1e-2);
        if (std::abs(p[0][0] - 3.0) < 1e-3) break;
    }
    CHECK(std::abs(p[0][0] - 3.0) < 1e-3);
}

TEST_CASE("episode_loss: perfect and zero predictions") {
    ModelConfig c = small_model();
    RngStream rng(3, 0);
    const TransducerParams params = TransducerParams::init(c, rng);
    EpisodeInput ep;
    ep.context_v = random_tensor({4, c.in_dim}, rng);
    ep.context_u = random_tensor({4, c.out_dim}, rng);
    ep.query_v = random_tensor({2, c.in_dim}, rng);

    // loss against the model's own prediction is zero
    Tape t0;
    std::vector<Value> vals0;
    for (const Tensor& t : params.tensors) vals0.push_back(t0.constant(t));
    const Tensor self = t0.value(transducer_forward(t0, vals0, c, ep));
    Tape t1;
    std::vector<Value> vals1;
    for (const Tensor& t : params.tensors) vals1.push_back(t1.constant(t));
    CHECK(t1.value(episode_loss(t1, vals1, c, ep, self, nullptr)).scalar_value() == 0.0);

    // zero prediction vs unit-norm target: loss = mean of squared target
    // (checked through the definition with targets equal to prediction + delta)
    Tensor shifted = self;
    for (int64_t i = 0; i < shifted.numel(); ++i) shifted[i] += 1.0;
    Tape t2;
    std::vector<Value> vals2;
    for (const Tensor& t : params.tensors) vals2.push_back(t2.constant(t));
    CHECK(t2.value(episode_loss(t2, vals2, c, ep, shifted, nullptr)).scalar_value() ==
          doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("training on a tiny meta-dataset decreases the loss") {
    const MetaDataset meta = small_meta(8, 24, 17);
    ModelConfig model = small_model();
    TrainConfig tc;
    tc.steps = 80;
    tc.context_min = 6;
    tc.context_max = 12;
    tc.query_count = 4;
    tc.learning_rate = 1e-3;
    tc.seed = 5;
    const TrainResult result = train(meta, model, tc);
    CHECK(result.curve.size() == 80);
    double first = 0.0, last = 0.0;
    for (int i = 0; i < 10; ++i) {
        first += result.curve[static_cast<size_t>(i)].loss;
        last += result.curve[result.curve.size() - 10 + static_cast<size_t>(i)].loss;
    }
    CHECK(last < first);

    // descent sanity: one tiny-LR step on a fixed episode does not increase its loss
    // and determinism: rerun matches bit-for-bit
    const TrainResult again = train(meta, model, tc);
    CHECK(result.curve.size() == again.curve.size());
    for (size_t i = 0; i < result.curve.size(); ++i) {
        CHECK(result.curve[i].loss == again.curve[i].loss);
        CHECK(result.curve[i].lr == again.curve[i].lr);
    }
}

TEST_CASE("one small-LR step does not increase the episode loss") {
    const MetaDataset meta = small_meta(2, 16, 23);
    ModelConfig model = small_model();
    const int modes = model.in_dim / 2;
    const EncodedOperator enc = encode_operator(meta.datasets[0], modes);
    const Tensor recon = reconstruction_matrix(modes, meta.datasets[0].grid.n);

    RngStream split_rng(11, 0);
    auto [ci, qi] = split_episode(meta.datasets[0].size(), 8, 4, split_rng);
    EpisodeInput ep;
    ep.context_v = Tensor::zeros({8, model.in_dim});
    ep.context_u = Tensor::zeros({8, model.out_dim});
    ep.query_v = Tensor::zeros({4, model.in_dim});
    Tensor targets = Tensor::zeros({4, meta.datasets[0].grid.n});
    for (int i = 0; i < 8; ++i)
        for (int j = 0; j < model.in_dim; ++j) {
            ep.context_v.at(i, j) = enc.v_modes.at(ci[static_cast<size_t>(i)], j);
            ep.context_u.at(i, j) = enc.u_modes.at(ci[static_cast<size_t>(i)], j);
        }
    for (int i = 0; i < 4; ++i) {
        for (int j = 0; j < model.in_dim; ++j) ep.query_v.at(i, j) = enc.v_modes.at(qi[static_cast<size_t>(i)], j);
        for (int k = 0; k < meta.datasets[0].grid.n; ++k) targets.at(i, k) = enc.u_grid.at(qi[static_cast<size_t>(i)], k);
    }

    RngStream init_rng(12, 0);
    TransducerParams params = TransducerParams::init(model, init_rng);
    auto loss_of = [&](const TransducerParams& ps) {
        Tape tape;
        std::vector<Value> vals;
        for (const Tensor& t : ps.tensors) vals.push_back(tape.constant(t));
        return tape.value(episode_loss(tape, vals, model, ep, targets, &recon)).scalar_value();
    };
    const double before = loss_of(params);

    Tape tape;
    std::vector<Value> vals;
    for (const Tensor& t : params.tensors) vals.push_back(tape.param(t));
    Gradients grads = tape.backward(episode_loss(tape, vals, model, ep, targets, &recon));
    std::vector<Tensor> g;
    for (const Value& v : vals) g.push_back(grads.at(v));
    AdamState state = AdamState::zeros_like(params.tensors);
    adam_step(params.tensors, g, state, 1e-5);
    CHECK(loss_of(params) <= before);
}

TEST_CASE("resume from checkpointed state continues the exact trajectory") {
    const MetaDataset meta = small_meta(4, 20, 29);
    ModelConfig model = small_model();
    TrainConfig tc;
    tc.steps = 20;
    tc.context_min = 6;
    tc.context_max = 10;
    tc.query_count = 4;
    tc.learning_rate = 1e-3;
    tc.seed = 77;

    const TrainResult full = train(meta, model, tc);

    TrainConfig half = tc;
    half.steps = 10;
    TrainResult first_half = train(meta, model, half);
    CHECK(first_half.adam.t == 10);

    TrainResult resumed = train(meta, model, tc, {}, std::move(first_half));
    CHECK(resumed.adam.t == 20);
    for (size_t i = 0; i < resumed.params.tensors.size(); ++i) {
        CHECK(max_abs_diff(resumed.params.tensors[i], full.params.tensors[i]) == 0.0);
    }
    CHECK(resumed.curve.size() == full.curve.size());
    for (size_t i = 0; i < full.curve.size(); ++i) {
        CHECK(resumed.curve[i].step == full.curve[i].step);
        CHECK(resumed.curve[i].loss == full.curve[i].loss);
    }
}

TEST_CASE("non-finite loss aborts with step context") {
    const MetaDataset meta = small_meta(2, 16, 31);
    ModelConfig model = small_model();
    TrainConfig tc;
    tc.steps = 5;
    tc.context_min = 4;
    tc.context_max = 8;
    tc.query_count = 4;
    tc.learning_rate = 1e9; // drives the parameters to overflow
    tc.seed = 3;
    CHECK_THROWS_AS(train(meta, model, tc), NumericError);
}
