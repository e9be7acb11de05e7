// SPDX-License-Identifier: Apache-2.0
#include "tdx/digits.hpp"

#include <algorithm>
#include <cmath>

namespace tdx {

LabeledSet synthetic_digits(int per_class, uint64_t seed, double noise) {
    if (per_class < 1) throw TdxError("synthetic_digits: per_class must be >= 1");
    constexpr int kSide = 8;
    constexpr int kClasses = 10;
    LabeledSet set;
    set.input_dim = kSide * kSide;
    set.n_classes = kClasses;

    // class prototypes: smooth random blobs, pushed apart by construction
    RngStream proto_rng = RngStream::from_seed(seed, UINT64_C(0xD161));
    std::vector<std::vector<double>> protos(kClasses);
    for (int c = 0; c < kClasses; ++c) {
        std::vector<double>& p = protos[static_cast<size_t>(c)];
        p.assign(kSide * kSide, 0.0);
        // two or three Gaussian strokes per glyph
        const int strokes = 2 + static_cast<int>(proto_rng.below(2));
        for (int s = 0; s < strokes; ++s) {
            const double cx = proto_rng.uniform(1.0, 6.0);
            const double cy = proto_rng.uniform(1.0, 6.0);
            const double sx = proto_rng.uniform(0.6, 1.8);
            const double sy = proto_rng.uniform(0.6, 1.8);
            for (int y = 0; y < kSide; ++y) {
                for (int x = 0; x < kSide; ++x) {
                    const double dx = (x - cx) / sx;
                    const double dy = (y - cy) / sy;
                    p[static_cast<size_t>(y * kSide + x)] += std::exp(-0.5 * (dx * dx + dy * dy));
                }
            }
        }
        double maxv = 0.0;
        for (double v : p) maxv = std::max(maxv, v);
        for (double& v : p) v /= maxv;
    }

    RngStream sample_rng = RngStream::from_seed(seed, UINT64_C(0x5A3B));
    for (int c = 0; c < kClasses; ++c) {
        for (int i = 0; i < per_class; ++i) {
            std::vector<double> img = protos[static_cast<size_t>(c)];
            for (double& v : img) v = std::clamp(v + noise * sample_rng.normal(), 0.0, 1.0);
            set.images.push_back(std::move(img));
            set.labels.push_back(c);
        }
    }
    return set;
}

Episode make_permuted_episode(const LabeledSet& data, const PermutedEpisodeConfig& config,
                              RngStream& rng, std::vector<int>* query_labels_out) {
    if (data.size() < 1) throw TdxError("make_permuted_episode: empty data");
    const int d = data.input_dim;
    const int classes = data.n_classes;

    std::vector<int> pixel_perm, class_perm;
    if (config.permute) {
        pixel_perm = rng.permutation(d);
        class_perm = rng.permutation(classes);
    } else {
        pixel_perm.resize(static_cast<size_t>(d));
        class_perm.resize(static_cast<size_t>(classes));
        for (int i = 0; i < d; ++i) pixel_perm[static_cast<size_t>(i)] = i;
        for (int i = 0; i < classes; ++i) class_perm[static_cast<size_t>(i)] = i;
    }

    // per-class index pools, shuffled
    std::vector<std::vector<int>> pools(static_cast<size_t>(classes));
    for (int i = 0; i < data.size(); ++i) pools[static_cast<size_t>(data.labels[static_cast<size_t>(i)])].push_back(i);
    std::vector<int> context_idx, query_idx;
    for (int c = 0; c < classes; ++c) {
        std::vector<int>& pool = pools[static_cast<size_t>(c)];
        if (static_cast<int>(pool.size()) < config.context_per_class + 1) {
            throw TdxError("make_permuted_episode: class " + std::to_string(c) + " has too few samples");
        }
        const std::vector<int> order = rng.sample_indices(static_cast<int>(pool.size()),
                                                          static_cast<int>(pool.size()));
        for (int j = 0; j < config.context_per_class; ++j)
            context_idx.push_back(pool[static_cast<size_t>(order[static_cast<size_t>(j)])]);
        query_idx.push_back(pool[static_cast<size_t>(order[static_cast<size_t>(config.context_per_class)])]);
    }
    // trim or top up queries to the requested count, drawing round-robin
    while (static_cast<int>(query_idx.size()) > config.query_count) query_idx.pop_back();
    int extra_class = 0;
    while (static_cast<int>(query_idx.size()) < config.query_count) {
        const std::vector<int>& pool = pools[static_cast<size_t>(extra_class % classes)];
        query_idx.push_back(pool[static_cast<size_t>(rng.below(pool.size()))]);
        ++extra_class;
    }

    auto permuted_image = [&](int idx, Tensor& dst, int64_t row) {
        const std::vector<double>& img = data.images[static_cast<size_t>(idx)];
        for (int j = 0; j < d; ++j) dst.at(row, j) = img[static_cast<size_t>(pixel_perm[static_cast<size_t>(j)])];
    };

    Episode ep;
    const int nc = static_cast<int>(context_idx.size());
    const int nq = static_cast<int>(query_idx.size());
    ep.input.context_v = Tensor::zeros({nc, d});
    ep.input.context_u = Tensor::zeros({nc, classes});
    ep.input.query_v = Tensor::zeros({nq, d});
    ep.targets = Tensor::zeros({nq, classes});
    for (int i = 0; i < nc; ++i) {
        permuted_image(context_idx[static_cast<size_t>(i)], ep.input.context_v, i);
        const int lab = class_perm[static_cast<size_t>(data.labels[static_cast<size_t>(context_idx[static_cast<size_t>(i)])])];
        ep.input.context_u.at(i, lab) = 1.0;
    }
    std::vector<int> qlabels(static_cast<size_t>(nq));
    for (int i = 0; i < nq; ++i) {
        permuted_image(query_idx[static_cast<size_t>(i)], ep.input.query_v, i);
        const int lab = class_perm[static_cast<size_t>(data.labels[static_cast<size_t>(query_idx[static_cast<size_t>(i)])])];
        ep.targets.at(i, lab) = 1.0;
        qlabels[static_cast<size_t>(i)] = lab;
    }
    if (query_labels_out != nullptr) *query_labels_out = std::move(qlabels);
    ep.label = "episode";
    return ep;
}

} // namespace tdx
