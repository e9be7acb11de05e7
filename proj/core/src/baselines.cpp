// SPDX-License-Identifier: Apache-2.0
#include "tdx/baselines.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>

#include "tdx/linalg.hpp"

namespace tdx {

double mse(const GridFunction& pred, const GridFunction& truth) {
    if (pred.n() != truth.n() || pred.dim != truth.dim) {
        throw ShapeError("mse: shapes differ (n " + std::to_string(pred.n()) + "x" +
                         std::to_string(pred.dim) + " vs " + std::to_string(truth.n()) + "x" +
                         std::to_string(truth.dim) + ")");
    }
    double acc = 0.0;
    for (int k = 0; k < pred.n(); ++k) {
        for (int c = 0; c < pred.dim; ++c) {
            const double d = pred.at(k, c) - truth.at(k, c);
            acc += d * d;
        }
    }
    return acc / static_cast<double>(pred.n());
}

RmseDetail rmse_detail(const GridFunction& pred, const GridFunction& truth) {
    if (pred.n() != truth.n() || pred.dim != truth.dim) {
        throw ShapeError("rmse: shapes differ");
    }
    double acc = 0.0;
    int included = 0, excluded = 0;
    for (int k = 0; k < pred.n(); ++k) {
        double num = 0.0, den = 0.0;
        for (int c = 0; c < pred.dim; ++c) {
            const double d = pred.at(k, c) - truth.at(k, c);
            num += d * d;
            den += truth.at(k, c) * truth.at(k, c);
        }
        if (den < kRmseDenomFloor) {
            ++excluded;
        } else {
            acc += num / den;
            ++included;
        }
    }
    if (included == 0) throw TdxError("rmse: every evaluation point was excluded (truth ~ 0)");
    return {acc / static_cast<double>(included), excluded};
}

double rmse(const GridFunction& pred, const GridFunction& truth) {
    return rmse_detail(pred, truth).value;
}

namespace {

std::vector<std::vector<double>> context_features(const std::vector<FunctionPair>& context,
                                                  KnnMetric metric, int modes) {
    std::vector<std::vector<double>> feats;
    feats.reserve(context.size());
    for (const FunctionPair& p : context) {
        if (metric == KnnMetric::kRawGrid) {
            feats.push_back(p.v.values);
        } else {
            feats.push_back(encode_modes(p.v, modes).features);
        }
    }
    return feats;
}

double sqdist(const std::vector<double>& a, const std::vector<double>& b) {
    double s = 0.0;
    for (size_t i = 0; i < a.size(); ++i) {
        const double d = a[i] - b[i];
        s += d * d;
    }
    return s;
}

} // namespace

GridFunction knn_regress(const std::vector<FunctionPair>& context, const GridFunction& query, int k,
                         KnnMetric metric, int modes) {
    if (context.empty()) throw TdxError("knn_regress: empty context");
    if (k < 1 || k > static_cast<int>(context.size())) {
        throw TdxError("knn_regress: k=" + std::to_string(k) + " out of range for context size " +
                       std::to_string(context.size()));
    }
    const std::vector<std::vector<double>> feats = context_features(context, metric, modes);
    const std::vector<double> qf =
        metric == KnnMetric::kRawGrid ? query.values : encode_modes(query, modes).features;

    std::vector<std::pair<double, int>> order(context.size());
    for (size_t i = 0; i < context.size(); ++i) {
        order[i] = {sqdist(feats[i], qf), static_cast<int>(i)};
    }
    std::sort(order.begin(), order.end()); // ties resolved by lower index
    GridFunction out(context.front().u.grid, context.front().u.dim);
    for (int j = 0; j < k; ++j) {
        const GridFunction& u = context[static_cast<size_t>(order[static_cast<size_t>(j)].second)].u;
        for (size_t i = 0; i < out.values.size(); ++i) out.values[i] += u.values[i];
    }
    for (double& v : out.values) v /= static_cast<double>(k);
    return out;
}

namespace {

double median_sqdist(const std::vector<std::vector<double>>& feats) {
    std::vector<double> d;
    for (size_t i = 0; i < feats.size(); ++i)
        for (size_t j = i + 1; j < feats.size(); ++j) d.push_back(sqdist(feats[i], feats[j]));
    d.erase(std::remove(d.begin(), d.end(), 0.0), d.end());
    if (d.empty()) return 1.0;
    std::sort(d.begin(), d.end());
    return d[d.size() / 2];
}

struct RidgeSolution {
    std::vector<double> alpha; // [n x K]
    double gamma = 0.0;
};

RidgeSolution ridge_solve(const std::vector<FunctionPair>& context, double lambda, double gamma) {
    const int n = static_cast<int>(context.size());
    const int out_len = static_cast<int>(context.front().u.values.size());
    std::vector<std::vector<double>> feats;
    feats.reserve(context.size());
    for (const FunctionPair& p : context) feats.push_back(p.v.values);

    std::vector<double> g(static_cast<size_t>(n) * n);
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j <= i; ++j) {
            const double v = std::exp(-gamma * sqdist(feats[static_cast<size_t>(i)], feats[static_cast<size_t>(j)]));
            g[static_cast<size_t>(i) * n + j] = v;
            g[static_cast<size_t>(j) * n + i] = v;
        }
    }
    std::vector<double> a = g;
    for (int i = 0; i < n; ++i) a[static_cast<size_t>(i) * n + i] += lambda;

    std::vector<double> rhs(static_cast<size_t>(n) * out_len);
    for (int i = 0; i < n; ++i)
        for (int c = 0; c < out_len; ++c)
            rhs[static_cast<size_t>(i) * out_len + c] = context[static_cast<size_t>(i)].u.values[static_cast<size_t>(c)];
    const std::vector<double> rhs_orig = rhs;

    std::vector<double> factor = a;
    if (!cholesky_factor(factor, n)) {
        throw NumericError("ridge_rbf_regress: (G + lambda I) not positive definite; degenerate duplicate context?");
    }
    cholesky_solve_multi(factor, n, rhs, out_len);

    // residual |(G + lambda I) alpha - U|_F must stay tiny
    double res = 0.0;
    for (int i = 0; i < n; ++i) {
        for (int c = 0; c < out_len; ++c) {
            double s = 0.0;
            for (int j = 0; j < n; ++j) s += a[static_cast<size_t>(i) * n + j] * rhs[static_cast<size_t>(j) * out_len + c];
            const double r = s - rhs_orig[static_cast<size_t>(i) * out_len + c];
            res += r * r;
        }
    }
    if (std::sqrt(res) > 1e-8) {
        throw NumericError("ridge_rbf_regress: solve residual " + std::to_string(std::sqrt(res)) +
                           " exceeds 1e-8");
    }
    return {std::move(rhs), gamma};
}

std::vector<GridFunction> ridge_predict(const std::vector<FunctionPair>& context,
                                        const RidgeSolution& sol,
                                        const std::vector<GridFunction>& queries) {
    const int n = static_cast<int>(context.size());
    const int out_len = static_cast<int>(context.front().u.values.size());
    std::vector<GridFunction> preds;
    preds.reserve(queries.size());
    for (const GridFunction& q : queries) {
        GridFunction out(context.front().u.grid, context.front().u.dim);
        for (int i = 0; i < n; ++i) {
            const double w = std::exp(-sol.gamma * sqdist(context[static_cast<size_t>(i)].v.values, q.values));
            for (int c = 0; c < out_len; ++c)
                out.values[static_cast<size_t>(c)] += w * sol.alpha[static_cast<size_t>(i) * out_len + c];
        }
        preds.push_back(std::move(out));
    }
    return preds;
}

} // namespace

std::vector<GridFunction> ridge_rbf_regress(const std::vector<FunctionPair>& context,
                                            const std::vector<GridFunction>& queries,
                                            const RidgeOptions& options) {
    if (context.empty()) throw TdxError("ridge_rbf_regress: empty context");
    if (options.lambda <= 0.0) throw TdxError("ridge_rbf_regress: lambda must be > 0");

    std::vector<std::vector<double>> feats;
    for (const FunctionPair& p : context) feats.push_back(p.v.values);
    const double base_gamma = options.gamma > 0.0 ? options.gamma : 1.0 / median_sqdist(feats);

    double gamma = base_gamma;
    if (options.cv_gamma && context.size() >= 5) {
        // holdout cross-validation over a multiplicative grid around the base
        const int n = static_cast<int>(context.size());
        const int holdout = std::max(1, n / 5);
        std::vector<FunctionPair> train(context.begin(), context.end() - holdout);
        std::vector<GridFunction> val_q;
        std::vector<const GridFunction*> val_u;
        for (int i = n - holdout; i < n; ++i) {
            val_q.push_back(context[static_cast<size_t>(i)].v);
            val_u.push_back(&context[static_cast<size_t>(i)].u);
        }
        double best = -1.0;
        for (double f : {0.0625, 0.25, 1.0, 4.0, 16.0}) {
            const double cand = base_gamma * f;
            RidgeSolution sol = ridge_solve(train, options.lambda, cand);
            const std::vector<GridFunction> preds = ridge_predict(train, sol, val_q);
            double err = 0.0;
            for (size_t i = 0; i < preds.size(); ++i) err += mse(preds[i], *val_u[i]);
            if (best < 0.0 || err < best) {
                best = err;
                gamma = cand;
            }
        }
    }

    RidgeSolution sol = ridge_solve(context, options.lambda, gamma);
    return ridge_predict(context, sol, queries);
}

namespace {

std::vector<FunctionPair> gather_pairs(const OperatorDataset& ds, const std::vector<int>& idx) {
    std::vector<FunctionPair> out;
    out.reserve(idx.size());
    for (int i : idx) out.push_back(ds.pairs[static_cast<size_t>(i)]);
    return out;
}

class TransducerRegressor final : public Regressor {
  public:
    explicit TransducerRegressor(const TransducerParams& params) : params_(params) {
        if (params_.config.in_dim != params_.config.out_dim || params_.config.in_dim % 2 != 0) {
            throw TdxError("transducer regressor: operator mode requires in_dim == out_dim == 2*modes");
        }
        modes_ = params_.config.in_dim / 2;
    }

    std::string name() const override { return "transducer"; }

    std::vector<GridFunction> predict(const OperatorDataset& ds, const std::vector<int>& context_idx,
                                      const std::vector<int>& query_idx) const override {
        const int nc = static_cast<int>(context_idx.size());
        const int nq = static_cast<int>(query_idx.size());
        EpisodeInput ep;
        ep.context_v = Tensor::zeros({nc, 2 * static_cast<int64_t>(modes_)});
        ep.context_u = Tensor::zeros({nc, 2 * static_cast<int64_t>(modes_)});
        ep.query_v = Tensor::zeros({nq, 2 * static_cast<int64_t>(modes_)});
        for (int i = 0; i < nc; ++i) {
            const FunctionPair& p = ds.pairs[static_cast<size_t>(context_idx[static_cast<size_t>(i)])];
            const ModeVector vm = encode_modes(p.v, modes_);
            const ModeVector um = encode_modes(p.u, modes_);
            for (int j = 0; j < 2 * modes_; ++j) {
                ep.context_v.at(i, j) = vm.features[static_cast<size_t>(j)];
                ep.context_u.at(i, j) = um.features[static_cast<size_t>(j)];
            }
        }
        for (int i = 0; i < nq; ++i) {
            const ModeVector vm =
                encode_modes(ds.pairs[static_cast<size_t>(query_idx[static_cast<size_t>(i)])].v, modes_);
            for (int j = 0; j < 2 * modes_; ++j) ep.query_v.at(i, j) = vm.features[static_cast<size_t>(j)];
        }
        const Tensor pred = transducer_predict(params_, ep);
        std::vector<GridFunction> out;
        out.reserve(static_cast<size_t>(nq));
        for (int i = 0; i < nq; ++i) {
            ModeVector mv;
            mv.m = modes_;
            mv.n_src = ds.grid.n;
            mv.features.resize(2 * static_cast<size_t>(modes_));
            for (int j = 0; j < 2 * modes_; ++j) mv.features[static_cast<size_t>(j)] = pred.at(i, j);
            out.push_back(reconstruct(mv));
        }
        return out;
    }

  private:
    TransducerParams params_;
    int modes_;
};

class KnnRegressor final : public Regressor {
  public:
    KnnRegressor(int k, KnnMetric metric, int modes) : k_(k), metric_(metric), modes_(modes) {}
    std::string name() const override { return "knn"; }
    std::vector<GridFunction> predict(const OperatorDataset& ds, const std::vector<int>& context_idx,
                                      const std::vector<int>& query_idx) const override {
        const std::vector<FunctionPair> context = gather_pairs(ds, context_idx);
        const int k = std::min(k_, static_cast<int>(context.size()));
        std::vector<GridFunction> out;
        out.reserve(query_idx.size());
        for (int qi : query_idx) {
            out.push_back(knn_regress(context, ds.pairs[static_cast<size_t>(qi)].v, k, metric_, modes_));
        }
        return out;
    }

  private:
    int k_;
    KnnMetric metric_;
    int modes_;
};

class RidgeRegressor final : public Regressor {
  public:
    explicit RidgeRegressor(const RidgeOptions& options) : options_(options) {}
    std::string name() const override { return "ridge"; }
    std::vector<GridFunction> predict(const OperatorDataset& ds, const std::vector<int>& context_idx,
                                      const std::vector<int>& query_idx) const override {
        const std::vector<FunctionPair> context = gather_pairs(ds, context_idx);
        std::vector<GridFunction> queries;
        queries.reserve(query_idx.size());
        for (int qi : query_idx) queries.push_back(ds.pairs[static_cast<size_t>(qi)].v);
        return ridge_rbf_regress(context, queries, options_);
    }

  private:
    RidgeOptions options_;
};

} // namespace

std::unique_ptr<Regressor> make_transducer_regressor(const TransducerParams& params) {
    return std::make_unique<TransducerRegressor>(params);
}
std::unique_ptr<Regressor> make_knn_regressor(int k, KnnMetric metric, int modes) {
    return std::make_unique<KnnRegressor>(k, metric, modes);
}
std::unique_ptr<Regressor> make_ridge_regressor(const RidgeOptions& options) {
    return std::make_unique<RidgeRegressor>(options);
}

RegressionReport evaluate_model(const Regressor& regressor, const MetaDataset& meta_test,
                                int context_n, int query_n, uint64_t seed) {
    if (meta_test.size() < 1) throw TdxError("evaluate_model: empty meta-test set");
    const auto t0 = std::chrono::steady_clock::now();
    RegressionReport report;
    report.regressor = regressor.name();
    report.context_n = context_n;
    report.query_n = query_n;
    for (int d = 0; d < meta_test.size(); ++d) {
        const OperatorDataset& ds = meta_test.datasets[static_cast<size_t>(d)];
        RngStream rng = RngStream::from_seed(seed, static_cast<uint64_t>(d));
        auto [ci, qi] = split_episode(ds.size(), context_n, query_n, rng);
        const std::vector<GridFunction> preds = regressor.predict(ds, ci, qi);
        double rmse_acc = 0.0, mse_acc = 0.0;
        int rmse_points = 0;
        for (size_t q = 0; q < qi.size(); ++q) {
            const GridFunction& truth = ds.pairs[static_cast<size_t>(qi[q])].u;
            const RmseDetail det = rmse_detail(preds[q], truth);
            const int included = truth.n() - det.excluded_points;
            rmse_acc += det.value * included;
            rmse_points += included;
            mse_acc += mse(preds[q], truth);
        }
        report.per_operator_rmse.push_back(rmse_acc / static_cast<double>(rmse_points));
        report.per_operator_mse.push_back(mse_acc / static_cast<double>(qi.size()));
    }
    const int n = static_cast<int>(report.per_operator_rmse.size());
    double mean = 0.0;
    for (double v : report.per_operator_rmse) mean += v;
    mean /= static_cast<double>(n);
    double var = 0.0;
    for (double v : report.per_operator_rmse) var += (v - mean) * (v - mean);
    var = (n > 1) ? var / static_cast<double>(n - 1) : 0.0;
    report.mean_rmse = mean;
    report.ci95_half_width = 1.96 * std::sqrt(var / static_cast<double>(n));
    report.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return report;
}

OutlierReport outlier_detect(const OperatorDataset& dataset, const TransducerParams& params,
                             const OutlierConfig& config, const std::vector<int>* true_outliers) {
    const int size = dataset.size();
    if (size < 4) throw TdxError("outlier_detect: dataset must have at least 4 elements");
    if (config.split_fraction <= 0.0 || config.split_fraction >= 1.0) {
        throw TdxError("outlier_detect: split_fraction must be in (0,1)");
    }
    const TransducerRegressor regressor(params);
    std::vector<double> sums(static_cast<size_t>(size), 0.0);
    std::vector<int> counts(static_cast<size_t>(size), 0);
    const int n_train = std::clamp(static_cast<int>(std::lround(config.split_fraction * size)), 1, size - 1);
    for (int rep = 0; rep < config.num_regressions; ++rep) {
        RngStream rng = RngStream::from_seed(config.seed, static_cast<uint64_t>(rep));
        std::vector<int> perm = rng.permutation(size);
        std::vector<int> train_idx(perm.begin(), perm.begin() + n_train);
        std::vector<int> test_idx(perm.begin() + n_train, perm.end());
        const std::vector<GridFunction> preds = regressor.predict(dataset, train_idx, test_idx);
        for (size_t q = 0; q < test_idx.size(); ++q) {
            const int idx = test_idx[q];
            const double r = rmse(preds[q], dataset.pairs[static_cast<size_t>(idx)].u);
            sums[static_cast<size_t>(idx)] += r;
            counts[static_cast<size_t>(idx)] += 1;
        }
    }
    OutlierReport report;
    report.per_element_mean_rmse.resize(static_cast<size_t>(size), 0.0);
    report.per_element_counts = counts;
    for (int i = 0; i < size; ++i) {
        if (counts[static_cast<size_t>(i)] == 0) {
            throw TdxError("outlier_detect: element " + std::to_string(i) +
                           " never landed in a test half; increase num_regressions");
        }
        report.per_element_mean_rmse[static_cast<size_t>(i)] =
            sums[static_cast<size_t>(i)] / counts[static_cast<size_t>(i)];
    }
    double mean = 0.0;
    for (double v : report.per_element_mean_rmse) mean += v;
    mean /= static_cast<double>(size);
    double var = 0.0;
    for (double v : report.per_element_mean_rmse) var += (v - mean) * (v - mean);
    var /= static_cast<double>(size - 1);
    report.mean = mean;
    report.stddev = std::sqrt(var);
    report.threshold = mean + config.flag_sigma * report.stddev;
    for (int i = 0; i < size; ++i) {
        if (report.per_element_mean_rmse[static_cast<size_t>(i)] > report.threshold) {
            report.flagged.push_back(i);
        }
    }
    if (true_outliers != nullptr) {
        std::vector<int> truth = *true_outliers;
        std::sort(truth.begin(), truth.end());
        int hits = 0;
        for (int f : report.flagged) {
            if (std::binary_search(truth.begin(), truth.end(), f)) ++hits;
        }
        report.precision = report.flagged.empty() ? (truth.empty() ? 1.0 : 0.0)
                                                  : static_cast<double>(hits) / report.flagged.size();
        report.recall = truth.empty() ? 1.0 : static_cast<double>(hits) / truth.size();
    }
    return report;
}

std::pair<OperatorDataset, std::vector<int>> contaminate_dataset(const OperatorDataset& base,
                                                                 const OperatorDataset& source,
                                                                 double fraction, RngStream& rng) {
    if (fraction <= 0.0 || fraction >= 1.0) throw TdxError("contaminate_dataset: fraction must be in (0,1)");
    const int n = base.size();
    const int m = std::max(1, static_cast<int>(std::lround(fraction * n)));
    if (m > source.size()) throw TdxError("contaminate_dataset: source dataset too small");
    OperatorDataset out = base;
    std::vector<int> targets = rng.sample_indices(n, m);
    std::vector<int> donors = rng.sample_indices(source.size(), m);
    for (int i = 0; i < m; ++i) {
        out.pairs[static_cast<size_t>(targets[static_cast<size_t>(i)])] =
            source.pairs[static_cast<size_t>(donors[static_cast<size_t>(i)])];
    }
    std::sort(targets.begin(), targets.end());
    return {std::move(out), std::move(targets)};
}

ClassifyResult classify_finite(const TransducerParams& params, const EpisodeInput& episode,
                               const std::vector<int>& query_labels) {
    const Tensor pred = transducer_predict(params, episode);
    if (pred.rows() != static_cast<int64_t>(query_labels.size())) {
        throw ShapeError("classify_finite: query/label counts differ");
    }
    ClassifyResult result;
    result.predicted.resize(query_labels.size());
    int correct = 0;
    for (int64_t i = 0; i < pred.rows(); ++i) {
        int best = 0;
        for (int64_t c = 1; c < pred.cols(); ++c) {
            if (pred.at(i, c) > pred.at(i, best)) best = static_cast<int>(c);
        }
        result.predicted[static_cast<size_t>(i)] = best;
        if (best == query_labels[static_cast<size_t>(i)]) ++correct;
    }
    result.accuracy = static_cast<double>(correct) / static_cast<double>(query_labels.size());
    return result;
}

} // namespace tdx
