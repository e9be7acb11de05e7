// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "tdx/pde_adr.hpp"
#include "tdx/training.hpp"

namespace tdx {

/// Mean over evaluation points of the squared (vector) error.
double mse(const GridFunction& pred, const GridFunction& truth);

struct RmseDetail {
    double value = 0.0;
    int excluded_points = 0;
};

/// Mean over points of |pred-truth|^2 / |truth|^2; points with
/// |truth|^2 < 1e-12 are excluded and counted. Throws if every point is
/// excluded. Note the asymmetry: the denominator is always the truth.
RmseDetail rmse_detail(const GridFunction& pred, const GridFunction& truth);
double rmse(const GridFunction& pred, const GridFunction& truth);

constexpr double kRmseDenomFloor = 1e-12;

enum class KnnMetric { kRawGrid, kModes };

/// Uniform average of the k nearest context outputs under squared L2 on the
/// chosen feature space; ties broken by lower context index.
GridFunction knn_regress(const std::vector<FunctionPair>& context, const GridFunction& query, int k,
                         KnnMetric metric = KnnMetric::kRawGrid, int modes = 25);

struct RidgeOptions {
    double lambda = 1e-3;
    /// 0 picks 1 / median pairwise squared distance over the context.
    double gamma = 0.0;
    /// Cross-validate gamma over a multiplicative grid around the median
    /// heuristic instead of using it directly.
    bool cv_gamma = false;
};

/// Kernel ridge with RBF kernel: solves (G + lambda I) alpha = U and predicts
/// sum_i alpha_i exp(-gamma |v_i - q|^2). Throws if the factorization fails
/// or the solve residual exceeds 1e-8.
std::vector<GridFunction> ridge_rbf_regress(const std::vector<FunctionPair>& context,
                                            const std::vector<GridFunction>& queries,
                                            const RidgeOptions& options = {});

/// Transductive regressor evaluated per operator dataset.
class Regressor {
  public:
    virtual ~Regressor() = default;
    virtual std::string name() const = 0;
    virtual std::vector<GridFunction> predict(const OperatorDataset& ds,
                                              const std::vector<int>& context_idx,
                                              const std::vector<int>& query_idx) const = 0;
};

std::unique_ptr<Regressor> make_transducer_regressor(const TransducerParams& params);
std::unique_ptr<Regressor> make_knn_regressor(int k = 5, KnnMetric metric = KnnMetric::kRawGrid,
                                              int modes = 25);
std::unique_ptr<Regressor> make_ridge_regressor(const RidgeOptions& options = {});

struct RegressionReport {
    std::string regressor;
    int context_n = 0;
    int query_n = 0;
    std::vector<double> per_operator_rmse;
    std::vector<double> per_operator_mse;
    double mean_rmse = 0.0;
    double ci95_half_width = 0.0;
    double seconds = 0.0;
};

/// Splits each operator with the stream (seed, operator index), regresses the
/// queries and aggregates RMSE with a normal-approximation 95% CI.
RegressionReport evaluate_model(const Regressor& regressor, const MetaDataset& meta_test,
                                int context_n, int query_n, uint64_t seed);

struct OutlierConfig {
    int num_regressions = 500;
    double split_fraction = 0.5;
    double flag_sigma = 3.0;
    uint64_t seed = 0;
};

struct OutlierReport {
    std::vector<double> per_element_mean_rmse;
    std::vector<int> per_element_counts;
    double mean = 0.0;
    double stddev = 0.0;
    double threshold = 0.0;
    std::vector<int> flagged;
    /// -1 when no ground-truth contamination labels were supplied.
    double precision = -1.0;
    double recall = -1.0;
};

/// Repeated random-split regressions; elements whose mean test-half RMSE
/// exceeds mean + flag_sigma * stddev of the per-element means are flagged.
OutlierReport outlier_detect(const OperatorDataset& dataset, const TransducerParams& params,
                             const OutlierConfig& config,
                             const std::vector<int>* true_outliers = nullptr);

/// Replaces a fraction of the elements of `base` with pairs from `source`,
/// returning the contaminated dataset and the replaced indices.
std::pair<OperatorDataset, std::vector<int>> contaminate_dataset(const OperatorDataset& base,
                                                                 const OperatorDataset& source,
                                                                 double fraction, RngStream& rng);

struct ClassifyResult {
    double accuracy = 0.0;
    std::vector<int> predicted;
};

/// Finite-dimensional mode: forward on raw feature vectors, label = argmax
/// over the output coordinates.
ClassifyResult classify_finite(const TransducerParams& params, const EpisodeInput& episode,
                               const std::vector<int>& query_labels);

} // namespace tdx
