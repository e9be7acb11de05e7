// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <optional>
#include <string>
#include <vector>

#include "tdx/baselines.hpp"
#include "tdx/containers.hpp"
#include "tdx/digits.hpp"
#include "tdx/pde_adr.hpp"
#include "tdx/training.hpp"

namespace tdx {

// Command implementations behind the CLI. Every command is a pure function
// of (input files, flags, seed): artifacts are byte-identical across reruns;
// wall-clock timings go to ".timing.csv" sidecars.

/// TDX_SEED environment variable, when set and parseable.
std::optional<uint64_t> env_seed();

struct GenerateOptions {
    MetaGenConfig gen;
    std::string split = "meta-train";
    std::string out;
};
int cmd_generate(const GenerateOptions& opt);

struct TrainOptions {
    std::string meta_path;
    int modes = 25;
    ModelConfig model;      // in_dim/out_dim derived from modes
    TrainConfig train;
    std::string out_checkpoint;
    std::string out_curve;  // default: <checkpoint>.curve.csv
    std::string resume;     // optional checkpoint to continue from
};
int cmd_train(const TrainOptions& opt);

struct EvaluateOptions {
    std::string checkpoint;
    std::string meta_path;
    std::vector<int> context_sizes = {10, 20, 50, 100};
    int query_n = 10;
    std::vector<std::string> baselines; // subset of {"knn", "ridge"}
    int knn_k = 5;
    RidgeOptions ridge;
    uint64_t seed = 0;
    std::string out_csv;
};
int cmd_evaluate(const EvaluateOptions& opt);

struct ExtrapolateOptions {
    std::string checkpoint;
    std::vector<double> l_values = {0.1, 0.2, 0.3};
    std::vector<double> t_values = {0.5, 1.0, 2.0, 3.0};
    int n_datasets = 16;
    int pairs = 48;
    int context_n = 20;
    int query_n = 10;
    int grid_n = 100;
    double dt = 1e-2;
    bool clamp_dt = true;
    double k_min = 0.0;
    double k_max = 0.3;
    uint64_t seed = 0;
    std::string out_csv;
};
int cmd_extrapolate(const ExtrapolateOptions& opt);

struct OutliersOptions {
    std::string checkpoint;
    std::string dataset_path;
    int dataset_index = 0;
    /// When > 0, contaminate the dataset in-tool with pairs from source_path.
    double contaminate = 0.0;
    std::string source_path;
    int source_index = 0;
    OutlierConfig config;
    std::string out_json;
    std::string out_hist_csv; // default: <out_json>.hist.csv
};
int cmd_outliers(const OutliersOptions& opt);

struct ClassifyOptions {
    std::string images_path;
    std::string labels_path;
    bool meta_train = false;
    std::string checkpoint;     // input (test) or output (meta-train)
    /// Seed 0 means identity permutations.
    uint64_t pixel_perm_seed = 1;
    uint64_t class_perm_seed = 1;
    int context_per_class = 4;
    int query_count = 10;
    int episodes = 100; // meta-test episode count
    ModelConfig model;  // dims derived from the IDX files
    TrainConfig train;
    uint64_t seed = 0;
    std::string out_report; // accuracy report JSON (test mode)
};
int cmd_classify(const ClassifyOptions& opt);

struct InspectOptions {
    std::string path;
};
int cmd_inspect(const InspectOptions& opt);

// shared helpers, also used by tests
void write_curve_csv(const std::string& path, const std::vector<CurvePoint>& curve);
void write_evaluation_csv(const std::string& path, const std::vector<RegressionReport>& reports);
void write_outlier_report_json(const std::string& path, const OutlierReport& report,
                               const std::vector<int>* true_outliers);
LabeledSet labeled_set_from_idx(const std::string& images_path, const std::string& labels_path);

} // namespace tdx
