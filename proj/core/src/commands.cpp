// SPDX-License-Identifier: Apache-2.0
#include "tdx/commands.hpp"

#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "tdx/digits.hpp"

namespace tdx {

namespace {

using json = nlohmann::json;

void write_text_atomic(const std::string& path, const std::string& text) {
    const std::string tmp = path + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw FormatError(tmp + ": cannot open for writing");
        out << text;
    }
    if (std::rename(tmp.c_str(), path.c_str()) != 0) throw FormatError(path + ": atomic rename failed");
}

std::string fmt(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

} // namespace

std::optional<uint64_t> env_seed() {
    const char* v = std::getenv("TDX_SEED");
    if (v == nullptr || *v == '\0') return std::nullopt;
    char* end = nullptr;
    const unsigned long long parsed = std::strtoull(v, &end, 10);
    if (end == nullptr || *end != '\0') return std::nullopt;
    return static_cast<uint64_t>(parsed);
}

int cmd_generate(const GenerateOptions& opt) {
    if (opt.out.empty()) throw TdxError("generate: --out is required");
    const MetaDataset meta = generate_meta_dataset(opt.gen, opt.split);
    write_meta_dataset(opt.out, meta);
    int clamped = 0;
    for (const OperatorDataset& ds : meta.datasets) {
        if (ds.dt_used < opt.gen.dt) ++clamped;
    }
    std::cout << "wrote " << opt.out << ": " << meta.size() << " datasets x "
              << meta.datasets.front().size() << " pairs on " << opt.gen.grid_n << " points (t="
              << opt.gen.t << ", l=" << opt.gen.l << ", seed=" << opt.gen.seed << ")\n";
    std::cout << "dt clamped below " << opt.gen.dt << " for " << clamped << "/" << meta.size()
              << " datasets\n";
    return 0;
}

void write_curve_csv(const std::string& path, const std::vector<CurvePoint>& curve) {
    std::ostringstream main_csv, timing_csv;
    main_csv << "step,loss,lr\n";
    timing_csv << "step,seconds\n";
    for (const CurvePoint& p : curve) {
        main_csv << p.step << "," << fmt(p.loss) << "," << fmt(p.lr) << "\n";
        timing_csv << p.step << "," << fmt(p.seconds) << "\n";
    }
    write_text_atomic(path, main_csv.str());
    write_text_atomic(path + ".timing.csv", timing_csv.str());
}

int cmd_train(const TrainOptions& opt) {
    if (opt.out_checkpoint.empty()) throw TdxError("train: --out is required");
    const MetaDataset meta = read_meta_dataset(opt.meta_path);
    ModelConfig model = opt.model;
    model.in_dim = 2 * opt.modes;
    model.out_dim = 2 * opt.modes;
    model.validate();

    std::optional<TrainResult> resume;
    if (!opt.resume.empty()) {
        Checkpoint ck = read_checkpoint(opt.resume);
        if (!ck.adam.has_value()) {
            throw TdxError("train: checkpoint " + opt.resume + " carries no optimizer state; cannot resume");
        }
        TrainResult r;
        r.params = std::move(ck.params);
        r.adam = std::move(*ck.adam);
        resume = std::move(r);
    }

    const std::string curve_path = opt.out_curve.empty() ? opt.out_checkpoint + ".curve.csv" : opt.out_curve;
    CheckpointSink sink = [&](int64_t step, const TransducerParams& params, const AdamState& adam,
                              const std::vector<CurvePoint>& curve) {
        Provenance prov{step, curve.empty() ? 0.0 : curve.back().loss, opt.train.seed};
        write_checkpoint(opt.out_checkpoint, params, prov, &adam);
        write_curve_csv(curve_path, curve);
    };

    TrainConfig tc = opt.train;
    if (tc.checkpoint_every == 0) tc.checkpoint_every = std::max<int64_t>(1, tc.steps / 10);
    const TrainResult result = train(meta, model, tc, sink, std::move(resume));

    Provenance prov{result.adam.t, result.curve.empty() ? 0.0 : result.curve.back().loss, tc.seed};
    write_checkpoint(opt.out_checkpoint, result.params, prov, &result.adam);
    write_curve_csv(curve_path, result.curve);
    std::cout << "trained " << result.adam.t << " steps; final loss "
              << (result.curve.empty() ? 0.0 : result.curve.back().loss) << "; checkpoint "
              << opt.out_checkpoint << "\n";
    return 0;
}

void write_evaluation_csv(const std::string& path, const std::vector<RegressionReport>& reports) {
    std::ostringstream main_csv, timing_csv;
    main_csv << "regressor,context_n,query_n,mean_rmse,ci95\n";
    timing_csv << "regressor,context_n,seconds\n";
    for (const RegressionReport& r : reports) {
        main_csv << r.regressor << "," << r.context_n << "," << r.query_n << "," << fmt(r.mean_rmse)
                 << "," << fmt(r.ci95_half_width) << "\n";
        timing_csv << r.regressor << "," << r.context_n << "," << fmt(r.seconds) << "\n";
    }
    write_text_atomic(path, main_csv.str());
    write_text_atomic(path + ".timing.csv", timing_csv.str());
}

int cmd_evaluate(const EvaluateOptions& opt) {
    if (opt.out_csv.empty()) throw TdxError("evaluate: --out is required");
    const Checkpoint ck = read_checkpoint(opt.checkpoint);
    const MetaDataset meta = read_meta_dataset(opt.meta_path);

    std::vector<std::unique_ptr<Regressor>> regressors;
    regressors.push_back(make_transducer_regressor(ck.params));
    for (const std::string& b : opt.baselines) {
        if (b == "knn") {
            regressors.push_back(make_knn_regressor(opt.knn_k));
        } else if (b == "ridge") {
            regressors.push_back(make_ridge_regressor(opt.ridge));
        } else {
            throw TdxError("evaluate: unknown baseline '" + b + "' (expected knn | ridge)");
        }
    }

    std::vector<RegressionReport> reports;
    for (const auto& reg : regressors) {
        for (int n : opt.context_sizes) {
            reports.push_back(evaluate_model(*reg, meta, n, opt.query_n, opt.seed));
            const RegressionReport& r = reports.back();
            std::cout << r.regressor << " n=" << r.context_n << ": rmse " << r.mean_rmse << " +- "
                      << r.ci95_half_width << " (" << r.seconds << " s)\n";
        }
    }
    write_evaluation_csv(opt.out_csv, reports);
    return 0;
}

int cmd_extrapolate(const ExtrapolateOptions& opt) {
    if (opt.out_csv.empty()) throw TdxError("extrapolate: --out is required");
    const Checkpoint ck = read_checkpoint(opt.checkpoint);
    const auto regressor = make_transducer_regressor(ck.params);

    std::ostringstream main_csv;
    main_csv << "l,t,mean_rmse,ci95\n";
    uint64_t stream = 0;
    for (double l : opt.l_values) {
        for (double t : opt.t_values) {
            MetaGenConfig gen;
            gen.n_datasets = opt.n_datasets;
            gen.pairs_per_dataset = opt.pairs;
            gen.t = t;
            gen.l = l;
            gen.grid_n = opt.grid_n;
            gen.dt = opt.dt;
            gen.clamp_dt = opt.clamp_dt;
            gen.k_min = opt.k_min;
            gen.k_max = opt.k_max;
            gen.seed = opt.seed + 1000003 * stream++;
            const MetaDataset ood = generate_meta_dataset(gen, "meta-test");
            const RegressionReport r = evaluate_model(*regressor, ood, opt.context_n, opt.query_n, opt.seed);
            main_csv << fmt(l) << "," << fmt(t) << "," << fmt(r.mean_rmse) << ","
                     << fmt(r.ci95_half_width) << "\n";
            std::cout << "l=" << l << " t=" << t << ": rmse " << r.mean_rmse << " +- "
                      << r.ci95_half_width << "\n";
        }
    }
    write_text_atomic(opt.out_csv, main_csv.str());
    return 0;
}

void write_outlier_report_json(const std::string& path, const OutlierReport& report,
                               const std::vector<int>* true_outliers) {
    json j{{"mean", report.mean},
           {"stddev", report.stddev},
           {"threshold", report.threshold},
           {"flagged", report.flagged},
           {"per_element_mean_rmse", report.per_element_mean_rmse},
           {"per_element_counts", report.per_element_counts}};
    if (true_outliers != nullptr) {
        j["true_outliers"] = *true_outliers;
        j["precision"] = report.precision;
        j["recall"] = report.recall;
    }
    write_text_atomic(path, j.dump(2) + "\n");
}

int cmd_outliers(const OutliersOptions& opt) {
    if (opt.out_json.empty()) throw TdxError("outliers: --out is required");
    const Checkpoint ck = read_checkpoint(opt.checkpoint);
    const MetaDataset meta = read_meta_dataset(opt.dataset_path);
    if (opt.dataset_index < 0 || opt.dataset_index >= meta.size()) {
        throw TdxError("outliers: dataset index out of range");
    }
    OperatorDataset dataset = meta.datasets[static_cast<size_t>(opt.dataset_index)];

    std::vector<int> true_outliers;
    const std::vector<int>* labels = nullptr;
    if (opt.contaminate > 0.0) {
        if (opt.source_path.empty()) throw TdxError("outliers: --contaminate requires --source");
        const MetaDataset source = read_meta_dataset(opt.source_path);
        if (opt.source_index < 0 || opt.source_index >= source.size()) {
            throw TdxError("outliers: source index out of range");
        }
        RngStream rng = RngStream::from_seed(opt.config.seed, UINT64_C(0xC0417));
        auto [contaminated, idx] = contaminate_dataset(
            dataset, source.datasets[static_cast<size_t>(opt.source_index)], opt.contaminate, rng);
        dataset = std::move(contaminated);
        true_outliers = std::move(idx);
        labels = &true_outliers;
    }

    const OutlierReport report = outlier_detect(dataset, ck.params, opt.config, labels);
    write_outlier_report_json(opt.out_json, report, labels);

    std::ostringstream hist;
    hist << "element,mean_rmse,count,flagged\n";
    for (size_t i = 0; i < report.per_element_mean_rmse.size(); ++i) {
        const bool flagged =
            std::find(report.flagged.begin(), report.flagged.end(), static_cast<int>(i)) != report.flagged.end();
        hist << i << "," << fmt(report.per_element_mean_rmse[i]) << "," << report.per_element_counts[i]
             << "," << (flagged ? 1 : 0) << "\n";
    }
    const std::string hist_path = opt.out_hist_csv.empty() ? opt.out_json + ".hist.csv" : opt.out_hist_csv;
    write_text_atomic(hist_path, hist.str());

    std::cout << "flagged " << report.flagged.size() << " of " << report.per_element_mean_rmse.size()
              << " elements (threshold " << report.threshold << ")";
    if (labels != nullptr) std::cout << "; precision " << report.precision << ", recall " << report.recall;
    std::cout << "\n";
    return 0;
}

LabeledSet labeled_set_from_idx(const std::string& images_path, const std::string& labels_path) {
    const IdxData images = read_idx(images_path);
    const IdxData labels = read_idx(labels_path);
    if (images.dims.size() != 3) throw FormatError(images_path + ": expected a rank-3 image file");
    if (labels.dims.size() != 1) throw FormatError(labels_path + ": expected a rank-1 label file");
    if (images.dims[0] != labels.dims[0]) {
        throw FormatError("image count " + std::to_string(images.dims[0]) + " != label count " +
                          std::to_string(labels.dims[0]));
    }
    LabeledSet set;
    const int n = static_cast<int>(images.dims[0]);
    set.input_dim = static_cast<int>(images.dims[1] * images.dims[2]);
    int max_label = 0;
    for (int i = 0; i < n; ++i) max_label = std::max(max_label, static_cast<int>(labels.bytes[static_cast<size_t>(i)]));
    set.n_classes = max_label + 1;
    set.images.reserve(static_cast<size_t>(n));
    for (int i = 0; i < n; ++i) {
        std::vector<double> img(static_cast<size_t>(set.input_dim));
        for (int j = 0; j < set.input_dim; ++j) {
            img[static_cast<size_t>(j)] =
                images.bytes[static_cast<size_t>(i) * set.input_dim + j] / 255.0;
        }
        set.images.push_back(std::move(img));
        set.labels.push_back(static_cast<int>(labels.bytes[static_cast<size_t>(i)]));
    }
    return set;
}

int cmd_classify(const ClassifyOptions& opt) {
    const LabeledSet data = labeled_set_from_idx(opt.images_path, opt.labels_path);
    std::cout << "loaded " << data.size() << " samples, input dim " << data.input_dim << " ("
              << data.n_classes << " classes)\n";

    if (opt.meta_train) {
        if (opt.checkpoint.empty()) throw TdxError("classify: --checkpoint output path required");
        ModelConfig model = opt.model;
        model.in_dim = data.input_dim;
        model.out_dim = data.n_classes;
        model.use_g = false;
        model.validate();

        PermutedEpisodeConfig ep_cfg;
        ep_cfg.context_per_class = opt.context_per_class;
        ep_cfg.query_count = opt.query_count;
        ep_cfg.permute = !(opt.pixel_perm_seed == 0 && opt.class_perm_seed == 0);
        const uint64_t perm_seed = opt.pixel_perm_seed * UINT64_C(0x9E3779B9) + opt.class_perm_seed;
        EpisodeSampler sampler = [&data, ep_cfg, perm_seed](int64_t step, int slot, RngStream&) {
            RngStream rng = RngStream::from_seed(perm_seed, static_cast<uint64_t>(step) * 131 +
                                                                static_cast<uint64_t>(slot));
            return make_permuted_episode(data, ep_cfg, rng);
        };
        const TrainResult result = train_episodes(sampler, model, opt.train, nullptr);
        Provenance prov{result.adam.t, result.curve.empty() ? 0.0 : result.curve.back().loss,
                        opt.train.seed};
        write_checkpoint(opt.checkpoint, result.params, prov, &result.adam);
        write_curve_csv(opt.checkpoint + ".curve.csv", result.curve);
        std::cout << "meta-trained " << result.adam.t << " steps; checkpoint " << opt.checkpoint << "\n";
        return 0;
    }

    const Checkpoint ck = read_checkpoint(opt.checkpoint);
    if (ck.params.config.in_dim != data.input_dim || ck.params.config.out_dim != data.n_classes) {
        throw TdxError("classify: checkpoint dims (" + std::to_string(ck.params.config.in_dim) + "->" +
                       std::to_string(ck.params.config.out_dim) + ") do not match data (" +
                       std::to_string(data.input_dim) + "->" + std::to_string(data.n_classes) + ")");
    }
    PermutedEpisodeConfig ep_cfg;
    ep_cfg.context_per_class = opt.context_per_class;
    ep_cfg.query_count = opt.query_count;
    ep_cfg.permute = false; // meta-test runs on the identity permutation
    double acc_sum = 0.0;
    int total = 0, correct = 0;
    for (int e = 0; e < opt.episodes; ++e) {
        RngStream rng = RngStream::from_seed(opt.seed, static_cast<uint64_t>(e));
        std::vector<int> qlabels;
        Episode ep = make_permuted_episode(data, ep_cfg, rng, &qlabels);
        const ClassifyResult res = classify_finite(ck.params, ep.input, qlabels);
        acc_sum += res.accuracy;
        total += static_cast<int>(qlabels.size());
        correct += static_cast<int>(std::lround(res.accuracy * qlabels.size()));
    }
    const double accuracy = acc_sum / opt.episodes;
    std::cout << "meta-test accuracy " << accuracy << " (" << correct << "/" << total << " over "
              << opt.episodes << " episodes)\n";
    if (!opt.out_report.empty()) {
        json j{{"accuracy", accuracy},
               {"episodes", opt.episodes},
               {"queries_per_episode", ep_cfg.query_count},
               {"correct", correct},
               {"total", total}};
        write_text_atomic(opt.out_report, j.dump(2) + "\n");
    }
    return 0;
}

int cmd_inspect(const InspectOptions& opt) {
    std::cout << inspect_container(opt.path);
    return 0;
}

} // namespace tdx
