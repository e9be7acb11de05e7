// SPDX-License-Identifier: Apache-2.0
//
// tdx: in-context operator regression toolbox.
// Subcommands: generate | train | evaluate | extrapolate | outliers |
// classify | inspect. TDX_SEED serves as the seed fallback when --seed is
// not given.

#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "tdx/commands.hpp"

namespace {

uint64_t resolve_seed(const CLI::Option* opt, uint64_t value) {
    if (opt->count() > 0) return value;
    if (auto env = tdx::env_seed()) return *env;
    return value;
}

void add_model_flags(CLI::App* cmd, tdx::ModelConfig& model, std::string& kernel) {
    cmd->add_option("--depth", model.depth, "Number of kernel layers");
    cmd->add_option("--heads", model.heads, "Attention heads per layer");
    cmd->add_option("--head-dim", model.head_dim, "Query/key projection dim");
    cmd->add_option("--value-dim", model.value_dim, "Per-head value dim");
    cmd->add_option("--mlp", model.mlp_dim, "Hidden width of the residual blocks");
    cmd->add_option("--kernel", kernel, "Kernel variant: exp_dot | rbf | l2");
    cmd->add_option("--temperature", model.temperature, "Kernel temperature (0 = variant default)");
    cmd->add_flag("--tie-weights", model.tie_weights, "Share one layer's weights across depth");
    cmd->add_flag("--no-context-self-attention",
                  [&model](int64_t) { model.context_self_attention = false; },
                  "Context rows do not attend to themselves");
}

void add_train_flags(CLI::App* cmd, tdx::TrainConfig& train, bool episode_flags) {
    cmd->add_option("--steps", train.steps, "Gradient step budget");
    cmd->add_option("--epochs", train.epochs, "Epoch budget (overrides --steps when > 0)");
    cmd->add_option("--batch-operators", train.batch_operators, "Datasets per step");
    if (episode_flags) {
        cmd->add_option("--queries", train.query_count, "Query subset size per episode");
        cmd->add_option("--context-min", train.context_min, "Smallest training context");
        cmd->add_option("--context-max", train.context_max, "Largest training context");
        cmd->add_flag("--mode-space-loss", [&train](int64_t) { train.grid_space_loss = false; },
                      "Train on mode-space MSE instead of grid-space");
    }
    cmd->add_option("--lr", train.learning_rate, "Base learning rate");
    cmd->add_option("--lr-milestones", train.lr_milestones,
                    "Steps at which the LR halves (default 50%,75%,90%)");
    cmd->add_option("--checkpoint-every", train.checkpoint_every, "Checkpoint period in steps");
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"tdx: transductive in-context operator regression"};
    app.require_subcommand(1);

    // ---- generate ----------------------------------------------------
    tdx::GenerateOptions gen;
    auto* g = app.add_subcommand("generate", "Generate an ADR meta-dataset");
    g->add_option("--n-datasets", gen.gen.n_datasets, "Number of operators");
    g->add_option("--pairs", gen.gen.pairs_per_dataset, "Example pairs per operator");
    g->add_option("--grid", gen.gen.grid_n, "Spatial grid points");
    g->add_option("--t", gen.gen.t, "Target time");
    g->add_option("--l", gen.gen.l, "GRF correlation length");
    g->add_option("--dt", gen.gen.dt, "Euler step size");
    g->add_flag("--no-clamp-dt", [&gen](int64_t) { gen.gen.clamp_dt = false; },
                "Do not lower dt to the stability bound");
    g->add_option("--k-min", gen.gen.k_min, "Reaction coefficient lower bound");
    g->add_option("--k-max", gen.gen.k_max, "Reaction coefficient upper bound");
    g->add_option("--retries", gen.gen.max_retries, "Trajectory resample budget per pair");
    g->add_option("--split", gen.split, "Split tag stored in the container");
    auto* g_seed = g->add_option("--seed", gen.gen.seed, "Generation seed");
    g->add_option("--out", gen.out, "Output .tdxd path")->required();

    // ---- train --------------------------------------------------------
    tdx::TrainOptions tr;
    std::string tr_kernel = "exp_dot";
    auto* t = app.add_subcommand("train", "Meta-train on a meta-dataset");
    t->add_option("--meta", tr.meta_path, "Meta-train .tdxd path")->required();
    t->add_option("--modes", tr.modes, "Retained Fourier modes M (feature dim = 2M)");
    add_model_flags(t, tr.model, tr_kernel);
    add_train_flags(t, tr.train, true);
    auto* t_seed = t->add_option("--seed", tr.train.seed, "Training seed");
    t->add_option("--resume", tr.resume, "Checkpoint to resume from");
    t->add_option("--out", tr.out_checkpoint, "Output checkpoint path")->required();
    t->add_option("--curve", tr.out_curve, "Training curve CSV path");

    // ---- evaluate -----------------------------------------------------
    tdx::EvaluateOptions ev;
    auto* e = app.add_subcommand("evaluate", "Evaluate a checkpoint and baselines");
    e->add_option("--checkpoint", ev.checkpoint, "Checkpoint path")->required();
    e->add_option("--meta", ev.meta_path, "Meta-test .tdxd path")->required();
    e->add_option("--contexts", ev.context_sizes, "Context sizes to sweep");
    e->add_option("--queries", ev.query_n, "Queries per operator");
    e->add_option("--baselines", ev.baselines, "Extra regressors: knn ridge");
    e->add_option("--knn-k", ev.knn_k, "k for the k-NN baseline");
    e->add_option("--ridge-lambda", ev.ridge.lambda, "Ridge regularization");
    e->add_option("--ridge-gamma", ev.ridge.gamma, "RBF bandwidth (0 = median heuristic)");
    e->add_flag("--ridge-cv-gamma", ev.ridge.cv_gamma, "Cross-validate the bandwidth");
    auto* e_seed = e->add_option("--seed", ev.seed, "Split seed");
    e->add_option("--out", ev.out_csv, "Report CSV path")->required();

    // ---- extrapolate ----------------------------------------------------
    tdx::ExtrapolateOptions ex;
    auto* x = app.add_subcommand("extrapolate", "Evaluate on out-of-distribution (l, t) grids");
    x->add_option("--checkpoint", ex.checkpoint, "Checkpoint path")->required();
    x->add_option("--l", ex.l_values, "Correlation lengths");
    x->add_option("--t", ex.t_values, "Target times");
    x->add_option("--n-datasets", ex.n_datasets, "Operators per (l, t) cell");
    x->add_option("--pairs", ex.pairs, "Pairs per operator");
    x->add_option("--context", ex.context_n, "Context size");
    x->add_option("--queries", ex.query_n, "Queries per operator");
    x->add_option("--grid", ex.grid_n, "Spatial grid points");
    x->add_option("--dt", ex.dt, "Euler step size");
    auto* x_seed = x->add_option("--seed", ex.seed, "Generation/split seed");
    x->add_option("--out", ex.out_csv, "Report CSV path")->required();

    // ---- outliers -------------------------------------------------------
    tdx::OutliersOptions ou;
    auto* o = app.add_subcommand("outliers", "Repeated-split outlier detection on one dataset");
    o->add_option("--checkpoint", ou.checkpoint, "Checkpoint path")->required();
    o->add_option("--dataset", ou.dataset_path, "Dataset .tdxd path")->required();
    o->add_option("--index", ou.dataset_index, "Dataset index inside the container");
    o->add_option("--contaminate", ou.contaminate, "Contamination fraction (0 = off)");
    o->add_option("--source", ou.source_path, "Contamination source .tdxd");
    o->add_option("--source-index", ou.source_index, "Dataset index in the source");
    o->add_option("--regressions", ou.config.num_regressions, "Number of random splits");
    o->add_option("--split-fraction", ou.config.split_fraction, "Training-half fraction");
    o->add_option("--sigma", ou.config.flag_sigma, "Flagging threshold in std devs");
    auto* o_seed = o->add_option("--seed", ou.config.seed, "Split seed");
    o->add_option("--out", ou.out_json, "Report JSON path")->required();
    o->add_option("--hist", ou.out_hist_csv, "Per-element RMSE histogram CSV path");

    // ---- classify -------------------------------------------------------
    tdx::ClassifyOptions cl;
    std::string cl_kernel = "exp_dot";
    auto* c = app.add_subcommand("classify", "Finite-dimensional permuted classification");
    c->add_option("--images", cl.images_path, "IDX image file")->required();
    c->add_option("--labels", cl.labels_path, "IDX label file")->required();
    c->add_flag("--meta-train", cl.meta_train, "Meta-train on permuted episodes");
    c->add_option("--checkpoint", cl.checkpoint, "Checkpoint path (output when meta-training)")
        ->required();
    c->add_option("--pixel-perm-seed", cl.pixel_perm_seed, "Pixel permutation seed (0 = identity)");
    c->add_option("--class-perm-seed", cl.class_perm_seed, "Class permutation seed (0 = identity)");
    c->add_option("--context-per-class", cl.context_per_class, "Context examples per class");
    c->add_option("--queries", cl.query_count, "Queries per episode");
    c->add_option("--episodes", cl.episodes, "Meta-test episodes");
    cl.model.depth = 2;
    cl.model.heads = 8;
    cl.model.head_dim = 16;
    cl.model.value_dim = 16;
    cl.model.mlp_dim = 128;
    add_model_flags(c, cl.model, cl_kernel);
    add_train_flags(c, cl.train, false);
    auto* c_seed = c->add_option("--seed", cl.seed, "Episode seed");
    c->add_option("--report", cl.out_report, "Accuracy report JSON path");

    // ---- inspect ----------------------------------------------------------
    tdx::InspectOptions in;
    auto* i = app.add_subcommand("inspect", "Dump a container header");
    i->add_option("path", in.path, "TDXD / TDXC / IDX file")->required();

    CLI11_PARSE(app, argc, argv);

    try {
        if (g->parsed()) {
            gen.gen.seed = resolve_seed(g_seed, gen.gen.seed);
            return tdx::cmd_generate(gen);
        }
        if (t->parsed()) {
            tr.train.seed = resolve_seed(t_seed, tr.train.seed);
            tr.model.kernel = tdx::kernel_variant_from_string(tr_kernel);
            return tdx::cmd_train(tr);
        }
        if (e->parsed()) {
            ev.seed = resolve_seed(e_seed, ev.seed);
            return tdx::cmd_evaluate(ev);
        }
        if (x->parsed()) {
            ex.seed = resolve_seed(x_seed, ex.seed);
            return tdx::cmd_extrapolate(ex);
        }
        if (o->parsed()) {
            ou.config.seed = resolve_seed(o_seed, ou.config.seed);
            return tdx::cmd_outliers(ou);
        }
        if (c->parsed()) {
            cl.seed = resolve_seed(c_seed, cl.seed);
            cl.train.seed = cl.seed;
            cl.model.kernel = tdx::kernel_variant_from_string(cl_kernel);
            return tdx::cmd_classify(cl);
        }
        if (i->parsed()) {
            return tdx::cmd_inspect(in);
        }
    } catch (const std::exception& ex_caught) {
        std::cerr << "error: " << ex_caught.what() << "\n";
        return 1;
    }
    return 0;
}
