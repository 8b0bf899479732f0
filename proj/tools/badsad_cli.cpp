// badsad: train, attack and evaluate hypersphere anomaly detectors with
// clean-label trigger poisoning. See README.md for the experiment workflow.

#include <cstdio>
#include <map>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "badsad/runner.hpp"

namespace {

struct CommonArgs {
    std::string config_path;
    std::string out_dir = "runs/latest";
    std::vector<std::string> sets;
    std::string mode;
    std::string dataset;
    std::string alpha, beta;
    std::string seed;
    std::string normal_class;
    std::string dtype;
};

void add_common(CLI::App* cmd, CommonArgs& args, bool with_out = true) {
    cmd->add_option("--config", args.config_path, "experiment config file (INI-style or JSON)");
    if (with_out) cmd->add_option("--out", args.out_dir, "output directory");
    cmd->add_option("--set", args.sets, "override a config key, e.g. --set train.lr=0.01")
        ->take_all();
    cmd->add_option("--mode", args.mode, "training mode: clean|poison_only|badsad|dirty_label");
    cmd->add_option("--dataset", args.dataset, "dataset: synth|mnist|fashion|cifar10");
    cmd->add_option("--alpha", args.alpha, "alignment weight");
    cmd->add_option("--beta", args.beta, "concentration weight");
    cmd->add_option("--seed", args.seed, "seed for split/trigger/train streams");
    cmd->add_option("--normal-class", args.normal_class, "normal class id (0-9)");
    cmd->add_option("--dtype", args.dtype, "training precision: f32|f64");
}

badsad::ExperimentConfig build_config(const CommonArgs& args) {
    std::map<std::string, std::string> file_values;
    if (!args.config_path.empty()) {
        file_values = badsad::parse_config_file(args.config_path);
    }
    std::map<std::string, std::string> overrides;
    for (const auto& kv : args.sets) {
        const auto eq = kv.find('=');
        if (eq == std::string::npos) {
            throw badsad::ConfigError("--set expects key=value, got '" + kv + "'");
        }
        overrides[kv.substr(0, eq)] = kv.substr(eq + 1);
    }
    if (!args.mode.empty()) overrides["train.mode"] = args.mode;
    if (!args.dataset.empty()) overrides["dataset"] = args.dataset;
    if (!args.alpha.empty()) overrides["train.alpha"] = args.alpha;
    if (!args.beta.empty()) overrides["train.beta"] = args.beta;
    if (!args.normal_class.empty()) overrides["normal_class"] = args.normal_class;
    if (!args.dtype.empty()) overrides["train.dtype"] = args.dtype;
    if (!args.seed.empty()) {
        overrides["split.seed"] = args.seed;
        overrides["trigger.seed"] = args.seed;
        overrides["train.seed"] = args.seed;
        overrides["pretrain.seed"] = args.seed;
        overrides["synth.seed"] = args.seed;
    }
    return badsad::resolve_config(file_values, overrides);
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"hypersphere anomaly detection with clean-label trigger poisoning"};
    app.require_subcommand(1);

    CommonArgs args;
    std::string run_dir;
    std::string pretrain_ckpt;
    std::string sweep_what = "threshold";
    int jobs = 1;
    std::size_t n_per_group = 0;

    auto* pretrain = app.add_subcommand("pretrain", "reconstruction-pretrain the autoencoder");
    add_common(pretrain, args);

    auto* train = app.add_subcommand("train", "train a detector in the configured mode");
    add_common(train, args);
    train->add_option("--pretrain-checkpoint", pretrain_ckpt,
                      "path to the pretrained autoencoder checkpoint");

    auto* eval = app.add_subcommand("eval", "evaluate a finished run (AUC, tau, ASR)");
    eval->add_option("run_dir", run_dir, "run directory")->required();

    auto* sweep = app.add_subcommand("sweep", "threshold-ratio or alpha/beta sweep");
    sweep->add_option("run_dir", run_dir, "run directory")->required();
    sweep->add_option("--what", sweep_what, "threshold|alpha|beta");
    sweep->add_option("--jobs", jobs, "parallel retrains for alpha/beta sweeps");

    auto* robustness =
        app.add_subcommand("robustness", "full/sub/distinct trigger ASR table");
    robustness->add_option("run_dir", run_dir, "run directory")->required();

    auto* project = app.add_subcommand("project", "2-d latent projection of the four groups");
    project->add_option("run_dir", run_dir, "run directory")->required();
    project->add_option("--n-per-group", n_per_group, "samples per group (default 100)");

    auto* table1 = app.add_subcommand(
        "reproduce-table1", "all classes x {clean, poison_only, badsad} summary table");
    add_common(table1, args);
    table1->add_option("--jobs", jobs, "classes trained in parallel");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? 0 : 2;
    }

    try {
        if (pretrain->parsed()) {
            badsad::cmd_pretrain(build_config(args), args.out_dir);
        } else if (train->parsed()) {
            badsad::cmd_train(build_config(args), args.out_dir, pretrain_ckpt);
        } else if (eval->parsed()) {
            badsad::cmd_eval(run_dir);
        } else if (sweep->parsed()) {
            badsad::cmd_sweep(run_dir, sweep_what, jobs);
        } else if (robustness->parsed()) {
            badsad::cmd_robustness(run_dir);
        } else if (project->parsed()) {
            badsad::cmd_project(run_dir, n_per_group);
        } else if (table1->parsed()) {
            badsad::cmd_reproduce_table1(build_config(args), args.out_dir, jobs);
        }
    } catch (const badsad::Error& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return badsad::exit_code_for(e);
    } catch (const std::exception& e) {
        std::fprintf(stderr, "unexpected error: %s\n", e.what());
        return 1;
    }
    return 0;
}
