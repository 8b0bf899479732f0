#pragma once

#include <string>

#include "badsad/config.hpp"

namespace badsad {

// Command implementations shared by the CLI and the integration tests. Each
// writes its artifacts under the given directory; all outputs are pure
// functions of (config, data files, seeds) so reruns are byte-identical.

// writes pretrain_checkpoint.bin, pretrain_log.csv, pretrain_manifest.json
void cmd_pretrain(const ExperimentConfig& cfg, const std::string& out_dir);

// writes checkpoint.bin, training_log.csv, split_manifest.json, manifest.json;
// pretrain_ckpt defaults to <out_dir>/pretrain_checkpoint.bin when empty
void cmd_train(const ExperimentConfig& cfg, const std::string& out_dir,
               std::string pretrain_ckpt = "");

// writes report.json and report.csv (the Table-1-shaped row)
void cmd_eval(const std::string& run_dir);

// what = threshold | alpha | beta; alpha/beta retrain per grid point
void cmd_sweep(const std::string& run_dir, const std::string& what, int jobs = 1);

// writes robustness.csv with the full/sub/distinct rows
void cmd_robustness(const std::string& run_dir);

// writes projection.csv (x,y,group) and optionally projection.svg
void cmd_project(const std::string& run_dir, std::size_t n_per_group = 0);

// loops all classes x {clean, poison_only, badsad} and emits table1.csv
void cmd_reproduce_table1(const ExperimentConfig& cfg, const std::string& out_dir, int jobs = 1);

// reads manifest.json back into a resolved config
ExperimentConfig load_run_config(const std::string& run_dir);

struct EvalOutcome {
    double auc = 0.0;
    double tau = 0.0;
    double asr = 0.0;
};

// in-process evaluation of a finished run directory (same numbers cmd_eval
// writes); exposed for tests and the acceptance suite
EvalOutcome evaluate_run_dir(const std::string& run_dir);

}  // namespace badsad
