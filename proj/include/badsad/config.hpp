#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "badsad/datasets.hpp"
#include "badsad/eval.hpp"
#include "badsad/model.hpp"
#include "badsad/training.hpp"
#include "badsad/trigger.hpp"

namespace badsad {

struct EvalOptions {
    double ratio_max = 2.0;
    double ratio_step = 0.1;
    ThresholdCriterion criterion = ThresholdCriterion::balanced_accuracy;
    std::size_t project_per_group = 100;
    bool svg = false;

    std::vector<double> ratios() const;
};

// One experiment, fully resolved. `resolved` echoes every key with its final
// value and `provenance` records where it came from (default/config/cli), so
// the run manifest can audit every defaulted choice.
struct ExperimentConfig {
    std::string dataset = "synth";  // synth | mnist | fashion | cifar10
    std::string data_root;
    int normal_class = 0;

    SplitSizes sizes;
    std::uint64_t split_seed = 1;
    SyntheticSpec synth;

    std::string trigger_kind = "corner4";
    int trigger_square = 0;  // 0 resolves per dataset: 3 (28x28), 4 (32x32), 1 (synth)
    double trigger_mu = 1.0;
    std::size_t poison_count = 500;
    std::uint64_t trigger_seed = 1;

    double zero_guard = 0.1;
    int synth_hidden = 32;
    int synth_rep = 8;

    PretrainOptions pretrain;

    TrainMode mode = TrainMode::badsad;
    std::size_t train_epochs = 50;
    double train_lr = 1e-3;
    BatchSizes batch;
    LossWeights weights;
    std::uint64_t train_seed = 1;
    std::string dtype = "f32";  // f32 | f64

    EvalOptions eval;

    std::map<std::string, std::string> resolved;
    std::map<std::string, std::string> provenance;

    int resolved_square_size() const;
    ArchSpec arch() const;
    TriggerMask make_trigger(TriggerKind kind) const;
    TrainConfig make_train_config() const;
    std::string snapshot_json() const;  // resolved config as canonical JSON
};

// key=value with [section] headers, or a JSON object ({"section": {...}});
// both flatten onto the same "section.key" space
std::map<std::string, std::string> parse_config_file(const std::string& path);
std::map<std::string, std::string> parse_config_text(const std::string& text, bool as_json);

// overrides (CLI flags) win over file keys, which win over defaults
ExperimentConfig resolve_config(const std::map<std::string, std::string>& file_values,
                                const std::map<std::string, std::string>& overrides = {});

// assembles the dataset split the config describes (poisoned set untouched)
DatasetSplit assemble_split(const ExperimentConfig& cfg);

// materializes D_p from labeled-normal sources per the config trigger spec
void materialize_poison(const ExperimentConfig& cfg, DatasetSplit& split);

}  // namespace badsad
