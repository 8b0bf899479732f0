#include "badsad/config.hpp"

#include <algorithm>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include <json.hpp>

namespace badsad {

std::vector<double> EvalOptions::ratios() const {
    if (!(ratio_step > 0.0) || ratio_max < 0.0) {
        throw ConfigError("eval.ratio_step must be > 0 and eval.ratio_max >= 0");
    }
    std::vector<double> out;
    const int steps = static_cast<int>(ratio_max / ratio_step + 0.5);
    for (int i = 0; i <= steps; ++i) out.push_back(i * ratio_step);
    return out;
}

namespace {

std::string trim(const std::string& s) {
    std::size_t b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return "";
    std::size_t e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

void flatten_json(const nlohmann::json& j, const std::string& prefix,
                  std::map<std::string, std::string>& out) {
    for (auto it = j.begin(); it != j.end(); ++it) {
        const std::string key = prefix.empty() ? it.key() : prefix + "." + it.key();
        if (it->is_object()) {
            flatten_json(*it, key, out);
        } else if (it->is_array()) {
            std::string joined;
            for (const auto& e : *it) {
                if (!joined.empty()) joined += ",";
                joined += e.is_string() ? e.get<std::string>() : e.dump();
            }
            out[key] = joined;
        } else if (it->is_string()) {
            out[key] = it->get<std::string>();
        } else {
            out[key] = it->dump();
        }
    }
}

std::vector<double> parse_vector(const std::string& s) {
    std::vector<double> out;
    std::stringstream ss(s);
    std::string tok;
    while (std::getline(ss, tok, ',')) {
        tok = trim(tok);
        if (tok.empty()) continue;
        try {
            out.push_back(std::stod(tok));
        } catch (const std::exception&) {
            throw ConfigError("cannot parse number '" + tok + "' in vector value");
        }
    }
    return out;
}

// typed accessors over the raw key-value map; every lookup records the
// resolved value and its provenance
struct Resolver {
    const std::map<std::string, std::string>& file;
    const std::map<std::string, std::string>& cli;
    ExperimentConfig* cfg;

    std::string lookup(const std::string& key, const std::string& fallback) {
        std::string value = fallback;
        std::string source = "default";
        if (auto it = file.find(key); it != file.end()) {
            value = it->second;
            source = "config";
        }
        if (auto it = cli.find(key); it != cli.end()) {
            value = it->second;
            source = "cli";
        }
        cfg->resolved[key] = value;
        cfg->provenance[key] = source;
        return value;
    }

    std::string str(const std::string& key, const std::string& dflt) {
        return lookup(key, dflt);
    }

    double num(const std::string& key, double dflt) {
        const std::string v = lookup(key, fmt(dflt));
        try {
            return std::stod(v);
        } catch (const std::exception&) {
            throw ConfigError("key '" + key + "': cannot parse number '" + v + "'");
        }
    }

    std::int64_t integer(const std::string& key, std::int64_t dflt) {
        const std::string v = lookup(key, std::to_string(dflt));
        try {
            return std::stoll(v);
        } catch (const std::exception&) {
            throw ConfigError("key '" + key + "': cannot parse integer '" + v + "'");
        }
    }

    std::uint64_t uinteger(const std::string& key, std::uint64_t dflt) {
        const std::string v = lookup(key, std::to_string(dflt));
        try {
            return std::stoull(v);
        } catch (const std::exception&) {
            throw ConfigError("key '" + key + "': cannot parse integer '" + v + "'");
        }
    }

    bool boolean(const std::string& key, bool dflt) {
        const std::string v = lookup(key, dflt ? "true" : "false");
        if (v == "true" || v == "1" || v == "yes") return true;
        if (v == "false" || v == "0" || v == "no") return false;
        throw ConfigError("key '" + key + "': cannot parse boolean '" + v + "'");
    }

    std::vector<double> vec(const std::string& key, const std::vector<double>& dflt) {
        std::string joined;
        for (double d : dflt) {
            if (!joined.empty()) joined += ",";
            joined += fmt(d);
        }
        return parse_vector(lookup(key, joined));
    }

    static std::string fmt(double d) {
        char buf[64];
        std::snprintf(buf, sizeof(buf), "%.17g", d);
        return buf;
    }
};

}  // namespace

std::map<std::string, std::string> parse_config_text(const std::string& text, bool as_json) {
    std::map<std::string, std::string> out;
    if (as_json) {
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(text);
        } catch (const nlohmann::json::exception& e) {
            throw FormatError(std::string("config JSON parse error: ") + e.what());
        }
        if (!j.is_object()) throw FormatError("config JSON root must be an object");
        flatten_json(j, "", out);
        return out;
    }
    std::string section;
    std::stringstream ss(text);
    std::string line;
    int lineno = 0;
    while (std::getline(ss, line)) {
        ++lineno;
        const std::string t = trim(line);
        if (t.empty() || t[0] == '#' || t[0] == ';') continue;
        if (t.front() == '[') {
            if (t.back() != ']') {
                throw FormatError("config line " + std::to_string(lineno) +
                                  ": unterminated section header");
            }
            section = trim(t.substr(1, t.size() - 2));
            continue;
        }
        const auto eq = t.find('=');
        if (eq == std::string::npos) {
            throw FormatError("config line " + std::to_string(lineno) + ": expected key = value");
        }
        const std::string key = trim(t.substr(0, eq));
        const std::string value = trim(t.substr(eq + 1));
        if (key.empty()) {
            throw FormatError("config line " + std::to_string(lineno) + ": empty key");
        }
        out[section.empty() ? key : section + "." + key] = value;
    }
    return out;
}

std::map<std::string, std::string> parse_config_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open config file: " + path);
    std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    const std::string t = trim(text);
    const bool as_json = (path.size() > 5 && path.substr(path.size() - 5) == ".json") ||
                         (!t.empty() && t.front() == '{');
    return parse_config_text(text, as_json);
}

ExperimentConfig resolve_config(const std::map<std::string, std::string>& file_values,
                                const std::map<std::string, std::string>& overrides) {
    ExperimentConfig cfg;
    Resolver r{file_values, overrides, &cfg};

    cfg.dataset = r.str("dataset", "synth");
    if (cfg.dataset != "synth" && cfg.dataset != "mnist" && cfg.dataset != "fashion" &&
        cfg.dataset != "cifar10") {
        throw ConfigError("dataset must be one of synth, mnist, fashion, cifar10");
    }
    const char* env_root = std::getenv("BADSAD_DATA_ROOT");
    cfg.data_root = r.str("data_root", env_root ? env_root : "/root/data");
    cfg.normal_class = static_cast<int>(r.integer("normal_class", 0));
    if (cfg.dataset != "synth" && (cfg.normal_class < 0 || cfg.normal_class > 9)) {
        throw ConfigError("normal_class must lie in 0..9 for image datasets");
    }

    cfg.split_seed = r.uinteger("split.seed", 1);
    cfg.sizes.unlabeled = static_cast<std::size_t>(r.integer("split.unlabeled", 4000));
    cfg.sizes.labeled_normal = static_cast<std::size_t>(r.integer("split.labeled_normal", 500));
    cfg.sizes.labeled_abnormal =
        static_cast<std::size_t>(r.integer("split.labeled_abnormal", 500));
    cfg.sizes.val_normal = static_cast<std::size_t>(r.integer("split.val_normal", 200));
    cfg.sizes.val_abnormal = static_cast<std::size_t>(r.integer("split.val_abnormal", 180));
    cfg.sizes.test_normal = static_cast<std::size_t>(r.integer("split.test_normal", 760));
    cfg.sizes.test_abnormal = static_cast<std::size_t>(r.integer("split.test_abnormal", 430));
    cfg.sizes.asr_abnormal = static_cast<std::size_t>(r.integer("split.asr_abnormal", 500));

    cfg.synth.n_per_group = static_cast<std::size_t>(r.integer("synth.n_per_group", 500));
    cfg.synth.dims = static_cast<std::size_t>(r.integer("synth.dims", 2));
    cfg.synth.normal_center = r.vec("synth.normal_center", {0.6, 0.5});
    cfg.synth.abnormal_center = r.vec("synth.abnormal_center", {0.9, 0.1});
    cfg.synth.spread = r.num("synth.spread", 0.07);
    cfg.synth.seed = r.uinteger("synth.seed", 1);

    cfg.trigger_kind = r.str("trigger.kind", "corner4");
    trigger_kind_from_name(cfg.trigger_kind);  // validates
    cfg.trigger_square = static_cast<int>(r.integer("trigger.square_size", 0));
    cfg.trigger_mu = r.num("trigger.mu", 1.0);
    cfg.poison_count = static_cast<std::size_t>(
        r.integer("trigger.count", static_cast<std::int64_t>(cfg.sizes.labeled_normal)));
    cfg.trigger_seed = r.uinteger("trigger.seed", 1);

    cfg.zero_guard = r.num("model.zero_guard", cfg.dataset == "synth" ? 0.01 : 0.1);
    cfg.synth_hidden = static_cast<int>(r.integer("model.synth_hidden", 32));
    cfg.synth_rep = static_cast<int>(r.integer("model.synth_rep_dim", 8));

    cfg.pretrain.epochs = static_cast<std::size_t>(r.integer("pretrain.epochs", 30));
    cfg.pretrain.lr = r.num("pretrain.lr", 1e-3);
    cfg.pretrain.batch_size = static_cast<std::size_t>(r.integer("pretrain.batch_size", 64));
    cfg.pretrain.seed = r.uinteger("pretrain.seed", 1);
    cfg.pretrain.weight_decay = r.num("pretrain.weight_decay", 1e-6);

    cfg.mode = train_mode_from_name(r.str("train.mode", "badsad"));
    cfg.train_epochs = static_cast<std::size_t>(r.integer("train.epochs", 50));
    cfg.train_lr = r.num("train.lr", 1e-3);
    cfg.batch.unlabeled = static_cast<std::size_t>(r.integer("train.bs_unlabeled", 64));
    cfg.batch.labeled_normal = static_cast<std::size_t>(r.integer("train.bs_labeled_normal", 16));
    cfg.batch.labeled_abnormal =
        static_cast<std::size_t>(r.integer("train.bs_labeled_abnormal", 16));
    cfg.batch.poisoned = static_cast<std::size_t>(r.integer("train.bs_poisoned", 16));
    cfg.weights.eta = r.num("train.eta", 1.0);
    cfg.weights.alpha = r.num("train.alpha", 1.0);
    cfg.weights.beta = r.num("train.beta", 1.0);
    cfg.weights.margin = r.num("train.margin", 2.0);
    cfg.weights.eps_inv = r.num("train.eps_inv", 1e-6);
    cfg.weights.lambda_wd = r.num("train.lambda_wd", 1e-6);
    cfg.weights.eps_cos = r.num("train.eps_cos", 1e-8);
    cfg.weights.allpairs_cosine = r.boolean("train.allpairs_cosine", false);
    cfg.train_seed = r.uinteger("train.seed", 1);
    cfg.dtype = r.str("train.dtype", "f32");
    if (cfg.dtype != "f32" && cfg.dtype != "f64") {
        throw ConfigError("train.dtype must be f32 or f64");
    }
    cfg.weights.validate();

    cfg.eval.ratio_max = r.num("eval.ratio_max", 2.0);
    cfg.eval.ratio_step = r.num("eval.ratio_step", 0.1);
    const std::string crit = r.str("eval.threshold_criterion", "balanced");
    if (crit == "balanced") {
        cfg.eval.criterion = ThresholdCriterion::balanced_accuracy;
    } else if (crit == "f1") {
        cfg.eval.criterion = ThresholdCriterion::f1;
    } else {
        throw ConfigError("eval.threshold_criterion must be balanced or f1");
    }
    cfg.eval.project_per_group =
        static_cast<std::size_t>(r.integer("eval.project_per_group", 100));
    cfg.eval.svg = r.boolean("eval.svg", false);

    // batch sizes must cover the groups the mode consumes
    if (cfg.batch.unlabeled == 0 || cfg.batch.labeled_normal == 0 ||
        cfg.batch.labeled_abnormal == 0) {
        throw ConfigError("train batch sizes for unlabeled/labeled groups must be >= 1");
    }
    const bool uses_fourth = cfg.mode != TrainMode::clean;
    if (uses_fourth && cfg.batch.poisoned == 0) {
        throw ConfigError("train.bs_poisoned must be >= 1 for mode " + train_mode_name(cfg.mode));
    }
    return cfg;
}

int ExperimentConfig::resolved_square_size() const {
    if (trigger_square > 0) return trigger_square;
    if (dataset == "synth") return 1;
    if (dataset == "cifar10") return 4;
    return 3;
}

ArchSpec ExperimentConfig::arch() const {
    if (dataset == "synth") {
        return arch_dense(static_cast<int>(synth.dims), synth_hidden, synth_rep);
    }
    if (dataset == "cifar10") return arch_cifar32();
    return arch_mnist28();
}

TriggerMask ExperimentConfig::make_trigger(TriggerKind kind) const {
    const auto a = arch();
    return build_mask(kind, resolved_square_size(), a.in_c, a.in_h, a.in_w,
                      static_cast<float>(trigger_mu));
}

TrainConfig ExperimentConfig::make_train_config() const {
    TrainConfig tc;
    tc.mode = mode;
    tc.epochs = train_epochs;
    tc.lr = train_lr;
    tc.batch = batch;
    tc.weights = weights;
    tc.seed = train_seed;
    tc.zero_guard = zero_guard;
    if (mode == TrainMode::dirty_label) {
        PoisonSpec ds;
        ds.mask = make_trigger(trigger_kind_from_name(trigger_kind));
        ds.count = poison_count;
        ds.source_seed = trigger_seed;
        tc.dirty_spec = ds;
    }
    return tc;
}

std::string ExperimentConfig::snapshot_json() const {
    nlohmann::json j;
    nlohmann::json values = nlohmann::json::object();
    nlohmann::json sources = nlohmann::json::object();
    for (const auto& [k, v] : resolved) values[k] = v;
    for (const auto& [k, v] : provenance) sources[k] = v;
    j["config"] = values;
    j["provenance"] = sources;
    return j.dump(2);
}

namespace {

std::vector<std::string> dataset_files(const ExperimentConfig& cfg, bool train_partition) {
    const std::string root = cfg.data_root + "/" + cfg.dataset;
    if (cfg.dataset == "mnist" || cfg.dataset == "fashion") {
        if (train_partition) {
            return {root + "/train-images-idx3-ubyte", root + "/train-labels-idx1-ubyte"};
        }
        return {root + "/t10k-images-idx3-ubyte", root + "/t10k-labels-idx1-ubyte"};
    }
    if (train_partition) {
        std::vector<std::string> out;
        for (int i = 1; i <= 5; ++i) {
            out.push_back(root + "/data_batch_" + std::to_string(i) + ".bin");
        }
        return out;
    }
    return {root + "/test_batch.bin"};
}

}  // namespace

DatasetSplit assemble_split(const ExperimentConfig& cfg) {
    if (cfg.dataset == "synth") {
        return synth_blobs(cfg.synth);
    }
    std::vector<LabeledImage> train_pool, test_pool;
    if (cfg.dataset == "cifar10") {
        train_pool = load_cifar10(dataset_files(cfg, true));
        test_pool = load_cifar10(dataset_files(cfg, false));
    } else {
        const auto tr = dataset_files(cfg, true);
        const auto te = dataset_files(cfg, false);
        train_pool = load_idx(tr[0], tr[1]);
        test_pool = load_idx(te[0], te[1]);
    }
    return build_split(train_pool, test_pool, cfg.normal_class, cfg.sizes, cfg.split_seed);
}

void materialize_poison(const ExperimentConfig& cfg, DatasetSplit& split) {
    PoisonSpec spec;
    spec.mask = cfg.make_trigger(trigger_kind_from_name(cfg.trigger_kind));
    spec.count = std::min(cfg.poison_count, split.labeled_normal.size());
    spec.source_seed = cfg.trigger_seed;
    split.poisoned = poison_set(split.labeled_normal, spec);
}

}  // namespace badsad
