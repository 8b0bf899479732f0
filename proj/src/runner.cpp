#include "badsad/runner.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <thread>

#include <json.hpp>

#include "badsad/checkpoint.hpp"
#include "badsad/sha256.hpp"

namespace fs = std::filesystem;

namespace badsad {

namespace {

std::string fmt_g17(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

// short form for grid labels (directory names, ratio columns)
std::string fmt_label(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.3g", v);
    return buf;
}

void write_text(const fs::path& path, const std::string& content) {
    fs::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write file: " + path.string());
    out << content;
    if (!out) throw IoError("write failure: " + path.string());
}

std::string read_text(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open file: " + path.string());
    return std::string((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
}

nlohmann::json tau_to_json(double tau) {
    if (std::isfinite(tau)) return tau;
    return tau > 0 ? "inf" : "-inf";
}

// ---------------------------------------------------------------------------
// dtype-dispatched core
// ---------------------------------------------------------------------------

template <typename T>
void pretrain_impl(const ExperimentConfig& cfg, const fs::path& out) {
    auto split = assemble_split(cfg);
    auto model = init_model<T>(cfg.arch(), cfg.pretrain.seed);
    std::vector<const Image*> data = image_ptrs<T>(split.unlabeled);
    for (const auto& im : split.labeled_normal) data.push_back(&im);

    auto history = pretrain_autoencoder(model, data, cfg.pretrain);

    save_checkpoint((out / "pretrain_checkpoint.bin").string(), model);
    std::string log = "epoch,recon_mse\n";
    for (std::size_t e = 0; e < history.size(); ++e) {
        log += std::to_string(e) + "," + fmt_g17(history[e]) + "\n";
    }
    write_text(out / "pretrain_log.csv", log);

    nlohmann::json manifest = nlohmann::json::parse(cfg.snapshot_json());
    manifest["command"] = "pretrain";
    manifest["artifacts"] = {{"checkpoint", "pretrain_checkpoint.bin"},
                             {"log", "pretrain_log.csv"}};
    manifest["checkpoint_sha256"] = sha256_file_hex((out / "pretrain_checkpoint.bin").string());
    write_text(out / "pretrain_manifest.json", manifest.dump(2));
}

template <typename T>
void train_impl(const ExperimentConfig& cfg, const fs::path& out, const fs::path& ckpt_path) {
    if (!fs::exists(ckpt_path)) {
        throw IoError("pretrained checkpoint not found: " + ckpt_path.string());
    }
    auto loaded = load_checkpoint<T>(ckpt_path.string());

    auto split = assemble_split(cfg);
    const bool needs_poison = cfg.mode == TrainMode::poison_only || cfg.mode == TrainMode::badsad;
    if (needs_poison) materialize_poison(cfg, split);

    auto run = train(cfg.make_train_config(), split, loaded.state);

    save_checkpoint((out / "checkpoint.bin").string(), run.state, &run.centers);
    write_text(out / "split_manifest.json", split_manifest_json(split));

    std::string log = "epoch,L,L_DA,L_DC,L_total,cos_np,cos_na\n";
    for (std::size_t e = 0; e < run.history.size(); ++e) {
        const auto& h = run.history[e];
        log += std::to_string(e) + "," + fmt_g17(h.deepsad) + "," + fmt_g17(h.alignment) + "," +
               fmt_g17(h.concentration) + "," + fmt_g17(h.total) + "," + fmt_g17(h.cos_np) +
               "," + fmt_g17(h.cos_na) + "\n";
    }
    write_text(out / "training_log.csv", log);

    nlohmann::json manifest = nlohmann::json::parse(cfg.snapshot_json());
    manifest["command"] = "train";
    manifest["mode"] = train_mode_name(cfg.mode);
    manifest["counters"] = {{"poisoned_images_encoded", run.poisoned_images_encoded},
                            {"triggered_abnormal_copies", run.triggered_abnormal_copies},
                            {"steps_per_epoch", run.steps_per_epoch},
                            {"poison_set_size", split.poisoned.size()}};
    manifest["artifacts"] = {{"checkpoint", "checkpoint.bin"},
                             {"training_log", "training_log.csv"},
                             {"split_manifest", "split_manifest.json"},
                             {"pretrain_checkpoint", ckpt_path.string()}};
    manifest["input_hashes"] = {
        {"pretrain_checkpoint", sha256_file_hex(ckpt_path.string())},
        {"config_snapshot", sha256_hex(cfg.snapshot_json())},
        {"split_manifest", sha256_hex(split_manifest_json(split))}};
    write_text(out / "manifest.json", manifest.dump(2));
}

struct LoadedRun {
    ExperimentConfig cfg;
    fs::path dir;
    DatasetSplit split;
};

LoadedRun load_run(const fs::path& run_dir) {
    LoadedRun r;
    r.dir = run_dir;
    r.cfg = load_run_config(run_dir.string());
    r.split = assemble_split(r.cfg);
    return r;
}

template <typename T>
struct EvalContext {
    ModelState<T> state;
    Centers<T> centers;
};

template <typename T>
EvalContext<T> load_eval_context(const LoadedRun& run) {
    const auto ckpt = run.dir / "checkpoint.bin";
    if (!fs::exists(ckpt)) {
        throw IoError("trained checkpoint not found: " + ckpt.string());
    }
    auto loaded = load_checkpoint<T>(ckpt.string());
    if (!loaded.centers.has_value()) {
        throw FormatError("checkpoint has no centers; was cmd_train run? " + ckpt.string());
    }
    return {std::move(loaded.state), std::move(*loaded.centers)};
}

template <typename T>
EvalOutcome eval_impl(const LoadedRun& run, const EvalContext<T>& ctx) {
    const auto val = score_test_sets(ctx.state, ctx.centers, run.split.val_normal,
                                     run.split.val_abnormal, "val");
    const double tau = select_threshold(val, run.cfg.eval.criterion);
    const auto test = score_test_sets(ctx.state, ctx.centers, run.split.test_normal,
                                      run.split.test_abnormal, "test");
    const double auc_value = auc(test);
    const auto trigger = run.cfg.make_trigger(trigger_kind_from_name(run.cfg.trigger_kind));
    const double asr_value = asr(ctx.state, ctx.centers, tau, run.split.asr_abnormal, trigger);
    return {auc_value, tau, asr_value};
}

template <typename T>
void write_eval_report(const LoadedRun& run, const EvalOutcome& outcome) {
    nlohmann::json report;
    report["dataset"] = run.cfg.dataset;
    report["normal_class"] = run.cfg.normal_class;
    report["mode"] = train_mode_name(run.cfg.mode);
    report["auc"] = outcome.auc;
    report["tau"] = tau_to_json(outcome.tau);
    report["asr"] = outcome.asr;
    report["threshold_criterion"] =
        run.cfg.eval.criterion == ThresholdCriterion::balanced_accuracy ? "balanced" : "f1";
    write_text(run.dir / "report.json", report.dump(2));

    std::string csv = "dataset,class,mode,auc,asr\n";
    csv += run.cfg.dataset + "," + std::to_string(run.cfg.normal_class) + "," +
           train_mode_name(run.cfg.mode) + "," + fmt_g17(outcome.auc) + "," +
           fmt_g17(outcome.asr) + "\n";
    write_text(run.dir / "report.csv", csv);
}

template <typename T>
void sweep_threshold_impl(const LoadedRun& run, const EvalContext<T>& ctx) {
    const auto val = score_test_sets(ctx.state, ctx.centers, run.split.val_normal,
                                     run.split.val_abnormal, "val");
    const double tau = select_threshold(val, run.cfg.eval.criterion);
    const auto trigger = run.cfg.make_trigger(trigger_kind_from_name(run.cfg.trigger_kind));
    auto rows = threshold_sweep(ctx.state, ctx.centers, tau, run.cfg.eval.ratios(),
                                run.split.test_normal, run.split.test_abnormal,
                                run.split.asr_abnormal, trigger);
    std::string csv = "ratio,auc,asr\n";
    nlohmann::json jrows = nlohmann::json::array();
    for (const auto& r : rows) {
        csv += fmt_label(r.ratio) + "," + fmt_g17(r.auc) + "," + fmt_g17(r.asr) + "\n";
        jrows.push_back({{"ratio", r.ratio}, {"auc", r.auc}, {"asr", r.asr}});
    }
    write_text(run.dir / "sweep_threshold.csv", csv);
    nlohmann::json jsweep;
    jsweep["tau"] = tau_to_json(tau);
    jsweep["rows"] = jrows;
    write_text(run.dir / "sweep_threshold.json", jsweep.dump(2));
}

template <typename T>
void robustness_impl(const LoadedRun& run, const EvalContext<T>& ctx) {
    if (trigger_kind_from_name(run.cfg.trigger_kind) != TriggerKind::corner4) {
        throw ConfigError("robustness table requires a run trained with the corner4 trigger");
    }
    const auto val = score_test_sets(ctx.state, ctx.centers, run.split.val_normal,
                                     run.split.val_abnormal, "val");
    const double tau = select_threshold(val, run.cfg.eval.criterion);
    auto table = robustness_eval(ctx.state, ctx.centers, tau, run.split.asr_abnormal,
                                 run.cfg.resolved_square_size());
    std::string csv = "trigger,asr\n";
    csv += "full," + fmt_g17(table.full) + "\n";
    csv += "sub," + fmt_g17(table.sub) + "\n";
    csv += "distinct," + fmt_g17(table.distinct) + "\n";
    write_text(run.dir / "robustness.csv", csv);
    nlohmann::json jrob = {{"full", table.full}, {"sub", table.sub},
                           {"distinct", table.distinct}, {"tau", tau_to_json(tau)}};
    write_text(run.dir / "robustness.json", jrob.dump(2));
}

template <typename T>
void project_impl(const LoadedRun& run, const EvalContext<T>& ctx, std::size_t n_per_group) {
    LoadedRun mutable_run = run;
    materialize_poison(mutable_run.cfg, mutable_run.split);
    const auto& split = mutable_run.split;
    const auto trigger = run.cfg.make_trigger(trigger_kind_from_name(run.cfg.trigger_kind));

    std::vector<Image> triggered;
    triggered.reserve(split.asr_abnormal.size());
    for (const auto& im : split.asr_abnormal) triggered.push_back(apply_trigger(im, trigger));

    struct Group {
        const char* label;
        const std::vector<Image>* images;
    };
    const Group groups[4] = {{"normal", &split.test_normal},
                             {"poisoned", &split.poisoned},
                             {"abnormal", &split.test_abnormal},
                             {"triggered_abnormal", &triggered}};

    std::vector<const Image*> sampled;
    std::vector<std::string> labels;
    for (std::size_t gi = 0; gi < 4; ++gi) {
        const auto& g = groups[gi];
        std::vector<std::size_t> idx(g.images->size());
        for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
        Rng rng(derive_seed(run.cfg.train_seed, 0xF0, gi));
        rng.shuffle(idx);
        const std::size_t take = std::min(n_per_group, idx.size());
        for (std::size_t i = 0; i < take; ++i) {
            sampled.push_back(&(*g.images)[idx[i]]);
            labels.emplace_back(g.label);
        }
    }
    if (sampled.size() < 3) throw UsageError("projection needs at least 3 samples");

    auto z = encode_images(ctx.state, sampled);
    Tensor<double> rows({z.shape[0], z.shape[1]});
    for (std::size_t i = 0; i < z.numel(); ++i) rows[i] = static_cast<double>(z[i]);
    auto proj = project_latent(rows, run.cfg.train_seed);

    std::string csv = "x,y,group\n";
    for (std::size_t i = 0; i < proj.coords.size(); ++i) {
        csv += fmt_g17(proj.coords[i][0]) + "," + fmt_g17(proj.coords[i][1]) + "," + labels[i] +
               "\n";
    }
    write_text(run.dir / "projection.csv", csv);

    if (run.cfg.eval.svg) {
        // fixed 4-color legend; coordinates normalized into a 640x640 viewport
        double lo_x = 1e300, hi_x = -1e300, lo_y = 1e300, hi_y = -1e300;
        for (const auto& c : proj.coords) {
            lo_x = std::min(lo_x, c[0]);
            hi_x = std::max(hi_x, c[0]);
            lo_y = std::min(lo_y, c[1]);
            hi_y = std::max(hi_y, c[1]);
        }
        const double sx = hi_x > lo_x ? 600.0 / (hi_x - lo_x) : 1.0;
        const double sy = hi_y > lo_y ? 600.0 / (hi_y - lo_y) : 1.0;
        std::string svg =
            "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"640\" height=\"680\">\n";
        const std::map<std::string, std::string> colors = {
            {"normal", "#1f77b4"},
            {"poisoned", "#2ca02c"},
            {"abnormal", "#d62728"},
            {"triggered_abnormal", "#ff7f0e"}};
        for (std::size_t i = 0; i < proj.coords.size(); ++i) {
            const double px = 20.0 + (proj.coords[i][0] - lo_x) * sx;
            const double py = 20.0 + (proj.coords[i][1] - lo_y) * sy;
            svg += "<circle cx=\"" + fmt_g17(px) + "\" cy=\"" + fmt_g17(py) +
                   "\" r=\"3\" fill=\"" + colors.at(labels[i]) + "\"/>\n";
        }
        int lx = 20;
        for (const auto& [name, color] : colors) {
            svg += "<rect x=\"" + std::to_string(lx) +
                   "\" y=\"640\" width=\"12\" height=\"12\" fill=\"" + color + "\"/>\n";
            svg += "<text x=\"" + std::to_string(lx + 16) +
                   "\" y=\"651\" font-size=\"12\">" + name + "</text>\n";
            lx += 150;
        }
        svg += "</svg>\n";
        write_text(run.dir / "projection.svg", svg);
    }
}

// type-erased dispatch on the config dtype
template <typename Fn32, typename Fn64>
void with_dtype(const std::string& dtype, Fn32&& f32, Fn64&& f64) {
    if (dtype == "f64") {
        f64();
    } else {
        f32();
    }
}

}  // namespace

void cmd_pretrain(const ExperimentConfig& cfg, const std::string& out_dir) {
    const fs::path out(out_dir);
    fs::create_directories(out);
    with_dtype(cfg.dtype, [&] { pretrain_impl<float>(cfg, out); },
               [&] { pretrain_impl<double>(cfg, out); });
}

void cmd_train(const ExperimentConfig& cfg, const std::string& out_dir,
               std::string pretrain_ckpt) {
    const fs::path out(out_dir);
    fs::create_directories(out);
    const fs::path ckpt =
        pretrain_ckpt.empty() ? out / "pretrain_checkpoint.bin" : fs::path(pretrain_ckpt);
    with_dtype(cfg.dtype, [&] { train_impl<float>(cfg, out, ckpt); },
               [&] { train_impl<double>(cfg, out, ckpt); });
}

ExperimentConfig load_run_config(const std::string& run_dir) {
    const fs::path manifest_path = fs::path(run_dir) / "manifest.json";
    if (!fs::exists(manifest_path)) {
        throw IoError("run manifest not found: " + manifest_path.string());
    }
    nlohmann::json manifest;
    try {
        manifest = nlohmann::json::parse(read_text(manifest_path));
    } catch (const nlohmann::json::exception& e) {
        throw FormatError("cannot parse run manifest: " + std::string(e.what()));
    }
    std::map<std::string, std::string> values;
    for (auto it = manifest["config"].begin(); it != manifest["config"].end(); ++it) {
        values[it.key()] = it->get<std::string>();
    }
    return resolve_config(values);
}

EvalOutcome evaluate_run_dir(const std::string& run_dir) {
    auto run = load_run(run_dir);
    EvalOutcome outcome;
    with_dtype(run.cfg.dtype,
               [&] { outcome = eval_impl(run, load_eval_context<float>(run)); },
               [&] { outcome = eval_impl(run, load_eval_context<double>(run)); });
    return outcome;
}

void cmd_eval(const std::string& run_dir) {
    auto run = load_run(run_dir);
    with_dtype(run.cfg.dtype,
               [&] {
                   auto ctx = load_eval_context<float>(run);
                   write_eval_report<float>(run, eval_impl(run, ctx));
               },
               [&] {
                   auto ctx = load_eval_context<double>(run);
                   write_eval_report<double>(run, eval_impl(run, ctx));
               });
}

namespace {

// one retrained grid point of an alpha/beta sweep
void run_sweep_point(const ExperimentConfig& base, const fs::path& run_dir,
                     const std::string& what, double value, const fs::path& pretrain_ckpt,
                     double* out_auc, double* out_asr) {
    ExperimentConfig cfg = base;
    if (what == "alpha") {
        cfg.weights.alpha = value;
    } else {
        cfg.weights.beta = value;
    }
    cfg.resolved["train." + what] = fmt_label(value);
    cfg.provenance["train." + what] = "cli";

    const fs::path point_dir = run_dir / ("sweep_" + what) /
                               (what + "_" + fmt_label(value));
    cmd_train(cfg, point_dir.string(), pretrain_ckpt.string());
    auto outcome = evaluate_run_dir(point_dir.string());
    *out_auc = outcome.auc;
    *out_asr = outcome.asr;
}

}  // namespace

void cmd_sweep(const std::string& run_dir, const std::string& what, int jobs) {
    auto run = load_run(run_dir);
    if (what == "threshold") {
        with_dtype(run.cfg.dtype,
                   [&] { sweep_threshold_impl(run, load_eval_context<float>(run)); },
                   [&] { sweep_threshold_impl(run, load_eval_context<double>(run)); });
        return;
    }
    if (what != "alpha" && what != "beta") {
        throw ConfigError("sweep target must be threshold, alpha or beta");
    }
    if (run.cfg.mode != TrainMode::badsad) {
        throw ConfigError("alpha/beta sweeps require a badsad-mode run");
    }
    nlohmann::json manifest =
        nlohmann::json::parse(read_text(fs::path(run_dir) / "manifest.json"));
    const fs::path pretrain_ckpt =
        manifest["artifacts"]["pretrain_checkpoint"].get<std::string>();

    std::vector<double> grid;
    for (int i = 0; i <= 10; ++i) grid.push_back(i / 10.0);
    std::vector<double> aucs(grid.size()), asrs(grid.size());

    const int workers = std::max(1, jobs);
    std::size_t next = 0;
    while (next < grid.size()) {
        std::vector<std::thread> pool;
        const std::size_t batch_end = std::min(grid.size(), next + static_cast<std::size_t>(workers));
        for (std::size_t i = next; i < batch_end; ++i) {
            pool.emplace_back(run_sweep_point, run.cfg, fs::path(run_dir), what, grid[i],
                              pretrain_ckpt, &aucs[i], &asrs[i]);
        }
        for (auto& t : pool) t.join();
        next = batch_end;
    }

    std::string csv = what + ",auc,asr\n";
    for (std::size_t i = 0; i < grid.size(); ++i) {
        csv += fmt_label(grid[i]) + "," + fmt_g17(aucs[i]) + "," + fmt_g17(asrs[i]) + "\n";
    }
    write_text(fs::path(run_dir) / ("sweep_" + what + ".csv"), csv);
}

void cmd_robustness(const std::string& run_dir) {
    auto run = load_run(run_dir);
    with_dtype(run.cfg.dtype,
               [&] { robustness_impl(run, load_eval_context<float>(run)); },
               [&] { robustness_impl(run, load_eval_context<double>(run)); });
}

void cmd_project(const std::string& run_dir, std::size_t n_per_group) {
    auto run = load_run(run_dir);
    const std::size_t n = n_per_group == 0 ? run.cfg.eval.project_per_group : n_per_group;
    with_dtype(run.cfg.dtype,
               [&] { project_impl(run, load_eval_context<float>(run), n); },
               [&] { project_impl(run, load_eval_context<double>(run), n); });
}

namespace {

struct TableRow {
    int cls = 0;
    std::string mode;
    double auc = 0.0;
    double asr = 0.0;
};

void run_table1_class(const ExperimentConfig& base, const fs::path& out, int cls,
                      std::vector<TableRow>* rows, std::size_t row_base) {
    ExperimentConfig cfg = base;
    cfg.normal_class = cls;
    cfg.resolved["normal_class"] = std::to_string(cls);

    const fs::path class_dir = out / ("class_" + std::to_string(cls));
    cmd_pretrain(cfg, class_dir.string());

    const char* modes[3] = {"clean", "poison_only", "badsad"};
    for (std::size_t mi = 0; mi < 3; ++mi) {
        ExperimentConfig mode_cfg = cfg;
        mode_cfg.mode = train_mode_from_name(modes[mi]);
        mode_cfg.resolved["train.mode"] = modes[mi];
        const fs::path run_dir = class_dir / modes[mi];
        cmd_train(mode_cfg, run_dir.string(),
                  (class_dir / "pretrain_checkpoint.bin").string());
        cmd_eval(run_dir.string());
        auto outcome = evaluate_run_dir(run_dir.string());
        (*rows)[row_base + mi] = {cls, modes[mi], outcome.auc, outcome.asr};
    }
}

}  // namespace

void cmd_reproduce_table1(const ExperimentConfig& cfg, const std::string& out_dir, int jobs) {
    const fs::path out(out_dir);
    fs::create_directories(out);
    std::vector<int> classes;
    if (cfg.dataset == "synth") {
        classes = {0};
    } else {
        for (int c = 0; c < 10; ++c) classes.push_back(c);
    }

    std::vector<TableRow> rows(classes.size() * 3);
    const int workers = std::max(1, jobs);
    std::size_t next = 0;
    while (next < classes.size()) {
        std::vector<std::thread> pool;
        const std::size_t batch_end =
            std::min(classes.size(), next + static_cast<std::size_t>(workers));
        for (std::size_t i = next; i < batch_end; ++i) {
            pool.emplace_back(run_table1_class, cfg, out, classes[i], &rows, i * 3);
        }
        for (auto& t : pool) t.join();
        next = batch_end;
    }

    std::string csv = "dataset,class,mode,auc,asr\n";
    const char* modes[3] = {"clean", "poison_only", "badsad"};
    for (const auto& r : rows) {
        csv += cfg.dataset + "," + std::to_string(r.cls) + "," + r.mode + "," + fmt_g17(r.auc) +
               "," + fmt_g17(r.asr) + "\n";
    }
    for (std::size_t mi = 0; mi < 3; ++mi) {
        double auc_sum = 0.0, asr_sum = 0.0;
        std::size_t count = 0;
        for (const auto& r : rows) {
            if (r.mode == modes[mi]) {
                auc_sum += r.auc;
                asr_sum += r.asr;
                ++count;
            }
        }
        csv += cfg.dataset + ",mean," + std::string(modes[mi]) + "," +
               fmt_g17(auc_sum / static_cast<double>(count)) + "," +
               fmt_g17(asr_sum / static_cast<double>(count)) + "\n";
    }
    write_text(out / "table1.csv", csv);
}

}  // namespace badsad
