// Acceptance suite: every criterion below runs end to end and prints one
// PASS/FAIL line. The binary exits nonzero if any criterion fails.

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

#include "badsad/runner.hpp"
#include "badsad/sha256.hpp"
#include "test_util.hpp"

using namespace badsad;
namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

namespace {

struct Criterion {
    std::string name;
    bool pass = false;
    std::string detail;
};

double seconds_since(Clock::time_point t0) {
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

fs::path scratch_root() {
    auto d = fs::temp_directory_path() / "badsad_acceptance";
    fs::create_directories(d);
    return d;
}

std::string data_root() {
    const char* env = std::getenv("BADSAD_DATA_ROOT");
    return env ? env : "/root/data";
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    return std::string((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
}

std::string fmt(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.4g", v);
    return buf;
}

// ---------------------------------------------------------------------------
// criterion 1: gradient soundness
// ---------------------------------------------------------------------------

Criterion criterion_gradients() {
    Criterion c;
    c.name = "gradient soundness (operators + combined objective, fd rel < 1e-5)";
    const auto t0 = Clock::now();
    Rng rng(4242);
    double worst = 0.0;
    bool ok = true;
    auto track = [&](const testutil::GradCheckResult& r) {
        worst = std::max(worst, r.worst_rel);
        ok = ok && r.ok;
    };

    for (int rep = 0; rep < 20 && ok; ++rep) {
        // conv -> pool -> dense -> cosine/distance composite
        auto x = make_constant<double>(testutil::random_tensor({2, 1, 4, 4}, rng));
        auto k = make_param<double>("k", testutil::random_tensor({2, 1, 3, 3}, rng));
        auto w = make_param<double>("w", testutil::random_tensor({8, 3}, rng));
        auto target = make_constant<double>(testutil::random_tensor({3}, rng));
        track(testutil::check_gradients({k, w}, [&]() {
            auto conv = conv2d(x, k, 1, 1);
            auto act = leaky_relu(conv, 0.1);
            auto pooled = maxpool2d(act, 2, 2);
            auto z = dense(reshape(pooled, {2, 8}), w);
            auto zbar = mean_rows(z);
            return add(cosine_similarity(zbar, target, 1e-8),
                       scale(squared_l2_distance(zbar, target), 0.3));
        }));

        // elementwise and reduction operators
        auto a = make_param<double>("a", testutil::random_tensor({5}, rng, 0.3, 2.0));
        auto b = make_param<double>("b", testutil::random_tensor({5}, rng, -2.0, 2.0));
        track(testutil::check_gradients({a, b}, [&]() {
            auto u = add(mul(a, b), scale(sub(a, b), 0.5));
            auto v = leaky_relu(u, 0.1);
            return add(sum(inv_guarded(a, 1e-6)), sum(v));
        }));
    }

    // combined objective through a 2-layer toy encoder
    const auto arch = arch_dense(3, 6, 4);
    auto st = init_model<double>(arch, 7);
    Centers<double> centers;
    centers.c = testutil::random_tensor({4}, rng);
    centers.c_p = testutil::random_tensor({4}, rng);
    centers.c_a = testutil::random_tensor({4}, rng);
    auto cn = center_nodes(centers);
    LossWeights lw;
    lw.alpha = 0.8;
    lw.beta = 0.6;
    for (int rep = 0; rep < 20 && ok; ++rep) {
        auto xu = testutil::random_tensor({4, 1, 1, 3}, rng, 0.0, 1.0);
        auto xln = testutil::random_tensor({3, 1, 1, 3}, rng, 0.0, 1.0);
        auto xla = testutil::random_tensor({3, 1, 1, 3}, rng, 0.0, 1.0);
        auto xp = testutil::random_tensor({2, 1, 1, 3}, rng, 0.0, 1.0);
        track(testutil::check_gradients(st.encoder, [&]() {
            BatchEmbeddings<double> emb;
            emb.z_u = encode(st, make_constant<double>(xu));
            emb.z_ln = encode(st, make_constant<double>(xln));
            emb.z_la = encode(st, make_constant<double>(xla));
            emb.z_p = encode(st, make_constant<double>(xp));
            return total_loss(emb, cn, lw, PoisonRouting::labeled_normal).node;
        }));
    }

    const double secs = seconds_since(t0);
    c.pass = ok && secs < 60.0;
    c.detail = "worst rel err " + fmt(worst) + ", " + fmt(secs) + " s";
    return c;
}

// ---------------------------------------------------------------------------
// criterion 2: oracle equivalences
// ---------------------------------------------------------------------------

Criterion criterion_oracles() {
    Criterion c;
    c.name = "oracle equivalences (auc pairwise, conv/dense loops, threshold scan)";
    const auto t0 = Clock::now();
    Rng rng(777);
    bool ok = true;
    std::string why;

    // AUC vs the O(n^2) pairwise oracle, exact, 100 sets
    for (int rep = 0; rep < 100 && ok; ++rep) {
        ScoreSet s;
        const std::size_t nn = 1 + rng.next_below(200);
        const std::size_t na = 1 + rng.next_below(200);
        for (std::size_t i = 0; i < nn; ++i)
            s.normal.push_back(static_cast<double>(rng.next_below(60)) / 8.0);
        for (std::size_t i = 0; i < na; ++i)
            s.abnormal.push_back(static_cast<double>(rng.next_below(60)) / 8.0 + 1.5);
        double pairwise = 0.0;
        for (double a : s.abnormal)
            for (double n : s.normal) pairwise += (a > n) ? 1.0 : (a == n ? 0.5 : 0.0);
        pairwise /= static_cast<double>(na) * static_cast<double>(nn);
        if (auc(s) != pairwise) {
            ok = false;
            why = "auc mismatch";
        }
    }

    // conv2d and dense against naive loops in double precision
    for (int rep = 0; rep < 20 && ok; ++rep) {
        auto xt = testutil::random_tensor({2, 2, 6, 6}, rng);
        auto wt = testutil::random_tensor({3, 2, 3, 3}, rng);
        auto y = conv2d(make_constant<double>(xt), make_constant<double>(wt), 1, 1);
        auto ref = testutil::conv2d_oracle(xt, wt, 1, 1);
        for (std::size_t i = 0; i < ref.numel(); ++i) {
            if (std::abs(y->value[i] - ref[i]) > 1e-12) {
                ok = false;
                why = "conv2d deviates from the direct-summation oracle";
            }
        }
        auto mx = testutil::random_tensor({4, 8}, rng);
        auto mw = testutil::random_tensor({8, 3}, rng);
        auto my = dense(make_constant<double>(mx), make_constant<double>(mw));
        for (std::size_t i = 0; i < 4 && ok; ++i)
            for (std::size_t j = 0; j < 3; ++j) {
                double acc = 0.0;
                for (std::size_t kk = 0; kk < 8; ++kk) acc += mx.at2(i, kk) * mw.at2(kk, j);
                if (std::abs(my->value.at2(i, j) - acc) > 1e-12) {
                    ok = false;
                    why = "dense deviates from the triple-loop oracle";
                }
            }
    }

    // threshold selection vs exhaustive candidate scan
    for (int rep = 0; rep < 50 && ok; ++rep) {
        ScoreSet s;
        for (int i = 0; i < 50; ++i) s.normal.push_back(rng.normal());
        for (int i = 0; i < 40; ++i) s.abnormal.push_back(rng.normal() + 1.2);
        std::vector<double> pooled = s.normal;
        pooled.insert(pooled.end(), s.abnormal.begin(), s.abnormal.end());
        std::sort(pooled.begin(), pooled.end());
        pooled.erase(std::unique(pooled.begin(), pooled.end()), pooled.end());
        std::vector<double> cands{-std::numeric_limits<double>::infinity()};
        for (std::size_t i = 0; i + 1 < pooled.size(); ++i)
            cands.push_back(0.5 * (pooled[i] + pooled[i + 1]));
        cands.push_back(std::numeric_limits<double>::infinity());
        double best_tau = cands.front(), best = -1.0;
        for (double tau : cands) {
            std::size_t tn = 0, tp = 0;
            for (double v : s.normal) tn += (v <= tau);
            for (double v : s.abnormal) tp += (v > tau);
            const double ba = 0.5 * (double(tn) / s.normal.size() + double(tp) / s.abnormal.size());
            if (ba > best) {
                best = ba;
                best_tau = tau;
            }
        }
        if (select_threshold(s) != best_tau) {
            ok = false;
            why = "threshold selection deviates from the exhaustive scan";
        }
    }

    const double secs = seconds_since(t0);
    c.pass = ok && secs < 60.0;
    c.detail = ok ? fmt(secs) + " s" : why;
    return c;
}

// ---------------------------------------------------------------------------
// criterion 3: loss-formula unit suite
// ---------------------------------------------------------------------------

Criterion criterion_loss_formulas() {
    Criterion c;
    c.name = "objective formula substitutions (0.5, 2.5; 0/4/1; 25; linearity)";
    bool ok = true;
    std::string why;
    auto expect = [&](double got, double want, const char* what) {
        const double rel = std::abs(got - want) / std::max(1.0, std::abs(want));
        if (rel > 1e-9) {
            ok = false;
            why = std::string(what) + ": got " + fmt(got) + " want " + fmt(want);
        }
    };

    auto vec2 = [](double a, double b) {
        return make_constant<double>(Tensor<double>({2}, {a, b}));
    };
    auto row2 = [](double a, double b) {
        return make_constant<double>(Tensor<double>({1, 2}, {a, b}));
    };

    LossWeights w;
    // abnormal-only substitution with the guard disabled: (1/1)*(2)^-1
    BatchEmbeddings<double> only_abn;
    only_abn.z_la = row2(1.0, 1.0);
    LossWeights w0 = w;
    w0.eps_inv = 0.0;
    expect(scalar_value(deepsad_loss(only_abn, vec2(0, 0), w0, PoisonRouting::none)), 0.5,
           "reciprocal substitution");

    // unlabeled at 4 plus labeled normal at 1: (1/2)*4 + (1/2)*1
    BatchEmbeddings<double> pair;
    pair.z_u = row2(2.0, 0.0);
    pair.z_ln = row2(1.0, 0.0);
    expect(scalar_value(deepsad_loss(pair, vec2(0, 0), w, PoisonRouting::none)), 2.5,
           "semi-supervised substitution");

    // margin hinge values 0, 4, 1
    expect(scalar_value(alignment_loss(row2(1, 0), row2(2, 0), row2(-1, 0), 2.0)), 0.0,
           "hinge at the floor");
    expect(scalar_value(alignment_loss(row2(1, 0), row2(-0.5, 0), row2(3, 0), 2.0)), 4.0,
           "hinge fully open");
    expect(scalar_value(alignment_loss(row2(1, 0), row2(1, 0), row2(0, 1), 2.0)), 1.0,
           "hinge with orthogonal groups");

    // concentration 9 + 16 = 25
    expect(scalar_value(concentration_loss(row2(3, 0), vec2(0, 0), row2(1, 5), vec2(1, 1))),
           25.0, "concentration substitution");

    // combined objective reduces exactly at alpha=beta=0
    Rng rng(5150);
    BatchEmbeddings<double> emb;
    emb.z_u = make_constant<double>(testutil::random_tensor({5, 3}, rng));
    emb.z_ln = make_constant<double>(testutil::random_tensor({4, 3}, rng));
    emb.z_la = make_constant<double>(testutil::random_tensor({3, 3}, rng));
    emb.z_p = make_constant<double>(testutil::random_tensor({2, 3}, rng));
    CenterNodes<double> cn{make_constant<double>(testutil::random_tensor({3}, rng)),
                           make_constant<double>(testutil::random_tensor({3}, rng)),
                           make_constant<double>(testutil::random_tensor({3}, rng))};
    LossWeights wz;
    wz.alpha = 0.0;
    wz.beta = 0.0;
    auto tl = total_loss(emb, cn, wz, PoisonRouting::labeled_normal);
    const double bare =
        scalar_value(deepsad_loss(emb, cn.c, wz, PoisonRouting::labeled_normal));
    if (tl.total != bare) {
        ok = false;
        why = "alpha=beta=0 reduction is not exact";
    }

    // linearity: 2.5 + 1*4 + 0 = 6.5
    expect(scalar_value(deepsad_loss(pair, vec2(0, 0), w, PoisonRouting::none)) +
               1.0 * scalar_value(alignment_loss(row2(1, 0), row2(-0.5, 0), row2(3, 0), 2.0)),
           6.5, "linear composition");

    c.pass = ok;
    c.detail = ok ? "all substitutions exact" : why;
    return c;
}

// ---------------------------------------------------------------------------
// criterion 4: trigger algebra
// ---------------------------------------------------------------------------

Criterion criterion_trigger_algebra() {
    Criterion c;
    c.name = "trigger algebra (popcounts, subset/disjoint, idempotence, clean-label)";
    bool ok = true;
    std::string why;

    for (auto [ch, h, w, s] : {std::tuple{1, 28, 28, 3}, std::tuple{3, 32, 32, 4}}) {
        auto full = build_mask(TriggerKind::corner4, s, ch, h, w);
        auto sub = build_mask(TriggerKind::sub_lower_right, s, ch, h, w);
        auto distinct = build_mask(TriggerKind::distinct_center, s, ch, h, w);
        if (mask_popcount(full) != static_cast<std::size_t>(4 * ch * s * s) ||
            mask_popcount(sub) != static_cast<std::size_t>(ch * s * s) ||
            mask_popcount(distinct) != static_cast<std::size_t>(ch * s * s)) {
            ok = false;
            why = "mask popcount";
        }
        for (std::size_t i = 0; i < full.mask.pix.size(); ++i) {
            if (sub.mask.pix[i] > full.mask.pix[i]) {
                ok = false;
                why = "sub not a subset";
            }
            if (distinct.mask.pix[i] * full.mask.pix[i] != 0.0f) {
                ok = false;
                why = "distinct overlaps corner4";
            }
        }
        // idempotence and locality on a random image
        Rng rng(9001);
        Image img(ch, h, w);
        for (auto& v : img.pix) v = static_cast<float>(rng.next_unit());
        auto once = apply_trigger(img, full);
        auto twice = apply_trigger(once, full);
        if (once.pix != twice.pix) {
            ok = false;
            why = "apply_trigger not idempotent";
        }
        std::size_t changed = 0;
        for (std::size_t i = 0; i < img.pix.size(); ++i) changed += once.pix[i] != img.pix[i];
        if (changed > mask_popcount(full)) {
            ok = false;
            why = "locality violated";
        }
    }

    // clean-label audit: a clean-mode run never touches poisoned images and
    // poison modes never trigger a labeled-abnormal sample
    SyntheticSpec spec;
    spec.n_per_group = 48;
    auto split = synth_blobs(spec);
    PoisonSpec ps;
    ps.mask = build_mask(TriggerKind::corner4, 1, 1, 1, 2);
    ps.count = 48;
    split.poisoned = poison_set(split.labeled_normal, ps);

    auto pretrained = init_model<float>(arch_dense(2, 8, 4), 3);
    TrainConfig tc;
    tc.mode = TrainMode::clean;
    tc.epochs = 2;
    tc.batch = BatchSizes{16, 8, 8, 8};
    auto clean_run = train(tc, split, pretrained);
    if (clean_run.poisoned_images_encoded != 0) {
        ok = false;
        why = "clean mode encoded poisoned images";
    }
    tc.mode = TrainMode::badsad;
    auto bad_run = train(tc, split, pretrained);
    if (bad_run.triggered_abnormal_copies != 0) {
        ok = false;
        why = "clean-label mode triggered abnormal images";
    }

    c.pass = ok;
    c.detail = ok ? "both image shapes + audit counters" : why;
    return c;
}

// ---------------------------------------------------------------------------
// criterion 5: synthetic end-to-end
// ---------------------------------------------------------------------------

std::map<std::string, std::string> synth_attack_keys(std::uint64_t seed) {
    return {{"dataset", "synth"},
            {"synth.n_per_group", "500"},
            {"synth.seed", std::to_string(seed)},
            {"split.seed", std::to_string(seed)},
            {"trigger.seed", std::to_string(seed)},
            {"pretrain.seed", std::to_string(seed)},
            {"train.seed", std::to_string(seed)},
            {"pretrain.epochs", "20"},
            {"train.epochs", "50"},
            {"train.eta", "0.02"},
            {"train.alpha", "3"},
            {"train.beta", "1"}};
}

Criterion criterion_synthetic() {
    Criterion c;
    c.name = "synthetic end-to-end (badsad vs poison_only across 10 seeds)";
    const auto root = scratch_root() / "synth_e2e";
    fs::remove_all(root);
    int good_seeds = 0;
    double max_run_secs = 0.0;
    std::string detail;

    for (std::uint64_t seed = 1; seed <= 10; ++seed) {
        const auto t0 = Clock::now();
        auto keys = synth_attack_keys(seed);
        auto cfg_b = resolve_config(keys, {{"train.mode", "badsad"}});
        const auto dir_b = root / ("seed" + std::to_string(seed) + "_badsad");
        cmd_pretrain(cfg_b, dir_b.string());
        cmd_train(cfg_b, dir_b.string());
        auto ob = evaluate_run_dir(dir_b.string());
        const double secs_b = seconds_since(t0);

        const auto t1 = Clock::now();
        auto cfg_p = resolve_config(keys, {{"train.mode", "poison_only"}});
        const auto dir_p = root / ("seed" + std::to_string(seed) + "_poison");
        cmd_train(cfg_p, dir_p.string(), (dir_b / "pretrain_checkpoint.bin").string());
        auto op = evaluate_run_dir(dir_p.string());
        const double secs_p = seconds_since(t1);

        max_run_secs = std::max({max_run_secs, secs_b, secs_p});
        const bool seed_ok =
            ob.auc >= 0.95 && ob.asr >= 0.95 && op.asr <= 0.30 && secs_b <= 60.0 && secs_p <= 60.0;
        good_seeds += seed_ok;
        detail += (seed_ok ? "" : "[seed " + std::to_string(seed) + ": auc " + fmt(ob.auc) +
                                      " asr " + fmt(ob.asr) + " po " + fmt(op.asr) + "]");
    }
    c.pass = good_seeds >= 8;
    c.detail = std::to_string(good_seeds) + "/10 seeds, max run " + fmt(max_run_secs) + " s" +
               (detail.empty() ? "" : " " + detail);
    return c;
}

// ---------------------------------------------------------------------------
// criterion 6: MNIST desk-scale reproduction (shared desk runs)
// ---------------------------------------------------------------------------

struct DeskRuns {
    bool available = false;
    double total_secs = 0.0;
    EvalOutcome clean, poison, badsad;
    fs::path badsad_dir;
    std::string error;
};

std::map<std::string, std::string> desk_keys() {
    return {{"dataset", "mnist"},
            {"normal_class", "0"},
            {"split.unlabeled", "1000"},
            {"split.labeled_normal", "200"},
            {"split.labeled_abnormal", "200"},
            {"trigger.count", "200"},
            {"pretrain.epochs", "5"},
            {"train.epochs", "20"},
            {"train.eta", "0.2"},
            {"train.alpha", "20"},
            {"train.bs_unlabeled", "32"},
            {"train.bs_poisoned", "32"}};
}

DeskRuns run_desk_scale() {
    DeskRuns d;
    const auto mnist = fs::path(data_root()) / "mnist" / "train-images-idx3-ubyte";
    if (!fs::exists(mnist)) {
        d.error = "MNIST IDX files not found under " + data_root() + "/mnist";
        return d;
    }
    const auto t0 = Clock::now();
    const auto root = scratch_root() / "desk";
    fs::remove_all(root);
    try {
        auto base = desk_keys();
        auto cfg = resolve_config(base);
        cmd_pretrain(cfg, root.string());
        const std::string pre = (root / "pretrain_checkpoint.bin").string();

        const char* modes[3] = {"clean", "poison_only", "badsad"};
        EvalOutcome* outs[3] = {&d.clean, &d.poison, &d.badsad};
        for (int i = 0; i < 3; ++i) {
            auto mode_cfg = resolve_config(base, {{"train.mode", modes[i]}});
            const auto dir = root / modes[i];
            cmd_train(mode_cfg, dir.string(), pre);
            cmd_eval(dir.string());
            *outs[i] = evaluate_run_dir(dir.string());
        }
        d.badsad_dir = root / "badsad";
        d.available = true;
    } catch (const Error& e) {
        d.error = e.what();
    }
    d.total_secs = seconds_since(t0);
    return d;
}

Criterion criterion_desk_scale(const DeskRuns& d) {
    Criterion c;
    c.name = "desk-scale reproduction on the digit dataset (class 0)";
    if (!d.available) {
        c.pass = false;
        c.detail = d.error;
        return c;
    }
    const bool clean_ok = d.clean.auc >= 0.93;
    const bool badsad_ok = d.badsad.auc >= 0.90 && d.badsad.asr >= 0.85;
    const bool poison_ok = d.poison.asr <= 0.35;
    const bool time_ok = d.total_secs <= 900.0;
    c.pass = clean_ok && badsad_ok && poison_ok && time_ok;
    c.detail = "clean auc " + fmt(d.clean.auc) + ", badsad auc " + fmt(d.badsad.auc) + " asr " +
               fmt(d.badsad.asr) + ", poison_only asr " + fmt(d.poison.asr) + ", " +
               fmt(d.total_secs) + " s";
    return c;
}

// ---------------------------------------------------------------------------
// criterion 7: threshold-sweep property
// ---------------------------------------------------------------------------

Criterion criterion_sweep_property(const DeskRuns& d) {
    Criterion c;
    c.name = "threshold sweep: ASR non-decreasing, AUC constant across ratios";
    std::vector<fs::path> runs;
    if (d.available) runs.push_back(d.badsad_dir);
    runs.push_back(scratch_root() / "synth_e2e" / "seed1_badsad");

    bool ok = true;
    std::string why;
    for (const auto& run : runs) {
        try {
            cmd_sweep(run.string(), "threshold");
        } catch (const Error& e) {
            ok = false;
            why = e.what();
            continue;
        }
        std::stringstream csv(slurp(run / "sweep_threshold.csv"));
        std::string line;
        std::getline(csv, line);
        double prev_asr = -1.0, first_auc = -1.0;
        int rows = 0;
        while (std::getline(csv, line)) {
            std::stringstream ss(line);
            std::string ratio, aucs, asrs;
            std::getline(ss, ratio, ',');
            std::getline(ss, aucs, ',');
            std::getline(ss, asrs, ',');
            if (first_auc < 0) first_auc = std::stod(aucs);
            if (std::stod(aucs) != first_auc) {
                ok = false;
                why = "AUC varies across rows";
            }
            if (std::stod(asrs) < prev_asr) {
                ok = false;
                why = "ASR column decreased";
            }
            prev_asr = std::stod(asrs);
            ++rows;
        }
        if (rows != 21) {
            ok = false;
            why = "expected 21 rows, got " + std::to_string(rows);
        }
    }
    c.pass = ok;
    c.detail = ok ? std::to_string(runs.size()) + " runs checked" : why;
    return c;
}

// ---------------------------------------------------------------------------
// criterion 8: determinism
// ---------------------------------------------------------------------------

Criterion criterion_determinism() {
    Criterion c;
    c.name = "determinism: identical config/seed gives byte-identical artifacts";
    const auto root = scratch_root() / "determinism";
    fs::remove_all(root);
    auto keys = synth_attack_keys(3);
    keys["synth.n_per_group"] = "96";
    keys["pretrain.epochs"] = "4";
    keys["train.epochs"] = "6";
    auto cfg = resolve_config(keys);

    bool ok = true;
    std::string why;
    std::vector<std::string> hashes;
    for (const char* side : {"a", "b"}) {
        const auto dir = root / side;
        cmd_pretrain(cfg, dir.string());
        cmd_train(cfg, dir.string());
        cmd_eval(dir.string());
        cmd_sweep(dir.string(), "threshold");
        hashes.push_back(sha256_file_hex((dir / "pretrain_checkpoint.bin").string()));
        hashes.push_back(sha256_file_hex((dir / "checkpoint.bin").string()));
        hashes.push_back(sha256_file_hex((dir / "report.json").string()));
        hashes.push_back(sha256_file_hex((dir / "report.csv").string()));
        hashes.push_back(sha256_file_hex((dir / "sweep_threshold.csv").string()));
        hashes.push_back(sha256_file_hex((dir / "training_log.csv").string()));
    }
    const std::size_t half = hashes.size() / 2;
    for (std::size_t i = 0; i < half; ++i) {
        if (hashes[i] != hashes[half + i]) {
            ok = false;
            why = "artifact " + std::to_string(i) + " differs between reruns";
        }
    }
    c.pass = ok;
    c.detail = ok ? std::to_string(half) + " artifacts byte-identical" : why;
    return c;
}

// ---------------------------------------------------------------------------
// criterion 9: robustness table structure
// ---------------------------------------------------------------------------

Criterion criterion_robustness(const DeskRuns& d) {
    Criterion c;
    c.name = "robustness table: full/sub/distinct rows, full == eval ASR, distinct <= full";
    if (!d.available) {
        c.pass = false;
        c.detail = "desk-scale runs unavailable: " + d.error;
        return c;
    }
    try {
        cmd_robustness(d.badsad_dir.string());
    } catch (const Error& e) {
        c.pass = false;
        c.detail = e.what();
        return c;
    }
    std::stringstream csv(slurp(d.badsad_dir / "robustness.csv"));
    std::string line;
    std::getline(csv, line);
    std::map<std::string, double> rows;
    while (std::getline(csv, line)) {
        const auto comma = line.find(',');
        rows[line.substr(0, comma)] = std::stod(line.substr(comma + 1));
    }
    const bool structure = rows.size() == 3 && rows.count("full") && rows.count("sub") &&
                           rows.count("distinct");
    const bool consistent = structure && rows["full"] == d.badsad.asr;
    const bool pattern = structure && rows["distinct"] <= rows["full"];
    c.pass = structure && consistent && pattern;
    c.detail = structure ? "full " + fmt(rows["full"]) + ", sub " + fmt(rows["sub"]) +
                               ", distinct " + fmt(rows["distinct"])
                         : "missing rows";
    return c;
}

}  // namespace

int main() {
    std::vector<Criterion> results;
    results.push_back(criterion_gradients());
    results.push_back(criterion_oracles());
    results.push_back(criterion_loss_formulas());
    results.push_back(criterion_trigger_algebra());
    results.push_back(criterion_synthetic());
    const DeskRuns desk = run_desk_scale();
    results.push_back(criterion_desk_scale(desk));
    results.push_back(criterion_sweep_property(desk));
    results.push_back(criterion_determinism());
    results.push_back(criterion_robustness(desk));

    int failures = 0;
    for (std::size_t i = 0; i < results.size(); ++i) {
        const auto& r = results[i];
        std::printf("[%s] %zu. %s -- %s\n", r.pass ? "PASS" : "FAIL", i + 1, r.name.c_str(),
                    r.detail.c_str());
        failures += r.pass ? 0 : 1;
    }
    std::printf("%d/%zu acceptance criteria passed\n", static_cast<int>(results.size()) - failures,
                results.size());
    return failures == 0 ? 0 : 1;
}
