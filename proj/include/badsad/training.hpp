#pragma once

#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "badsad/adam.hpp"
#include "badsad/datasets.hpp"
#include "badsad/losses.hpp"
#include "badsad/model.hpp"
#include "badsad/trigger.hpp"

namespace badsad {

enum class TrainMode { clean, poison_only, badsad, dirty_label };

inline std::string train_mode_name(TrainMode m) {
    switch (m) {
        case TrainMode::clean: return "clean";
        case TrainMode::poison_only: return "poison_only";
        case TrainMode::badsad: return "badsad";
        case TrainMode::dirty_label: return "dirty_label";
    }
    return "clean";
}

inline TrainMode train_mode_from_name(const std::string& s) {
    if (s == "clean") return TrainMode::clean;
    if (s == "poison_only") return TrainMode::poison_only;
    if (s == "badsad") return TrainMode::badsad;
    if (s == "dirty_label") return TrainMode::dirty_label;
    throw ConfigError("unknown training mode: " + s);
}

struct BatchSizes {
    std::size_t unlabeled = 64;
    std::size_t labeled_normal = 16;
    std::size_t labeled_abnormal = 16;
    std::size_t poisoned = 16;
};

struct TrainConfig {
    TrainMode mode = TrainMode::badsad;
    std::size_t epochs = 50;
    double lr = 1e-3;
    BatchSizes batch;
    LossWeights weights;
    std::uint64_t seed = 1;
    double zero_guard = 0.1;
    // dirty_label baseline: triggered-abnormal copies labeled normal
    std::optional<PoisonSpec> dirty_spec;
};

struct CompositeBatch {
    std::vector<std::size_t> unlabeled;
    std::vector<std::size_t> labeled_normal;
    std::vector<std::size_t> labeled_abnormal;
    std::vector<std::size_t> poisoned;
};

struct EpochStats {
    double deepsad = 0.0;
    double alignment = 0.0;
    double concentration = 0.0;
    double total = 0.0;
    double cos_np = 0.0;
    double cos_na = 0.0;
};

template <typename T>
struct TrainRun {
    ModelState<T> state;
    Centers<T> centers;
    std::vector<EpochStats> history;
    std::vector<double> step_losses;
    std::size_t steps_per_epoch = 0;
    // audit counters
    std::uint64_t poisoned_images_encoded = 0;
    std::uint64_t triggered_abnormal_copies = 0;
};

// steps = ceil(|D_u| / bs_u); every group is reshuffled per epoch and cycles
// with wraparound so each composite batch carries its full quota
inline std::vector<CompositeBatch> schedule_batches(std::size_t n_u, std::size_t n_ln,
                                                    std::size_t n_la, std::size_t n_p,
                                                    const BatchSizes& sizes, std::uint64_t seed,
                                                    std::size_t epoch) {
    if (n_u == 0 || sizes.unlabeled == 0) {
        throw ConfigError("schedule_batches: unlabeled group and batch size must be nonzero");
    }
    const std::size_t steps = (n_u + sizes.unlabeled - 1) / sizes.unlabeled;

    auto permutation = [&](std::size_t n, std::uint64_t group_tag) {
        std::vector<std::size_t> perm(n);
        for (std::size_t i = 0; i < n; ++i) perm[i] = i;
        Rng rng(derive_seed(seed, 0xB0 + group_tag, epoch));
        rng.shuffle(perm);
        return perm;
    };
    const auto pu = permutation(n_u, 0);
    const auto pln = permutation(n_ln, 1);
    const auto pla = permutation(n_la, 2);
    const auto pp = permutation(n_p, 3);

    auto slice = [](const std::vector<std::size_t>& perm, std::size_t step, std::size_t bs) {
        std::vector<std::size_t> out;
        if (perm.empty() || bs == 0) return out;
        out.reserve(bs);
        for (std::size_t k = 0; k < bs; ++k) out.push_back(perm[(step * bs + k) % perm.size()]);
        return out;
    };

    std::vector<CompositeBatch> batches(steps);
    for (std::size_t s = 0; s < steps; ++s) {
        batches[s].unlabeled = slice(pu, s, sizes.unlabeled);
        batches[s].labeled_normal = slice(pln, s, sizes.labeled_normal);
        batches[s].labeled_abnormal = slice(pla, s, sizes.labeled_abnormal);
        batches[s].poisoned = slice(pp, s, sizes.poisoned);
    }
    return batches;
}

namespace detail {

template <typename T>
NodePtr<T> encode_group(const ModelState<T>& st, Tape<T>& tape, const std::vector<Image>& pool,
                        const std::vector<std::size_t>& idx) {
    std::vector<const Image*> ptrs;
    ptrs.reserve(idx.size());
    for (std::size_t i : idx) ptrs.push_back(&pool[i]);
    return encode(st, tape.leaf(make_batch<T>(ptrs)));
}

}  // namespace detail

// Mode routing:
//   clean        Eq-1 objective on D_u and D_l only
//   poison_only  Eq-1 objective with D_p routed as labeled-normal
//   badsad       combined objective on all four groups
//   dirty_label  Eq-1 with triggered copies of D_l- injected as labeled-normal
// Centers are computed from the pretrained encoder before the loop and stay
// frozen for the whole run.
template <typename T>
TrainRun<T> train(const TrainConfig& cfg, const DatasetSplit& split,
                  const ModelState<T>& pretrained) {
    cfg.weights.validate();
    if (split.unlabeled.empty() || split.labeled_normal.empty() ||
        split.labeled_abnormal.empty()) {
        throw ConfigError("train: unlabeled, labeled_normal and labeled_abnormal must be nonempty");
    }
    const bool needs_poison =
        cfg.mode == TrainMode::poison_only || cfg.mode == TrainMode::badsad;
    if (needs_poison && split.poisoned.empty()) {
        throw ConfigError("train: mode " + train_mode_name(cfg.mode) +
                          " requires a materialized poisoned set");
    }

    // dirty-label baseline: triggered-abnormal copies carrying the normal label
    std::vector<Image> dirty_images;
    if (cfg.mode == TrainMode::dirty_label) {
        if (!cfg.dirty_spec.has_value()) {
            throw ConfigError("train: dirty_label mode requires a trigger spec");
        }
        PoisonSpec ds = *cfg.dirty_spec;
        ds.count = std::min(ds.count, split.labeled_abnormal.size());
        dirty_images = poison_set(split.labeled_abnormal, ds);
    }

    TrainRun<T> run;
    run.triggered_abnormal_copies = dirty_images.size();
    run.state = pretrained.clone();

    // frozen centers from the pretrained encoder
    run.centers.zero_guard = cfg.zero_guard;
    run.centers.c = compute_center(pretrained, image_ptrs<T>(split.labeled_normal), cfg.zero_guard);
    run.centers.c_a =
        compute_center(pretrained, image_ptrs<T>(split.labeled_abnormal), cfg.zero_guard);
    if (!split.poisoned.empty()) {
        run.centers.c_p =
            compute_center(pretrained, image_ptrs<T>(split.poisoned), cfg.zero_guard);
    } else {
        run.centers.c_p = Tensor<T>::full({static_cast<std::size_t>(pretrained.arch.rep_dim)},
                                          static_cast<T>(cfg.zero_guard));
    }

    Adam<T> opt({cfg.lr, 0.9, 0.999, 1e-8, cfg.weights.lambda_wd}, run.state.encoder);

    // the poisoned slot cycles D_p in poison modes and the dirty copies in
    // the dirty-label baseline
    const std::vector<Image>* fourth_group = nullptr;
    if (needs_poison) fourth_group = &split.poisoned;
    if (cfg.mode == TrainMode::dirty_label) fourth_group = &dirty_images;

    for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        auto batches = schedule_batches(split.unlabeled.size(), split.labeled_normal.size(),
                                        split.labeled_abnormal.size(),
                                        fourth_group ? fourth_group->size() : 0, cfg.batch,
                                        cfg.seed, epoch);
        run.steps_per_epoch = batches.size();
        EpochStats stats;
        double cos_np_sum = 0.0, cos_na_sum = 0.0;
        std::size_t cos_count = 0;

        for (std::size_t s = 0; s < batches.size(); ++s) {
            const auto& cb = batches[s];
            Tape<T> tape;
            for (auto& p : run.state.encoder) tape.attach(p);

            BatchEmbeddings<T> emb;
            emb.z_u = detail::encode_group(run.state, tape, split.unlabeled, cb.unlabeled);
            emb.z_ln =
                detail::encode_group(run.state, tape, split.labeled_normal, cb.labeled_normal);
            emb.z_la =
                detail::encode_group(run.state, tape, split.labeled_abnormal, cb.labeled_abnormal);
            if (fourth_group && !cb.poisoned.empty()) {
                emb.z_p = detail::encode_group(run.state, tape, *fourth_group, cb.poisoned);
                run.poisoned_images_encoded += cb.poisoned.size();
            }

            auto c_node = make_constant<T>(run.centers.c);
            NodePtr<T> loss;
            double l_val = 0.0, da_val = 0.0, dc_val = 0.0, total_val = 0.0;
            if (cfg.mode == TrainMode::badsad) {
                CenterNodes<T> cn{c_node, make_constant<T>(run.centers.c_p),
                                  make_constant<T>(run.centers.c_a)};
                auto tl = total_loss(emb, cn, cfg.weights, PoisonRouting::labeled_normal);
                loss = tl.node;
                l_val = tl.deepsad;
                da_val = tl.alignment;
                dc_val = tl.concentration;
                total_val = tl.total;
                cos_np_sum += tl.cos_np;
                cos_na_sum += tl.cos_na;
                ++cos_count;
            } else {
                const PoisonRouting routing = (cfg.mode == TrainMode::clean)
                                                  ? PoisonRouting::none
                                                  : PoisonRouting::labeled_normal;
                loss = deepsad_loss(emb, c_node, cfg.weights, routing);
                l_val = static_cast<double>(scalar_value(loss));
                total_val = l_val;
            }
            if (!std::isfinite(total_val)) {
                throw TrainingError("training loss became non-finite at epoch " +
                                    std::to_string(epoch) + " step " + std::to_string(s));
            }
            run.step_losses.push_back(total_val);
            stats.deepsad += l_val;
            stats.alignment += da_val;
            stats.concentration += dc_val;
            stats.total += total_val;

            tape.backward(loss);
            opt.step();
        }
        const double inv_steps = 1.0 / static_cast<double>(batches.size());
        stats.deepsad *= inv_steps;
        stats.alignment *= inv_steps;
        stats.concentration *= inv_steps;
        stats.total *= inv_steps;
        stats.cos_np = cos_count ? cos_np_sum / static_cast<double>(cos_count)
                                 : std::numeric_limits<double>::quiet_NaN();
        stats.cos_na = cos_count ? cos_na_sum / static_cast<double>(cos_count)
                                 : std::numeric_limits<double>::quiet_NaN();
        run.history.push_back(stats);
    }
    return run;
}

}  // namespace badsad
