#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "badsad/model.hpp"
#include "badsad/trigger.hpp"

namespace badsad {

struct ScoreSet {
    std::vector<double> normal;
    std::vector<double> abnormal;
    std::string tag;
};

enum class ThresholdCriterion { balanced_accuracy, f1 };

// rank statistic with ties counted one-half; abnormal is the positive class
double auc(const ScoreSet& scores);

// Candidate thresholds are midpoints between consecutive distinct pooled
// validation scores plus the +-infinity sentinels; classification rule is
// s > tau => abnormal; ties break toward the smaller tau.
double select_threshold(const ScoreSet& val,
                        ThresholdCriterion criterion = ThresholdCriterion::balanced_accuracy);

// fraction of triggered-abnormal scores classified normal (s <= tau)
double asr_from_scores(const std::vector<double>& triggered_scores, double tau);

struct SweepRow {
    double ratio = 0.0;
    double auc = 0.0;
    double asr = 0.0;
};

std::vector<double> default_sweep_ratios();  // 0.0 to 2.0, step 0.1

struct ProjectionResult {
    std::vector<std::array<double, 2>> coords;
    double var1 = 0.0;  // variance captured by each principal direction
    double var2 = 0.0;
};

// Top-2 PCA by power iteration with deflation (tolerance 1e-9, at most 1000
// iterations per direction; the start vector is the first canonical basis
// vector, re-randomized from `seed` on convergence failure).
ProjectionResult project_latent(const Tensor<double>& rows, std::uint64_t seed = 0);

// ---------------------------------------------------------------------------
// scoring against a trained model
// ---------------------------------------------------------------------------

// s(X) = ||phi(X;theta) - c||^2, using the normal center only
template <typename T>
std::vector<double> anomaly_scores(const ModelState<T>& st, const Centers<T>& centers,
                                   const std::vector<const Image*>& imgs) {
    auto z = encode_images(st, imgs);
    const std::size_t n = z.shape[0], d = z.shape[1];
    if (centers.c.numel() != d) {
        throw DimensionError("anomaly_scores: center length " + std::to_string(centers.c.numel()) +
                             " vs rep_dim " + std::to_string(d));
    }
    std::vector<double> out(n);
    for (std::size_t i = 0; i < n; ++i) {
        double acc = 0.0;
        for (std::size_t j = 0; j < d; ++j) {
            const double diff =
                static_cast<double>(z.at2(i, j)) - static_cast<double>(centers.c[j]);
            acc += diff * diff;
        }
        out[i] = acc;
    }
    return out;
}

template <typename T>
double anomaly_score(const ModelState<T>& st, const Centers<T>& centers, const Image& img) {
    return anomaly_scores(st, centers, {&img})[0];
}

template <typename T>
ScoreSet score_test_sets(const ModelState<T>& st, const Centers<T>& centers,
                         const std::vector<Image>& normal, const std::vector<Image>& abnormal,
                         const std::string& tag = "test") {
    ScoreSet s;
    s.tag = tag;
    s.normal = anomaly_scores(st, centers, image_ptrs<T>(normal));
    s.abnormal = anomaly_scores(st, centers, image_ptrs<T>(abnormal));
    return s;
}

// applies the trigger to every abnormal image, scores, and counts s <= tau
template <typename T>
double asr(const ModelState<T>& st, const Centers<T>& centers, double tau,
           const std::vector<Image>& asr_abnormal, const TriggerMask& trigger) {
    if (asr_abnormal.empty()) throw UsageError("asr: empty triggered-abnormal set");
    std::vector<Image> triggered;
    triggered.reserve(asr_abnormal.size());
    for (const auto& im : asr_abnormal) triggered.push_back(apply_trigger(im, trigger));
    auto scores = anomaly_scores(st, centers, image_ptrs<T>(triggered));
    return asr_from_scores(scores, tau);
}

// AUC is ratio-independent and repeated per row for table shape; ASR is
// evaluated at tau*ratio.
template <typename T>
std::vector<SweepRow> threshold_sweep(const ModelState<T>& st, const Centers<T>& centers,
                                      double tau, const std::vector<double>& ratios,
                                      const std::vector<Image>& test_normal,
                                      const std::vector<Image>& test_abnormal,
                                      const std::vector<Image>& asr_abnormal,
                                      const TriggerMask& trigger) {
    if (ratios.empty()) throw UsageError("threshold_sweep: empty ratio grid");
    for (double r : ratios) {
        if (r < 0.0) throw ConfigError("threshold_sweep: ratios must be >= 0");
    }
    const double auc_value = auc(score_test_sets(st, centers, test_normal, test_abnormal));

    std::vector<Image> triggered;
    triggered.reserve(asr_abnormal.size());
    for (const auto& im : asr_abnormal) triggered.push_back(apply_trigger(im, trigger));
    auto scores = anomaly_scores(st, centers, image_ptrs<T>(triggered));

    std::vector<SweepRow> rows;
    for (double r : ratios) {
        double scaled = tau * r;
        if (std::isnan(scaled)) scaled = 0.0;  // inf * 0
        rows.push_back({r, auc_value, asr_from_scores(scores, scaled)});
    }
    return rows;
}

struct RobustnessTable {
    double full = 0.0;
    double sub = 0.0;
    double distinct = 0.0;
};

// evaluates ASR with the corner4, sub and distinct masks on the same images
template <typename T>
RobustnessTable robustness_eval(const ModelState<T>& st, const Centers<T>& centers, double tau,
                                const std::vector<Image>& asr_abnormal, int square_size) {
    if (asr_abnormal.empty()) throw UsageError("robustness_eval: empty triggered-abnormal set");
    const Image& shape = asr_abnormal.front();
    auto full = build_mask(TriggerKind::corner4, square_size, shape.c, shape.h, shape.w);
    auto sub = build_mask(TriggerKind::sub_lower_right, square_size, shape.c, shape.h, shape.w);
    auto distinct =
        build_mask(TriggerKind::distinct_center, square_size, shape.c, shape.h, shape.w);
    for (std::size_t i = 0; i < full.mask.pix.size(); ++i) {
        if (sub.mask.pix[i] > full.mask.pix[i]) {
            throw UsageError("robustness_eval: sub mask is not a subset of the full mask");
        }
    }
    RobustnessTable t;
    t.full = asr(st, centers, tau, asr_abnormal, full);
    t.sub = asr(st, centers, tau, asr_abnormal, sub);
    t.distinct = asr(st, centers, tau, asr_abnormal, distinct);
    return t;
}

}  // namespace badsad
