#include "badsad/eval.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "badsad/rng.hpp"

namespace badsad {

double auc(const ScoreSet& scores) {
    const auto& neg = scores.normal;
    const auto& pos = scores.abnormal;
    if (neg.empty() || pos.empty()) {
        throw UsageError("auc: both score lists must be nonempty");
    }
    const std::size_t n = neg.size() + pos.size();
    // pooled midranks; label 1 marks abnormal
    std::vector<std::pair<double, int>> pooled;
    pooled.reserve(n);
    for (double v : neg) pooled.emplace_back(v, 0);
    for (double v : pos) pooled.emplace_back(v, 1);
    std::sort(pooled.begin(), pooled.end(),
              [](const auto& a, const auto& b) { return a.first < b.first; });

    double rank_sum_pos = 0.0;
    std::size_t i = 0;
    while (i < n) {
        std::size_t j = i;
        while (j < n && pooled[j].first == pooled[i].first) ++j;
        const double midrank = 0.5 * static_cast<double>(i + 1 + j);  // ranks are 1-based
        for (std::size_t k = i; k < j; ++k) {
            if (pooled[k].second == 1) rank_sum_pos += midrank;
        }
        i = j;
    }
    const double na = static_cast<double>(pos.size());
    const double nn = static_cast<double>(neg.size());
    const double u = rank_sum_pos - na * (na + 1.0) / 2.0;
    return u / (na * nn);
}

namespace {

double criterion_value(ThresholdCriterion crit, std::size_t tn, std::size_t nn, std::size_t tp,
                       std::size_t na) {
    if (crit == ThresholdCriterion::balanced_accuracy) {
        const double tnr = static_cast<double>(tn) / static_cast<double>(nn);
        const double tpr = static_cast<double>(tp) / static_cast<double>(na);
        return 0.5 * (tnr + tpr);
    }
    // F1 with abnormal as the positive class
    const std::size_t fp = nn - tn;
    if (tp == 0) return 0.0;
    const double precision = static_cast<double>(tp) / static_cast<double>(tp + fp);
    const double recall = static_cast<double>(tp) / static_cast<double>(na);
    return 2.0 * precision * recall / (precision + recall);
}

}  // namespace

double select_threshold(const ScoreSet& val, ThresholdCriterion criterion) {
    if (val.normal.empty() || val.abnormal.empty()) {
        throw UsageError("select_threshold: both validation lists must be nonempty");
    }
    std::vector<double> pooled = val.normal;
    pooled.insert(pooled.end(), val.abnormal.begin(), val.abnormal.end());
    std::sort(pooled.begin(), pooled.end());
    pooled.erase(std::unique(pooled.begin(), pooled.end()), pooled.end());

    std::vector<double> candidates;
    candidates.push_back(-std::numeric_limits<double>::infinity());
    for (std::size_t i = 0; i + 1 < pooled.size(); ++i) {
        candidates.push_back(0.5 * (pooled[i] + pooled[i + 1]));
    }
    candidates.push_back(std::numeric_limits<double>::infinity());

    std::vector<double> sn = val.normal, sa = val.abnormal;
    std::sort(sn.begin(), sn.end());
    std::sort(sa.begin(), sa.end());

    double best_tau = candidates.front();
    double best_val = -1.0;
    for (double tau : candidates) {
        // s > tau => abnormal
        const auto tn = static_cast<std::size_t>(
            std::upper_bound(sn.begin(), sn.end(), tau) - sn.begin());
        const auto tp =
            sa.size() -
            static_cast<std::size_t>(std::upper_bound(sa.begin(), sa.end(), tau) - sa.begin());
        const double v = criterion_value(criterion, tn, sn.size(), tp, sa.size());
        if (v > best_val) {
            best_val = v;
            best_tau = tau;
        }
    }
    return best_tau;
}

double asr_from_scores(const std::vector<double>& triggered_scores, double tau) {
    if (triggered_scores.empty()) throw UsageError("asr: empty score list");
    std::size_t hits = 0;
    for (double s : triggered_scores) {
        if (s <= tau) ++hits;
    }
    return static_cast<double>(hits) / static_cast<double>(triggered_scores.size());
}

std::vector<double> default_sweep_ratios() {
    std::vector<double> r;
    for (int i = 0; i <= 20; ++i) r.push_back(static_cast<double>(i) / 10.0);
    return r;
}

namespace {

// one power-iteration pass; returns the eigenvalue, writes the eigenvector
// into v
double power_iterate(const std::vector<double>& cov, std::size_t d, std::vector<double>& v,
                     std::uint64_t seed) {
    const double tol = 1e-9;
    const int max_iter = 1000;
    const int max_attempts = 3;

    for (int attempt = 0; attempt < max_attempts; ++attempt) {
        std::vector<double> x(d, 0.0);
        if (attempt == 0) {
            x[0] = 1.0;
        } else {
            Rng rng(derive_seed(seed, 0x9CA, static_cast<std::uint64_t>(attempt)));
            for (auto& e : x) e = rng.normal();
            double norm = std::sqrt(std::inner_product(x.begin(), x.end(), x.begin(), 0.0));
            if (norm == 0.0) continue;
            for (auto& e : x) e /= norm;
        }

        for (int it = 0; it < max_iter; ++it) {
            std::vector<double> y(d, 0.0);
            for (std::size_t r = 0; r < d; ++r) {
                double acc = 0.0;
                for (std::size_t c = 0; c < d; ++c) acc += cov[r * d + c] * x[c];
                y[r] = acc;
            }
            const double ynorm = std::sqrt(std::inner_product(y.begin(), y.end(), y.begin(), 0.0));
            if (ynorm < 1e-300) {
                // effectively the zero matrix: eigenvalue 0, any unit vector works
                v = x;
                return 0.0;
            }
            double dot = 0.0;
            for (std::size_t k = 0; k < d; ++k) dot += y[k] * x[k];
            const double sign = dot >= 0.0 ? 1.0 : -1.0;
            double diff = 0.0;
            for (std::size_t k = 0; k < d; ++k) {
                const double yn = sign * y[k] / ynorm;
                diff += (yn - x[k]) * (yn - x[k]);
                x[k] = yn;
            }
            if (std::sqrt(diff) < tol) {
                v = x;
                double lambda = 0.0;
                for (std::size_t r = 0; r < d; ++r) {
                    double acc = 0.0;
                    for (std::size_t c = 0; c < d; ++c) acc += cov[r * d + c] * x[c];
                    lambda += x[r] * acc;
                }
                return lambda;
            }
        }
    }
    throw NumericalError("project_latent: power iteration failed to converge");
}

}  // namespace

ProjectionResult project_latent(const Tensor<double>& rows, std::uint64_t seed) {
    if (rows.rank() != 2) throw UsageError("project_latent: expected an [n,d] matrix");
    const std::size_t n = rows.shape[0], d = rows.shape[1];
    if (n < 3) throw UsageError("project_latent: need at least 3 rows");

    std::vector<double> mean(d, 0.0);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < d; ++j) mean[j] += rows.at2(i, j);
    for (auto& m : mean) m /= static_cast<double>(n);

    std::vector<double> x(n * d);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < d; ++j) x[i * d + j] = rows.at2(i, j) - mean[j];

    std::vector<double> cov(d * d, 0.0);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t a = 0; a < d; ++a) {
            const double xa = x[i * d + a];
            if (xa == 0.0) continue;
            for (std::size_t b = 0; b < d; ++b) cov[a * d + b] += xa * x[i * d + b];
        }
    for (auto& cval : cov) cval /= static_cast<double>(n - 1);

    std::vector<double> v1, v2;
    const double l1 = power_iterate(cov, d, v1, seed);
    std::vector<double> deflated = cov;
    for (std::size_t a = 0; a < d; ++a)
        for (std::size_t b = 0; b < d; ++b) deflated[a * d + b] -= l1 * v1[a] * v1[b];
    const double l2 = power_iterate(deflated, d, v2, seed + 1);

    // deterministic orientation: largest-magnitude coordinate positive
    auto fix_sign = [](std::vector<double>& v) {
        std::size_t arg = 0;
        for (std::size_t i = 1; i < v.size(); ++i)
            if (std::abs(v[i]) > std::abs(v[arg])) arg = i;
        if (v[arg] < 0.0)
            for (auto& e : v) e = -e;
    };
    fix_sign(v1);
    fix_sign(v2);

    ProjectionResult res;
    res.var1 = l1;
    res.var2 = l2;
    res.coords.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        double cx = 0.0, cy = 0.0;
        for (std::size_t j = 0; j < d; ++j) {
            cx += x[i * d + j] * v1[j];
            cy += x[i * d + j] * v2[j];
        }
        res.coords[i] = {cx, cy};
    }
    return res;
}

}  // namespace badsad
