#pragma once

#include <cmath>
#include <limits>

#include "badsad/autograd.hpp"
#include "badsad/model.hpp"

namespace badsad {

// Weighting of the combined objective. lambda_wd is not a loss summand; it
// is routed to the optimizer as decoupled weight decay.
struct LossWeights {
    double eta = 1.0;
    double alpha = 1.0;
    double beta = 1.0;
    double margin = 2.0;
    double eps_inv = 1e-6;
    double lambda_wd = 1e-6;
    double eps_cos = 1e-8;
    bool allpairs_cosine = false;

    void validate() const {
        if (!(std::isfinite(eta) && std::isfinite(alpha) && std::isfinite(beta) &&
              std::isfinite(margin) && std::isfinite(eps_inv) && std::isfinite(lambda_wd))) {
            throw ConfigError("loss weights must be finite");
        }
        if (!(eta > 0.0)) throw ConfigError("eta must be > 0");
        if (alpha < 0.0 || beta < 0.0) throw ConfigError("alpha and beta must be >= 0");
        if (margin < 0.0) throw ConfigError("margin must be >= 0");
        if (!(eps_inv > 0.0)) throw ConfigError("eps_inv must be > 0");
    }
};

// How poisoned embeddings enter the semi-supervised term. Clean-label
// semantics route them as labeled-normal.
enum class PoisonRouting { none, labeled_normal, unlabeled };

// latent rows for one optimization step; absent groups stay null
template <typename T>
struct BatchEmbeddings {
    NodePtr<T> z_u;
    NodePtr<T> z_ln;
    NodePtr<T> z_la;
    NodePtr<T> z_p;
};

namespace detail {

template <typename T>
std::size_t group_rows(const NodePtr<T>& g) {
    return g ? g->value.shape[0] : 0;
}

}  // namespace detail

// (1/(n+m)) sum_u ||z-c||^2 + (eta/(n+m)) [ sum_{y=+1} ||z-c||^2
//                                         + sum_{y=-1} (||z-c||^2 + eps)^{-1} ]
// n and m are per-batch counts; the lambda*||theta||^2 term is applied as
// optimizer weight decay instead of a summand.
template <typename T>
NodePtr<T> deepsad_loss(const BatchEmbeddings<T>& emb, const NodePtr<T>& c,
                        const LossWeights& w, PoisonRouting poison_as) {
    std::size_t n = detail::group_rows(emb.z_u);
    std::size_t m = detail::group_rows(emb.z_ln) + detail::group_rows(emb.z_la);
    if (emb.z_p) {
        if (poison_as == PoisonRouting::labeled_normal) m += detail::group_rows(emb.z_p);
        if (poison_as == PoisonRouting::unlabeled) n += detail::group_rows(emb.z_p);
    }
    if (n + m == 0) throw UsageError("deepsad_loss: no embeddings in batch");
    if (w.eps_inv < 0.0) throw ConfigError("deepsad_loss: eps_inv must be >= 0");

    const T inv_nm = static_cast<T>(1.0 / static_cast<double>(n + m));
    NodePtr<T> acc;
    auto accumulate = [&](const NodePtr<T>& term) {
        acc = acc ? add(acc, term) : term;
    };

    if (emb.z_u) accumulate(scale(sum(rows_sqdist(emb.z_u, c)), inv_nm));
    if (emb.z_p && poison_as == PoisonRouting::unlabeled) {
        accumulate(scale(sum(rows_sqdist(emb.z_p, c)), inv_nm));
    }

    const T eta_nm = static_cast<T>(w.eta) * inv_nm;
    if (emb.z_ln) accumulate(scale(sum(rows_sqdist(emb.z_ln, c)), eta_nm));
    if (emb.z_p && poison_as == PoisonRouting::labeled_normal) {
        accumulate(scale(sum(rows_sqdist(emb.z_p, c)), eta_nm));
    }
    if (emb.z_la) {
        auto dist = rows_sqdist(emb.z_la, c);
        accumulate(scale(sum(inv_guarded(dist, static_cast<T>(w.eps_inv))), eta_nm));
    }
    return acc;
}

// max( cos(nbar, abar) - cos(nbar, pbar) + margin, 0 ) over group means;
// the all-pairs variant averages cosines over sample pairs instead.
template <typename T>
NodePtr<T> alignment_loss(const NodePtr<T>& z_ln, const NodePtr<T>& z_p, const NodePtr<T>& z_la,
                          double margin, double eps_cos = 1e-8, bool allpairs = false) {
    if (!z_ln || z_ln->value.shape[0] == 0) throw UsageError("alignment_loss: empty normal group");
    if (!z_p || z_p->value.shape[0] == 0) throw UsageError("alignment_loss: empty poisoned group");
    if (!z_la || z_la->value.shape[0] == 0) {
        throw UsageError("alignment_loss: empty abnormal group");
    }
    NodePtr<T> cos_na, cos_np;
    if (!allpairs) {
        auto nbar = mean_rows(z_ln);
        auto pbar = mean_rows(z_p);
        auto abar = mean_rows(z_la);
        cos_na = cosine_similarity(nbar, abar, static_cast<T>(eps_cos));
        cos_np = cosine_similarity(nbar, pbar, static_cast<T>(eps_cos));
    } else {
        auto mean_pair_cos = [&](const NodePtr<T>& ga, const NodePtr<T>& gb) {
            const std::size_t na = ga->value.shape[0], nb = gb->value.shape[0];
            NodePtr<T> acc;
            for (std::size_t i = 0; i < na; ++i) {
                auto ri = row(ga, i);
                for (std::size_t j = 0; j < nb; ++j) {
                    auto cs = cosine_similarity(ri, row(gb, j), static_cast<T>(eps_cos));
                    acc = acc ? add(acc, cs) : cs;
                }
            }
            return scale(acc, static_cast<T>(1.0 / static_cast<double>(na * nb)));
        };
        cos_na = mean_pair_cos(z_ln, z_la);
        cos_np = mean_pair_cos(z_ln, z_p);
    }
    auto hinge = add_scalar(sub(cos_na, cos_np), static_cast<T>(margin));
    return leaky_relu(hinge, T(0));
}

// (1/|P|) sum ||z_p - c_p||^2 + (1/|A|) sum ||z_a - c_a||^2
template <typename T>
NodePtr<T> concentration_loss(const NodePtr<T>& z_p, const NodePtr<T>& c_p,
                              const NodePtr<T>& z_la, const NodePtr<T>& c_a) {
    if (!z_p || z_p->value.shape[0] == 0) {
        throw UsageError("concentration_loss: empty poisoned group");
    }
    if (!z_la || z_la->value.shape[0] == 0) {
        throw UsageError("concentration_loss: empty abnormal group");
    }
    auto p_term = scale(sum(rows_sqdist(z_p, c_p)),
                        static_cast<T>(1.0 / static_cast<double>(z_p->value.shape[0])));
    auto a_term = scale(sum(rows_sqdist(z_la, c_a)),
                        static_cast<T>(1.0 / static_cast<double>(z_la->value.shape[0])));
    return add(p_term, a_term);
}

template <typename T>
struct CenterNodes {
    NodePtr<T> c;
    NodePtr<T> c_p;
    NodePtr<T> c_a;
};

template <typename T>
CenterNodes<T> center_nodes(const Centers<T>& centers) {
    return {make_constant<T>(centers.c), make_constant<T>(centers.c_p),
            make_constant<T>(centers.c_a)};
}

template <typename T>
struct TotalLoss {
    NodePtr<T> node;
    double deepsad = 0.0;
    double alignment = 0.0;
    double concentration = 0.0;
    double total = 0.0;
    double cos_np = std::numeric_limits<double>::quiet_NaN();
    double cos_na = std::numeric_limits<double>::quiet_NaN();
};

// L' = L + alpha*L_DA + beta*L_DC
template <typename T>
TotalLoss<T> total_loss(const BatchEmbeddings<T>& emb, const CenterNodes<T>& centers,
                        const LossWeights& w, PoisonRouting poison_as) {
    TotalLoss<T> out;
    auto base = deepsad_loss(emb, centers.c, w, poison_as);
    out.deepsad = static_cast<double>(scalar_value(base));

    auto da = alignment_loss(emb.z_ln, emb.z_p, emb.z_la, w.margin, w.eps_cos,
                             w.allpairs_cosine);
    auto dc = concentration_loss(emb.z_p, centers.c_p, emb.z_la, centers.c_a);
    out.alignment = static_cast<double>(scalar_value(da));
    out.concentration = static_cast<double>(scalar_value(dc));

    out.node = add(add(base, scale(da, static_cast<T>(w.alpha))),
                   scale(dc, static_cast<T>(w.beta)));
    out.total = static_cast<double>(scalar_value(out.node));

    // cosine diagnostics over group means (the quantities the alignment
    // constraints bound)
    auto nbar = mean_rows(emb.z_ln);
    out.cos_np = static_cast<double>(
        scalar_value(cosine_similarity(nbar, mean_rows(emb.z_p), static_cast<T>(w.eps_cos))));
    out.cos_na = static_cast<double>(
        scalar_value(cosine_similarity(nbar, mean_rows(emb.z_la), static_cast<T>(w.eps_cos))));
    return out;
}

}  // namespace badsad
