#pragma once

// Shared test helpers: independent brute-force oracles and random-input
// generators. Everything here deliberately re-derives results with the
// plainest possible code, separate from the library implementations.

#include <algorithm>
#include <cmath>
#include <map>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "rehabcl/contrastive.hpp"
#include "rehabcl/skeleton_data.hpp"
#include "rehabcl/tensor.hpp"

namespace testutil {

using rehabcl::Assessment;
using rehabcl::BatchPartitions;
using rehabcl::DenominatorMode;
using rehabcl::Rng;
using rehabcl::Tensor;

inline double cosine_naive(const std::vector<double>& a, const std::vector<double>& b) {
    double uu = 0, vv = 0, uv = 0;
    for (size_t i = 0; i < a.size(); ++i) {
        uu += a[i] * a[i];
        vv += b[i] * b[i];
        uv += a[i] * b[i];
    }
    return uv / (std::sqrt(uu) * std::sqrt(vv));
}

// Direct scalar transcription of the contrastive loss: outer sum over
// anchors in beta_plus, inner average over same-type correct partners, log of
// exp(sim/tau) over [hard-negative sum + second sum] where the second sum
// ranges over all l != i (literal) or over other-type views (prose).
// Anchors without a positive partner or with an empty denominator are skipped.
inline double contrastive_loss_oracle(const std::vector<std::vector<double>>& emb,
                                      const std::vector<std::string>& type,
                                      const std::vector<bool>& correct, double tau,
                                      DenominatorMode mode) {
    const long n = static_cast<long>(emb.size());
    double total = 0;
    for (long i = 0; i < n; ++i) {
        if (!correct[static_cast<size_t>(i)]) continue;  // anchors only from beta_plus
        // beta_plus_{y_i} including the anchor itself:
        std::vector<long> plus_same;
        std::vector<long> minus_same;
        for (long l = 0; l < n; ++l) {
            if (type[static_cast<size_t>(l)] != type[static_cast<size_t>(i)]) continue;
            if (correct[static_cast<size_t>(l)]) plus_same.push_back(l);
            else minus_same.push_back(l);
        }
        double inner = 0;
        long pairs = 0;
        for (long j : plus_same) {
            if (j == i) continue;
            double denominator = 0;
            for (long k : minus_same)
                denominator +=
                    std::exp(cosine_naive(emb[static_cast<size_t>(i)], emb[static_cast<size_t>(k)]) / tau);
            for (long l = 0; l < n; ++l) {
                bool in_second_sum = mode == DenominatorMode::literal
                                         ? l != i
                                         : type[static_cast<size_t>(l)] != type[static_cast<size_t>(i)];
                if (in_second_sum)
                    denominator += std::exp(
                        cosine_naive(emb[static_cast<size_t>(i)], emb[static_cast<size_t>(l)]) / tau);
            }
            if (denominator <= 0) continue;  // undefined anchor, skipped by both sides
            double numerator =
                std::exp(cosine_naive(emb[static_cast<size_t>(i)], emb[static_cast<size_t>(j)]) / tau);
            inner += std::log(numerator / denominator);
            ++pairs;
        }
        if (pairs > 0) total += -inner / static_cast<double>(plus_same.size());
    }
    return total;
}

// Pairwise enumeration of AUC ROC (ties half).
inline double auc_roc_oracle(const std::vector<double>& scores, const std::vector<Assessment>& truth) {
    double wins = 0;
    long pos = 0, neg = 0;
    for (size_t i = 0; i < truth.size(); ++i) {
        if (truth[i] != Assessment::correct) continue;
        ++pos;
        for (size_t j = 0; j < truth.size(); ++j) {
            if (truth[j] != Assessment::incorrect) continue;
            if (scores[i] > scores[j]) wins += 1;
            else if (scores[i] == scores[j]) wins += 0.5;
        }
    }
    for (auto t : truth)
        if (t == Assessment::incorrect) ++neg;
    return wins / (static_cast<double>(pos) * static_cast<double>(neg));
}

// Average precision by recounting the confusion table at every distinct
// threshold (the normative formulation for tests).
inline double auc_pr_oracle(const std::vector<double>& scores, const std::vector<Assessment>& truth) {
    long pos = 0;
    for (auto t : truth)
        if (t == Assessment::correct) ++pos;
    std::set<double, std::greater<>> thresholds(scores.begin(), scores.end());
    double ap = 0, prev_recall = 0;
    for (double threshold : thresholds) {
        long tp = 0, fp = 0;
        for (size_t i = 0; i < scores.size(); ++i) {
            if (scores[i] >= threshold) {
                if (truth[i] == Assessment::correct) ++tp;
                else ++fp;
            }
        }
        double recall = static_cast<double>(tp) / static_cast<double>(pos);
        double precision = static_cast<double>(tp) / static_cast<double>(tp + fp);
        ap += (recall - prev_recall) * precision;
        prev_recall = recall;
    }
    return ap;
}

// O(n^2) rank computation: rank_i = 1 + #{v_j < v_i} + #{j != i, v_j == v_i}/2,
// then the plain Pearson correlation of ranks.
inline double spearman_oracle(const std::vector<double>& a, const std::vector<double>& b) {
    auto ranks = [](const std::vector<double>& v) {
        std::vector<double> r(v.size());
        for (size_t i = 0; i < v.size(); ++i) {
            double below = 0, equal = 0;
            for (size_t j = 0; j < v.size(); ++j) {
                if (v[j] < v[i]) below += 1;
                else if (j != i && v[j] == v[i]) equal += 1;
            }
            r[i] = 1.0 + below + equal / 2.0;
        }
        return r;
    };
    auto ra = ranks(a), rb = ranks(b);
    double ma = 0, mb = 0;
    for (size_t i = 0; i < ra.size(); ++i) {
        ma += ra[i];
        mb += rb[i];
    }
    ma /= static_cast<double>(ra.size());
    mb /= static_cast<double>(rb.size());
    double cov = 0, va = 0, vb = 0;
    for (size_t i = 0; i < ra.size(); ++i) {
        cov += (ra[i] - ma) * (rb[i] - mb);
        va += (ra[i] - ma) * (ra[i] - ma);
        vb += (rb[i] - mb) * (rb[i] - mb);
    }
    return cov / std::sqrt(va * vb);
}

// Literal transcription of the reference formula: w = 1/(Var(V)+eps)
// (population variance over rows), r = (w/|w|_1) Hadamard column-sum.
inline std::vector<double> reference_oracle(const std::vector<std::vector<double>>& v, double eps) {
    const size_t m = v.size(), d = v.front().size();
    std::vector<double> mean(d, 0), var(d, 0), sum(d, 0), w(d, 0), r(d, 0);
    for (const auto& row : v)
        for (size_t k = 0; k < d; ++k) sum[k] += row[k];
    for (size_t k = 0; k < d; ++k) mean[k] = sum[k] / static_cast<double>(m);
    for (const auto& row : v)
        for (size_t k = 0; k < d; ++k) var[k] += (row[k] - mean[k]) * (row[k] - mean[k]);
    for (size_t k = 0; k < d; ++k) var[k] /= static_cast<double>(m);
    double l1 = 0;
    for (size_t k = 0; k < d; ++k) {
        w[k] = 1.0 / (var[k] + eps);
        l1 += std::abs(w[k]);
    }
    for (size_t k = 0; k < d; ++k) r[k] = w[k] / l1 * sum[k];
    return r;
}

// ---------------------------------------------------------------------------
// Random-input generators

struct RandomBatch {
    std::vector<std::vector<double>> embeddings;
    std::vector<std::string> type;
    std::vector<bool> correct;

    Tensor embedding_tensor() const {
        Tensor t({static_cast<long>(embeddings.size()), static_cast<long>(embeddings.front().size())});
        for (size_t i = 0; i < embeddings.size(); ++i)
            for (size_t k = 0; k < embeddings[i].size(); ++k)
                t(static_cast<long>(i), static_cast<long>(k)) = embeddings[i][k];
        return t;
    }
};

// A valid two-view style batch: even count, paired labels, at least one
// anchor with a positive partner.
inline RandomBatch random_two_view_batch(Rng& rng, long max_tuples = 8, long max_dim = 8) {
    std::uniform_int_distribution<long> tuples_dist(2, max_tuples);
    std::uniform_int_distribution<long> dim_dist(2, max_dim);
    std::uniform_int_distribution<int> type_dist(0, 2);
    std::bernoulli_distribution correct_dist(0.6);
    std::normal_distribution<double> value(0.0, 1.0);

    for (;;) {
        RandomBatch batch;
        const long tuples = tuples_dist(rng);
        const long dim = dim_dist(rng);
        for (long k = 0; k < tuples; ++k) {
            std::string type = "t" + std::to_string(type_dist(rng));
            bool correct = correct_dist(rng);
            for (int view = 0; view < 2; ++view) {
                std::vector<double> e(static_cast<size_t>(dim));
                double norm = 0;
                do {
                    norm = 0;
                    for (auto& x : e) {
                        x = value(rng);
                        norm += x * x;
                    }
                } while (norm < 1e-12);
                batch.embeddings.push_back(std::move(e));
                batch.type.push_back(type);
                batch.correct.push_back(correct);
            }
        }
        // Need at least one anchor with a same-type positive partner.
        bool has_anchor = false;
        for (size_t i = 0; i < batch.correct.size() && !has_anchor; ++i) {
            if (!batch.correct[i]) continue;
            for (size_t j = 0; j < batch.correct.size(); ++j)
                if (j != i && batch.correct[j] && batch.type[j] == batch.type[i]) {
                    has_anchor = true;
                    break;
                }
        }
        if (has_anchor) return batch;
    }
}

inline rehabcl::SkeletonSequence random_sequence(Rng& rng, long frames, long joints, long channels) {
    rehabcl::SkeletonSequence seq;
    seq.fps = 30.0;
    seq.frames = Tensor({frames, joints, channels});
    std::normal_distribution<double> value(0.0, 0.5);
    for (double& v : seq.frames.raw()) v = value(rng);
    return seq;
}

// Central finite difference of a scalar function with respect to one slot.
template <typename F>
double central_difference(F&& f, double& slot, double step) {
    const double saved = slot;
    slot = saved + step;
    double up = f();
    slot = saved - step;
    double down = f();
    slot = saved;
    return (up - down) / (2.0 * step);
}

inline double relative_error(double a, double b) {
    double denom = std::max({std::abs(a), std::abs(b), 1e-8});
    return std::abs(a - b) / denom;
}

}  // namespace testutil
