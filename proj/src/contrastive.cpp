#include "rehabcl/contrastive.hpp"

#include <algorithm>
#include <cmath>

namespace rehabcl {

BatchPartitions partition_labels(const std::vector<std::string>& exercise_type,
                                 const std::vector<bool>& correct) {
    if (exercise_type.size() != correct.size())
        throw ArgumentError("partition_labels: label vectors must have equal length");
    BatchPartitions parts;
    parts.view_type = exercise_type;
    for (long i = 0; i < static_cast<long>(exercise_type.size()); ++i) {
        const std::string& type = exercise_type[static_cast<size_t>(i)];
        parts.beta_by_type[type].push_back(i);
        if (correct[static_cast<size_t>(i)]) {
            parts.beta_plus.push_back(i);
            parts.beta_plus_by_type[type].push_back(i);
        } else {
            parts.beta_minus_by_type[type].push_back(i);
        }
    }
    // Every type present in the batch gets all three entries, possibly empty.
    for (const auto& entry : parts.beta_by_type) {
        parts.beta_plus_by_type.try_emplace(entry.first);
        parts.beta_minus_by_type.try_emplace(entry.first);
    }
    return parts;
}

BatchPartitions partition_batch(const ViewBatch& batch) {
    const long n = batch.view_count();
    std::vector<std::string> types(static_cast<size_t>(n));
    std::vector<bool> correct(static_cast<size_t>(n));
    for (long i = 0; i < n; ++i) {
        if (!batch.assessment[static_cast<size_t>(i)])
            throw ArgumentError("partition_batch: view " + std::to_string(i) +
                                " lacks a binary assessment label");
        types[static_cast<size_t>(i)] = batch.exercise_type[static_cast<size_t>(i)];
        correct[static_cast<size_t>(i)] =
            *batch.assessment[static_cast<size_t>(i)] == Assessment::correct;
    }
    return partition_labels(types, correct);
}

DenominatorMode parse_denominator_mode(const std::string& s) {
    if (s == "literal") return DenominatorMode::literal;
    if (s == "prose") return DenominatorMode::prose;
    throw ArgumentError("unknown loss mode: '" + s + "' (expected literal or prose)");
}

const char* to_string(DenominatorMode m) {
    return m == DenominatorMode::literal ? "literal" : "prose";
}

void LossConfig::validate() const {
    if (!(temperature > 0)) throw ArgumentError("LossConfig: temperature must be positive");
}

double cosine_sim(std::span<const double> u, std::span<const double> v) {
    if (u.size() != v.size() || u.empty()) throw ArgumentError("cosine_sim: dimension mismatch");
    double uu = 0, vv = 0, uv = 0;
    for (size_t i = 0; i < u.size(); ++i) {
        uu += u[i] * u[i];
        vv += v[i] * v[i];
        uv += u[i] * v[i];
    }
    if (uu <= 0 || vv <= 0) throw ArgumentError("cosine_sim: zero-norm input");
    return uv / (std::sqrt(uu) * std::sqrt(vv));
}

LossResult contrastive_loss(const Tensor& embeddings, const BatchPartitions& partitions,
                            const LossConfig& config, Tensor* grad) {
    config.validate();
    if (embeddings.rank() != 2) throw ArgumentError("contrastive_loss: embeddings must be 2N x d");
    const long n = embeddings.dim(0), dim = embeddings.dim(1);
    if (n < 2) throw ArgumentError("contrastive_loss: need at least 2 views");
    if (partitions.view_count() != n)
        throw ArgumentError("contrastive_loss: partition size does not match batch");
    if (partitions.beta_plus.empty()) throw ArgumentError("contrastive_loss: no anchors in batch");
    const double tau = config.temperature;

    // Unit-normalized rows; cosine similarity becomes a plain dot product.
    std::vector<double> norm(static_cast<size_t>(n));
    Tensor unit({n, dim});
    for (long i = 0; i < n; ++i) {
        double sq = 0;
        for (long d = 0; d < dim; ++d) sq += embeddings(i, d) * embeddings(i, d);
        if (sq <= 0)
            throw ArgumentError("contrastive_loss: zero-norm embedding at index " + std::to_string(i));
        norm[static_cast<size_t>(i)] = std::sqrt(sq);
        for (long d = 0; d < dim; ++d) unit(i, d) = embeddings(i, d) / norm[static_cast<size_t>(i)];
    }
    auto sim = [&](long a, long b) {
        double s = 0;
        for (long d = 0; d < dim; ++d) s += unit(a, d) * unit(b, d);
        return s;
    };

    if (grad) {
        *grad = Tensor({n, dim});
    }
    // d loss / d sim(i, l), accumulated per ordered anchor pair.
    Tensor sim_grad = grad ? Tensor({n, n}) : Tensor();

    LossResult result;
    auto& diag = result.diagnostics;
    double total = 0;

    for (long anchor : partitions.beta_plus) {
        const std::string& type = partitions.view_type[static_cast<size_t>(anchor)];
        const auto& plus_same = partitions.beta_plus_by_type.at(type);
        const auto& minus_same = partitions.beta_minus_by_type.at(type);
        const long plus_size = static_cast<long>(plus_same.size());  // includes the anchor

        AnchorDiagnostics ad;
        ad.index = anchor;
        ad.positives = plus_size - 1;
        ad.hard = static_cast<long>(minus_same.size());
        ad.soft = n - static_cast<long>(partitions.beta_by_type.at(type).size());
        diag.per_anchor.push_back(ad);

        bool denominator_empty = ad.hard == 0 && (config.denominator_mode == DenominatorMode::prose
                                                      ? ad.soft == 0
                                                      : n < 2);
        if (ad.positives == 0 || denominator_empty) {
            // No positive partner (raw batch) or an empty denominator
            // (prose mode, single-type all-correct batch): Eq. 2 is
            // undefined for this anchor.
            ++diag.skipped_anchors;
            continue;
        }
        ++diag.anchor_count;
        diag.mean_positives += static_cast<double>(ad.positives);
        diag.mean_hard += static_cast<double>(ad.hard);
        diag.mean_soft += static_cast<double>(ad.soft);

        // Denominator multiplicity per index: the hard-negative sum plus the
        // second sum. In literal mode the second sum spans all l != anchor, so
        // hard negatives appear twice; in prose mode it spans other types only.
        std::vector<int> multiplicity(static_cast<size_t>(n), 0);
        for (long k : minus_same) multiplicity[static_cast<size_t>(k)] += 1;
        if (config.denominator_mode == DenominatorMode::literal) {
            for (long l = 0; l < n; ++l)
                if (l != anchor) multiplicity[static_cast<size_t>(l)] += 1;
        } else {
            for (long l = 0; l < n; ++l)
                if (partitions.view_type[static_cast<size_t>(l)] != type)
                    multiplicity[static_cast<size_t>(l)] += 1;
        }

        // log sum_l m_l * exp(sim/tau), max-shifted.
        double max_arg = -std::numeric_limits<double>::infinity();
        std::vector<double> sims(static_cast<size_t>(n), 0.0);
        for (long l = 0; l < n; ++l) {
            if (multiplicity[static_cast<size_t>(l)] == 0) continue;
            sims[static_cast<size_t>(l)] = sim(anchor, l);
            max_arg = std::max(max_arg, sims[static_cast<size_t>(l)] / tau);
        }
        double denom_sum = 0;
        for (long l = 0; l < n; ++l) {
            int m = multiplicity[static_cast<size_t>(l)];
            if (m == 0) continue;
            denom_sum += m * std::exp(sims[static_cast<size_t>(l)] / tau - max_arg);
        }
        const double log_denom = std::log(denom_sum) + max_arg;

        double anchor_loss = 0;
        long pair_count = 0;
        for (long j : plus_same) {
            if (j == anchor) continue;
            anchor_loss += -(sim(anchor, j) / tau) + log_denom;
            ++pair_count;
        }
        anchor_loss /= static_cast<double>(plus_size);
        total += anchor_loss;

        if (grad) {
            const double inv_p = 1.0 / static_cast<double>(plus_size);
            for (long j : plus_same) {
                if (j == anchor) continue;
                sim_grad(anchor, j) += -inv_p / tau;
            }
            // d log_denom / d sim(anchor, l), one copy per positive pair.
            const double denom_coeff = static_cast<double>(pair_count) * inv_p / tau;
            for (long l = 0; l < n; ++l) {
                int m = multiplicity[static_cast<size_t>(l)];
                if (m == 0) continue;
                double softmax = m * std::exp(sims[static_cast<size_t>(l)] / tau - log_denom);
                sim_grad(anchor, l) += denom_coeff * softmax;
            }
        }
    }

    if (diag.anchor_count > 0) {
        diag.mean_positives /= static_cast<double>(diag.anchor_count);
        diag.mean_hard /= static_cast<double>(diag.anchor_count);
        diag.mean_soft /= static_cast<double>(diag.anchor_count);
        diag.loss_mean_per_anchor = total / static_cast<double>(diag.anchor_count);
    }
    result.loss = total;

    if (grad) {
        // Chain through cosine similarity: s = <u_i, u_l> with u = v / |v|.
        for (long i = 0; i < n; ++i) {
            for (long l = 0; l < n; ++l) {
                double c = sim_grad(i, l);
                if (c == 0.0 || i == l) continue;
                double s = sim(i, l);
                for (long d = 0; d < dim; ++d) {
                    (*grad)(i, d) += c * (unit(l, d) - s * unit(i, d)) / norm[static_cast<size_t>(i)];
                    (*grad)(l, d) += c * (unit(i, d) - s * unit(l, d)) / norm[static_cast<size_t>(l)];
                }
            }
        }
    }
    return result;
}

}  // namespace rehabcl
