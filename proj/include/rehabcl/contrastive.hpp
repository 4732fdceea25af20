#pragma once

#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "rehabcl/augmentation.hpp"
#include "rehabcl/common.hpp"
#include "rehabcl/tensor.hpp"

namespace rehabcl {

// Index partitions of a two-view batch: beta_plus holds the correct views,
// beta_by_type groups views by exercise type, and per type the correct /
// incorrect subsets (beta_plus_by_type / beta_minus_by_type).
struct BatchPartitions {
    std::vector<long> beta_plus;
    std::map<std::string, std::vector<long>> beta_by_type;
    std::map<std::string, std::vector<long>> beta_plus_by_type;
    std::map<std::string, std::vector<long>> beta_minus_by_type;
    std::vector<std::string> view_type;  // exercise type per view index

    long view_count() const { return static_cast<long>(view_type.size()); }
};

BatchPartitions partition_batch(const ViewBatch& batch);
// Same partitioning from plain label vectors (z true = correct).
BatchPartitions partition_labels(const std::vector<std::string>& exercise_type,
                                 const std::vector<bool>& correct);

// The printed loss divides by hard negatives plus *all* other views
// (literal); the surrounding prose restricts the second sum to views of
// other exercise types (prose). Both are provided; literal is the default.
enum class DenominatorMode { literal, prose };

DenominatorMode parse_denominator_mode(const std::string& s);
const char* to_string(DenominatorMode m);

struct LossConfig {
    double temperature = 0.1;
    DenominatorMode denominator_mode = DenominatorMode::literal;

    void validate() const;
};

double cosine_sim(std::span<const double> u, std::span<const double> v);

struct AnchorDiagnostics {
    long index = 0;
    long positives = 0;  // same-type correct views other than the anchor
    long hard = 0;       // same-type incorrect views
    long soft = 0;       // views of other exercise types
};

struct LossDiagnostics {
    long anchor_count = 0;
    long skipped_anchors = 0;  // anchors with no positive partner
    double mean_positives = 0;
    double mean_hard = 0;
    double mean_soft = 0;
    double loss_mean_per_anchor = 0;
    std::vector<AnchorDiagnostics> per_anchor;
};

struct LossResult {
    double loss = 0;  // plain sum over anchors, as printed
    LossDiagnostics diagnostics;
};

// Supervised contrastive loss with hard and soft negatives. embeddings is
// 2N x d_p; grad (optional) receives d loss / d embeddings of the same shape.
LossResult contrastive_loss(const Tensor& embeddings, const BatchPartitions& partitions,
                            const LossConfig& config, Tensor* grad = nullptr);

}  // namespace rehabcl
