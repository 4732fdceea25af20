#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "rehabcl/common.hpp"
#include "rehabcl/inference.hpp"
#include "rehabcl/model.hpp"
#include "rehabcl/skeleton_data.hpp"

namespace rehabcl {

// Fraction of exact matches.
double accuracy(const std::vector<Assessment>& predictions, const std::vector<Assessment>& truth);

// Mann-Whitney formulation: probability that a random correct sample
// outscores a random incorrect one, ties counted half.
double auc_roc(const std::vector<double>& scores, const std::vector<Assessment>& truth);

// Average precision (precision at each recall step, thresholds at distinct
// score values); "+" is the positive class.
double auc_pr(const std::vector<double>& scores, const std::vector<Assessment>& truth);

// Pearson correlation of average ranks.
double spearman(const std::vector<double>& pred_scores, const std::vector<double>& truth_scores);

struct TypeMetrics {
    std::optional<double> accuracy;
    std::optional<double> auc_roc;
    std::optional<double> auc_pr;
    long sample_count = 0;
    std::vector<std::string> errors;  // per-metric failures, not fatal
};

struct EvalReport {
    std::map<std::string, TypeMetrics> per_exercise;
    TypeMetrics macro_average;  // unweighted mean over types with defined values
    SplitScheme protocol = SplitScheme::ratio_3_1;
    std::uint64_t seed = 0;

    std::string to_json_string() const;
    // Aligned-column table, one row per exercise plus the average row.
    std::string to_table() const;
};

// Scores `data` against `refs` and aggregates per-exercise metrics. The
// protocol/seed arguments are recorded in the report.
EvalReport evaluate(const ModelState& state, const ReferenceSet& refs, const Dataset& data,
                    SplitScheme protocol, std::uint64_t seed);

struct ProtocolOptions {
    HeadMode head_mode = HeadMode::with_projection;
    double variance_epsilon = 1e-8;
    bool calibrate = true;  // per-fold threshold calibration on the train part
};

// Split-orchestrated evaluation with a trained model: references (and
// thresholds) are built on each fold's training part, validation predictions
// are pooled across folds, then metrics are computed per exercise type.
EvalReport evaluate_protocol(const ModelState& state, const Dataset& data, SplitScheme scheme,
                             std::uint64_t seed, const ProtocolOptions& options = {},
                             Warnings* warnings = nullptr);

struct EmbeddingExportOptions {
    HeadMode head_mode = HeadMode::with_projection;
    bool project_2d = false;  // append a t-SNE projection
    double perplexity = 20.0;
    std::uint64_t seed = 0;
    const ReferenceSet* refs = nullptr;  // mark reference rows when given
};

// Tab-separated table: id, exercise_type, assessment, e0..e{d-1}
// [, proj_x, proj_y]. Reference rows use id "ref:<type>" and assessment "ref".
void export_embeddings(const ModelState& state, const Dataset& data,
                       const std::filesystem::path& out_path, const EmbeddingExportOptions& options = {});

// Exact t-SNE with 2 components; rows of `points` are the inputs.
std::vector<std::array<double, 2>> tsne_project(const Tensor& points, double perplexity,
                                                std::uint64_t seed, int iterations = 500);

// RBF-kernel SVM probe (C = 1, gamma = 0.0078 by default): trains on the
// given embeddings and reports validation accuracy.
double svm_probe(const Tensor& train_embeddings, const std::vector<Assessment>& train_labels,
                 const Tensor& val_embeddings, const std::vector<Assessment>& val_labels, double c = 1.0,
                 double gamma = 0.0078);

}  // namespace rehabcl
