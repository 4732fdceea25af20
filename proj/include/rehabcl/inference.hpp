#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "rehabcl/common.hpp"
#include "rehabcl/model.hpp"
#include "rehabcl/skeleton_data.hpp"
#include "rehabcl/tensor.hpp"

namespace rehabcl {

enum class HeadMode { with_projection, encoder_only };

HeadMode parse_head_mode(const std::string& s);
const char* to_string(HeadMode m);

// Per-exercise-type reference vectors with decision thresholds.
struct ReferenceSet {
    std::map<std::string, std::vector<double>> references;  // type -> r_c
    std::map<std::string, double> thresholds;               // type -> theta_c
    double variance_epsilon = 1e-8;
    HeadMode head_mode = HeadMode::with_projection;
    std::string checkpoint_id;

    void save(const std::filesystem::path& path) const;
    static ReferenceSet load(const std::filesystem::path& path);
};

// Inverse-variance weighted aggregate of correct-sample embeddings:
// w = 1 / (Var(V) + eps) per feature dimension (population variance by
// default), r = (w / |w|_1) ⊙ column-sum of V. V is M x d with M >= 2.
std::vector<double> build_reference(const Tensor& correct_embeddings, double epsilon = 1e-8,
                                    bool population_variance = true);

struct ReferenceOptions {
    double variance_epsilon = 1e-8;
    bool population_variance = true;
    double default_threshold = 0.5;
};

// Embeds every correct training sample of each type (batched, inference
// mode) and builds its reference. Types with fewer than two correct samples
// are omitted with a warning.
ReferenceSet build_reference_set(const ModelState& state, const Dataset& train_data, HeadMode head_mode,
                                 const ReferenceOptions& options = {}, Warnings* warnings = nullptr);

// Cosine similarity between the sample's embedding and its type's reference.
double score_sample(const ModelState& state, const ReferenceSet& refs, const LabeledSample& sample);

// All samples at once (one forward pass per batch); order follows data.samples.
std::vector<double> score_dataset(const ModelState& state, const ReferenceSet& refs, const Dataset& data);

inline Assessment classify(double p_hat, double theta) {
    return p_hat >= theta ? Assessment::correct : Assessment::incorrect;
}

// Per-type threshold that maximizes balanced accuracy over training scores,
// scanning midpoints between consecutive sorted scores; ties break toward
// the larger (stricter) threshold. Types missing a class keep the default.
ReferenceSet calibrate_thresholds(const ModelState& state, ReferenceSet refs, const Dataset& train_data,
                                  Warnings* warnings = nullptr);

// Exposed for tests: the scan on plain score/label vectors.
double calibrate_threshold_scan(const std::vector<double>& scores, const std::vector<bool>& correct,
                                double fallback, bool* degenerate = nullptr);

}  // namespace rehabcl
