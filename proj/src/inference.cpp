#include "rehabcl/inference.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include <nlohmann/json.hpp>

#include "rehabcl/contrastive.hpp"

namespace rehabcl {

using json = nlohmann::ordered_json;

HeadMode parse_head_mode(const std::string& s) {
    if (s == "with_projection") return HeadMode::with_projection;
    if (s == "encoder_only") return HeadMode::encoder_only;
    throw ArgumentError("unknown head mode: '" + s + "' (expected with_projection or encoder_only)");
}

const char* to_string(HeadMode m) {
    return m == HeadMode::with_projection ? "with_projection" : "encoder_only";
}

// ---------------------------------------------------------------------------
// Reference construction

std::vector<double> build_reference(const Tensor& correct_embeddings, double epsilon,
                                    bool population_variance) {
    if (correct_embeddings.rank() != 2)
        throw ArgumentError("build_reference: embeddings must be M x d");
    const long m = correct_embeddings.dim(0), dim = correct_embeddings.dim(1);
    if (m < 2) throw ArgumentError("insufficient correct samples for reference (need >= 2)");
    if (!correct_embeddings.all_finite()) throw ArgumentError("build_reference: non-finite embedding");

    std::vector<double> mean(static_cast<size_t>(dim), 0.0), var(static_cast<size_t>(dim), 0.0),
        sum(static_cast<size_t>(dim), 0.0);
    for (long r = 0; r < m; ++r)
        for (long d = 0; d < dim; ++d) sum[static_cast<size_t>(d)] += correct_embeddings(r, d);
    for (long d = 0; d < dim; ++d) mean[static_cast<size_t>(d)] = sum[static_cast<size_t>(d)] / m;
    for (long r = 0; r < m; ++r)
        for (long d = 0; d < dim; ++d) {
            double diff = correct_embeddings(r, d) - mean[static_cast<size_t>(d)];
            var[static_cast<size_t>(d)] += diff * diff;
        }
    const double denom = population_variance ? static_cast<double>(m) : static_cast<double>(m - 1);
    double weight_l1 = 0;
    std::vector<double> weight(static_cast<size_t>(dim));
    for (long d = 0; d < dim; ++d) {
        weight[static_cast<size_t>(d)] = 1.0 / (var[static_cast<size_t>(d)] / denom + epsilon);
        weight_l1 += std::abs(weight[static_cast<size_t>(d)]);
    }
    std::vector<double> reference(static_cast<size_t>(dim));
    for (long d = 0; d < dim; ++d)
        reference[static_cast<size_t>(d)] =
            weight[static_cast<size_t>(d)] / weight_l1 * sum[static_cast<size_t>(d)];
    return reference;
}

namespace {

// Stacks the sequences of the given samples into a B x T x J x C tensor.
Tensor stack_views(const Dataset& data, const std::vector<size_t>& indices) {
    const auto& first = data.samples[indices.front()].sequence;
    const long t_len = first.frame_count(), joints = first.joint_count(), channels = first.channel_count();
    Tensor views({static_cast<long>(indices.size()), t_len, joints, channels});
    long row = 0;
    for (size_t idx : indices) {
        const auto& seq = data.samples[idx].sequence;
        if (seq.frame_count() != t_len || seq.joint_count() != joints || seq.channel_count() != channels)
            throw ArgumentError("samples must share T x J x C shape for batched embedding (run prepare "
                                "with a fixed target length)");
        std::copy(seq.frames.raw().begin(), seq.frames.raw().end(),
                  views.data() + row * t_len * joints * channels);
        ++row;
    }
    return views;
}

Tensor embed_samples(const ModelState& state, const Dataset& data, const std::vector<size_t>& indices,
                     HeadMode head_mode) {
    Tensor views = stack_views(data, indices);
    return state.embed(views, head_mode == HeadMode::with_projection);
}

}  // namespace

ReferenceSet build_reference_set(const ModelState& state, const Dataset& train_data, HeadMode head_mode,
                                 const ReferenceOptions& options, Warnings* warnings) {
    std::map<std::string, std::vector<size_t>> correct_by_type;
    for (size_t i = 0; i < train_data.samples.size(); ++i) {
        const auto& s = train_data.samples[i];
        if (s.assessment && *s.assessment == Assessment::correct)
            correct_by_type[s.exercise_type].push_back(i);
    }

    ReferenceSet refs;
    refs.head_mode = head_mode;
    refs.variance_epsilon = options.variance_epsilon;
    for (const auto& [type, indices] : correct_by_type) {
        if (indices.size() < 2) {
            warn(warnings, "exercise type " + type + " has fewer than 2 correct samples; omitted from "
                           "reference set");
            continue;
        }
        Tensor embeddings = embed_samples(state, train_data, indices, head_mode);
        refs.references[type] =
            build_reference(embeddings, options.variance_epsilon, options.population_variance);
        refs.thresholds[type] = options.default_threshold;
    }
    if (refs.references.empty())
        throw ArgumentError("no exercise type has at least 2 correct samples; cannot build references");
    return refs;
}

double score_sample(const ModelState& state, const ReferenceSet& refs, const LabeledSample& sample) {
    auto it = refs.references.find(sample.exercise_type);
    if (it == refs.references.end())
        throw ArgumentError("reference set has no entry for exercise type '" + sample.exercise_type + "'");
    SkeletonSequence seq = sample.sequence;
    if (state.meta().canonical_frames > 1 && seq.frame_count() != state.meta().canonical_frames)
        seq = resample_temporal(seq, state.meta().canonical_frames);
    const long t_len = seq.frame_count(), joints = seq.joint_count(), channels = seq.channel_count();
    Tensor views({1, t_len, joints, channels});
    std::copy(seq.frames.raw().begin(), seq.frames.raw().end(), views.data());
    Tensor emb = state.embed(views, refs.head_mode == HeadMode::with_projection);
    std::span<const double> v(emb.data(), static_cast<size_t>(emb.dim(1)));
    return cosine_sim(v, it->second);
}

std::vector<double> score_dataset(const ModelState& state, const ReferenceSet& refs, const Dataset& data) {
    std::vector<double> scores(data.samples.size(), 0.0);
    // Batch per exercise type so each type is a single forward pass.
    std::map<std::string, std::vector<size_t>> by_type;
    for (size_t i = 0; i < data.samples.size(); ++i)
        by_type[data.samples[i].exercise_type].push_back(i);
    for (const auto& [type, indices] : by_type) {
        auto ref_it = refs.references.find(type);
        if (ref_it == refs.references.end())
            throw ArgumentError("reference set has no entry for exercise type '" + type + "'");
        Tensor embeddings = embed_samples(state, data, indices, refs.head_mode);
        const long dim = embeddings.dim(1);
        for (long r = 0; r < static_cast<long>(indices.size()); ++r) {
            std::span<const double> v(embeddings.data() + r * dim, static_cast<size_t>(dim));
            scores[indices[static_cast<size_t>(r)]] = cosine_sim(v, ref_it->second);
        }
    }
    return scores;
}

// ---------------------------------------------------------------------------
// Threshold calibration

double calibrate_threshold_scan(const std::vector<double>& scores, const std::vector<bool>& correct,
                                double fallback, bool* degenerate) {
    if (scores.size() != correct.size()) throw ArgumentError("calibrate: size mismatch");
    long pos = 0, neg = 0;
    for (bool c : correct) (c ? pos : neg) += 1;
    if (degenerate) *degenerate = false;
    if (pos == 0 || neg == 0) {
        if (degenerate) *degenerate = true;
        return fallback;
    }
    std::vector<double> sorted = scores;
    std::sort(sorted.begin(), sorted.end());
    sorted.erase(std::unique(sorted.begin(), sorted.end()), sorted.end());
    if (sorted.size() < 2) {
        if (degenerate) *degenerate = true;
        return fallback;
    }
    std::vector<double> candidates;
    for (size_t i = 0; i + 1 < sorted.size(); ++i)
        candidates.push_back(0.5 * (sorted[i] + sorted[i + 1]));

    double best_theta = fallback, best_balanced = -1.0;
    for (double theta : candidates) {
        long tp = 0, tn = 0;
        for (size_t i = 0; i < scores.size(); ++i) {
            bool predicted_correct = scores[i] >= theta;
            if (correct[i] && predicted_correct) ++tp;
            if (!correct[i] && !predicted_correct) ++tn;
        }
        double balanced = 0.5 * (static_cast<double>(tp) / pos + static_cast<double>(tn) / neg);
        if (balanced > best_balanced || (balanced == best_balanced && theta > best_theta)) {
            best_balanced = balanced;
            best_theta = theta;
        }
    }
    return best_theta;
}

ReferenceSet calibrate_thresholds(const ModelState& state, ReferenceSet refs, const Dataset& train_data,
                                  Warnings* warnings) {
    std::map<std::string, std::vector<size_t>> by_type;
    for (size_t i = 0; i < train_data.samples.size(); ++i)
        by_type[train_data.samples[i].exercise_type].push_back(i);

    auto scores = score_dataset(state, refs, train_data);
    for (auto& [type, reference] : refs.references) {
        auto it = by_type.find(type);
        if (it == by_type.end()) {
            warn(warnings, "no training samples of type " + type + "; threshold left at default");
            continue;
        }
        std::vector<double> type_scores;
        std::vector<bool> type_correct;
        for (size_t idx : it->second) {
            const auto& s = train_data.samples[idx];
            if (!s.assessment) continue;
            type_scores.push_back(scores[idx]);
            type_correct.push_back(*s.assessment == Assessment::correct);
        }
        bool degenerate = false;
        double theta =
            calibrate_threshold_scan(type_scores, type_correct, refs.thresholds[type], &degenerate);
        if (degenerate)
            warn(warnings, "type " + type + " lacks both classes or distinct scores; default threshold kept");
        refs.thresholds[type] = std::clamp(theta, -1.0, 1.0);
    }
    return refs;
}

// ---------------------------------------------------------------------------
// Serialization

void ReferenceSet::save(const std::filesystem::path& path) const {
    json doc;
    doc["format"] = "rehabcl-references";
    doc["version"] = 1;
    doc["head_mode"] = to_string(head_mode);
    doc["variance_epsilon"] = variance_epsilon;
    doc["checkpoint"] = checkpoint_id;
    doc["references"] = json::object();
    for (const auto& [type, vec] : references) {
        json entry;
        entry["threshold"] = thresholds.count(type) ? thresholds.at(type) : 0.5;
        entry["vector"] = vec;
        doc["references"][type] = std::move(entry);
    }
    std::ofstream out(path);
    if (!out) throw IoError("cannot write " + path.string());
    out << doc.dump(2) << "\n";
    if (!out) throw IoError("failed writing " + path.string());
}

ReferenceSet ReferenceSet::load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path.string());
    json doc;
    try {
        in >> doc;
    } catch (const json::exception& e) {
        throw ParseError("invalid JSON in " + path.string() + ": " + e.what());
    }
    if (doc.value("format", "") != "rehabcl-references")
        throw ParseError(path.string() + " is not a reference-set file");
    ReferenceSet refs;
    refs.head_mode = parse_head_mode(doc.at("head_mode").get<std::string>());
    refs.variance_epsilon = doc.value("variance_epsilon", 1e-8);
    refs.checkpoint_id = doc.value("checkpoint", "");
    for (const auto& [type, entry] : doc.at("references").items()) {
        refs.references[type] = entry.at("vector").get<std::vector<double>>();
        refs.thresholds[type] = entry.at("threshold").get<double>();
    }
    return refs;
}

}  // namespace rehabcl
