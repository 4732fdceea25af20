#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "rehabcl/common.hpp"
#include "rehabcl/tensor.hpp"

namespace rehabcl {

// Undirected joint topology of a skeleton. Joint indices are 0-based.
struct SkeletonGraph {
    int joint_count = 0;
    std::vector<std::pair<int, int>> edges;
    int root_joint = 0;

    // Throws ArgumentError on out-of-range endpoints, self-loops, duplicate
    // edges, or a disconnected graph.
    void validate() const;

    // BFS hop distance from the root joint. Throws on disconnected graphs.
    std::vector<int> hop_distance_from_root() const;

    bool operator==(const SkeletonGraph&) const = default;

    // 25-joint Kinect One topology (IRDS and KIMORE captures).
    static SkeletonGraph kinect_one();
    // 22-joint topology of the UI-PRMD Kinect position files.
    static SkeletonGraph uiprmd_kinect();
};

// One motion sample: frames is a T x J x C array of joint coordinates.
struct SkeletonSequence {
    Tensor frames;
    double fps = 30.0;

    long frame_count() const { return frames.rank() == 3 ? frames.dim(0) : 0; }
    long joint_count() const { return frames.rank() == 3 ? frames.dim(1) : 0; }
    long channel_count() const { return frames.rank() == 3 ? frames.dim(2) : 0; }

    // T >= 2, C >= 2, all entries finite, J matches expected_joints when given.
    void validate(int expected_joints = -1) const;
};

enum class Assessment { correct, incorrect };

inline const char* to_string(Assessment a) { return a == Assessment::correct ? "+" : "-"; }

struct LabeledSample {
    SkeletonSequence sequence;
    std::string exercise_type;
    std::optional<Assessment> assessment;     // binary datasets
    std::optional<double> clinical_score;     // KIMORE-style, in [0, 50]
    std::string subject_id;
    std::string id;

    void validate() const;
};

struct Dataset {
    SkeletonGraph graph;
    std::vector<LabeledSample> samples;
    std::string name;

    void validate() const;
    std::vector<std::string> exercise_types() const;  // sorted, unique
};

enum class DatasetKind { uiprmd, irds, kimore, canonical };

DatasetKind parse_dataset_kind(const std::string& s);

struct IngestOptions {
    // Translate every frame so the root joint sits at the origin. Applied by
    // the raw-dataset adapters; canonical ingestion always reads files as-is.
    bool center_root = true;
    int threads = 0;  // 0 = pick from hardware / REHABCL_THREADS
};

// Reads one of the supported raw layouts (or a canonical directory) into the
// in-memory model. Non-finite joint values are repaired by temporal
// interpolation; a fully non-finite joint track rejects the sample.
Dataset ingest(DatasetKind kind, const std::filesystem::path& root, const IngestOptions& options = {},
               Warnings* warnings = nullptr);

// Linear per-channel re-sampling onto a uniform grid of target_length frames.
// Endpoints are preserved exactly; target_length == T returns a copy.
SkeletonSequence resample_temporal(const SkeletonSequence& sequence, long target_length);

// Translate each frame so the root joint is at the origin (first min(C,3)
// channels only).
void center_root_joint(SkeletonSequence& sequence, int root_joint);

struct ExportSummary {
    long sample_count = 0;
    std::map<std::string, long> per_type;
    std::filesystem::path path;
};

// Writes the canonical directory layout: meta.json, manifest.jsonl and one
// whitespace-separated T x (J*C) text matrix per sample.
ExportSummary export_canonical(const Dataset& dataset, const std::filesystem::path& out_path);

Dataset ingest_canonical(const std::filesystem::path& root);

enum class SplitScheme { ratio_3_1, kfold_5 };

SplitScheme parse_split_scheme(const std::string& s);
const char* to_string(SplitScheme s);

struct SplitPair {
    Dataset train;
    Dataset validation;
};

struct SplitOptions {
    bool subject_aware = false;  // keep each subject entirely on one side
};

// ratio_3_1: one ~75/25 pair, stratified by (exercise_type, class).
// kfold_5: five pairs with disjoint validation folds covering the dataset.
// Deterministic for a fixed seed regardless of input sample order.
std::vector<SplitPair> split(const Dataset& dataset, SplitScheme scheme, std::uint64_t seed,
                             const SplitOptions& options = {}, Warnings* warnings = nullptr);

}  // namespace rehabcl
