#include "rehabcl/synthetic.hpp"

#include <array>
#include <cmath>
#include <cstdio>

namespace rehabcl {

namespace {

constexpr double kPi = 3.14159265358979323846;

// Rest pose, root-centered.
constexpr std::array<std::array<double, 3>, 8> kRestPose = {{
    {0.0, 0.0, 0.0},     // pelvis
    {0.0, 0.5, 0.0},     // spine
    {0.0, 0.9, 0.0},     // head
    {-0.45, 0.55, 0.0},  // left elbow
    {-0.75, 0.55, 0.0},  // left hand
    {0.45, 0.55, 0.0},   // right elbow
    {0.75, 0.55, 0.0},   // right hand
    {0.0, -0.8, 0.0},    // legs
}};

// Per-joint motion gain: hands swing twice as far as elbows, head wobbles.
constexpr std::array<double, 8> kJointGain = {0.0, 0.05, 0.1, 0.25, 0.5, 0.25, 0.5, 0.0};
constexpr std::array<bool, 8> kLeftSide = {false, false, false, true, true, false, false, false};
constexpr std::array<bool, 8> kRightSide = {false, false, false, false, false, true, true, false};

struct MotionPattern {
    std::array<double, 3> direction;
    double frequency;  // cycles per sequence
};

MotionPattern pattern_for_type(int type_index) {
    static const std::array<std::array<double, 3>, 3> directions = {{
        {0.0, 1.0, 0.0},
        {0.0, 0.0, 1.0},
        {1.0, 0.0, 0.0},
    }};
    MotionPattern p;
    p.direction = directions[static_cast<size_t>(type_index % 3)];
    p.frequency = 1.0 + 0.5 * static_cast<double>(type_index);
    return p;
}

SkeletonSequence render(const MotionPattern& pattern, long frames, double left_scale, double right_scale,
                        double phase, double noise_sigma, Rng& rng) {
    SkeletonSequence seq;
    seq.fps = 30.0;
    seq.frames = Tensor({frames, 8, 3});
    std::normal_distribution<double> noise(0.0, noise_sigma);
    for (long t = 0; t < frames; ++t) {
        double tau = static_cast<double>(t) / static_cast<double>(frames - 1);
        double wave = std::sin(2.0 * kPi * pattern.frequency * (tau + phase));
        for (long j = 0; j < 8; ++j) {
            double scale = kLeftSide[static_cast<size_t>(j)]
                               ? left_scale
                               : (kRightSide[static_cast<size_t>(j)] ? right_scale
                                                                     : 0.5 * (left_scale + right_scale));
            double amp = kJointGain[static_cast<size_t>(j)] * scale * wave;
            for (long c = 0; c < 3; ++c) {
                double v = kRestPose[static_cast<size_t>(j)][static_cast<size_t>(c)] +
                           amp * pattern.direction[static_cast<size_t>(c)];
                if (noise_sigma > 0) v += noise(rng);
                seq.frames(t, j, c) = v;
            }
        }
    }
    // Keep the root-centered convention of the ingestion pipeline.
    center_root_joint(seq, 0);
    return seq;
}

std::string two_digits(int v) {
    char buf[16];
    std::snprintf(buf, sizeof buf, "%02d", v);
    return buf;
}

}  // namespace

SkeletonGraph synthetic_graph() {
    SkeletonGraph g;
    g.joint_count = 8;
    g.root_joint = 0;
    g.edges = {{0, 1}, {1, 2}, {1, 3}, {3, 4}, {1, 5}, {5, 6}, {0, 7}};
    return g;
}

Dataset make_synthetic_classification(const SyntheticConfig& config) {
    if (config.types < 1 || config.samples_per_type < 2 || config.frames < 4)
        throw ArgumentError("SyntheticConfig: need >= 1 type, >= 2 samples per type, >= 4 frames");
    Dataset ds;
    ds.name = "synthetic";
    ds.graph = synthetic_graph();
    Rng rng(config.seed);
    std::uniform_real_distribution<double> phase(0.0, 0.2);
    std::normal_distribution<double> amp_jitter(1.0, 0.05);
    std::uniform_real_distribution<double> reduced(0.3, 0.55);
    std::uniform_real_distribution<double> asym(0.2, 0.5);

    for (int type_index = 0; type_index < config.types; ++type_index) {
        const std::string type = "s" + two_digits(type_index + 1);
        const MotionPattern pattern = pattern_for_type(type_index);
        for (int k = 0; k < config.samples_per_type; ++k) {
            const bool correct = k < (config.samples_per_type + 1) / 2;
            double left = amp_jitter(rng), right = amp_jitter(rng);
            if (!correct) {
                if (k % 2 == 0) {  // amplitude-reduced variant
                    double r = reduced(rng);
                    left *= r;
                    right *= r;
                } else {  // asymmetric variant
                    left *= asym(rng);
                }
            }
            LabeledSample s;
            s.sequence = render(pattern, config.frames, left, right, phase(rng), config.noise_sigma, rng);
            s.exercise_type = type;
            s.assessment = correct ? Assessment::correct : Assessment::incorrect;
            s.subject_id = "p" + two_digits(k % 5 + 1);
            char id[32];
            std::snprintf(id, sizeof id, "%s_%04d%s", type.c_str(), k, correct ? "" : "_inc");
            s.id = id;
            ds.samples.push_back(std::move(s));
        }
    }
    ds.validate();
    return ds;
}

Dataset make_synthetic_regression(const SyntheticConfig& config, const std::string& exercise_type) {
    if (config.samples_per_type < 2 || config.frames < 4)
        throw ArgumentError("SyntheticConfig: need >= 2 samples and >= 4 frames");
    Dataset ds;
    ds.name = "synthetic-regression";
    ds.graph = synthetic_graph();
    Rng rng(config.seed);
    std::uniform_real_distribution<double> phase(0.0, 0.2);
    std::normal_distribution<double> amp_jitter(1.0, 0.03);

    const MotionPattern pattern = pattern_for_type(0);
    for (int k = 0; k < config.samples_per_type; ++k) {
        // Graded corruption from pristine to heavily degraded, shuffled order.
        double m = static_cast<double>(k) / static_cast<double>(config.samples_per_type - 1);
        double left = amp_jitter(rng) * (1.0 - 0.65 * m);
        double right = amp_jitter(rng) * (1.0 - 0.30 * m);
        LabeledSample s;
        s.sequence = render(pattern, config.frames, left, right, phase(rng), config.noise_sigma, rng);
        s.exercise_type = exercise_type;
        s.clinical_score = 50.0 * (1.0 - m);
        s.subject_id = "p" + two_digits(k % 5 + 1);
        char id[32];
        std::snprintf(id, sizeof id, "%s_r%04d", exercise_type.c_str(), k);
        s.id = id;
        ds.samples.push_back(std::move(s));
    }
    ds.validate();
    return ds;
}

}  // namespace rehabcl
