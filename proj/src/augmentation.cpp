#include "rehabcl/augmentation.hpp"

#include <array>
#include <cmath>

namespace rehabcl {

void AugmentationConfig::validate() const {
    auto check_interval = [](const Interval& iv, const char* name, double min_lo) {
        if (iv.lo > iv.hi) throw ArgumentError(std::string("AugmentationConfig: ") + name + " inverted");
        if (iv.lo < min_lo) throw ArgumentError(std::string("AugmentationConfig: ") + name + " below range");
    };
    if (shear_range < 0) throw ArgumentError("AugmentationConfig: shear_range negative");
    if (rotation_range < 0) throw ArgumentError("AugmentationConfig: rotation_range negative");
    if (noise_sigma < 0) throw ArgumentError("AugmentationConfig: noise_sigma negative");
    check_interval(resample_factor_range, "resample_factor_range", 0.0);
    check_interval(crop_fraction_range, "crop_fraction_range", 0.0);
    check_interval(blur_sigma_range, "blur_sigma_range", 0.0);
    if (crop_fraction_range.lo <= 0.0 || crop_fraction_range.hi > 1.0)
        throw ArgumentError("AugmentationConfig: crop fractions must lie in (0, 1]");
    if (apply_probability < 0.0 || apply_probability > 1.0)
        throw ArgumentError("AugmentationConfig: apply_probability outside [0, 1]");
}

namespace {

using Mat3 = std::array<std::array<double, 3>, 3>;

Mat3 identity3() {
    return {{{1, 0, 0}, {0, 1, 0}, {0, 0, 1}}};
}

Mat3 matmul3(const Mat3& a, const Mat3& b) {
    Mat3 r{};
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) {
            double s = 0;
            for (int k = 0; k < 3; ++k) s += a[i][k] * b[k][j];
            r[i][j] = s;
        }
    return r;
}

// Applies a linear map to the first `spatial` coordinate channels of every joint.
void apply_linear(SkeletonSequence& seq, const Mat3& m, long spatial) {
    const long t_count = seq.frame_count(), joints = seq.joint_count();
    for (long t = 0; t < t_count; ++t)
        for (long j = 0; j < joints; ++j) {
            double in[3] = {0, 0, 0};
            for (long c = 0; c < spatial; ++c) in[c] = seq.frames(t, j, c);
            for (long c = 0; c < spatial; ++c) {
                double v = 0;
                for (long k = 0; k < spatial; ++k) v += m[c][k] * in[k];
                seq.frames(t, j, c) = v;
            }
        }
}

Mat3 random_shear(double range, long spatial, Rng& rng) {
    std::uniform_real_distribution<double> u(-range, range);
    Mat3 m = identity3();
    for (long i = 0; i < spatial; ++i)
        for (long j = 0; j < spatial; ++j)
            if (i != j) m[i][j] = u(rng);
    return m;
}

Mat3 random_rotation(double range, long spatial, Rng& rng) {
    std::uniform_real_distribution<double> u(-range, range);
    if (spatial == 2) {
        double a = u(rng);
        Mat3 m = identity3();
        m[0][0] = std::cos(a);
        m[0][1] = -std::sin(a);
        m[1][0] = std::sin(a);
        m[1][1] = std::cos(a);
        return m;
    }
    double ax = u(rng), ay = u(rng), az = u(rng);
    Mat3 rx = identity3(), ry = identity3(), rz = identity3();
    rx[1][1] = std::cos(ax); rx[1][2] = -std::sin(ax);
    rx[2][1] = std::sin(ax); rx[2][2] = std::cos(ax);
    ry[0][0] = std::cos(ay); ry[0][2] = std::sin(ay);
    ry[2][0] = -std::sin(ay); ry[2][2] = std::cos(ay);
    rz[0][0] = std::cos(az); rz[0][1] = -std::sin(az);
    rz[1][0] = std::sin(az); rz[1][1] = std::cos(az);
    return matmul3(rz, matmul3(ry, rx));
}

void gaussian_blur_time(SkeletonSequence& seq, double sigma) {
    if (sigma < 1e-3) return;
    const long t_count = seq.frame_count(), joints = seq.joint_count(), channels = seq.channel_count();
    const long half = static_cast<long>(std::ceil(3.0 * sigma));
    std::vector<double> kernel(static_cast<size_t>(2 * half + 1));
    double sum = 0;
    for (long k = -half; k <= half; ++k) {
        double w = std::exp(-0.5 * (k * k) / (sigma * sigma));
        kernel[static_cast<size_t>(k + half)] = w;
        sum += w;
    }
    for (auto& w : kernel) w /= sum;

    std::vector<double> track(static_cast<size_t>(t_count));
    for (long j = 0; j < joints; ++j)
        for (long c = 0; c < channels; ++c) {
            for (long t = 0; t < t_count; ++t) track[static_cast<size_t>(t)] = seq.frames(t, j, c);
            for (long t = 0; t < t_count; ++t) {
                double v = 0;
                for (long k = -half; k <= half; ++k) {
                    long src = std::clamp(t + k, 0L, t_count - 1);
                    v += kernel[static_cast<size_t>(k + half)] * track[static_cast<size_t>(src)];
                }
                seq.frames(t, j, c) = v;
            }
        }
}

}  // namespace

SkeletonSequence augment(const SkeletonSequence& sequence, const AugmentationConfig& config, Rng& draw) {
    sequence.validate();
    config.validate();
    const long canonical_t = sequence.frame_count();
    const long spatial = std::min<long>(sequence.channel_count(), 3);
    std::uniform_real_distribution<double> coin(0.0, 1.0);
    auto fires = [&] { return coin(draw) < config.apply_probability; };

    SkeletonSequence out = sequence;

    // The shared per-sample linear map composes shear and rotation so the
    // whole trajectory transforms rigidly.
    Mat3 linear = identity3();
    bool have_linear = false;
    if (config.shear_range > 0 && fires()) {
        linear = random_shear(config.shear_range, spatial, draw);
        have_linear = true;
    }
    if (config.rotation_range > 0 && fires()) {
        Mat3 rot = random_rotation(config.rotation_range, spatial, draw);
        linear = have_linear ? matmul3(rot, linear) : rot;
        have_linear = true;
    }
    if (have_linear) apply_linear(out, linear, spatial);

    bool resample_active = config.resample_factor_range.lo != 1.0 || config.resample_factor_range.hi != 1.0;
    if (resample_active && fires()) {
        std::uniform_real_distribution<double> u(config.resample_factor_range.lo,
                                                 config.resample_factor_range.hi);
        long length = std::max<long>(2, std::lround(canonical_t * u(draw)));
        if (length != canonical_t) out = resample_temporal(out, length);
    }

    bool crop_active = config.crop_fraction_range.lo < 1.0;
    if (crop_active && fires()) {
        std::uniform_real_distribution<double> u(config.crop_fraction_range.lo,
                                                 config.crop_fraction_range.hi);
        const long t_cur = out.frame_count();
        long window = std::clamp<long>(std::lround(t_cur * u(draw)), 2, t_cur);
        if (window < t_cur) {
            std::uniform_int_distribution<long> start_dist(0, t_cur - window);
            long start = start_dist(draw);
            SkeletonSequence cropped;
            cropped.fps = out.fps;
            cropped.frames = Tensor({window, out.joint_count(), out.channel_count()});
            for (long t = 0; t < window; ++t)
                for (long j = 0; j < out.joint_count(); ++j)
                    for (long c = 0; c < out.channel_count(); ++c)
                        cropped.frames(t, j, c) = out.frames(start + t, j, c);
            out = cropped;
        }
    }

    if (out.frame_count() != canonical_t) out = resample_temporal(out, canonical_t);

    if (config.blur_sigma_range.hi > 0 && fires()) {
        std::uniform_real_distribution<double> u(config.blur_sigma_range.lo, config.blur_sigma_range.hi);
        gaussian_blur_time(out, u(draw));
    }

    if (config.noise_sigma > 0 && fires()) {
        std::normal_distribution<double> n(0.0, config.noise_sigma);
        for (double& v : out.frames.raw()) v += n(draw);
    }
    return out;
}

ViewBatch build_two_view_batch(std::span<const LabeledSample* const> tuples,
                               const AugmentationConfig& config, Rng& draw) {
    if (tuples.empty()) throw ArgumentError("build_two_view_batch: empty tuple list");
    const long n = static_cast<long>(tuples.size());
    const auto& first = tuples[0]->sequence;
    const long t_count = first.frame_count(), joints = first.joint_count(), channels = first.channel_count();
    for (const auto* s : tuples) {
        s->validate();
        if (s->sequence.frame_count() != t_count || s->sequence.joint_count() != joints ||
            s->sequence.channel_count() != channels)
            throw ArgumentError("build_two_view_batch: tuples must share T x J x C shape");
    }

    ViewBatch batch;
    batch.views = Tensor({2 * n, t_count, joints, channels});
    batch.exercise_type.resize(static_cast<size_t>(2 * n));
    batch.assessment.resize(static_cast<size_t>(2 * n));
    batch.origin_index.resize(static_cast<size_t>(2 * n));
    for (long k = 0; k < n; ++k) {
        const auto* sample = tuples[static_cast<size_t>(k)];
        for (int view = 0; view < 2; ++view) {
            SkeletonSequence augmented = augment(sample->sequence, config, draw);
            const long row = 2 * k + view;
            double* dst = batch.views.data() + row * t_count * joints * channels;
            std::copy(augmented.frames.raw().begin(), augmented.frames.raw().end(), dst);
            batch.exercise_type[static_cast<size_t>(row)] = sample->exercise_type;
            batch.assessment[static_cast<size_t>(row)] = sample->assessment;
            batch.origin_index[static_cast<size_t>(row)] = k;
        }
    }
    return batch;
}

ViewBatch build_two_view_batch(const std::vector<LabeledSample>& tuples, const AugmentationConfig& config,
                               Rng& draw) {
    std::vector<const LabeledSample*> ptrs;
    ptrs.reserve(tuples.size());
    for (const auto& t : tuples) ptrs.push_back(&t);
    return build_two_view_batch(std::span<const LabeledSample* const>(ptrs), config, draw);
}

}  // namespace rehabcl
