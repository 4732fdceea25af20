#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "rehabcl/common.hpp"
#include "rehabcl/skeleton_data.hpp"
#include "rehabcl/tensor.hpp"

namespace rehabcl {

struct Interval {
    double lo = 0.0;
    double hi = 0.0;
};

// Semantic-preserving augmentation menu. Each transform fires independently
// with apply_probability per draw; a zero range collapses that transform to
// the identity.
struct AugmentationConfig {
    double shear_range = 0.1;                      // max shear coefficient
    double rotation_range = 0.2617993877991494;    // radians per axis (15 deg)
    Interval resample_factor_range{0.8, 1.2};      // temporal speed factor
    Interval crop_fraction_range{0.8, 1.0};        // contiguous window fraction
    Interval blur_sigma_range{0.0, 1.0};           // Gaussian sigma, in frames
    double noise_sigma = 0.01;                     // coordinate units
    double apply_probability = 0.5;
    std::uint64_t rng_seed = 0;

    void validate() const;

    static AugmentationConfig identity() {
        AugmentationConfig c;
        c.shear_range = 0.0;
        c.rotation_range = 0.0;
        c.resample_factor_range = {1.0, 1.0};
        c.crop_fraction_range = {1.0, 1.0};
        c.blur_sigma_range = {0.0, 0.0};
        c.noise_sigma = 0.0;
        return c;
    }
};

// Random semantic-preserving transform of one sequence. The output keeps the
// input's frame count (temporal transforms re-sample back). Labels are not
// part of the signature, so they cannot be altered.
SkeletonSequence augment(const SkeletonSequence& sequence, const AugmentationConfig& config, Rng& draw);

// Two augmented views per source tuple, interleaved: views 2k and 2k+1 come
// from tuple k under independent draws and share its labels.
struct ViewBatch {
    Tensor views;  // 2N x T x J x C
    std::vector<std::string> exercise_type;
    std::vector<std::optional<Assessment>> assessment;
    std::vector<long> origin_index;

    long view_count() const { return views.rank() == 4 ? views.dim(0) : 0; }
};

ViewBatch build_two_view_batch(std::span<const LabeledSample* const> tuples,
                               const AugmentationConfig& config, Rng& draw);
ViewBatch build_two_view_batch(const std::vector<LabeledSample>& tuples,
                               const AugmentationConfig& config, Rng& draw);

}  // namespace rehabcl
