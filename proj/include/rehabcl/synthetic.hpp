#pragma once

#include <cstdint>
#include <string>

#include "rehabcl/skeleton_data.hpp"

namespace rehabcl {

// Generator for small self-contained skeleton datasets: a few exercise
// "types" with distinct joint motions; incorrect executions are
// amplitude-reduced or left/right-asymmetric variants of the correct form.
struct SyntheticConfig {
    int types = 3;
    int samples_per_type = 60;  // half correct, half incorrect
    long frames = 32;
    std::uint64_t seed = 0;
    double noise_sigma = 0.01;
};

// 8-joint toy skeleton: pelvis(0, root), spine(1), head(2), left elbow(3),
// left hand(4), right elbow(5), right hand(6), legs(7).
SkeletonGraph synthetic_graph();

// Binary-labeled dataset (types s01, s02, ...), root-centered coordinates.
Dataset make_synthetic_classification(const SyntheticConfig& config);

// Single-type regression dataset: corruption magnitude m in [0,1] shrinks the
// motion and skews it left; clinical_score = 50 * (1 - m).
Dataset make_synthetic_regression(const SyntheticConfig& config, const std::string& exercise_type = "s01");

}  // namespace rehabcl
