#pragma once

#include <nlohmann/json.hpp>

#include "rehabcl/augmentation.hpp"
#include "rehabcl/contrastive.hpp"
#include "rehabcl/model.hpp"
#include "rehabcl/skeleton_data.hpp"
#include "rehabcl/training.hpp"

// JSON round-trips for the config types (run configs, checkpoints, logs).
namespace rehabcl {

using ordered_json = nlohmann::ordered_json;

ordered_json to_json(const SkeletonGraph& g);
SkeletonGraph graph_from_json(const ordered_json& j);

ordered_json to_json(const AugmentationConfig& c);
AugmentationConfig augmentation_from_json(const ordered_json& j);

ordered_json to_json(const LossConfig& c);
LossConfig loss_from_json(const ordered_json& j);

ordered_json to_json(const EncoderConfig& c);
EncoderConfig encoder_from_json(const ordered_json& j);

ordered_json to_json(const ProjectionConfig& c);
ProjectionConfig projection_from_json(const ordered_json& j);

ordered_json to_json(const TrainConfig& c);
TrainConfig train_from_json(const ordered_json& j);

}  // namespace rehabcl
