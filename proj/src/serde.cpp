#include "rehabcl/serde.hpp"

namespace rehabcl {

ordered_json to_json(const SkeletonGraph& g) {
    ordered_json j;
    j["joint_count"] = g.joint_count;
    j["root_joint"] = g.root_joint;
    j["edges"] = ordered_json::array();
    for (auto [a, b] : g.edges) j["edges"].push_back({a, b});
    return j;
}

SkeletonGraph graph_from_json(const ordered_json& j) {
    SkeletonGraph g;
    g.joint_count = j.at("joint_count").get<int>();
    g.root_joint = j.at("root_joint").get<int>();
    for (const auto& e : j.at("edges")) g.edges.emplace_back(e.at(0).get<int>(), e.at(1).get<int>());
    return g;
}

ordered_json to_json(const AugmentationConfig& c) {
    ordered_json j;
    j["shear_range"] = c.shear_range;
    j["rotation_range"] = c.rotation_range;
    j["resample_factor_range"] = {c.resample_factor_range.lo, c.resample_factor_range.hi};
    j["crop_fraction_range"] = {c.crop_fraction_range.lo, c.crop_fraction_range.hi};
    j["blur_sigma_range"] = {c.blur_sigma_range.lo, c.blur_sigma_range.hi};
    j["noise_sigma"] = c.noise_sigma;
    j["apply_probability"] = c.apply_probability;
    j["rng_seed"] = c.rng_seed;
    return j;
}

AugmentationConfig augmentation_from_json(const ordered_json& j) {
    AugmentationConfig c;
    c.shear_range = j.value("shear_range", c.shear_range);
    c.rotation_range = j.value("rotation_range", c.rotation_range);
    auto interval = [&](const char* key, Interval fallback) {
        if (!j.contains(key)) return fallback;
        return Interval{j.at(key).at(0).get<double>(), j.at(key).at(1).get<double>()};
    };
    c.resample_factor_range = interval("resample_factor_range", c.resample_factor_range);
    c.crop_fraction_range = interval("crop_fraction_range", c.crop_fraction_range);
    c.blur_sigma_range = interval("blur_sigma_range", c.blur_sigma_range);
    c.noise_sigma = j.value("noise_sigma", c.noise_sigma);
    c.apply_probability = j.value("apply_probability", c.apply_probability);
    c.rng_seed = j.value("rng_seed", c.rng_seed);
    c.validate();
    return c;
}

ordered_json to_json(const LossConfig& c) {
    ordered_json j;
    j["temperature"] = c.temperature;
    j["denominator_mode"] = to_string(c.denominator_mode);
    return j;
}

LossConfig loss_from_json(const ordered_json& j) {
    LossConfig c;
    c.temperature = j.value("temperature", c.temperature);
    if (j.contains("denominator_mode"))
        c.denominator_mode = parse_denominator_mode(j.at("denominator_mode").get<std::string>());
    c.validate();
    return c;
}

ordered_json to_json(const EncoderConfig& c) {
    ordered_json j;
    j["layer_channels"] = c.layer_channels;
    j["temporal_kernel"] = c.temporal_kernel;
    j["temporal_strides"] = c.temporal_strides;
    j["bottleneck_ratio"] = c.bottleneck_ratio;
    j["partition_strategy"] = "spatial";
    j["embedding_dim"] = c.embedding_dim;
    j["use_ri"] = c.use_ri;
    return j;
}

EncoderConfig encoder_from_json(const ordered_json& j) {
    EncoderConfig c;
    if (j.contains("layer_channels")) c.layer_channels = j.at("layer_channels").get<std::vector<int>>();
    c.temporal_kernel = j.value("temporal_kernel", c.temporal_kernel);
    if (j.contains("temporal_strides"))
        c.temporal_strides = j.at("temporal_strides").get<std::vector<int>>();
    c.bottleneck_ratio = j.value("bottleneck_ratio", c.bottleneck_ratio);
    if (j.value("partition_strategy", "spatial") != std::string("spatial"))
        throw ArgumentError("EncoderConfig: only the spatial partition strategy is supported");
    c.embedding_dim = j.value("embedding_dim", c.layer_channels.back());
    c.use_ri = j.value("use_ri", c.use_ri);
    c.validate();
    return c;
}

ordered_json to_json(const ProjectionConfig& c) {
    ordered_json j;
    j["in_dim"] = c.in_dim;
    j["out_dim"] = c.out_dim;
    return j;
}

ProjectionConfig projection_from_json(const ordered_json& j) {
    ProjectionConfig c;
    c.in_dim = j.value("in_dim", c.in_dim);
    c.out_dim = j.value("out_dim", c.out_dim);
    c.validate();
    return c;
}

ordered_json to_json(const TrainConfig& c) {
    ordered_json j;
    j["epochs"] = c.epochs;
    j["batch_tuples"] = c.batch_tuples;
    j["learning_rate"] = c.learning_rate;
    j["temperature"] = c.temperature;
    j["optimizer"] = "adam";
    j["adam_betas"] = {c.adam_betas.first, c.adam_betas.second};
    j["seed"] = c.seed;
    j["augmentation"] = to_json(c.augmentation);
    j["loss"] = to_json(c.loss);
    j["use_ri"] = c.use_ri;
    j["checkpoint_every"] = c.checkpoint_every;
    return j;
}

TrainConfig train_from_json(const ordered_json& j) {
    TrainConfig c;
    c.epochs = j.value("epochs", c.epochs);
    c.batch_tuples = j.value("batch_tuples", c.batch_tuples);
    c.learning_rate = j.value("learning_rate", c.learning_rate);
    c.temperature = j.value("temperature", c.temperature);
    if (j.value("optimizer", "adam") != std::string("adam"))
        throw ArgumentError("TrainConfig: only the adam optimizer is supported");
    if (j.contains("adam_betas"))
        c.adam_betas = {j.at("adam_betas").at(0).get<double>(), j.at("adam_betas").at(1).get<double>()};
    c.seed = j.value("seed", c.seed);
    if (j.contains("augmentation")) c.augmentation = augmentation_from_json(j.at("augmentation"));
    if (j.contains("loss")) c.loss = loss_from_json(j.at("loss"));
    c.use_ri = j.value("use_ri", c.use_ri);
    c.checkpoint_every = j.value("checkpoint_every", c.checkpoint_every);
    c.validate();
    return c;
}

}  // namespace rehabcl
