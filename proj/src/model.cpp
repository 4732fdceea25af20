#include "rehabcl/model.hpp"

#include <cmath>

namespace rehabcl {

void EncoderConfig::validate() const {
    if (layer_channels.empty()) throw ArgumentError("EncoderConfig: no layers");
    for (int c : layer_channels)
        if (c <= 0) throw ArgumentError("EncoderConfig: layer channel must be positive");
    if (temporal_strides.size() != layer_channels.size())
        throw ArgumentError("EncoderConfig: temporal_strides length must match layer_channels");
    for (int s : temporal_strides)
        if (s < 1) throw ArgumentError("EncoderConfig: stride must be >= 1");
    if (temporal_kernel < 1 || temporal_kernel % 2 == 0)
        throw ArgumentError("EncoderConfig: temporal_kernel must be odd positive");
    if (bottleneck_ratio < 1) throw ArgumentError("EncoderConfig: bottleneck_ratio must be >= 1");
    if (embedding_dim != layer_channels.back())
        throw ArgumentError("EncoderConfig: embedding_dim must equal the last layer width");
}

void ProjectionConfig::validate() const {
    if (in_dim <= 0 || out_dim <= 0) throw ArgumentError("ProjectionConfig: dimensions must be positive");
}

// ---------------------------------------------------------------------------
// RI descriptor

SkeletonSequence ri_descriptor(const SkeletonSequence& sequence) {
    sequence.validate();
    if (sequence.channel_count() < 3)
        throw ArgumentError("ri_descriptor: needs at least 3 coordinate channels");
    const long t_len = sequence.frame_count(), joints = sequence.joint_count();
    SkeletonSequence out;
    out.fps = sequence.fps;
    out.frames = Tensor({t_len, joints, joints});
    for (long t = 0; t < t_len; ++t)
        for (long j = 0; j < joints; ++j)
            for (long k = 0; k < joints; ++k) {
                double dot = 0;
                for (long c = 0; c < 3; ++c) dot += sequence.frames(t, j, c) * sequence.frames(t, k, c);
                out.frames(t, j, k) = dot;
            }
    return out;
}

Tensor ri_descriptor_batch(const Tensor& views) {
    if (views.rank() != 4) throw ArgumentError("ri_descriptor_batch: expects B x T x J x C");
    if (views.dim(3) < 3) throw ArgumentError("ri_descriptor_batch: needs at least 3 coordinate channels");
    const long batch = views.dim(0), t_len = views.dim(1), joints = views.dim(2);
    Tensor out({batch, t_len, joints, joints});
    for (long b = 0; b < batch; ++b)
        for (long t = 0; t < t_len; ++t)
            for (long j = 0; j < joints; ++j)
                for (long k = 0; k < joints; ++k) {
                    double dot = 0;
                    for (long c = 0; c < 3; ++c) dot += views(b, t, j, c) * views(b, t, k, c);
                    out(b, t, j, k) = dot;
                }
    return out;
}

// ---------------------------------------------------------------------------
// ModelState

ModelState ModelState::create(const SkeletonGraph& graph, const EncoderConfig& encoder_config,
                              const ProjectionConfig& projection_config, std::uint64_t seed,
                              int raw_channels) {
    graph.validate();
    encoder_config.validate();
    projection_config.validate();
    if (projection_config.in_dim != encoder_config.embedding_dim)
        throw ArgumentError("ModelState: projection in_dim must equal encoder embedding_dim");
    if (raw_channels < 2) throw ArgumentError("ModelState: raw_channels must be >= 2");
    if (encoder_config.use_ri && raw_channels < 3)
        throw ArgumentError("ModelState: RI input needs >= 3 coordinate channels");

    ModelState m;
    m.graph_ = graph;
    m.encoder_config_ = encoder_config;
    m.projection_config_ = projection_config;
    m.adjacency_ = normalized_adjacency(graph, encoder_config.partition_strategy);
    m.meta_.raw_channels = raw_channels;
    m.input_channels_ = encoder_config.use_ri ? graph.joint_count : raw_channels;

    Rng rng(seed);
    int in_c = m.input_channels_;
    for (size_t i = 0; i < encoder_config.layer_channels.size(); ++i) {
        int out_c = encoder_config.layer_channels[i];
        m.blocks_.emplace_back(in_c, out_c, encoder_config.temporal_kernel,
                               encoder_config.temporal_strides[i], encoder_config.bottleneck_ratio, rng);
        in_c = out_c;
    }
    m.projection_ = nn::Linear(projection_config.in_dim, projection_config.out_dim, rng);
    return m;
}

Tensor ModelState::to_network_input(const Tensor& views) const {
    if (views.rank() != 4) throw ArgumentError("encode: views must be B x T x J x C");
    if (views.dim(2) != graph_.joint_count) throw ArgumentError("encode: joint count mismatch with graph");
    if (encoder_config_.use_ri) {
        if (views.dim(3) < 3) throw ArgumentError("encode: RI input needs >= 3 channels");
        return ri_descriptor_batch(views);
    }
    if (views.dim(3) != input_channels_)
        throw ArgumentError("encode: expected " + std::to_string(input_channels_) + " channels, got " +
                            std::to_string(views.dim(3)));
    return views;
}

Tensor ModelState::encode(const Tensor& views) const {
    Tensor h = to_network_input(views);
    for (const auto& block : blocks_) h = block.apply(h, adjacency_);
    return pool_.apply(h);
}

Tensor ModelState::encode_training(const Tensor& views) {
    Tensor h = to_network_input(views);
    for (auto& block : blocks_) h = block.forward(h, adjacency_);
    return pool_.forward(h);
}

Tensor ModelState::encode_backward(const Tensor& grad_embeddings) {
    Tensor g = pool_.backward(grad_embeddings);
    for (auto it = blocks_.rbegin(); it != blocks_.rend(); ++it) g = it->backward(g, adjacency_);
    return g;
}

Tensor ModelState::project(const Tensor& embeddings) const { return projection_.apply(embeddings); }

Tensor ModelState::project_training(const Tensor& embeddings) { return projection_.forward(embeddings); }

Tensor ModelState::project_backward(const Tensor& grad_projected) {
    return projection_.backward(grad_projected);
}

Tensor ModelState::regress(const Tensor& embeddings) const {
    if (head_ != HeadKind::regression) throw ArgumentError("regress: model has no regression head");
    Tensor h = regression_relu_.apply(regression_hidden_.apply(embeddings));
    Tensor out = regression_out_.apply(h);
    return out.reshaped({out.dim(0)});
}

Tensor ModelState::regress_training(const Tensor& embeddings) {
    if (head_ != HeadKind::regression) throw ArgumentError("regress: model has no regression head");
    Tensor h = regression_relu_.forward(regression_hidden_.forward(embeddings));
    Tensor out = regression_out_.forward(h);
    return out.reshaped({out.dim(0)});
}

Tensor ModelState::regress_backward(const Tensor& grad_scores) {
    Tensor g = grad_scores.reshaped({grad_scores.dim(0), 1});
    g = regression_out_.backward(g);
    g = regression_relu_.backward(g);
    return regression_hidden_.backward(g);
}

Tensor ModelState::embed(const Tensor& views, bool with_projection) const {
    Tensor emb = encode(views);
    return with_projection ? project(emb) : emb;
}

void ModelState::replace_head_with_regression(const RegressionHeadConfig& config, std::uint64_t seed) {
    if (config.hidden_dim <= 0) throw ArgumentError("RegressionHeadConfig: hidden_dim must be positive");
    Rng rng(seed);
    regression_config_ = config;
    regression_hidden_ = nn::Linear(encoder_config_.embedding_dim, config.hidden_dim, rng);
    regression_out_ = nn::Linear(config.hidden_dim, 1, rng);
    head_ = HeadKind::regression;
}

std::vector<nn::ParamRef> ModelState::encoder_parameters() {
    std::vector<nn::ParamRef> params;
    std::vector<nn::BufferRef> buffers;
    for (size_t i = 0; i < blocks_.size(); ++i)
        blocks_[i].collect("encoder.block" + std::to_string(i), params, buffers);
    return params;
}

std::vector<nn::ParamRef> ModelState::head_parameters() {
    std::vector<nn::ParamRef> params;
    std::vector<nn::BufferRef> buffers;
    if (head_ == HeadKind::projection) {
        projection_.collect("projection", params, buffers);
    } else {
        regression_hidden_.collect("regression.hidden", params, buffers);
        regression_out_.collect("regression.out", params, buffers);
    }
    return params;
}

std::vector<nn::ParamRef> ModelState::parameters() {
    auto params = encoder_parameters();
    auto head = head_parameters();
    params.insert(params.end(), head.begin(), head.end());
    return params;
}

std::vector<nn::BufferRef> ModelState::buffers() {
    std::vector<nn::ParamRef> params;
    std::vector<nn::BufferRef> buffers;
    for (size_t i = 0; i < blocks_.size(); ++i)
        blocks_[i].collect("encoder.block" + std::to_string(i), params, buffers);
    return buffers;
}

void ModelState::zero_grads() {
    for (auto& p : parameters()) p.grad->fill(0.0);
}

long ModelState::count_parameters() {
    long n = 0;
    for (auto& p : parameters()) n += p.value->size();
    return n;
}

}  // namespace rehabcl
