#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "rehabcl/nn.hpp"
#include "rehabcl/skeleton_data.hpp"
#include "rehabcl/tensor.hpp"

namespace rehabcl {

using nn::Adjacency;
using nn::PartitionStrategy;
using nn::normalized_adjacency;

// Encoder architecture. The default is the full-size 8-block network with
// channel widths 64,64,64,128,128,128,256,256 and temporal stride 2 at
// blocks 4 and 7; tests use shallower variants of the same shape.
struct EncoderConfig {
    std::vector<int> layer_channels{64, 64, 64, 128, 128, 128, 256, 256};
    int temporal_kernel = 9;
    std::vector<int> temporal_strides{1, 1, 1, 2, 1, 1, 2, 1};
    int bottleneck_ratio = 2;
    PartitionStrategy partition_strategy = PartitionStrategy::spatial;
    int embedding_dim = 256;  // d_f, equals the last layer width
    bool use_ri = false;

    void validate() const;
};

struct ProjectionConfig {
    int in_dim = 256;   // d_f
    int out_dim = 128;  // d_p

    void validate() const;
};

struct RegressionHeadConfig {
    int hidden_dim = 128;
    bool freeze_encoder = true;
};

enum class HeadKind { projection, regression };

struct ModelMeta {
    long epoch = 0;
    std::string source_dataset;
    long canonical_frames = 0;   // T the model was trained at
    int raw_channels = 3;        // channel count of raw input sequences
};

// Per-frame Gram matrix of the joint coordinate vectors (first 3 channels):
// out[t, j, k] = <p_j, p_k>. Expects root-centered coordinates (the dataset
// adapters center at ingestion); the result is invariant to any global
// rotation of the input.
SkeletonSequence ri_descriptor(const SkeletonSequence& sequence);
Tensor ri_descriptor_batch(const Tensor& views);  // B x T x J x C -> B x T x J x J

// Encoder + head with explicit forward/backward for training. Inference
// entry points are const and touch no internal state.
class ModelState {
public:
    ModelState() = default;

    static ModelState create(const SkeletonGraph& graph, const EncoderConfig& encoder_config,
                             const ProjectionConfig& projection_config, std::uint64_t seed,
                             int raw_channels = 3);

    // --- inference (reentrant, no state writes) ---
    Tensor encode(const Tensor& views) const;           // B x T x J x C -> B x d_f
    Tensor project(const Tensor& embeddings) const;     // B x d_f -> B x d_p
    Tensor regress(const Tensor& embeddings) const;     // B x d_f -> B (regression head)
    Tensor embed(const Tensor& views, bool with_projection) const;

    // --- training (single writer, caches per call) ---
    Tensor encode_training(const Tensor& views);
    Tensor encode_backward(const Tensor& grad_embeddings);
    Tensor project_training(const Tensor& embeddings);
    Tensor project_backward(const Tensor& grad_projected);
    Tensor regress_training(const Tensor& embeddings);
    Tensor regress_backward(const Tensor& grad_scores);

    void zero_grads();
    std::vector<nn::ParamRef> parameters();          // encoder + active head
    std::vector<nn::ParamRef> encoder_parameters();
    std::vector<nn::ParamRef> head_parameters();
    std::vector<nn::BufferRef> buffers();

    // Exact count of trainable scalars in encoder + active head.
    long count_parameters();

    // Swaps the projection head for a freshly initialized two-layer
    // regression head (d_f -> hidden -> 1).
    void replace_head_with_regression(const RegressionHeadConfig& config, std::uint64_t seed);

    HeadKind head_kind() const { return head_; }
    const SkeletonGraph& graph() const { return graph_; }
    const EncoderConfig& encoder_config() const { return encoder_config_; }
    const ProjectionConfig& projection_config() const { return projection_config_; }
    const RegressionHeadConfig& regression_config() const { return regression_config_; }
    const Adjacency& adjacency() const { return adjacency_; }
    ModelMeta& meta() { return meta_; }
    const ModelMeta& meta() const { return meta_; }
    int input_channels() const { return input_channels_; }
    bool initialized() const { return !blocks_.empty(); }

private:
    Tensor to_network_input(const Tensor& views) const;

    SkeletonGraph graph_;
    EncoderConfig encoder_config_;
    ProjectionConfig projection_config_;
    RegressionHeadConfig regression_config_;
    HeadKind head_ = HeadKind::projection;
    Adjacency adjacency_;
    int input_channels_ = 0;  // channels entering block 1 (J when use_ri)

    std::vector<nn::STGCNBlock> blocks_;
    nn::GlobalAveragePool pool_;
    nn::Linear projection_;
    nn::Linear regression_hidden_;
    nn::ReLU regression_relu_;
    nn::Linear regression_out_;

    ModelMeta meta_;
};

}  // namespace rehabcl
