#pragma once

#include <array>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "rehabcl/common.hpp"
#include "rehabcl/skeleton_data.hpp"
#include "rehabcl/tensor.hpp"

// Training-capable building blocks for the spatial-temporal graph network.
// Every layer offers a pure `apply` (inference, touches no state, reentrant)
// and a caching `forward`/`backward` pair for single-writer training.
namespace rehabcl::nn {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapMat = Eigen::Map<RowMat>;
using ConstMapMat = Eigen::Map<const RowMat>;

struct ParamRef {
    std::string name;
    Tensor* value;
    Tensor* grad;
};

struct BufferRef {
    std::string name;
    Tensor* value;
};

// Spatial-configuration-partitioned, symmetrically normalized adjacency:
// partition 0 holds entries whose source joint sits at the same root
// distance as the target (the diagonal, for tree skeletons), partition 1 the
// centripetal entries (source closer to the root), partition 2 the
// centrifugal ones. Unnormalized supports sum to A + I.
struct Adjacency {
    long joint_count = 0;
    std::array<RowMat, 3> partitions;
};

enum class PartitionStrategy { spatial };

Adjacency normalized_adjacency(const SkeletonGraph& graph,
                               PartitionStrategy strategy = PartitionStrategy::spatial);

// y[b,t] = sum_p A_p * x[b,t] * W_p + bias over B x T x J x C tensors.
class GraphConv {
public:
    GraphConv() = default;
    GraphConv(int in_channels, int out_channels, Rng& rng);

    Tensor apply(const Tensor& x, const Adjacency& adj) const;
    Tensor forward(const Tensor& x, const Adjacency& adj);
    Tensor backward(const Tensor& grad_out, const Adjacency& adj);

    void collect(const std::string& prefix, std::vector<ParamRef>& params, std::vector<BufferRef>& buffers);

    Tensor weight;  // P x C_in x C_out
    Tensor bias;    // C_out
    Tensor weight_grad, bias_grad;

private:
    int in_channels_ = 0, out_channels_ = 0;
    Tensor x_cache_;
};

// Convolution over the T axis with full channel mixing and same padding;
// kernel 1 / stride 1 degenerates to a pointwise linear map.
class TemporalConv {
public:
    TemporalConv() = default;
    TemporalConv(int in_channels, int out_channels, int kernel, int stride, Rng& rng);

    long out_length(long t_in) const;
    Tensor apply(const Tensor& x) const;
    Tensor forward(const Tensor& x);
    Tensor backward(const Tensor& grad_out);

    void collect(const std::string& prefix, std::vector<ParamRef>& params, std::vector<BufferRef>& buffers);

    Tensor weight;  // K x C_out x C_in
    Tensor bias;    // C_out

    Tensor weight_grad, bias_grad;
    int stride() const { return stride_; }

private:
    int in_channels_ = 0, out_channels_ = 0, kernel_ = 1, stride_ = 1, pad_ = 0;
    Tensor x_cache_;
};

// Per-channel normalization over all leading axes (channel axis is last).
// Training uses batch statistics and updates running averages; apply() uses
// the running averages.
class BatchNorm {
public:
    BatchNorm() = default;
    explicit BatchNorm(int channels);

    Tensor apply(const Tensor& x) const;
    Tensor forward(const Tensor& x);
    Tensor backward(const Tensor& grad_out);

    void collect(const std::string& prefix, std::vector<ParamRef>& params, std::vector<BufferRef>& buffers);

    Tensor gamma, beta;
    Tensor gamma_grad, beta_grad;
    Tensor running_mean, running_var;
    double momentum = 0.1;
    double eps = 1e-5;

private:
    int channels_ = 0;
    Tensor xhat_cache_;
    std::vector<double> invstd_cache_;
};

class ReLU {
public:
    Tensor apply(const Tensor& x) const;
    Tensor forward(const Tensor& x);
    Tensor backward(const Tensor& grad_out) const;

private:
    std::vector<char> mask_;
};

// Mean over the T and J axes: B x T x J x C -> B x C.
class GlobalAveragePool {
public:
    Tensor apply(const Tensor& x) const;
    Tensor forward(const Tensor& x);
    Tensor backward(const Tensor& grad_out) const;

private:
    std::vector<long> in_shape_;
};

// Affine map on B x in tensors.
class Linear {
public:
    Linear() = default;
    Linear(int in_dim, int out_dim, Rng& rng);

    Tensor apply(const Tensor& x) const;
    Tensor forward(const Tensor& x);
    Tensor backward(const Tensor& grad_out);

    void collect(const std::string& prefix, std::vector<ParamRef>& params, std::vector<BufferRef>& buffers);

    Tensor weight;  // out x in
    Tensor bias;    // out
    Tensor weight_grad, bias_grad;

    int in_dim() const { return in_dim_; }
    int out_dim() const { return out_dim_; }

private:
    int in_dim_ = 0, out_dim_ = 0;
    Tensor x_cache_;
};

// One ST-GCN unit: graph convolution, bottlenecked temporal convolution and
// a residual connection from the block input.
class STGCNBlock {
public:
    STGCNBlock() = default;
    STGCNBlock(int in_channels, int out_channels, int temporal_kernel, int stride, int bottleneck_ratio,
               Rng& rng);

    Tensor apply(const Tensor& x, const Adjacency& adj) const;
    Tensor forward(const Tensor& x, const Adjacency& adj);
    Tensor backward(const Tensor& grad_out, const Adjacency& adj);

    void collect(const std::string& prefix, std::vector<ParamRef>& params, std::vector<BufferRef>& buffers);

private:
    GraphConv gcn_;
    BatchNorm gcn_bn_;
    ReLU gcn_relu_;
    TemporalConv reduce_;
    BatchNorm reduce_bn_;
    ReLU reduce_relu_;
    TemporalConv temporal_;
    BatchNorm temporal_bn_;
    ReLU temporal_relu_;
    TemporalConv expand_;
    BatchNorm expand_bn_;
    bool residual_conv_ = false;
    TemporalConv res_conv_;
    BatchNorm res_bn_;
    ReLU out_relu_;
};

// Uniform init in [-1/sqrt(fan_in), 1/sqrt(fan_in)].
void init_uniform_fan_in(Tensor& t, long fan_in, Rng& rng);

}  // namespace rehabcl::nn
