#include "rehabcl/nn.hpp"

#include <cmath>

namespace rehabcl::nn {

void init_uniform_fan_in(Tensor& t, long fan_in, Rng& rng) {
    double bound = 1.0 / std::sqrt(static_cast<double>(std::max<long>(1, fan_in)));
    std::uniform_real_distribution<double> u(-bound, bound);
    for (double& v : t.raw()) v = u(rng);
}

// ---------------------------------------------------------------------------
// Adjacency

Adjacency normalized_adjacency(const SkeletonGraph& graph, PartitionStrategy) {
    graph.validate();
    const long joints = graph.joint_count;
    const auto dist = graph.hop_distance_from_root();

    RowMat support = RowMat::Identity(joints, joints);
    for (auto [a, b] : graph.edges) {
        support(a, b) = 1.0;
        support(b, a) = 1.0;
    }
    Eigen::VectorXd degree = support.rowwise().sum();

    Adjacency adj;
    adj.joint_count = joints;
    for (auto& p : adj.partitions) p = RowMat::Zero(joints, joints);
    for (long target = 0; target < joints; ++target) {
        for (long source = 0; source < joints; ++source) {
            if (support(target, source) == 0.0) continue;
            double normalized = support(target, source) /
                                std::sqrt(degree(target) * degree(source));
            int p;
            if (dist[static_cast<size_t>(source)] == dist[static_cast<size_t>(target)]) p = 0;
            else if (dist[static_cast<size_t>(source)] < dist[static_cast<size_t>(target)]) p = 1;
            else p = 2;
            adj.partitions[static_cast<size_t>(p)](target, source) = normalized;
        }
    }
    return adj;
}

// ---------------------------------------------------------------------------
// GraphConv

GraphConv::GraphConv(int in_channels, int out_channels, Rng& rng)
    : in_channels_(in_channels), out_channels_(out_channels) {
    weight = Tensor({3, in_channels, out_channels});
    bias = Tensor({out_channels});
    weight_grad = Tensor({3, in_channels, out_channels});
    bias_grad = Tensor({out_channels});
    init_uniform_fan_in(weight, in_channels, rng);
    init_uniform_fan_in(bias, in_channels, rng);
}

Tensor GraphConv::apply(const Tensor& x, const Adjacency& adj) const {
    if (x.rank() != 4 || x.dim(3) != in_channels_)
        throw ArgumentError("GraphConv: input must be B x T x J x " + std::to_string(in_channels_));
    if (x.dim(2) != adj.joint_count) throw ArgumentError("GraphConv: joint count mismatch");
    const long batch = x.dim(0), t_len = x.dim(1), joints = x.dim(2);
    Tensor y({batch, t_len, joints, out_channels_});

    for (long b = 0; b < batch; ++b) {
        for (long t = 0; t < t_len; ++t) {
            ConstMapMat xm(x.data() + ((b * t_len + t) * joints) * in_channels_, joints, in_channels_);
            MapMat ym(y.data() + ((b * t_len + t) * joints) * out_channels_, joints, out_channels_);
            for (int p = 0; p < 3; ++p) {
                ConstMapMat wp(weight.data() + p * in_channels_ * out_channels_, in_channels_,
                               out_channels_);
                ym.noalias() += adj.partitions[static_cast<size_t>(p)] * (xm * wp);
            }
            for (long j = 0; j < joints; ++j)
                for (long c = 0; c < out_channels_; ++c) ym(j, c) += bias(c);
        }
    }
    return y;
}

Tensor GraphConv::forward(const Tensor& x, const Adjacency& adj) {
    x_cache_ = x;
    return apply(x, adj);
}

Tensor GraphConv::backward(const Tensor& grad_out, const Adjacency& adj) {
    const Tensor& x = x_cache_;
    const long batch = x.dim(0), t_len = x.dim(1), joints = x.dim(2);
    Tensor dx({batch, t_len, joints, in_channels_});

    for (long b = 0; b < batch; ++b) {
        for (long t = 0; t < t_len; ++t) {
            ConstMapMat xm(x.data() + ((b * t_len + t) * joints) * in_channels_, joints, in_channels_);
            ConstMapMat gy(grad_out.data() + ((b * t_len + t) * joints) * out_channels_, joints,
                           out_channels_);
            MapMat dxm(dx.data() + ((b * t_len + t) * joints) * in_channels_, joints, in_channels_);
            for (int p = 0; p < 3; ++p) {
                const RowMat& ap = adj.partitions[static_cast<size_t>(p)];
                ConstMapMat wp(weight.data() + p * in_channels_ * out_channels_, in_channels_,
                               out_channels_);
                MapMat dwp(weight_grad.data() + p * in_channels_ * out_channels_, in_channels_,
                           out_channels_);
                RowMat propagated = ap * xm;                    // J x C_in
                dwp.noalias() += propagated.transpose() * gy;   // C_in x C_out
                dxm.noalias() += ap.transpose() * (gy * wp.transpose());
            }
            for (long j = 0; j < joints; ++j)
                for (long c = 0; c < out_channels_; ++c) bias_grad(c) += gy(j, c);
        }
    }
    return dx;
}

void GraphConv::collect(const std::string& prefix, std::vector<ParamRef>& params,
                        std::vector<BufferRef>&) {
    params.push_back({prefix + ".weight", &weight, &weight_grad});
    params.push_back({prefix + ".bias", &bias, &bias_grad});
}

// ---------------------------------------------------------------------------
// TemporalConv

TemporalConv::TemporalConv(int in_channels, int out_channels, int kernel, int stride, Rng& rng)
    : in_channels_(in_channels), out_channels_(out_channels), kernel_(kernel), stride_(stride),
      pad_((kernel - 1) / 2) {
    if (kernel < 1 || kernel % 2 == 0) throw ArgumentError("TemporalConv: kernel must be odd positive");
    if (stride < 1) throw ArgumentError("TemporalConv: stride must be positive");
    weight = Tensor({kernel, out_channels, in_channels});
    bias = Tensor({out_channels});
    weight_grad = Tensor({kernel, out_channels, in_channels});
    bias_grad = Tensor({out_channels});
    init_uniform_fan_in(weight, static_cast<long>(in_channels) * kernel, rng);
    init_uniform_fan_in(bias, static_cast<long>(in_channels) * kernel, rng);
}

long TemporalConv::out_length(long t_in) const {
    return (t_in + 2L * pad_ - kernel_) / stride_ + 1;
}

Tensor TemporalConv::apply(const Tensor& x) const {
    if (x.rank() != 4 || x.dim(3) != in_channels_)
        throw ArgumentError("TemporalConv: input must be B x T x J x " + std::to_string(in_channels_));
    const long batch = x.dim(0), t_in = x.dim(1), joints = x.dim(2);
    const long t_out = out_length(t_in);
    if (t_out < 1) throw ArgumentError("TemporalConv: sequence too short for kernel");
    Tensor y({batch, t_out, joints, out_channels_});

    for (long b = 0; b < batch; ++b) {
        for (long to = 0; to < t_out; ++to) {
            MapMat ym(y.data() + ((b * t_out + to) * joints) * out_channels_, joints, out_channels_);
            for (int k = 0; k < kernel_; ++k) {
                long ti = to * stride_ - pad_ + k;
                if (ti < 0 || ti >= t_in) continue;
                ConstMapMat wk(weight.data() + k * out_channels_ * in_channels_, out_channels_,
                               in_channels_);
                ConstMapMat xm(x.data() + ((b * t_in + ti) * joints) * in_channels_, joints, in_channels_);
                ym.noalias() += xm * wk.transpose();
            }
            for (long j = 0; j < joints; ++j)
                for (long c = 0; c < out_channels_; ++c) ym(j, c) += bias(c);
        }
    }
    return y;
}

Tensor TemporalConv::forward(const Tensor& x) {
    x_cache_ = x;
    return apply(x);
}

Tensor TemporalConv::backward(const Tensor& grad_out) {
    const Tensor& x = x_cache_;
    const long batch = x.dim(0), t_in = x.dim(1), joints = x.dim(2);
    const long t_out = grad_out.dim(1);
    Tensor dx({batch, t_in, joints, in_channels_});

    for (long b = 0; b < batch; ++b) {
        for (long to = 0; to < t_out; ++to) {
            ConstMapMat gy(grad_out.data() + ((b * t_out + to) * joints) * out_channels_, joints,
                           out_channels_);
            for (int k = 0; k < kernel_; ++k) {
                long ti = to * stride_ - pad_ + k;
                if (ti < 0 || ti >= t_in) continue;
                ConstMapMat wk(weight.data() + k * out_channels_ * in_channels_, out_channels_,
                               in_channels_);
                MapMat dwk(weight_grad.data() + k * out_channels_ * in_channels_, out_channels_,
                           in_channels_);
                ConstMapMat xm(x.data() + ((b * t_in + ti) * joints) * in_channels_, joints, in_channels_);
                MapMat dxm(dx.data() + ((b * t_in + ti) * joints) * in_channels_, joints, in_channels_);
                dwk.noalias() += gy.transpose() * xm;
                dxm.noalias() += gy * wk;
            }
            for (long j = 0; j < joints; ++j)
                for (long c = 0; c < out_channels_; ++c) bias_grad(c) += gy(j, c);
        }
    }
    return dx;
}

void TemporalConv::collect(const std::string& prefix, std::vector<ParamRef>& params,
                           std::vector<BufferRef>&) {
    params.push_back({prefix + ".weight", &weight, &weight_grad});
    params.push_back({prefix + ".bias", &bias, &bias_grad});
}

// ---------------------------------------------------------------------------
// BatchNorm

BatchNorm::BatchNorm(int channels) : channels_(channels) {
    gamma = Tensor({channels});
    beta = Tensor({channels});
    gamma_grad = Tensor({channels});
    beta_grad = Tensor({channels});
    running_mean = Tensor({channels});
    running_var = Tensor({channels});
    gamma.fill(1.0);
    running_var.fill(1.0);
}

Tensor BatchNorm::apply(const Tensor& x) const {
    if (x.dim(x.rank() - 1) != channels_) throw ArgumentError("BatchNorm: channel mismatch");
    Tensor y(x.shape());
    const long rows = x.size() / channels_;
    for (long r = 0; r < rows; ++r) {
        const double* xin = x.data() + r * channels_;
        double* yout = y.data() + r * channels_;
        for (long c = 0; c < channels_; ++c) {
            double inv = 1.0 / std::sqrt(running_var(c) + eps);
            yout[c] = gamma(c) * (xin[c] - running_mean(c)) * inv + beta(c);
        }
    }
    return y;
}

Tensor BatchNorm::forward(const Tensor& x) {
    if (x.dim(x.rank() - 1) != channels_) throw ArgumentError("BatchNorm: channel mismatch");
    const long rows = x.size() / channels_;
    if (rows < 2) throw ArgumentError("BatchNorm: need at least 2 positions for batch statistics");

    std::vector<double> mean(static_cast<size_t>(channels_), 0.0);
    std::vector<double> var(static_cast<size_t>(channels_), 0.0);
    for (long r = 0; r < rows; ++r) {
        const double* xin = x.data() + r * channels_;
        for (long c = 0; c < channels_; ++c) mean[static_cast<size_t>(c)] += xin[c];
    }
    for (auto& m : mean) m /= static_cast<double>(rows);
    for (long r = 0; r < rows; ++r) {
        const double* xin = x.data() + r * channels_;
        for (long c = 0; c < channels_; ++c) {
            double d = xin[c] - mean[static_cast<size_t>(c)];
            var[static_cast<size_t>(c)] += d * d;
        }
    }
    for (auto& v : var) v /= static_cast<double>(rows);

    xhat_cache_ = Tensor(x.shape());
    invstd_cache_.assign(static_cast<size_t>(channels_), 0.0);
    Tensor y(x.shape());
    for (long c = 0; c < channels_; ++c)
        invstd_cache_[static_cast<size_t>(c)] = 1.0 / std::sqrt(var[static_cast<size_t>(c)] + eps);
    for (long r = 0; r < rows; ++r) {
        const double* xin = x.data() + r * channels_;
        double* xhat = xhat_cache_.data() + r * channels_;
        double* yout = y.data() + r * channels_;
        for (long c = 0; c < channels_; ++c) {
            xhat[c] = (xin[c] - mean[static_cast<size_t>(c)]) * invstd_cache_[static_cast<size_t>(c)];
            yout[c] = gamma(c) * xhat[c] + beta(c);
        }
    }
    for (long c = 0; c < channels_; ++c) {
        running_mean(c) = (1.0 - momentum) * running_mean(c) + momentum * mean[static_cast<size_t>(c)];
        running_var(c) = (1.0 - momentum) * running_var(c) + momentum * var[static_cast<size_t>(c)];
    }
    return y;
}

Tensor BatchNorm::backward(const Tensor& grad_out) {
    const long rows = grad_out.size() / channels_;
    std::vector<double> sum_gy(static_cast<size_t>(channels_), 0.0);
    std::vector<double> sum_gy_xhat(static_cast<size_t>(channels_), 0.0);
    for (long r = 0; r < rows; ++r) {
        const double* gy = grad_out.data() + r * channels_;
        const double* xhat = xhat_cache_.data() + r * channels_;
        for (long c = 0; c < channels_; ++c) {
            sum_gy[static_cast<size_t>(c)] += gy[c];
            sum_gy_xhat[static_cast<size_t>(c)] += gy[c] * xhat[c];
        }
    }
    for (long c = 0; c < channels_; ++c) {
        beta_grad(c) += sum_gy[static_cast<size_t>(c)];
        gamma_grad(c) += sum_gy_xhat[static_cast<size_t>(c)];
    }
    Tensor dx(grad_out.shape());
    const double n = static_cast<double>(rows);
    for (long r = 0; r < rows; ++r) {
        const double* gy = grad_out.data() + r * channels_;
        const double* xhat = xhat_cache_.data() + r * channels_;
        double* dxp = dx.data() + r * channels_;
        for (long c = 0; c < channels_; ++c) {
            size_t ci = static_cast<size_t>(c);
            dxp[c] = gamma(c) * invstd_cache_[ci] / n *
                     (n * gy[c] - sum_gy[ci] - xhat[c] * sum_gy_xhat[ci]);
        }
    }
    return dx;
}

void BatchNorm::collect(const std::string& prefix, std::vector<ParamRef>& params,
                        std::vector<BufferRef>& buffers) {
    params.push_back({prefix + ".gamma", &gamma, &gamma_grad});
    params.push_back({prefix + ".beta", &beta, &beta_grad});
    buffers.push_back({prefix + ".running_mean", &running_mean});
    buffers.push_back({prefix + ".running_var", &running_var});
}

// ---------------------------------------------------------------------------
// ReLU / pooling

Tensor ReLU::apply(const Tensor& x) const {
    Tensor y = x;
    for (double& v : y.raw())
        if (v < 0) v = 0;
    return y;
}

Tensor ReLU::forward(const Tensor& x) {
    mask_.assign(static_cast<size_t>(x.size()), 0);
    Tensor y = x;
    for (long i = 0; i < x.size(); ++i) {
        if (y(i) > 0) mask_[static_cast<size_t>(i)] = 1;
        else y(i) = 0;
    }
    return y;
}

Tensor ReLU::backward(const Tensor& grad_out) const {
    Tensor dx = grad_out;
    for (long i = 0; i < dx.size(); ++i)
        if (!mask_[static_cast<size_t>(i)]) dx(i) = 0;
    return dx;
}

Tensor GlobalAveragePool::apply(const Tensor& x) const {
    if (x.rank() != 4) throw ArgumentError("GlobalAveragePool: expects B x T x J x C");
    const long batch = x.dim(0), t_len = x.dim(1), joints = x.dim(2), channels = x.dim(3);
    Tensor y({batch, channels});
    const double scale = 1.0 / static_cast<double>(t_len * joints);
    for (long b = 0; b < batch; ++b)
        for (long t = 0; t < t_len; ++t)
            for (long j = 0; j < joints; ++j) {
                const double* xin = x.data() + (((b * t_len + t) * joints + j) * channels);
                for (long c = 0; c < channels; ++c) y(b, c) += xin[c] * scale;
            }
    return y;
}

Tensor GlobalAveragePool::forward(const Tensor& x) {
    in_shape_ = x.shape();
    return apply(x);
}

Tensor GlobalAveragePool::backward(const Tensor& grad_out) const {
    const long batch = in_shape_[0], t_len = in_shape_[1], joints = in_shape_[2], channels = in_shape_[3];
    Tensor dx({batch, t_len, joints, channels});
    const double scale = 1.0 / static_cast<double>(t_len * joints);
    for (long b = 0; b < batch; ++b)
        for (long t = 0; t < t_len; ++t)
            for (long j = 0; j < joints; ++j) {
                double* dxp = dx.data() + (((b * t_len + t) * joints + j) * channels);
                for (long c = 0; c < channels; ++c) dxp[c] = grad_out(b, c) * scale;
            }
    return dx;
}

// ---------------------------------------------------------------------------
// Linear

Linear::Linear(int in_dim, int out_dim, Rng& rng) : in_dim_(in_dim), out_dim_(out_dim) {
    weight = Tensor({out_dim, in_dim});
    bias = Tensor({out_dim});
    weight_grad = Tensor({out_dim, in_dim});
    bias_grad = Tensor({out_dim});
    init_uniform_fan_in(weight, in_dim, rng);
    init_uniform_fan_in(bias, in_dim, rng);
}

Tensor Linear::apply(const Tensor& x) const {
    if (x.rank() != 2 || x.dim(1) != in_dim_)
        throw ArgumentError("Linear: input must be B x " + std::to_string(in_dim_));
    const long batch = x.dim(0);
    Tensor y({batch, out_dim_});
    ConstMapMat xm(x.data(), batch, in_dim_);
    ConstMapMat wm(weight.data(), out_dim_, in_dim_);
    MapMat ym(y.data(), batch, out_dim_);
    ym.noalias() = xm * wm.transpose();
    for (long b = 0; b < batch; ++b)
        for (long c = 0; c < out_dim_; ++c) ym(b, c) += bias(c);
    return y;
}

Tensor Linear::forward(const Tensor& x) {
    x_cache_ = x;
    return apply(x);
}

Tensor Linear::backward(const Tensor& grad_out) {
    const long batch = x_cache_.dim(0);
    ConstMapMat xm(x_cache_.data(), batch, in_dim_);
    ConstMapMat gy(grad_out.data(), batch, out_dim_);
    MapMat dw(weight_grad.data(), out_dim_, in_dim_);
    dw.noalias() += gy.transpose() * xm;
    for (long b = 0; b < batch; ++b)
        for (long c = 0; c < out_dim_; ++c) bias_grad(c) += gy(b, c);
    Tensor dx({batch, in_dim_});
    ConstMapMat wm(weight.data(), out_dim_, in_dim_);
    MapMat dxm(dx.data(), batch, in_dim_);
    dxm.noalias() = gy * wm;
    return dx;
}

void Linear::collect(const std::string& prefix, std::vector<ParamRef>& params, std::vector<BufferRef>&) {
    params.push_back({prefix + ".weight", &weight, &weight_grad});
    params.push_back({prefix + ".bias", &bias, &bias_grad});
}

// ---------------------------------------------------------------------------
// STGCNBlock

STGCNBlock::STGCNBlock(int in_channels, int out_channels, int temporal_kernel, int stride,
                       int bottleneck_ratio, Rng& rng) {
    const int mid = std::max(1, out_channels / std::max(1, bottleneck_ratio));
    gcn_ = GraphConv(in_channels, out_channels, rng);
    gcn_bn_ = BatchNorm(out_channels);
    reduce_ = TemporalConv(out_channels, mid, 1, 1, rng);
    reduce_bn_ = BatchNorm(mid);
    temporal_ = TemporalConv(mid, mid, temporal_kernel, stride, rng);
    temporal_bn_ = BatchNorm(mid);
    expand_ = TemporalConv(mid, out_channels, 1, 1, rng);
    expand_bn_ = BatchNorm(out_channels);
    residual_conv_ = in_channels != out_channels || stride != 1;
    if (residual_conv_) {
        res_conv_ = TemporalConv(in_channels, out_channels, 1, stride, rng);
        res_bn_ = BatchNorm(out_channels);
    }
}

Tensor STGCNBlock::apply(const Tensor& x, const Adjacency& adj) const {
    Tensor h = gcn_relu_.apply(gcn_bn_.apply(gcn_.apply(x, adj)));
    h = reduce_relu_.apply(reduce_bn_.apply(reduce_.apply(h)));
    h = temporal_relu_.apply(temporal_bn_.apply(temporal_.apply(h)));
    h = expand_bn_.apply(expand_.apply(h));
    Tensor res = residual_conv_ ? res_bn_.apply(res_conv_.apply(x)) : x;
    for (long i = 0; i < h.size(); ++i) h(i) += res(i);
    return out_relu_.apply(h);
}

Tensor STGCNBlock::forward(const Tensor& x, const Adjacency& adj) {
    Tensor h = gcn_relu_.forward(gcn_bn_.forward(gcn_.forward(x, adj)));
    h = reduce_relu_.forward(reduce_bn_.forward(reduce_.forward(h)));
    h = temporal_relu_.forward(temporal_bn_.forward(temporal_.forward(h)));
    h = expand_bn_.forward(expand_.forward(h));
    Tensor res = residual_conv_ ? res_bn_.forward(res_conv_.forward(x)) : x;
    if (!h.same_shape(res)) throw ArgumentError("STGCNBlock: residual shape mismatch");
    for (long i = 0; i < h.size(); ++i) h(i) += res(i);
    return out_relu_.forward(h);
}

Tensor STGCNBlock::backward(const Tensor& grad_out, const Adjacency& adj) {
    Tensor g = out_relu_.backward(grad_out);
    Tensor dx_res;
    if (residual_conv_) dx_res = res_conv_.backward(res_bn_.backward(g));
    else dx_res = g;

    Tensor gh = expand_.backward(expand_bn_.backward(g));
    gh = temporal_.backward(temporal_bn_.backward(temporal_relu_.backward(gh)));
    gh = reduce_.backward(reduce_bn_.backward(reduce_relu_.backward(gh)));
    Tensor dx = gcn_.backward(gcn_bn_.backward(gcn_relu_.backward(gh)), adj);

    for (long i = 0; i < dx.size(); ++i) dx(i) += dx_res(i);
    return dx;
}

void STGCNBlock::collect(const std::string& prefix, std::vector<ParamRef>& params,
                         std::vector<BufferRef>& buffers) {
    gcn_.collect(prefix + ".gcn", params, buffers);
    gcn_bn_.collect(prefix + ".gcn_bn", params, buffers);
    reduce_.collect(prefix + ".reduce", params, buffers);
    reduce_bn_.collect(prefix + ".reduce_bn", params, buffers);
    temporal_.collect(prefix + ".temporal", params, buffers);
    temporal_bn_.collect(prefix + ".temporal_bn", params, buffers);
    expand_.collect(prefix + ".expand", params, buffers);
    expand_bn_.collect(prefix + ".expand_bn", params, buffers);
    if (residual_conv_) {
        res_conv_.collect(prefix + ".res", params, buffers);
        res_bn_.collect(prefix + ".res_bn", params, buffers);
    }
}

}  // namespace rehabcl::nn
