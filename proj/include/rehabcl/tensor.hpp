#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <numeric>
#include <vector>

#include "rehabcl/common.hpp"

namespace rehabcl {

// Dense row-major n-d array of doubles. This is deliberately minimal: the
// library only needs shapes up to rank 4 (batch x time x joint x channel)
// plus flat views for optimizers and serialization.
class Tensor {
public:
    Tensor() = default;

    explicit Tensor(std::vector<long> shape) : shape_(std::move(shape)) {
        long n = 1;
        for (long d : shape_) {
            if (d < 0) throw ArgumentError("Tensor: negative dimension");
            n *= d;
        }
        data_.assign(static_cast<size_t>(n), 0.0);
    }

    Tensor(std::initializer_list<long> shape) : Tensor(std::vector<long>(shape)) {}

    static Tensor zeros(std::vector<long> shape) { return Tensor(std::move(shape)); }

    const std::vector<long>& shape() const { return shape_; }
    int rank() const { return static_cast<int>(shape_.size()); }
    long dim(int i) const { return shape_.at(static_cast<size_t>(i)); }
    long size() const { return static_cast<long>(data_.size()); }
    bool empty() const { return data_.empty(); }

    double* data() { return data_.data(); }
    const double* data() const { return data_.data(); }
    std::vector<double>& raw() { return data_; }
    const std::vector<double>& raw() const { return data_; }

    void fill(double v) { std::fill(data_.begin(), data_.end(), v); }

    double& operator()(long i) { return data_[static_cast<size_t>(i)]; }
    double operator()(long i) const { return data_[static_cast<size_t>(i)]; }

    double& operator()(long i, long j) { return data_[static_cast<size_t>(i * shape_[1] + j)]; }
    double operator()(long i, long j) const { return data_[static_cast<size_t>(i * shape_[1] + j)]; }

    double& operator()(long i, long j, long k) {
        return data_[static_cast<size_t>((i * shape_[1] + j) * shape_[2] + k)];
    }
    double operator()(long i, long j, long k) const {
        return data_[static_cast<size_t>((i * shape_[1] + j) * shape_[2] + k)];
    }

    double& operator()(long i, long j, long k, long l) {
        return data_[static_cast<size_t>(((i * shape_[1] + j) * shape_[2] + k) * shape_[3] + l)];
    }
    double operator()(long i, long j, long k, long l) const {
        return data_[static_cast<size_t>(((i * shape_[1] + j) * shape_[2] + k) * shape_[3] + l)];
    }

    bool same_shape(const Tensor& o) const { return shape_ == o.shape_; }

    bool all_finite() const {
        return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
    }

    // Reinterprets the flat buffer under a new shape with identical element count.
    Tensor reshaped(std::vector<long> shape) const {
        long n = 1;
        for (long d : shape) n *= d;
        if (n != size()) throw ArgumentError("Tensor::reshaped: element count mismatch");
        Tensor out;
        out.shape_ = std::move(shape);
        out.data_ = data_;
        return out;
    }

private:
    std::vector<long> shape_;
    std::vector<double> data_;
};

}  // namespace rehabcl
