// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <initializer_list>
#include <string>
#include <vector>

#include "tdx/error.hpp"

namespace tdx {

/// Dense row-major double tensor. Values are immutable by convention once a
/// tensor has been handed to a Tape; the struct itself is a plain value type.
class Tensor {
  public:
    Tensor() = default;
    Tensor(std::vector<int64_t> shape, std::vector<double> data);
    explicit Tensor(std::vector<int64_t> shape); // zero-filled

    static Tensor scalar(double v);
    static Tensor zeros(std::vector<int64_t> shape);
    static Tensor ones(std::vector<int64_t> shape);
    static Tensor full(std::vector<int64_t> shape, double v);

    const std::vector<int64_t>& shape() const { return shape_; }
    int rank() const { return static_cast<int>(shape_.size()); }
    int64_t numel() const { return static_cast<int64_t>(data_.size()); }
    int64_t dim(int axis) const;

    bool is_scalar() const { return numel() == 1; }
    double scalar_value() const;

    double* data() { return data_.data(); }
    const double* data() const { return data_.data(); }
    std::vector<double>& values() { return data_; }
    const std::vector<double>& values() const { return data_; }

    // rank-2 accessors
    int64_t rows() const { return dim(0); }
    int64_t cols() const { return dim(1); }
    double& at(int64_t i, int64_t j) { return data_[i * cols() + j]; }
    double at(int64_t i, int64_t j) const { return data_[i * cols() + j]; }
    double& operator[](int64_t i) { return data_[i]; }
    double operator[](int64_t i) const { return data_[i]; }

    bool same_shape(const Tensor& other) const { return shape_ == other.shape_; }
    bool all_finite() const;

    std::string shape_str() const;

  private:
    std::vector<int64_t> shape_;
    std::vector<double> data_;
};

std::string shape_str(const std::vector<int64_t>& shape);
int64_t shape_numel(const std::vector<int64_t>& shape);

/// Throws ShapeError naming both shapes unless they match.
void require_same_shape(const Tensor& a, const Tensor& b, const char* op);

} // namespace tdx
