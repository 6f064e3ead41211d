// include/echolab/tensor.hpp
//
// Copyright 2026 The Echolab Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0
//
// THIS CODE IS PROVIDED *AS IS* BASIS, WITHOUT WARRANTIES OR CONDITIONS OF ANY
// KIND, EITHER EXPRESS OR IMPLIED, INCLUDING WITHOUT LIMITATION ANY IMPLIED
// WARRANTIES OR CONDITIONS OF TITLE, FITNESS FOR A PARTICULAR PURPOSE,
// MERCHANTABLITY OR NON-INFRINGEMENT.
// See the Apache 2 License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <cstddef>
#include <numeric>
#include <vector>

#include "echolab/common.hpp"

namespace echolab {

// Dense row-major n-d array. Rows of the last dimension are contiguous, so
// algorithms can wrap them in Eigen::Map views without copies.
template <class T>
class Tensor {
 public:
  Tensor() = default;

  explicit Tensor(std::vector<size_t> shape) : shape_(std::move(shape)) {
    data_.assign(count(shape_), T());
  }

  Tensor(std::vector<size_t> shape, std::vector<T> data)
      : shape_(std::move(shape)), data_(std::move(data)) {
    ECHOLAB_REQUIRE(data_.size() == count(shape_),
                    "tensor data size does not match shape");
  }

  const std::vector<size_t>& shape() const { return shape_; }
  size_t ndim() const { return shape_.size(); }
  size_t dim(size_t i) const { return shape_.at(i); }
  size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  T* data() { return data_.data(); }
  const T* data() const { return data_.data(); }
  std::vector<T>& flat() { return data_; }
  const std::vector<T>& flat() const { return data_; }

  T& operator[](size_t i) { return data_[i]; }
  const T& operator[](size_t i) const { return data_[i]; }

  T& at(size_t i) { return data_[i]; }
  const T& at(size_t i) const { return data_[i]; }
  T& at(size_t i, size_t j) { return data_[i * shape_[1] + j]; }
  const T& at(size_t i, size_t j) const { return data_[i * shape_[1] + j]; }
  T& at(size_t i, size_t j, size_t k) {
    return data_[(i * shape_[1] + j) * shape_[2] + k];
  }
  const T& at(size_t i, size_t j, size_t k) const {
    return data_[(i * shape_[1] + j) * shape_[2] + k];
  }

  // Pointer to row (i) for 2-d or (i, j) for 3-d tensors.
  T* row(size_t i) { return data_.data() + i * shape_[1]; }
  const T* row(size_t i) const { return data_.data() + i * shape_[1]; }
  T* row(size_t i, size_t j) {
    return data_.data() + (i * shape_[1] + j) * shape_[2];
  }
  const T* row(size_t i, size_t j) const {
    return data_.data() + (i * shape_[1] + j) * shape_[2];
  }

  static size_t count(const std::vector<size_t>& shape) {
    size_t n = 1;
    for (size_t d : shape) n *= d;
    return shape.empty() ? 0 : n;
  }

 private:
  std::vector<size_t> shape_;
  std::vector<T> data_;
};

template <class T>
bool same_shape(const Tensor<T>& a, const Tensor<T>& b) {
  return a.shape() == b.shape();
}

}  // namespace echolab
