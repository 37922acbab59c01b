#pragma once

#include <algorithm>
#include <cmath>
#include <concepts>
#include <cstddef>
#include <functional>
#include <numeric>
#include <span>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "meshshift/common/errors.hpp"

namespace meshshift::tensor {

using Shape = std::vector<std::size_t>;

inline std::string shape_string(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << 'x';
    os << shape[i];
  }
  os << ']';
  return os.str();
}

/// Dense row-major tensor of rank 1 or 2 holding finite values.
///
/// A rank-1 tensor of extent n behaves as an n x 1 column wherever a matrix
/// view is required. Scalars are rank-1 tensors of extent 1.
template <std::floating_point T>
class BasicTensor {
 public:
  using value_type = T;

  BasicTensor() : shape_{1}, data_(1, T(0)) {}

  BasicTensor(Shape shape, std::vector<T> data) : shape_(std::move(shape)), data_(std::move(data)) {
    validate_shape();
    if (data_.size() != numel_of(shape_)) {
      throw ShapeError("tensor data length " + std::to_string(data_.size()) +
                       " does not match shape " + shape_string(shape_));
    }
    check_finite("construction");
  }

  static BasicTensor zeros(Shape shape) {
    BasicTensor t;
    t.shape_ = std::move(shape);
    t.validate_shape();
    t.data_.assign(numel_of(t.shape_), T(0));
    return t;
  }
  static BasicTensor zeros(std::size_t rows, std::size_t cols) { return zeros(Shape{rows, cols}); }
  static BasicTensor full(std::size_t rows, std::size_t cols, T value) {
    auto t = zeros(rows, cols);
    std::fill(t.data_.begin(), t.data_.end(), value);
    return t;
  }
  static BasicTensor scalar(T value) { return BasicTensor(Shape{1}, std::vector<T>{value}); }
  static BasicTensor matrix(std::size_t rows, std::size_t cols, std::vector<T> data) {
    return BasicTensor(Shape{rows, cols}, std::move(data));
  }
  static BasicTensor identity(std::size_t n) {
    auto t = zeros(n, n);
    for (std::size_t i = 0; i < n; ++i) t.data_[i * n + i] = T(1);
    return t;
  }

  const Shape& shape() const noexcept { return shape_; }
  std::size_t rank() const noexcept { return shape_.size(); }
  std::size_t rows() const noexcept { return shape_[0]; }
  std::size_t cols() const noexcept { return shape_.size() == 2 ? shape_[1] : 1; }
  std::size_t numel() const noexcept { return data_.size(); }
  bool is_scalar() const noexcept { return data_.size() == 1; }

  std::span<const T> data() const noexcept { return data_; }
  /// Mutable access for builders. Callers restore finiteness before handing the tensor on.
  std::span<T> mutable_data() noexcept { return data_; }
  std::vector<T>&& release() && { return std::move(data_); }

  T operator()(std::size_t r, std::size_t c) const { return data_[r * cols() + c]; }
  T& at(std::size_t r, std::size_t c) { return data_[r * cols() + c]; }
  T item() const {
    if (!is_scalar()) throw ShapeError("item() on non-scalar tensor " + shape_string(shape_));
    return data_[0];
  }

  void check_finite(const char* context) const {
    for (T v : data_) {
      if (!std::isfinite(v)) {
        throw NumericError(std::string("non-finite value in tensor after ") + context);
      }
    }
  }

  bool operator==(const BasicTensor& other) const = default;

 private:
  static std::size_t numel_of(const Shape& shape) {
    return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
  }
  void validate_shape() const {
    if (shape_.empty() || shape_.size() > 2) {
      throw ShapeError("tensor rank must be 1 or 2, got shape " + shape_string(shape_));
    }
    for (auto e : shape_) {
      if (e == 0) throw ShapeError("tensor extents must be positive, got " + shape_string(shape_));
    }
  }

  Shape shape_;
  std::vector<T> data_;
};

using Tensor = BasicTensor<double>;
using Tensor32 = BasicTensor<float>;

}  // namespace meshshift::tensor
