#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <functional>
#include <numeric>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "mmenc/errors.hpp"

namespace mmenc {

using Index = Eigen::Index;

template <typename Scalar>
using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

template <typename Scalar>
using RowVector = Eigen::Matrix<Scalar, 1, Eigen::Dynamic, Eigen::RowMajor>;

using Shape = std::vector<Index>;

inline Index shape_size(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), Index{1}, std::multiplies<>());
}

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

// Dense row-major n-d array. Values live in a matrix whose column count is
// the last dimension and whose row count is the product of the leading
// dimensions, so every 2-d operation reads it without copying.
template <typename Scalar>
class Tensor {
 public:
  Tensor() : shape_{1}, data_(Matrix<Scalar>::Zero(1, 1)) {}

  explicit Tensor(Shape shape) : shape_(std::move(shape)) {
    validate_shape();
    data_ = Matrix<Scalar>::Zero(leading(), shape_.back());
  }

  Tensor(Shape shape, Matrix<Scalar> data) : shape_(std::move(shape)), data_(std::move(data)) {
    validate_shape();
    if (data_.rows() != leading() || data_.cols() != shape_.back()) {
      throw ShapeError("tensor storage " + std::to_string(data_.rows()) + "x" +
                       std::to_string(data_.cols()) + " does not match shape " +
                       shape_string(shape_));
    }
  }

  static Tensor from_matrix(Matrix<Scalar> m) {
    const Shape shape{m.rows(), m.cols()};
    return Tensor(shape, std::move(m));
  }

  static Tensor from_values(Shape shape, std::span<const Scalar> values) {
    Tensor t(std::move(shape));
    if (static_cast<Index>(values.size()) != t.size()) {
      throw ShapeError("value count " + std::to_string(values.size()) + " does not match shape " +
                       shape_string(t.shape()));
    }
    std::copy(values.begin(), values.end(), t.data_.data());
    return t;
  }

  const Shape& shape() const { return shape_; }
  Index rank() const { return static_cast<Index>(shape_.size()); }
  Index size() const { return data_.size(); }
  Index dim(Index i) const { return shape_.at(static_cast<std::size_t>(i)); }

  Matrix<Scalar>& matrix() { return data_; }
  const Matrix<Scalar>& matrix() const { return data_; }

  std::span<Scalar> values() { return {data_.data(), static_cast<std::size_t>(data_.size())}; }
  std::span<const Scalar> values() const {
    return {data_.data(), static_cast<std::size_t>(data_.size())};
  }

  Scalar item() const {
    if (size() != 1) throw UsageError("item() on tensor of shape " + shape_string(shape_));
    return data_(0, 0);
  }

  Tensor reshaped(Shape shape) const {
    if (shape_size(shape) != size()) {
      throw ShapeError("cannot reshape " + shape_string(shape_) + " to " + shape_string(shape));
    }
    Tensor out(std::move(shape));
    std::copy(data_.data(), data_.data() + size(), out.data_.data());
    return out;
  }

 private:
  Index leading() const { return shape_size(shape_) / shape_.back(); }

  void validate_shape() const {
    if (shape_.empty()) throw ShapeError("tensor shape must have at least one dimension");
    for (Index d : shape_) {
      if (d <= 0) throw ShapeError("tensor dimensions must be positive, got " + shape_string(shape_));
    }
  }

  Shape shape_;
  Matrix<Scalar> data_;
};

}  // namespace mmenc
