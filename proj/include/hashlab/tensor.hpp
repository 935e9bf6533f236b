#pragma once

#include <Eigen/Core>

#include <string>
#include <utility>
#include <vector>

#include "hashlab/errors.hpp"

namespace hashlab {

using Index = Eigen::Index;

/// Extents of a tensor, outermost first. A rank-3 shape is channels x height x width.
using Shape = std::vector<Index>;

template <typename Scalar>
using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

template <typename Scalar>
using RowMatrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

Index numel(const Shape& shape);
std::string to_string(const Shape& shape);
bool shape_valid(const Shape& shape);

/// Dense row-major array of reals with a dynamic shape.
///
/// A default-constructed tensor is empty (rank 0, no data) and stands in for
/// "no parameter" in layers that have none. Any non-empty tensor has strictly
/// positive extents and numel(shape) values.
template <typename Scalar>
class Tensor {
 public:
  using scalar_type = Scalar;

  Tensor() = default;

  explicit Tensor(Shape shape) : shape_(std::move(shape)) {
    check_shape();
    data_ = Vector<Scalar>::Zero(numel(shape_));
  }

  Tensor(Shape shape, Vector<Scalar> data) : shape_(std::move(shape)), data_(std::move(data)) {
    check_shape();
    if (data_.size() != numel(shape_)) {
      throw ShapeError("tensor data length " + std::to_string(data_.size()) +
                       " does not match shape " + to_string(shape_));
    }
  }

  static Tensor Constant(Shape shape, Scalar value) {
    Tensor t(std::move(shape));
    t.data_.setConstant(value);
    return t;
  }

  const Shape& shape() const { return shape_; }
  Index rank() const { return static_cast<Index>(shape_.size()); }
  Index dim(Index i) const { return shape_.at(static_cast<std::size_t>(i)); }
  Index size() const { return data_.size(); }
  bool empty() const { return shape_.empty(); }

  Vector<Scalar>& values() { return data_; }
  const Vector<Scalar>& values() const { return data_; }

  Scalar& operator[](Index i) { return data_[i]; }
  Scalar operator[](Index i) const { return data_[i]; }

  /// Element (c, h, w) of a rank-3 tensor.
  Scalar& at(Index c, Index h, Index w) { return data_[(c * shape_[1] + h) * shape_[2] + w]; }
  Scalar at(Index c, Index h, Index w) const { return data_[(c * shape_[1] + h) * shape_[2] + w]; }

  /// Row-major view with the given number of rows; columns are inferred.
  Eigen::Map<RowMatrix<Scalar>> matrix(Index rows) {
    return {data_.data(), rows, rows == 0 ? 0 : data_.size() / rows};
  }
  Eigen::Map<const RowMatrix<Scalar>> matrix(Index rows) const {
    return {data_.data(), rows, rows == 0 ? 0 : data_.size() / rows};
  }

  bool all_finite() const { return data_.allFinite(); }

  void reshape(Shape shape) {
    if (numel(shape) != data_.size()) {
      throw ShapeError("cannot reshape " + to_string(shape_) + " to " + to_string(shape));
    }
    shape_ = std::move(shape);
  }

  template <typename Other>
  Tensor<Other> cast() const {
    if (empty()) return {};
    return Tensor<Other>(shape_, data_.template cast<Other>());
  }

  Tensor zeros_like() const { return empty() ? Tensor{} : Tensor(shape_); }

  friend bool operator==(const Tensor& a, const Tensor& b) {
    return a.shape_ == b.shape_ && a.data_ == b.data_;
  }

 private:
  void check_shape() const {
    if (!shape_valid(shape_)) throw ShapeError("invalid tensor shape " + to_string(shape_));
  }

  Shape shape_;
  Vector<Scalar> data_;
};

}  // namespace hashlab
