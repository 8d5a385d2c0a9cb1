#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <vector>

namespace vscan {

using Shape = std::vector<std::size_t>;
using IndexList = std::vector<std::size_t>;

// Dense row-major array of doubles with an explicit shape.
//
// Every dimension is >= 1 and every entry is finite; both are checked on
// construction and a violation throws ShapeError. Tensors are immutable
// values once built.
class Tensor {
 public:
  Tensor(Shape shape, std::vector<double> data);

  static Tensor zeros(Shape shape);
  static Tensor vector(std::vector<double> values);
  static Tensor matrix(std::size_t rows, std::size_t cols, std::vector<double> data);

  const Shape& shape() const noexcept { return shape_; }
  std::size_t rank() const noexcept { return shape_.size(); }
  std::size_t dim(std::size_t axis) const;
  std::size_t size() const noexcept { return data_.size(); }

  std::span<const double> data() const noexcept { return data_; }
  double operator[](std::size_t flat) const { return data_[flat]; }

  // 2-D helpers. Throw ShapeError on a non-matrix.
  std::size_t rows() const;
  std::size_t cols() const;
  std::span<const double> row(std::size_t r) const;
  double at(std::size_t r, std::size_t c) const;

  // Slice along the leading axis; the result drops that axis.
  Tensor slice(std::size_t index) const;

  friend bool operator==(const Tensor&, const Tensor&) = default;

 private:
  Shape shape_;
  std::vector<double> data_;
};

std::size_t shape_product(std::span<const std::size_t> shape);

// Rounds x to the nearest integer with halves going up. A tolerance of 1e-9
// absorbs representation error in products like 0.15 * 10.
std::size_t round_half_up(double x);

// Row-wise numerically stable softmax of a 2-D tensor.
Tensor softmax_rows(const Tensor& logits);

// softmax(query * keys^T / sqrt(D)) for query [q x D] and keys [n x D].
Tensor scaled_attention(const Tensor& query, const Tensor& keys);

// Indices of the k largest scores, ascending by index. Ties go to the lower
// index. Throws BudgetError when k > scores.size().
IndexList top_k_indices(std::span<const double> scores, std::size_t k);
IndexList top_k_indices(const Tensor& scores, std::size_t k);

// a.b / (|a||b|) clamped to [-1, 1]. Throws DegenerateInputError on a
// zero-norm argument and ShapeError on a length mismatch.
double cosine_similarity(std::span<const double> a, std::span<const double> b);

}  // namespace vscan
