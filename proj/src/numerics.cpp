#include "vscan/numerics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include <fmt/format.h>
#include <fmt/ranges.h>

#include "vscan/error.hpp"
#include "vscan/kernels.hpp"

namespace vscan {

std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kShape: return "shape error";
    case ErrorKind::kBudget: return "budget error";
    case ErrorKind::kDegenerateInput: return "degenerate input";
    case ErrorKind::kFormat: return "format error";
    case ErrorKind::kTrace: return "trace error";
    case ErrorKind::kLayout: return "layout error";
    case ErrorKind::kConfig: return "config error";
    case ErrorKind::kIo: return "io error";
  }
  return "error";
}

std::size_t shape_product(std::span<const std::size_t> shape) {
  std::size_t total = 1;
  for (auto d : shape) total *= d;
  return total;
}

Tensor::Tensor(Shape shape, std::vector<double> data)
    : shape_(std::move(shape)), data_(std::move(data)) {
  if (shape_.empty()) throw ShapeError("tensor shape must have at least one dimension");
  for (auto d : shape_) {
    if (d == 0) throw ShapeError(fmt::format("tensor shape {} has a zero dimension", shape_));
  }
  if (shape_product(shape_) != data_.size()) {
    throw ShapeError(fmt::format("tensor shape {} needs {} values, got {}", shape_,
                                 shape_product(shape_), data_.size()));
  }
  for (std::size_t i = 0; i < data_.size(); ++i) {
    if (!std::isfinite(data_[i])) {
      throw ShapeError(fmt::format("tensor entry {} is not finite", i));
    }
  }
}

Tensor Tensor::zeros(Shape shape) {
  const auto n = shape_product(shape);
  return Tensor(std::move(shape), std::vector<double>(n, 0.0));
}

Tensor Tensor::vector(std::vector<double> values) {
  const auto n = values.size();
  return Tensor({n}, std::move(values));
}

Tensor Tensor::matrix(std::size_t rows, std::size_t cols, std::vector<double> data) {
  return Tensor({rows, cols}, std::move(data));
}

std::size_t Tensor::dim(std::size_t axis) const {
  if (axis >= shape_.size()) {
    throw ShapeError(fmt::format("axis {} out of range for rank {}", axis, shape_.size()));
  }
  return shape_[axis];
}

std::size_t Tensor::rows() const {
  if (rank() != 2) throw ShapeError(fmt::format("expected a 2-D tensor, got rank {}", rank()));
  return shape_[0];
}

std::size_t Tensor::cols() const {
  if (rank() != 2) throw ShapeError(fmt::format("expected a 2-D tensor, got rank {}", rank()));
  return shape_[1];
}

std::span<const double> Tensor::row(std::size_t r) const {
  const auto c = cols();
  if (r >= shape_[0]) throw ShapeError(fmt::format("row {} out of range", r));
  return std::span<const double>(data_).subspan(r * c, c);
}

double Tensor::at(std::size_t r, std::size_t c) const {
  const auto nc = cols();
  if (r >= shape_[0] || c >= nc) throw ShapeError(fmt::format("index ({}, {}) out of range", r, c));
  return data_[r * nc + c];
}

Tensor Tensor::slice(std::size_t index) const {
  if (rank() < 2) throw ShapeError("slice needs a tensor of rank >= 2");
  if (index >= shape_[0]) throw ShapeError(fmt::format("slice {} out of range", index));
  Shape sub(shape_.begin() + 1, shape_.end());
  const auto stride = shape_product(sub);
  std::vector<double> out(data_.begin() + index * stride, data_.begin() + (index + 1) * stride);
  return Tensor(std::move(sub), std::move(out));
}

std::size_t round_half_up(double x) {
  if (x <= 0.0) return 0;
  return static_cast<std::size_t>(std::floor(x + 0.5 + 1e-9));
}

Tensor softmax_rows(const Tensor& logits) {
  if (logits.rank() != 2) {
    throw ShapeError(fmt::format("softmax_rows expects a 2-D tensor, got rank {}", logits.rank()));
  }
  std::vector<double> out(logits.size());
  kernels::softmax_rows(logits.data(), logits.rows(), logits.cols(), out);
  return Tensor(logits.shape(), std::move(out));
}

Tensor scaled_attention(const Tensor& query, const Tensor& keys) {
  if (query.rank() != 2 || keys.rank() != 2) {
    throw ShapeError("scaled_attention expects 2-D query and keys");
  }
  const auto d = query.cols();
  if (keys.cols() != d) {
    throw ShapeError(fmt::format("query width {} does not match key width {}", d, keys.cols()));
  }
  const auto q = query.rows();
  const auto n = keys.rows();
  std::vector<double> logits(q * n);
  kernels::scaled_dot_rows(query.data(), q, keys.data(), n, d,
                           1.0 / std::sqrt(static_cast<double>(d)), logits);
  std::vector<double> out(q * n);
  kernels::softmax_rows(logits, q, n, out);
  return Tensor::matrix(q, n, std::move(out));
}

IndexList top_k_indices(std::span<const double> scores, std::size_t k) {
  const auto n = scores.size();
  if (k > n) throw BudgetError(fmt::format("cannot take top {} of {} scores", k, n));
  IndexList order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  auto better = [&](std::size_t a, std::size_t b) {
    if (scores[a] != scores[b]) return scores[a] > scores[b];
    return a < b;
  };
  std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(k), order.end(),
                    better);
  order.resize(k);
  std::sort(order.begin(), order.end());
  return order;
}

IndexList top_k_indices(const Tensor& scores, std::size_t k) {
  if (scores.rank() != 1) throw ShapeError("top_k_indices expects a 1-D tensor");
  return top_k_indices(scores.data(), k);
}

double cosine_similarity(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size() || a.empty()) {
    throw ShapeError(fmt::format("cosine_similarity needs equal non-empty lengths, got {} and {}",
                                 a.size(), b.size()));
  }
  double ab = 0.0, aa = 0.0, bb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    ab += a[i] * b[i];
    aa += a[i] * a[i];
    bb += b[i] * b[i];
  }
  if (aa == 0.0 || bb == 0.0) throw DegenerateInputError("cosine_similarity of a zero-norm vector");
  return std::clamp(ab / (std::sqrt(aa) * std::sqrt(bb)), -1.0, 1.0);
}

}  // namespace vscan
