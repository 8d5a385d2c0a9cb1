#include "vscan/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <vector>

#ifdef VSCAN_HAVE_OPENMP
#include <omp.h>
#endif

namespace vscan::kernels {

namespace {

using Index = std::int64_t;  // OpenMP loop variables must be signed

void softmax_one_row(const double* in, std::size_t cols, double* out) {
  double peak = in[0];
  for (std::size_t c = 1; c < cols; ++c) peak = std::max(peak, in[c]);
  double total = 0.0;
  for (std::size_t c = 0; c < cols; ++c) {
    out[c] = std::exp(in[c] - peak);
    total += out[c];
  }
  for (std::size_t c = 0; c < cols; ++c) out[c] /= total;
}

double dot(const double* a, const double* b, std::size_t d) {
  double acc = 0.0;
  for (std::size_t k = 0; k < d; ++k) acc += a[k] * b[k];
  return acc;
}

std::size_t best_anchor(std::span<const double> emb, std::size_t d,
                        std::span<const double> inv_norm,
                        std::span<const std::size_t> anchors, std::size_t query) {
  const double* qrow = emb.data() + query * d;
  std::size_t best = 0;
  double best_sim = -std::numeric_limits<double>::infinity();
  for (std::size_t p = 0; p < anchors.size(); ++p) {
    const std::size_t a = anchors[p];
    const double sim = dot(qrow, emb.data() + a * d, d) * inv_norm[query] * inv_norm[a];
    if (sim > best_sim) {
      best_sim = sim;
      best = p;
    }
  }
  return best;
}

}  // namespace

int max_threads() {
#ifdef VSCAN_HAVE_OPENMP
  return omp_get_max_threads();
#else
  return 1;
#endif
}

void softmax_rows(std::span<const double> in, std::size_t rows, std::size_t cols,
                  std::span<double> out) {
  const Index n = static_cast<Index>(rows);
#pragma omp parallel for schedule(static)
  for (Index r = 0; r < n; ++r) {
    softmax_one_row(in.data() + r * cols, cols, out.data() + r * cols);
  }
}

void scaled_dot_rows(std::span<const double> query, std::size_t q,
                     std::span<const double> keys, std::size_t n, std::size_t d,
                     double scale, std::span<double> out) {
  const Index total = static_cast<Index>(q * n);
#pragma omp parallel for schedule(static)
  for (Index idx = 0; idx < total; ++idx) {
    const std::size_t i = static_cast<std::size_t>(idx) / n;
    const std::size_t j = static_cast<std::size_t>(idx) % n;
    out[idx] = scale * dot(query.data() + i * d, keys.data() + j * d, d);
  }
}

void received_attention_mean(std::span<const double> attn, std::size_t heads,
                             std::size_t n, std::span<double> out) {
  if (n == 1) {
    out[0] = 0.0;
    return;
  }
  const double denom = static_cast<double>(heads * (n - 1));
  // Each thread owns one contiguous column tile and sweeps the rows across
  // it once, keeping the (h, i) accumulation order of the serial version.
#pragma omp parallel
  {
    std::size_t lo = 0, hi = n;
#ifdef VSCAN_HAVE_OPENMP
    const auto t = static_cast<std::size_t>(omp_get_thread_num());
    const auto nt = static_cast<std::size_t>(omp_get_num_threads());
    lo = n * t / nt;
    hi = n * (t + 1) / nt;
#endif
    std::vector<double> acc(hi - lo, 0.0);
    for (std::size_t h = 0; h < heads && lo < hi; ++h) {
      for (std::size_t i = 0; i < n; ++i) {
        const double* row = attn.data() + (h * n + i) * n;
        // Skip the diagonal without a branch in the inner loop.
        const std::size_t cut = std::clamp(i, lo, hi);
        for (std::size_t j = lo; j < cut; ++j) acc[j - lo] += row[j];
        for (std::size_t j = std::max(cut, std::min(i + 1, hi)); j < hi; ++j) acc[j - lo] += row[j];
      }
    }
    for (std::size_t j = lo; j < hi; ++j) out[j] = acc[j - lo] / denom;
  }
}

void head_mean(std::span<const double> rows, std::size_t heads, std::size_t cols,
               std::size_t begin, std::span<double> out) {
  const Index count = static_cast<Index>(out.size());
  const double denom = static_cast<double>(heads);
#pragma omp parallel for schedule(static)
  for (Index cc = 0; cc < count; ++cc) {
    const std::size_t c = begin + static_cast<std::size_t>(cc);
    double acc = 0.0;
    for (std::size_t h = 0; h < heads; ++h) acc += rows[h * cols + c];
    out[cc] = acc / denom;
  }
}

void nearest_by_cosine(std::span<const double> emb, std::size_t d,
                       std::span<const double> inv_norm,
                       std::span<const std::size_t> anchors,
                       std::span<const std::size_t> queries,
                       std::span<std::size_t> out) {
  const Index count = static_cast<Index>(queries.size());
#pragma omp parallel for schedule(dynamic, 16)
  for (Index t = 0; t < count; ++t) {
    out[t] = best_anchor(emb, d, inv_norm, anchors, queries[t]);
  }
}

void group_mean(std::span<const double> emb, std::size_t n, std::size_t d,
                std::span<const std::size_t> group_of,
                std::span<const std::size_t> group_size, std::span<double> out) {
  const std::size_t groups = group_size.size();
  // Bucket members per group (CSR), ascending by input index.
  std::vector<std::size_t> offset(groups + 1, 0);
  for (std::size_t g = 0; g < groups; ++g) offset[g + 1] = offset[g] + group_size[g];
  std::vector<std::size_t> cursor(offset.begin(), offset.end() - 1);
  std::vector<std::size_t> members(n);
  for (std::size_t i = 0; i < n; ++i) members[cursor[group_of[i]]++] = i;

  const Index ng = static_cast<Index>(groups);
#pragma omp parallel for schedule(static)
  for (Index gg = 0; gg < ng; ++gg) {
    const std::size_t g = static_cast<std::size_t>(gg);
    double* dst = out.data() + g * d;
    std::fill(dst, dst + d, 0.0);
    for (std::size_t m = offset[g]; m < offset[g + 1]; ++m) {
      const double* src = emb.data() + members[m] * d;
      for (std::size_t k = 0; k < d; ++k) dst[k] += src[k];
    }
    const double count = static_cast<double>(group_size[g]);
    for (std::size_t k = 0; k < d; ++k) dst[k] /= count;
  }
}

namespace serial {

void softmax_rows(std::span<const double> in, std::size_t rows, std::size_t cols,
                  std::span<double> out) {
  for (std::size_t r = 0; r < rows; ++r) {
    const double* src = in.data() + r * cols;
    double* dst = out.data() + r * cols;
    double peak = src[0];
    for (std::size_t c = 1; c < cols; ++c) peak = std::max(peak, src[c]);
    double total = 0.0;
    for (std::size_t c = 0; c < cols; ++c) {
      dst[c] = std::exp(src[c] - peak);
      total += dst[c];
    }
    for (std::size_t c = 0; c < cols; ++c) dst[c] /= total;
  }
}

void scaled_dot_rows(std::span<const double> query, std::size_t q,
                     std::span<const double> keys, std::size_t n, std::size_t d,
                     double scale, std::span<double> out) {
  for (std::size_t i = 0; i < q; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      double acc = 0.0;
      for (std::size_t k = 0; k < d; ++k) acc += query[i * d + k] * keys[j * d + k];
      out[i * n + j] = scale * acc;
    }
  }
}

void received_attention_mean(std::span<const double> attn, std::size_t heads,
                             std::size_t n, std::span<double> out) {
  std::fill(out.begin(), out.end(), 0.0);
  if (n == 1) return;
  // Row sweep; per output element the accumulation order is (h, i) ascending.
  for (std::size_t h = 0; h < heads; ++h) {
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < n; ++j) {
        if (i != j) out[j] += attn[(h * n + i) * n + j];
      }
    }
  }
  const double denom = static_cast<double>(heads * (n - 1));
  for (auto& v : out) v /= denom;
}

void head_mean(std::span<const double> rows, std::size_t heads, std::size_t cols,
               std::size_t begin, std::span<double> out) {
  std::fill(out.begin(), out.end(), 0.0);
  for (std::size_t h = 0; h < heads; ++h) {
    for (std::size_t c = 0; c < out.size(); ++c) out[c] += rows[h * cols + begin + c];
  }
  for (auto& v : out) v /= static_cast<double>(heads);
}

void nearest_by_cosine(std::span<const double> emb, std::size_t d,
                       std::span<const double> inv_norm,
                       std::span<const std::size_t> anchors,
                       std::span<const std::size_t> queries,
                       std::span<std::size_t> out) {
  for (std::size_t t = 0; t < queries.size(); ++t) {
    out[t] = best_anchor(emb, d, inv_norm, anchors, queries[t]);
  }
}

void group_mean(std::span<const double> emb, std::size_t n, std::size_t d,
                std::span<const std::size_t> group_of,
                std::span<const std::size_t> group_size, std::span<double> out) {
  std::fill(out.begin(), out.end(), 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    double* dst = out.data() + group_of[i] * d;
    for (std::size_t k = 0; k < d; ++k) dst[k] += emb[i * d + k];
  }
  for (std::size_t g = 0; g < group_size.size(); ++g) {
    for (std::size_t k = 0; k < d; ++k) out[g * d + k] /= static_cast<double>(group_size[g]);
  }
}

}  // namespace serial

}  // namespace vscan::kernels
