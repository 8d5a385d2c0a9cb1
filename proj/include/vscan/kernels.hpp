#pragma once

// Data-parallel inner loops behind numerics, encoder-scan and the synthetic
// generators. Each kernel has an OpenMP version in vscan::kernels and a plain
// serial reference in vscan::kernels::serial with the same signature.
//
// Every output element is produced by exactly one thread using a fixed
// summation order, so the parallel and serial versions agree bit for bit and
// results do not depend on the thread count.
//
// Layout conventions: all buffers are row-major. Kernels do not validate
// shapes; callers in numerics/encoder_scan do.

#include <cstddef>
#include <span>

namespace vscan::kernels {

// out[r, :] = softmax(in[r, :]) with per-row max subtraction.
void softmax_rows(std::span<const double> in, std::size_t rows, std::size_t cols,
                  std::span<double> out);

// out[i, j] = scale * <query[i, :], keys[j, :]>, query [q x d], keys [n x d].
void scaled_dot_rows(std::span<const double> query, std::size_t q,
                     std::span<const double> keys, std::size_t n, std::size_t d,
                     double scale, std::span<double> out);

// attn is [heads x n x n] (query-major). out[j] = mean over heads and over
// queries i != j of attn[h, i, j]. For n == 1 the result is 0.
void received_attention_mean(std::span<const double> attn, std::size_t heads,
                             std::size_t n, std::span<double> out);

// rows is [heads x cols]. out[c] = mean over heads of rows[h, begin + c] for
// c in [0, out.size()).
void head_mean(std::span<const double> rows, std::size_t heads, std::size_t cols,
               std::size_t begin, std::span<double> out);

// For each query index q = queries[t], writes into out[t] the position p in
// `anchors` maximising cosine(emb[q], emb[anchors[p]]); ties keep the lowest
// p. `inv_norm[i]` must hold 1 / |emb[i]|. emb is [n x d].
void nearest_by_cosine(std::span<const double> emb, std::size_t d,
                       std::span<const double> inv_norm,
                       std::span<const std::size_t> anchors,
                       std::span<const std::size_t> queries,
                       std::span<std::size_t> out);

// Group means. group_of[i] is the output row for input row i, and
// group_size[g] the member count of group g. out is [groups x d]. Members are
// accumulated in ascending input order.
void group_mean(std::span<const double> emb, std::size_t n, std::size_t d,
                std::span<const std::size_t> group_of,
                std::span<const std::size_t> group_size, std::span<double> out);

namespace serial {

void softmax_rows(std::span<const double> in, std::size_t rows, std::size_t cols,
                  std::span<double> out);
void scaled_dot_rows(std::span<const double> query, std::size_t q,
                     std::span<const double> keys, std::size_t n, std::size_t d,
                     double scale, std::span<double> out);
void received_attention_mean(std::span<const double> attn, std::size_t heads,
                             std::size_t n, std::span<double> out);
void head_mean(std::span<const double> rows, std::size_t heads, std::size_t cols,
               std::size_t begin, std::span<double> out);
void nearest_by_cosine(std::span<const double> emb, std::size_t d,
                       std::span<const double> inv_norm,
                       std::span<const std::size_t> anchors,
                       std::span<const std::size_t> queries,
                       std::span<std::size_t> out);
void group_mean(std::span<const double> emb, std::size_t n, std::size_t d,
                std::span<const std::size_t> group_of,
                std::span<const std::size_t> group_size, std::span<double> out);

}  // namespace serial

// Number of threads the parallel kernels will use (1 without OpenMP).
int max_threads();

}  // namespace vscan::kernels
