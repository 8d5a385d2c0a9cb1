#pragma once

// Stage 1: global scan, local scan, local-priority union and similarity-based
// token merging over an EncoderTrace.

#include <cstddef>
#include <map>
#include <optional>
#include <vector>

#include "vscan/numerics.hpp"
#include "vscan/trace.hpp"

namespace vscan {

struct ScanConfig {
  double retention = 0.5;        // R1, in (0, 1]
  double global_fraction = 0.5;  // share of the stage-1 budget for global tokens
  std::size_t local_layer = 6;   // shallow layer for the local scan (1-based)
  std::size_t output_layer = 23; // layer for the global scan (1-based)
  std::size_t window_rows = 4;
  std::size_t window_cols = 4;
  ScoreSource score_source = ScoreSource::kCls;
};

// Throws ConfigError naming the first bad field. Checks against the trace
// dimensions when provided.
void validate(const ScanConfig& cfg, std::size_t grid_h, std::size_t grid_w, std::size_t n_layers);

struct TokenSelection {
  std::size_t n_tokens = 0;
  IndexList global_indices;  // ascending
  IndexList local_indices;   // ascending, disjoint from global_indices
  IndexList selected;        // ascending union
  // unselected token -> selected token it was merged into
  std::map<std::size_t, std::size_t> merge_assignment;
  std::optional<Tensor> merged_embeddings;  // [|selected| x D], row order follows `selected`
};

// Stage-1 budgets for n tokens: total = round_half_up(R1 * n), global gets
// ceil(total * global_fraction), local the rest.
struct StageOneBudget {
  std::size_t total = 0;
  std::size_t global = 0;
  std::size_t local = 0;
};
StageOneBudget stage_one_budget(std::size_t n_tokens, double retention, double global_fraction);

// Head-averaged importance of each visual token at `layer`.
//   kCls:     mean over heads of the [CLS] row.
//   kSelfAvg: for token j, mean over heads and queries i != j of attn[i, j].
Tensor head_averaged_scores(const EncoderTrace& trace, std::size_t layer, ScoreSource source);

// Top-k over scores restricted to indices not in `excluded`.
IndexList global_scan(std::span<const double> scores, std::size_t budget,
                      std::span<const std::size_t> excluded);

// Non-overlapping windows tiling the grid, in row-major window order. Each
// window lists its token indices ascending. Row and column extents are
// near-equal splits with the larger blocks first.
std::vector<IndexList> partition_windows(std::size_t grid_h, std::size_t grid_w,
                                         std::size_t window_rows, std::size_t window_cols);

// Per-window budgets: floor(budget / W) each, remainder one apiece to the
// first windows in row-major order. A window that cannot hold its share
// passes the surplus to the following windows, wrapping around once.
std::vector<std::size_t> window_budgets(std::span<const IndexList> windows, std::size_t budget);

IndexList local_scan(std::span<const double> scores, std::span<const IndexList> windows,
                     std::size_t budget);

// Core of select_tokens on precomputed scores: local scan over `local_scores`
// with the configured windows, then global scan over `global_scores` with the
// local tokens excluded. Layer fields of cfg are ignored.
TokenSelection select_from_scores(std::span<const double> local_scores,
                                  std::span<const double> global_scores, std::size_t grid_h,
                                  std::size_t grid_w, const ScanConfig& cfg);

// Local scan at cfg.local_layer, then global scan at cfg.output_layer with
// the local tokens excluded. merge fields are left empty.
TokenSelection select_tokens(const EncoderTrace& trace, const ScanConfig& cfg);

// Assigns every unselected token to the selected token of highest cosine
// similarity (ties: lowest selected index) and averages each group, anchor
// included. Returns `selection` with merge_assignment and merged_embeddings
// filled. Throws DegenerateInputError naming any zero-norm token.
TokenSelection merge_tokens(const Tensor& embeddings, TokenSelection selection);

}  // namespace vscan
