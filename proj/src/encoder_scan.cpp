#include "vscan/encoder_scan.hpp"

#include <algorithm>
#include <cmath>

#include <fmt/format.h>

#include "vscan/error.hpp"
#include "vscan/kernels.hpp"

namespace vscan {

void validate(const ScanConfig& cfg, std::size_t grid_h, std::size_t grid_w,
              std::size_t n_layers) {
  if (!(cfg.retention > 0.0 && cfg.retention <= 1.0)) {
    throw ConfigError("r1", fmt::format("retention {} outside (0, 1]", cfg.retention));
  }
  if (!(cfg.global_fraction >= 0.0 && cfg.global_fraction <= 1.0)) {
    throw ConfigError("global_fraction",
                      fmt::format("{} outside [0, 1]", cfg.global_fraction));
  }
  if (cfg.local_layer < 1) throw ConfigError("local_layer", "must be >= 1");
  if (cfg.output_layer < cfg.local_layer) {
    throw ConfigError("output_layer", fmt::format("{} is below local_layer {}", cfg.output_layer,
                                                  cfg.local_layer));
  }
  if (cfg.output_layer > n_layers) {
    throw ConfigError("output_layer", fmt::format("{} exceeds encoder depth {}", cfg.output_layer,
                                                  n_layers));
  }
  if (cfg.window_rows < 1 || cfg.window_rows > grid_h) {
    throw ConfigError("window_rows", fmt::format("{} not in [1, {}]", cfg.window_rows, grid_h));
  }
  if (cfg.window_cols < 1 || cfg.window_cols > grid_w) {
    throw ConfigError("window_cols", fmt::format("{} not in [1, {}]", cfg.window_cols, grid_w));
  }
}

StageOneBudget stage_one_budget(std::size_t n_tokens, double retention, double global_fraction) {
  const auto total = round_half_up(retention * static_cast<double>(n_tokens));
  if (total < 1 || total > n_tokens) {
    throw BudgetError(fmt::format("stage-1 budget {} for {} tokens at R1={} is infeasible", total,
                                  n_tokens, retention));
  }
  const auto global = std::min(
      total, static_cast<std::size_t>(std::ceil(static_cast<double>(total) * global_fraction - 1e-9)));
  return {total, global, total - global};
}

Tensor head_averaged_scores(const EncoderTrace& trace, std::size_t layer, ScoreSource source) {
  const auto n = trace.n_tokens();
  std::vector<double> out(n);
  if (source == ScoreSource::kCls) {
    const auto& cls = trace.cls(layer);
    kernels::head_mean(cls.data(), trace.n_heads, n, 0, out);
  } else {
    const auto& self = trace.self(layer);
    kernels::received_attention_mean(self.data(), trace.n_heads, n, out);
  }
  return Tensor::vector(std::move(out));
}

IndexList global_scan(std::span<const double> scores, std::size_t budget,
                      std::span<const std::size_t> excluded) {
  std::vector<bool> skip(scores.size(), false);
  for (auto i : excluded) {
    if (i >= scores.size()) throw BudgetError(fmt::format("excluded index {} out of range", i));
    skip[i] = true;
  }
  IndexList candidates;
  std::vector<double> sub;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (!skip[i]) {
      candidates.push_back(i);
      sub.push_back(scores[i]);
    }
  }
  if (budget > candidates.size()) {
    throw BudgetError(fmt::format("global budget {} exceeds {} eligible tokens", budget,
                                  candidates.size()));
  }
  IndexList out;
  out.reserve(budget);
  for (auto pos : top_k_indices(sub, budget)) out.push_back(candidates[pos]);
  return out;
}

std::vector<IndexList> partition_windows(std::size_t grid_h, std::size_t grid_w,
                                         std::size_t window_rows, std::size_t window_cols) {
  if (window_rows < 1 || window_cols < 1 || window_rows > grid_h || window_cols > grid_w) {
    throw ConfigError("windows", fmt::format("window grid {}x{} does not fit patch grid {}x{}",
                                             window_rows, window_cols, grid_h, grid_w));
  }
  auto splits = [](std::size_t extent, std::size_t parts) {
    std::vector<std::size_t> bounds{0};
    const auto base = extent / parts, extra = extent % parts;
    for (std::size_t p = 0; p < parts; ++p) bounds.push_back(bounds.back() + base + (p < extra));
    return bounds;
  };
  const auto rb = splits(grid_h, window_rows);
  const auto cb = splits(grid_w, window_cols);
  std::vector<IndexList> windows;
  windows.reserve(window_rows * window_cols);
  for (std::size_t wr = 0; wr < window_rows; ++wr) {
    for (std::size_t wc = 0; wc < window_cols; ++wc) {
      IndexList w;
      for (std::size_t r = rb[wr]; r < rb[wr + 1]; ++r) {
        for (std::size_t c = cb[wc]; c < cb[wc + 1]; ++c) w.push_back(r * grid_w + c);
      }
      windows.push_back(std::move(w));
    }
  }
  return windows;
}

std::vector<std::size_t> window_budgets(std::span<const IndexList> windows, std::size_t budget) {
  const auto count = windows.size();
  std::size_t capacity = 0;
  for (const auto& w : windows) capacity += w.size();
  if (count == 0 || budget > capacity) {
    throw BudgetError(fmt::format("local budget {} exceeds {} tokens in {} windows", budget,
                                  capacity, count));
  }
  std::vector<std::size_t> take(count, 0);
  std::size_t carry = 0;
  for (std::size_t w = 0; w < count; ++w) {
    const std::size_t want = budget / count + (w < budget % count) + carry;
    take[w] = std::min(want, windows[w].size());
    carry = want - take[w];
  }
  for (std::size_t w = 0; w < count && carry > 0; ++w) {
    const auto extra = std::min(carry, windows[w].size() - take[w]);
    take[w] += extra;
    carry -= extra;
  }
  return take;
}

IndexList local_scan(std::span<const double> scores, std::span<const IndexList> windows,
                     std::size_t budget) {
  const auto budgets = window_budgets(windows, budget);
  IndexList out;
  out.reserve(budget);
  std::vector<double> sub;
  for (std::size_t w = 0; w < windows.size(); ++w) {
    sub.clear();
    for (auto i : windows[w]) {
      if (i >= scores.size()) throw BudgetError(fmt::format("window index {} out of range", i));
      sub.push_back(scores[i]);
    }
    for (auto pos : top_k_indices(sub, budgets[w])) out.push_back(windows[w][pos]);
  }
  std::sort(out.begin(), out.end());
  return out;
}

TokenSelection select_from_scores(std::span<const double> local_scores,
                                  std::span<const double> global_scores, std::size_t grid_h,
                                  std::size_t grid_w, const ScanConfig& cfg) {
  const auto n = grid_h * grid_w;
  if (local_scores.size() != n || global_scores.size() != n) {
    throw ShapeError(fmt::format("score vectors of length {} and {} for a {}x{} grid",
                                 local_scores.size(), global_scores.size(), grid_h, grid_w));
  }
  const auto budget = stage_one_budget(n, cfg.retention, cfg.global_fraction);
  const auto windows = partition_windows(grid_h, grid_w, cfg.window_rows, cfg.window_cols);

  TokenSelection sel;
  sel.n_tokens = n;
  sel.local_indices = local_scan(local_scores, windows, budget.local);
  sel.global_indices = global_scan(global_scores, budget.global, sel.local_indices);
  sel.selected.reserve(budget.total);
  std::merge(sel.local_indices.begin(), sel.local_indices.end(), sel.global_indices.begin(),
             sel.global_indices.end(), std::back_inserter(sel.selected));
  return sel;
}

TokenSelection select_tokens(const EncoderTrace& trace, const ScanConfig& cfg) {
  validate(cfg, trace.grid_h, trace.grid_w, trace.n_layers);
  const auto n = trace.n_tokens();
  const auto budget = stage_one_budget(n, cfg.retention, cfg.global_fraction);
  // Only read the attention kinds the budgets actually need.
  const auto zeros = std::vector<double>(n, 0.0);
  const auto local = budget.local > 0
                         ? head_averaged_scores(trace, cfg.local_layer, cfg.score_source)
                         : Tensor::vector(zeros);
  const auto global = budget.global > 0
                          ? head_averaged_scores(trace, cfg.output_layer, cfg.score_source)
                          : Tensor::vector(zeros);
  return select_from_scores(local.data(), global.data(), trace.grid_h, trace.grid_w, cfg);
}

TokenSelection merge_tokens(const Tensor& embeddings, TokenSelection selection) {
  if (embeddings.rank() != 2) throw ShapeError("embeddings must be 2-D");
  const auto n = embeddings.rows();
  const auto d = embeddings.cols();
  if (selection.n_tokens != 0 && selection.n_tokens != n) {
    throw ShapeError(fmt::format("selection covers {} tokens but embeddings have {} rows",
                                 selection.n_tokens, n));
  }
  if (selection.selected.empty()) throw BudgetError("merge_tokens needs a non-empty selection");
  selection.n_tokens = n;

  std::vector<std::size_t> group_of(n, n);
  for (std::size_t g = 0; g < selection.selected.size(); ++g) {
    const auto s = selection.selected[g];
    if (s >= n) throw ShapeError(fmt::format("selected index {} out of range", s));
    group_of[s] = g;
  }
  IndexList unselected;
  for (std::size_t i = 0; i < n; ++i) {
    if (group_of[i] == n) unselected.push_back(i);
  }

  std::vector<double> inv_norm(n);
  for (std::size_t i = 0; i < n; ++i) {
    double norm2 = 0.0;
    for (auto v : embeddings.row(i)) norm2 += v * v;
    if (norm2 == 0.0) {
      throw DegenerateInputError(fmt::format("embedding of token {} has zero norm", i));
    }
    inv_norm[i] = 1.0 / std::sqrt(norm2);
  }

  std::vector<std::size_t> nearest(unselected.size());
  kernels::nearest_by_cosine(embeddings.data(), d, inv_norm, selection.selected, unselected,
                             nearest);

  std::vector<std::size_t> group_size(selection.selected.size(), 1);
  selection.merge_assignment.clear();
  for (std::size_t t = 0; t < unselected.size(); ++t) {
    group_of[unselected[t]] = nearest[t];
    ++group_size[nearest[t]];
    selection.merge_assignment.emplace(unselected[t], selection.selected[nearest[t]]);
  }

  std::vector<double> merged(selection.selected.size() * d);
  kernels::group_mean(embeddings.data(), n, d, group_of, group_size, merged);
  selection.merged_embeddings = Tensor::matrix(selection.selected.size(), d, std::move(merged));
  return selection;
}

}  // namespace vscan
