#include "vscan/reports.hpp"

#include <fstream>

#include <fmt/format.h>
#include <json.hpp>

#include "vscan/error.hpp"
#include "vscan/tensor_file.hpp"

namespace vscan {

using nlohmann::ordered_json;

std::string selection_json(const TokenSelection& selection) {
  ordered_json assignment = ordered_json::array();
  for (const auto& [from, to] : selection.merge_assignment) assignment.push_back({from, to});
  ordered_json doc{
      {"n_tokens", selection.n_tokens},
      {"n_selected", selection.selected.size()},
      {"n_global", selection.global_indices.size()},
      {"n_local", selection.local_indices.size()},
      {"global_indices", selection.global_indices},
      {"local_indices", selection.local_indices},
      {"selected", selection.selected},
      {"merge_assignment", std::move(assignment)},
  };
  if (selection.merged_embeddings) doc["merged_embeddings"] = "merged_embeddings.vscn";
  return doc.dump(2) + "\n";
}

std::string cost_layers_csv(const CostReport& report) {
  std::string out = "layer,visual_tokens,kv_tokens,flops\n";
  for (std::size_t j = 0; j < report.tokens_per_layer.size(); ++j) {
    out += fmt::format("{},{},{},{}\n", j + 1, report.tokens_per_layer[j],
                       report.kv_tokens_per_layer[j], report.flops_per_layer[j]);
  }
  return out;
}

std::string cost_summary_json(const CostReport& report) {
  ordered_json doc{
      {"n_visual_original", report.n_visual_original},
      {"n_text_total", report.n_text_total},
      {"baseline_flops", report.baseline_flops},
      {"total_flops", report.total_flops},
      {"average_tokens", report.average_tokens},
      {"total_flops_uniform", report.total_flops_uniform},
      {"avg_retention_overall", report.avg_retention_overall},
      {"kv_fraction", report.kv_fraction},
      {"prefill_speedup_estimate", report.prefill_speedup_estimate},
      {"note", "total_flops_uniform uses n_k = average_tokens in every layer"},
  };
  return doc.dump(2) + "\n";
}

std::string bias_histogram_csv(std::span<const BiasHistogram> histograms) {
  std::string out = "layer,row,col,count\n";
  for (const auto& h : histograms) {
    for (std::size_t r = 0; r < h.grid_rows; ++r) {
      for (std::size_t c = 0; c < h.grid_cols; ++c) {
        out += fmt::format("{},{},{},{}\n", h.layer, r, c, h.counts[r * h.grid_cols + c]);
      }
    }
  }
  return out;
}

std::string attention_sums_csv(const AttentionSumCurve& curve) {
  std::string out = "layer,head,sum\n";
  for (std::size_t k = 1; k <= curve.n_layers; ++k) {
    for (std::size_t h = 0; h < curve.n_heads; ++h) {
      out += fmt::format("{},{},{}\n", k, h, curve.at(k, h));
    }
  }
  return out;
}

std::string attention_sum_mean_csv(const AttentionSumCurve& curve) {
  std::string out = "layer,mean\n";
  for (std::size_t k = 1; k <= curve.n_layers; ++k) {
    out += fmt::format("{},{}\n", k, curve.head_mean[k - 1]);
  }
  return out;
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError(fmt::format("cannot open {} for writing", path.string()));
  out << text;
  if (!out) throw IoError(fmt::format("write failed on {}", path.string()));
}

void write_selection(const std::filesystem::path& dir, const TokenSelection& selection) {
  std::filesystem::create_directories(dir);
  if (selection.merged_embeddings) {
    write_tensor(dir / "merged_embeddings.vscn", *selection.merged_embeddings, DType::kF64);
  }
  write_text(dir / "selection.json", selection_json(selection));
}

void write_cost_report(const std::filesystem::path& dir, const CostReport& report) {
  std::filesystem::create_directories(dir);
  write_text(dir / "cost_layers.csv", cost_layers_csv(report));
  write_text(dir / "cost_summary.json", cost_summary_json(report));
}

}  // namespace vscan
