#pragma once

// End-to-end reduction pipeline driven by a JSON config file.
//
// Config keys (all optional; flags override the file, the file overrides the
// preset):
//   preset          "llava15" | "llava-next" | "qwen25vl-7b"
//   encoder         encoder bundle directory or manifest
//   decoder         decoder bundle directory or manifest
//   output_dir      where artifacts go (VSCAN_OUTPUT_DIR overrides it)
//   n_text_total    text tokens in the prompt, for KV accounting
//   target_avg      average retention; when set R1 is solved from it
//   scan            {r1, global_fraction, local_layer, output_layer,
//                    windows: [rows, cols], score_source: "cls"|"self_avg"}
//   prune           {k, r2}
//   model           {K, d, m}
// Relative paths resolve against the config file's directory.

#include <cstddef>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>

#include "vscan/cost_model.hpp"
#include "vscan/decoder_prune.hpp"
#include "vscan/encoder_scan.hpp"
#include "vscan/error.hpp"

namespace vscan::cli {

// Values explicitly set by a layer of configuration. Unset fields fall
// through to the next layer.
struct PipelineOverrides {
  std::optional<std::string> preset;
  std::optional<std::filesystem::path> encoder;
  std::optional<std::filesystem::path> decoder;
  std::optional<std::filesystem::path> output_dir;
  std::optional<std::size_t> n_text_total;
  std::optional<double> target_avg;
  std::optional<double> r1;
  std::optional<double> global_fraction;
  std::optional<std::size_t> local_layer;
  std::optional<std::size_t> output_layer;
  std::optional<std::size_t> window_rows;
  std::optional<std::size_t> window_cols;
  std::optional<ScoreSource> score_source;
  std::optional<std::size_t> prune_layer;
  std::optional<double> r2;
  std::optional<std::size_t> model_layers;
  std::optional<std::size_t> model_hidden;
  std::optional<std::size_t> model_intermediate;
};

struct PipelineConfig {
  ScanConfig scan;
  PruneConfig prune;
  ModelDims model;
  std::filesystem::path encoder;
  std::filesystem::path decoder;
  std::filesystem::path output_dir = "vscan_out";
  std::size_t n_text_total = 0;
  std::optional<double> target_avg;
  bool output_layer_set = false;
};

// Throws ConfigError naming the offending key.
PipelineOverrides load_config_file(const std::filesystem::path& path);

// Merges layers: flags > env (output dir only) > file > preset > defaults.
PipelineConfig resolve_config(const PipelineOverrides& file, const PipelineOverrides& flags,
                              const std::optional<std::string>& env_output_dir);

// Raised by run_pipeline; names the stage that failed.
class StageError : public std::runtime_error {
 public:
  StageError(std::string stage, ErrorKind kind, const std::string& message)
      : std::runtime_error(message), stage_(std::move(stage)), kind_(kind) {}

  const std::string& stage() const noexcept { return stage_; }
  ErrorKind kind() const noexcept { return kind_; }

 private:
  std::string stage_;
  ErrorKind kind_;
};

struct PipelineResult {
  TokenSelection selection;
  LayerTokenProfile profile;
  CostReport report;
  double r1 = 0.0;
};

// Loads traces, runs select -> merge -> text scores -> prune -> report, and
// writes selection.json, merged_embeddings.vscn, prune.json,
// cost_layers.csv and cost_summary.json into cfg.output_dir.
PipelineResult run_pipeline(PipelineConfig cfg);

}  // namespace vscan::cli
