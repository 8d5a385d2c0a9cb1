#include "pipeline.hpp"

#include <fstream>

#include <fmt/format.h>
#include <json.hpp>

#include "vscan/bundle.hpp"
#include "vscan/reports.hpp"

namespace vscan::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

template <typename T>
void read_key(const json& obj, const char* key, const std::string& prefix, std::optional<T>& dst) {
  if (!obj.contains(key)) return;
  try {
    dst = obj.at(key).get<T>();
  } catch (const json::exception&) {
    throw ConfigError(prefix + key, "has the wrong type");
  }
}

void read_path(const json& obj, const char* key, const fs::path& base,
               std::optional<fs::path>& dst) {
  std::optional<std::string> raw;
  read_key(obj, key, "", raw);
  if (!raw) return;
  fs::path p(*raw);
  dst = p.is_absolute() ? p : base / p;
}

ScoreSource parse_source(const std::string& s, const std::string& field) {
  if (s == "cls") return ScoreSource::kCls;
  if (s == "self_avg") return ScoreSource::kSelfAvg;
  throw ConfigError(field, fmt::format("unknown score source '{}'", s));
}

template <typename T>
T pick(const std::optional<T>& flag, const std::optional<T>& file, T fallback) {
  if (flag) return *flag;
  if (file) return *file;
  return fallback;
}

template <typename F>
auto stage(const char* name, F&& body) -> decltype(body()) {
  try {
    return body();
  } catch (const Error& e) {
    throw StageError(name, e.kind(), e.what());
  } catch (const std::exception& e) {
    throw StageError(name, ErrorKind::kIo, e.what());
  }
}

}  // namespace

PipelineOverrides load_config_file(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError(fmt::format("cannot open config {}", path.string()));
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::exception& e) {
    throw ConfigError("config", fmt::format("{} is not valid JSON: {}", path.string(), e.what()));
  }
  if (!doc.is_object()) throw ConfigError("config", "top level must be an object");
  const fs::path base = path.has_parent_path() ? path.parent_path() : fs::path(".");

  static const char* const kKnown[] = {"preset", "encoder", "decoder", "output_dir", "n_text_total",
                                       "target_avg", "scan", "prune", "model"};
  for (const auto& [key, _] : doc.items()) {
    if (std::find(std::begin(kKnown), std::end(kKnown), key) == std::end(kKnown)) {
      throw ConfigError(key, "unknown config key");
    }
  }

  PipelineOverrides o;
  read_key(doc, "preset", "", o.preset);
  read_path(doc, "encoder", base, o.encoder);
  read_path(doc, "decoder", base, o.decoder);
  read_path(doc, "output_dir", base, o.output_dir);
  read_key(doc, "n_text_total", "", o.n_text_total);
  read_key(doc, "target_avg", "", o.target_avg);
  if (doc.contains("scan")) {
    const auto& scan = doc["scan"];
    read_key(scan, "r1", "scan.", o.r1);
    read_key(scan, "global_fraction", "scan.", o.global_fraction);
    read_key(scan, "local_layer", "scan.", o.local_layer);
    read_key(scan, "output_layer", "scan.", o.output_layer);
    std::optional<std::vector<std::size_t>> windows;
    read_key(scan, "windows", "scan.", windows);
    if (windows) {
      if (windows->size() != 2) throw ConfigError("scan.windows", "expected [rows, cols]");
      o.window_rows = (*windows)[0];
      o.window_cols = (*windows)[1];
    }
    std::optional<std::string> source;
    read_key(scan, "score_source", "scan.", source);
    if (source) o.score_source = parse_source(*source, "scan.score_source");
  }
  if (doc.contains("prune")) {
    read_key(doc["prune"], "k", "prune.", o.prune_layer);
    read_key(doc["prune"], "r2", "prune.", o.r2);
  }
  if (doc.contains("model")) {
    read_key(doc["model"], "K", "model.", o.model_layers);
    read_key(doc["model"], "d", "model.", o.model_hidden);
    read_key(doc["model"], "m", "model.", o.model_intermediate);
  }
  return o;
}

PipelineConfig resolve_config(const PipelineOverrides& file, const PipelineOverrides& flags,
                              const std::optional<std::string>& env_output_dir) {
  PipelineConfig cfg;
  const auto preset_name = flags.preset ? flags.preset : file.preset;
  if (preset_name) {
    const auto& preset = find_preset(*preset_name);
    cfg.model = preset.dims;
    cfg.scan.local_layer = preset.local_layer;
    cfg.scan.score_source = preset.score_source;
    cfg.prune.layer = preset.prune_layer;
  }

  cfg.model.n_layers = pick(flags.model_layers, file.model_layers, cfg.model.n_layers);
  cfg.model.hidden = pick(flags.model_hidden, file.model_hidden, cfg.model.hidden);
  cfg.model.intermediate = pick(flags.model_intermediate, file.model_intermediate,
                                cfg.model.intermediate);
  validate(cfg.model);

  cfg.scan.retention = pick(flags.r1, file.r1, cfg.scan.retention);
  cfg.scan.global_fraction = pick(flags.global_fraction, file.global_fraction,
                                  cfg.scan.global_fraction);
  cfg.scan.local_layer = pick(flags.local_layer, file.local_layer, cfg.scan.local_layer);
  cfg.output_layer_set = flags.output_layer || file.output_layer;
  cfg.scan.output_layer = pick(flags.output_layer, file.output_layer, cfg.scan.output_layer);
  cfg.scan.window_rows = pick(flags.window_rows, file.window_rows, cfg.scan.window_rows);
  cfg.scan.window_cols = pick(flags.window_cols, file.window_cols, cfg.scan.window_cols);
  cfg.scan.score_source = pick(flags.score_source, file.score_source, cfg.scan.score_source);

  cfg.prune.layer = pick(flags.prune_layer, file.prune_layer, cfg.prune.layer);
  cfg.prune.retention = pick(flags.r2, file.r2, cfg.prune.retention);
  cfg.prune.n_layers = cfg.model.n_layers;
  validate(cfg.prune);

  cfg.n_text_total = pick(flags.n_text_total, file.n_text_total, cfg.n_text_total);
  cfg.target_avg = flags.target_avg ? flags.target_avg : file.target_avg;
  if (flags.r1 && flags.target_avg) {
    throw ConfigError("target_avg", "give either --r1 or --target-avg, not both");
  }
  if (flags.r1) cfg.target_avg.reset();
  if (cfg.target_avg) {
    try {
      cfg.scan.retention = solve_r1(*cfg.target_avg, cfg.prune.retention, cfg.prune.layer,
                                    cfg.prune.n_layers);
    } catch (const BudgetError& e) {
      throw ConfigError("target_avg", e.what());
    }
  }

  if (flags.encoder) cfg.encoder = *flags.encoder;
  else if (file.encoder) cfg.encoder = *file.encoder;
  else throw ConfigError("encoder", "no encoder trace given");
  if (flags.decoder) cfg.decoder = *flags.decoder;
  else if (file.decoder) cfg.decoder = *file.decoder;
  else throw ConfigError("decoder", "no decoder trace given");

  if (flags.output_dir) cfg.output_dir = *flags.output_dir;
  else if (env_output_dir && !env_output_dir->empty()) cfg.output_dir = *env_output_dir;
  else if (file.output_dir) cfg.output_dir = *file.output_dir;
  return cfg;
}

PipelineResult run_pipeline(PipelineConfig cfg) {
  const auto encoder = stage("trace-io", [&] { return read_encoder_bundle(cfg.encoder); });
  const auto decoder = stage("trace-io", [&] { return read_decoder_bundle(cfg.decoder); });

  stage("config", [&] {
    if (!cfg.output_layer_set) {
      cfg.scan.output_layer = std::max(cfg.scan.local_layer,
                                       encoder.n_layers > 1 ? encoder.n_layers - 1 : 1);
    }
    validate(cfg.scan, encoder.grid_h, encoder.grid_w, encoder.n_layers);
    if (cfg.prune.layer > decoder.n_layers) {
      throw ConfigError("prune.k", fmt::format("layer {} beyond decoder trace depth {}",
                                               cfg.prune.layer, decoder.n_layers));
    }
  });

  PipelineResult result;
  result.r1 = cfg.scan.retention;
  result.selection = stage("encoder-scan", [&] {
    auto sel = select_tokens(encoder, cfg.scan);
    return merge_tokens(encoder.embeddings, std::move(sel));
  });

  result.profile = stage("decoder-prune", [&] {
    const auto n_merged = result.selection.selected.size();
    if (decoder.layout.n_visual != n_merged) {
      throw ConfigError("decoder.n_visual",
                        fmt::format("decoder trace has {} visual tokens but stage 1 kept {}",
                                    decoder.layout.n_visual, n_merged));
    }
    const auto scores = text_attention_scores(decoder, cfg.prune.layer, decoder.visual_span());
    return prune_at_layer(scores.data(), cfg.prune, n_merged);
  });

  result.report = stage("cost-model", [&] {
    return build_report(result.selection, result.profile, cfg.model, cfg.n_text_total);
  });

  stage("output", [&] {
    write_selection(cfg.output_dir, result.selection);
    IndexList original;
    for (auto i : result.profile.retained) original.push_back(result.selection.selected[i]);
    nlohmann::ordered_json prune{
        {"prune_layer", cfg.prune.layer},
        {"r2", cfg.prune.retention},
        {"n_merged", result.profile.n_merged},
        {"n_retained", result.profile.retained.size()},
        {"retained", result.profile.retained},
        {"retained_original", original},
    };
    write_text(cfg.output_dir / "prune.json", prune.dump(2) + "\n");
    write_cost_report(cfg.output_dir, result.report);
  });
  return result;
}

}  // namespace vscan::cli
