#include "cli.hpp"

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <fmt/format.h>

#include "pipeline.hpp"
#include "vscan/analysis.hpp"
#include "vscan/bundle.hpp"
#include "vscan/cost_model.hpp"
#include "vscan/reports.hpp"
#include "vscan/synthetic.hpp"

namespace vscan::cli {

namespace fs = std::filesystem;

namespace {

constexpr const char* kOutputDirEnv = "VSCAN_OUTPUT_DIR";

int exit_code_for(ErrorKind kind) {
  return kind == ErrorKind::kConfig ? kExitUsage : kExitDomain;
}

// "6x6" -> {6, 6}
std::pair<std::size_t, std::size_t> parse_grid(const std::string& text, const char* field) {
  const auto x = text.find('x');
  std::size_t a = 0, b = 0;
  try {
    if (x == std::string::npos) throw std::invalid_argument(text);
    std::size_t used = 0;
    a = std::stoul(text.substr(0, x), &used);
    if (used != x) throw std::invalid_argument(text);
    b = std::stoul(text.substr(x + 1), &used);
    if (used != text.size() - x - 1) throw std::invalid_argument(text);
  } catch (const std::exception&) {
    throw ConfigError(field, fmt::format("expected ROWSxCOLS, got '{}'", text));
  }
  if (a == 0 || b == 0) throw ConfigError(field, "grid dimensions must be >= 1");
  return {a, b};
}

std::vector<std::size_t> parse_list(const std::string& text, const char* field) {
  std::vector<std::size_t> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      std::size_t used = 0;
      out.push_back(std::stoul(item, &used));
      if (used != item.size()) throw std::invalid_argument(item);
    } catch (const std::exception&) {
      throw ConfigError(field, fmt::format("bad integer '{}'", item));
    }
  }
  if (out.empty()) throw ConfigError(field, "empty list");
  return out;
}

struct GenArgs {
  std::string kind;
  std::uint64_t seed = 0;
  fs::path out;
  std::string dtype = "f32";
  std::string grid = "6x6";
  std::size_t layers = 0;
  std::size_t heads = 4;
  std::size_t dim = 16;
  double locality = 0.0;
  std::string attention = "both";
  std::size_t pre = 4;
  std::optional<std::size_t> visual;
  std::optional<std::string> visual_grid;
  std::size_t post = 8;
  double bias = 0.0;
  double boost = 0.0;
  std::optional<std::string> boost_band;
};

void cmd_gen(const GenArgs& a, std::ostream& out) {
  const DType dtype = a.dtype == "f64" ? DType::kF64 : DType::kF32;
  fs::path manifest;
  if (a.kind == "encoder") {
    const auto [h, w] = parse_grid(a.grid, "grid");
    EncoderGenParams p{
        .seed = a.seed,
        .grid_h = h,
        .grid_w = w,
        .layers = a.layers == 0 ? 4 : a.layers,
        .heads = a.heads,
        .embed_dim = a.dim,
        .locality_strength = a.locality,
        .with_cls = a.attention != "self",
        .with_self = a.attention != "cls",
    };
    manifest = write_bundle(a.out, generate_synthetic_encoder(p), dtype);
  } else {
    DecoderGenParams p{
        .seed = a.seed,
        .layers = a.layers == 0 ? 8 : a.layers,
        .heads = a.heads,
        .n_pre_text = a.pre,
        .n_visual = a.visual.value_or(36),
        .n_post_text = a.post,
        .grid_rows = 1,
        .grid_cols = 0,
        .position_bias_strength = a.bias,
        .visual_boost = a.boost,
    };
    if (a.visual_grid) {
      const auto [r, c] = parse_grid(*a.visual_grid, "visual-grid");
      if (a.visual && *a.visual != r * c) {
        throw ConfigError("visual", "--visual disagrees with --visual-grid");
      }
      p.grid_rows = r;
      p.grid_cols = c;
      p.n_visual = r * c;
    }
    if (a.boost_band) {
      const auto colon = a.boost_band->find(':');
      if (colon == std::string::npos) throw ConfigError("boost-band", "expected FIRST:LAST");
      const auto first = parse_list(a.boost_band->substr(0, colon), "boost-band");
      const auto last = parse_list(a.boost_band->substr(colon + 1), "boost-band");
      p.boost_first = first.front();
      p.boost_last = last.front();
      if (p.boost_first < 1 || p.boost_last < p.boost_first) {
        throw ConfigError("boost-band", "need 1 <= FIRST <= LAST");
      }
    }
    manifest = write_bundle(a.out, generate_synthetic_decoder(p), dtype);
  }
  out << manifest.string() << '\n';
}

void print_pipeline_summary(std::ostream& out, const fs::path& dir, const PipelineResult& r) {
  out << fmt::format(
      "output_dir={}\nr1={:.6f}\nselected={} (global={}, local={})\nretained={}\n"
      "total_flops={:.6e}\ntotal_flops_uniform={:.6e}\nbaseline_flops={:.6e}\n"
      "avg_retention={:.6f}\nkv_fraction={:.6f}\nprefill_speedup={:.4f}\n",
      dir.string(), r.r1, r.selection.selected.size(), r.selection.global_indices.size(),
      r.selection.local_indices.size(), r.profile.retained.size(), r.report.total_flops,
      r.report.total_flops_uniform, r.report.baseline_flops, r.report.avg_retention_overall,
      r.report.kv_fraction, r.report.prefill_speedup_estimate);
}

int cmd_pipeline(const std::optional<fs::path>& config, const PipelineOverrides& flags,
                 const std::optional<fs::path>& batch, std::ostream& out, std::ostream& err) {
  PipelineOverrides file;
  if (config) file = load_config_file(*config);
  std::optional<std::string> env_out;
  if (const char* v = std::getenv(kOutputDirEnv)) env_out = v;

  if (!batch) {
    const auto cfg = resolve_config(file, flags, env_out);
    const auto result = run_pipeline(cfg);
    print_pipeline_summary(out, cfg.output_dir, result);
    return kExitOk;
  }

  // Batch mode: every subdirectory holding encoder/ and decoder/ bundles is a
  // sample; results go to <output_dir>/<sample>/.
  std::vector<fs::path> samples;
  for (const auto& entry : fs::directory_iterator(*batch)) {
    if (entry.is_directory() && fs::exists(entry.path() / "encoder" / kManifestName) &&
        fs::exists(entry.path() / "decoder" / kManifestName)) {
      samples.push_back(entry.path());
    }
  }
  std::sort(samples.begin(), samples.end());
  if (samples.empty()) throw ConfigError("batch", "no sample directories with encoder/ and decoder/");

  PipelineOverrides base = flags;
  base.encoder = fs::path("unused");
  base.decoder = fs::path("unused");
  const auto shared = resolve_config(file, base, env_out);

  std::vector<std::string> reports(samples.size());
  std::vector<int> codes(samples.size(), kExitOk);
  const auto count = static_cast<std::int64_t>(samples.size());
#pragma omp parallel for schedule(dynamic, 1)
  for (std::int64_t s = 0; s < count; ++s) {
    auto cfg = shared;
    cfg.encoder = samples[s] / "encoder";
    cfg.decoder = samples[s] / "decoder";
    cfg.output_dir = shared.output_dir / samples[s].filename();
    std::ostringstream buf;
    try {
      const auto result = run_pipeline(cfg);
      buf << "[" << samples[s].filename().string() << "]\n";
      print_pipeline_summary(buf, cfg.output_dir, result);
    } catch (const StageError& e) {
      buf << fmt::format("[{}] error [stage={}] {}\n", samples[s].filename().string(), e.stage(),
                         e.what());
      codes[s] = exit_code_for(e.kind());
    }
    reports[s] = buf.str();
  }
  int code = kExitOk;
  for (std::size_t s = 0; s < samples.size(); ++s) {
    (codes[s] == kExitOk ? out : err) << reports[s];
    code = std::max(code, codes[s]);
  }
  return code;
}

void cmd_flops(const std::optional<std::string>& preset, std::optional<std::size_t> K,
               std::optional<std::size_t> d, std::optional<std::size_t> m,
               std::optional<double> tokens, const std::optional<std::string>& per_layer,
               std::ostream& out) {
  ModelDims dims = preset ? find_preset(*preset).dims : ModelDims{};
  if (K) dims.n_layers = *K;
  if (d) dims.hidden = *d;
  if (m) dims.intermediate = *m;
  validate(dims);
  double total = 0.0;
  if (per_layer) {
    total = flops_total(std::span<const std::size_t>(parse_list(*per_layer, "per-layer")), dims);
  } else if (tokens) {
    if (*tokens < 0) throw ConfigError("tokens", "must be >= 0");
    total = flops_uniform(*tokens, dims);
  } else if (preset && find_preset(*preset).n_visual) {
    total = flops_uniform(static_cast<double>(*find_preset(*preset).n_visual), dims);
  } else {
    throw ConfigError("tokens", "give --tokens or --per-layer");
  }
  out << fmt::format("total_flops={:.6e}\ntflops={:.3f}\n", total, total / 1e12);
}

void cmd_budget(std::optional<double> target, std::optional<double> r1, double r2, std::size_t k,
                std::size_t K, std::optional<std::size_t> n, std::ostream& out) {
  PruneConfig prune{k, r2, K};
  validate(prune);
  if (target.has_value() == r1.has_value()) {
    throw ConfigError("target", "give exactly one of --target or --r1");
  }
  const double resolved = target ? solve_r1(*target, r2, k, K) : *r1;
  if (!(resolved > 0.0 && resolved <= 1.0)) throw ConfigError("r1", "must be in (0, 1]");
  out << fmt::format("r1={:.6f}\nr2={:.6f}\nk={}\nK={}\naverage_retention={:.6f}\n", resolved, r2,
                     k, K, average_retention(resolved, r2, k, K));
  if (n) {
    const auto merged = round_half_up(resolved * static_cast<double>(*n));
    out << fmt::format("n_visual={}\nn_merged={}\nn_retained={}\n", *n, merged,
                       retained_count(merged, r2));
  }
}

void emit(std::ostream& out, const std::optional<fs::path>& dir, const std::string& name,
          const std::string& text) {
  if (dir) {
    fs::create_directories(*dir);
    write_text(*dir / name, text);
    out << (*dir / name).string() << '\n';
  } else {
    out << text;
  }
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Two-stage visual token reduction: trace generation, pruning, cost model, analysis",
               "vscan"};
  app.require_subcommand(1);

  // gen
  GenArgs gen;
  auto* gen_cmd = app.add_subcommand("gen", "Generate a seeded synthetic trace bundle");
  gen_cmd->add_option("--kind", gen.kind, "encoder | decoder")
      ->required()
      ->check(CLI::IsMember({"encoder", "decoder"}));
  gen_cmd->add_option("--seed", gen.seed, "PRNG seed")->required();
  gen_cmd->add_option("--out", gen.out, "Bundle directory")->required();
  gen_cmd->add_option("--dtype", gen.dtype, "f32 | f64")->check(CLI::IsMember({"f32", "f64"}));
  gen_cmd->add_option("--grid", gen.grid, "Encoder patch grid ROWSxCOLS");
  gen_cmd->add_option("--layers,--K,--k", gen.layers, "Encoder or decoder depth");
  gen_cmd->add_option("--heads", gen.heads, "Attention heads per layer");
  gen_cmd->add_option("--dim", gen.dim, "Encoder embedding width");
  gen_cmd->add_option("--locality", gen.locality, "Layer-1 locality strength");
  gen_cmd->add_option("--attention", gen.attention, "cls | self | both")
      ->check(CLI::IsMember({"cls", "self", "both"}));
  gen_cmd->add_option("--pre", gen.pre, "Text tokens before the image");
  gen_cmd->add_option("--visual", gen.visual, "Visual tokens (single row)");
  gen_cmd->add_option("--visual-grid", gen.visual_grid, "Visual grid ROWSxCOLS");
  gen_cmd->add_option("--post", gen.post, "Text tokens after the image");
  gen_cmd->add_option("--bias", gen.bias, "Layer-1 position bias strength");
  gen_cmd->add_option("--boost", gen.boost, "Visual logit boost in the boost band");
  gen_cmd->add_option("--boost-band", gen.boost_band, "FIRST:LAST layers for --boost");

  // pipeline
  std::optional<fs::path> config, batch;
  PipelineOverrides flags;
  std::optional<std::size_t> out_layer_flag;
  std::optional<std::string> windows_flag, source_flag;
  auto* pipe_cmd = app.add_subcommand("pipeline", "Run both reduction stages and the cost model");
  pipe_cmd->add_option("--config", config, "JSON config file");
  pipe_cmd->add_option("--preset", flags.preset, "llava15 | llava-next | qwen25vl-7b");
  pipe_cmd->add_option("--encoder", flags.encoder, "Encoder bundle");
  pipe_cmd->add_option("--decoder", flags.decoder, "Decoder bundle");
  pipe_cmd->add_option("--out", flags.output_dir, "Output directory");
  pipe_cmd->add_option("--batch", batch, "Directory of samples (each with encoder/ and decoder/)");
  pipe_cmd->add_option("--n-text", flags.n_text_total, "Prompt text tokens for KV accounting");
  pipe_cmd->add_option("--target-avg", flags.target_avg, "Average retention; solves R1");
  pipe_cmd->add_option("--r1", flags.r1, "Stage-1 retention");
  pipe_cmd->add_option("--global-fraction", flags.global_fraction, "Global share of stage 1");
  pipe_cmd->add_option("--local-layer", flags.local_layer, "Encoder layer for the local scan");
  pipe_cmd->add_option("--output-layer", out_layer_flag, "Encoder layer for the global scan");
  pipe_cmd->add_option("--windows", windows_flag, "Local-scan window grid ROWSxCOLS");
  pipe_cmd->add_option("--score-source", source_flag, "cls | self_avg")
      ->check(CLI::IsMember({"cls", "self_avg"}));
  pipe_cmd->add_option("--k", flags.prune_layer, "LLM pruning layer");
  pipe_cmd->add_option("--r2", flags.r2, "Stage-2 retention");
  pipe_cmd->add_option("--K", flags.model_layers, "LLM depth");
  pipe_cmd->add_option("--d", flags.model_hidden, "LLM hidden size");
  pipe_cmd->add_option("--m", flags.model_intermediate, "LLM FFN size");

  // flops
  std::optional<std::string> flops_preset, per_layer;
  std::optional<std::size_t> fK, fd, fm;
  std::optional<double> tokens;
  auto* flops_cmd = app.add_subcommand("flops", "Prefill FLOPs over visual tokens");
  flops_cmd->add_option("--preset", flops_preset, "Model preset");
  flops_cmd->add_option("--K", fK, "LLM depth");
  flops_cmd->add_option("--d", fd, "Hidden size");
  flops_cmd->add_option("--m", fm, "FFN size");
  flops_cmd->add_option("--tokens", tokens, "Visual tokens in every layer");
  flops_cmd->add_option("--per-layer", per_layer, "Comma-separated tokens per layer");

  // budget
  std::optional<double> target, budget_r1;
  std::optional<std::size_t> budget_n;
  double budget_r2 = 1.0 / 3;
  std::size_t budget_k = 16, budget_K = 32;
  auto* budget_cmd = app.add_subcommand("budget", "Average retention and R1 solving");
  budget_cmd->add_option("--target", target, "Target average retention");
  budget_cmd->add_option("--r1", budget_r1, "Stage-1 retention");
  budget_cmd->add_option("--r2", budget_r2, "Stage-2 retention");
  budget_cmd->add_option("--k", budget_k, "LLM pruning layer");
  budget_cmd->add_option("--K", budget_K, "LLM depth");
  budget_cmd->add_option("--n", budget_n, "Visual tokens, to print token counts");

  // analyze
  auto* analyze_cmd = app.add_subcommand("analyze", "Attention measurements on decoder traces");
  analyze_cmd->require_subcommand(1);
  fs::path sum_trace, hist_trace;
  std::optional<fs::path> sum_out, hist_out;
  std::string hist_layers = "2,8,16";
  double hist_retention = 0.5;
  auto* sum_cmd = analyze_cmd->add_subcommand("attention-sum", "Visual attention sums per layer/head");
  sum_cmd->add_option("--trace", sum_trace, "Decoder bundle")->required();
  sum_cmd->add_option("--out", sum_out, "Write CSVs here instead of stdout");
  auto* hist_cmd = analyze_cmd->add_subcommand("bias-histogram", "Grid histogram of retained tokens");
  hist_cmd->add_option("--trace", hist_trace, "Decoder bundle")->required();
  hist_cmd->add_option("--layers", hist_layers, "Comma-separated LLM layers");
  hist_cmd->add_option("--retention", hist_retention, "Retention fraction");
  hist_cmd->add_option("--out", hist_out, "Write CSV here instead of stdout");

  std::vector<std::string> rev(args.rbegin(), args.rend() - (args.empty() ? 0 : 1));
  try {
    app.parse(rev);
  } catch (const CLI::ParseError& e) {
    std::ostringstream msg;
    const int code = app.exit(e, msg, msg);
    (code == 0 ? out : err) << msg.str();
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (*gen_cmd) {
      cmd_gen(gen, out);
    } else if (*pipe_cmd) {
      if (out_layer_flag) flags.output_layer = out_layer_flag;
      if (windows_flag) {
        const auto [r, c] = parse_grid(*windows_flag, "windows");
        flags.window_rows = r;
        flags.window_cols = c;
      }
      if (source_flag) {
        flags.score_source = *source_flag == "cls" ? ScoreSource::kCls : ScoreSource::kSelfAvg;
      }
      return cmd_pipeline(config, flags, batch, out, err);
    } else if (*flops_cmd) {
      cmd_flops(flops_preset, fK, fd, fm, tokens, per_layer, out);
    } else if (*budget_cmd) {
      cmd_budget(target, budget_r1, budget_r2, budget_k, budget_K, budget_n, out);
    } else if (*sum_cmd) {
      const auto curve = attention_sum_per_layer(read_decoder_bundle(sum_trace));
      emit(out, sum_out, "attention_sums.csv", attention_sums_csv(curve));
      if (sum_out) emit(out, sum_out, "attention_sum_mean.csv", attention_sum_mean_csv(curve));
    } else if (*hist_cmd) {
      const auto dec = read_decoder_bundle(hist_trace);
      std::vector<BiasHistogram> hists;
      for (auto layer : parse_list(hist_layers, "layers")) {
        hists.push_back(position_bias_histogram(dec, layer, hist_retention));
      }
      emit(out, hist_out, "bias_histogram.csv", bias_histogram_csv(hists));
    }
  } catch (const StageError& e) {
    err << fmt::format("vscan: error [stage={}] {}: {}\n", e.stage(), to_string(e.kind()),
                       e.what());
    return exit_code_for(e.kind());
  } catch (const Error& e) {
    err << fmt::format("vscan: {}: {}\n", to_string(e.kind()), e.what());
    return exit_code_for(e.kind());
  } catch (const std::exception& e) {
    err << "vscan: error: " << e.what() << '\n';
    return kExitDomain;
  }
  return kExitOk;
}

}  // namespace vscan::cli
