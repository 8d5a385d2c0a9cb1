#include "vscan/bundle.hpp"

#include <fstream>

#include <fmt/format.h>
#include <json.hpp>

#include "vscan/error.hpp"

namespace vscan {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

fs::path manifest_path(const fs::path& path) {
  return fs::is_directory(path) ? path / kManifestName : path;
}

void write_manifest(const fs::path& dir, const json& manifest) {
  const auto path = dir / kManifestName;
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError(fmt::format("cannot write {}", path.string()));
  out << manifest.dump(2) << '\n';
  if (!out) throw IoError(fmt::format("write failed on {}", path.string()));
}

json load_manifest(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError(fmt::format("cannot open manifest {}", path.string()));
  try {
    auto manifest = json::parse(in);
    if (!manifest.is_object()) throw TraceError(fmt::format("{}: manifest is not an object", path.string()));
    if (manifest.value("version", 0) != kManifestVersion) {
      throw TraceError(fmt::format("{}: unsupported manifest version", path.string()));
    }
    return manifest;
  } catch (const json::exception& e) {
    throw TraceError(fmt::format("{}: malformed manifest: {}", path.string(), e.what()));
  }
}

template <typename T>
T field(const json& manifest, const char* key) {
  if (!manifest.contains(key)) throw TraceError(fmt::format("manifest missing key '{}'", key));
  try {
    return manifest.at(key).get<T>();
  } catch (const json::exception&) {
    throw TraceError(fmt::format("manifest key '{}' has the wrong type", key));
  }
}

std::string layer_file(const char* stem, std::size_t layer) {
  return fmt::format("{}_L{:02}.vscn", stem, layer);
}

}  // namespace

fs::path write_bundle(const fs::path& dir, const EncoderTrace& trace, DType dtype) {
  validate(trace);
  fs::create_directories(dir);
  json layers = json::array();
  for (std::size_t l = 1; l <= trace.n_layers; ++l) {
    json entry{{"layer", l}, {"cls", nullptr}, {"self", nullptr}};
    if (trace.has(ScoreSource::kCls, l)) {
      entry["cls"] = layer_file("cls", l);
      write_tensor(dir / layer_file("cls", l), trace.cls(l), dtype);
    }
    if (trace.has(ScoreSource::kSelfAvg, l)) {
      entry["self"] = layer_file("self", l);
      write_tensor(dir / layer_file("self", l), trace.self(l), dtype);
    }
    layers.push_back(std::move(entry));
  }
  write_tensor(dir / "embeddings.vscn", trace.embeddings, dtype);
  write_manifest(dir, json{
                          {"version", kManifestVersion},
                          {"kind", "encoder"},
                          {"grid_h", trace.grid_h},
                          {"grid_w", trace.grid_w},
                          {"n_layers", trace.n_layers},
                          {"n_heads", trace.n_heads},
                          {"embed_dim", trace.embed_dim()},
                          {"embeddings", "embeddings.vscn"},
                          {"layers", std::move(layers)},
                      });
  return dir / kManifestName;
}

fs::path write_bundle(const fs::path& dir, const DecoderTrace& trace, DType dtype) {
  validate(trace);
  fs::create_directories(dir);
  json layers = json::array();
  for (std::size_t k = 1; k <= trace.n_layers; ++k) {
    write_tensor(dir / layer_file("attn", k), trace.layer(k), dtype);
    layers.push_back(json{{"layer", k}, {"last_instr", layer_file("attn", k)}});
  }
  write_manifest(dir, json{
                          {"version", kManifestVersion},
                          {"kind", "decoder"},
                          {"n_layers", trace.n_layers},
                          {"n_heads", trace.n_heads},
                          {"n_pre_text", trace.layout.n_pre_text},
                          {"n_visual", trace.layout.n_visual},
                          {"n_post_text", trace.layout.n_post_text},
                          {"grid_rows", trace.grid_rows},
                          {"grid_cols", trace.grid_cols},
                          {"layers", std::move(layers)},
                      });
  return dir / kManifestName;
}

TraceKind bundle_kind(const fs::path& path) {
  const auto manifest = load_manifest(manifest_path(path));
  const auto kind = field<std::string>(manifest, "kind");
  if (kind == "encoder") return TraceKind::kEncoder;
  if (kind == "decoder") return TraceKind::kDecoder;
  throw TraceError(fmt::format("unknown bundle kind '{}'", kind));
}

EncoderTrace read_encoder_bundle(const fs::path& path) {
  const auto mpath = manifest_path(path);
  const auto dir = mpath.parent_path();
  const auto manifest = load_manifest(mpath);
  if (field<std::string>(manifest, "kind") != "encoder") {
    throw TraceError(fmt::format("{} is not an encoder bundle", mpath.string()));
  }
  const auto n_layers = field<std::size_t>(manifest, "n_layers");
  EncoderTrace trace{
      .grid_h = field<std::size_t>(manifest, "grid_h"),
      .grid_w = field<std::size_t>(manifest, "grid_w"),
      .n_layers = n_layers,
      .n_heads = field<std::size_t>(manifest, "n_heads"),
      .cls_attention = std::vector<std::optional<Tensor>>(n_layers),
      .self_attention = std::vector<std::optional<Tensor>>(n_layers),
      .embeddings = read_tensor(dir / field<std::string>(manifest, "embeddings")),
  };
  const auto layers = field<json>(manifest, "layers");
  if (!layers.is_array() || layers.size() != n_layers) {
    throw TraceError(fmt::format("manifest lists {} layers, expected {}", layers.size(), n_layers));
  }
  for (const auto& entry : layers) {
    const auto l = field<std::size_t>(entry, "layer");
    if (l < 1 || l > n_layers) throw TraceError(fmt::format("manifest layer {} out of range", l));
    if (entry.contains("cls") && !entry["cls"].is_null()) {
      trace.cls_attention[l - 1] = read_tensor(dir / field<std::string>(entry, "cls"));
    }
    if (entry.contains("self") && !entry["self"].is_null()) {
      trace.self_attention[l - 1] = read_tensor(dir / field<std::string>(entry, "self"));
    }
  }
  if (trace.embed_dim() != field<std::size_t>(manifest, "embed_dim")) {
    throw TraceError("embeddings width does not match manifest embed_dim");
  }
  validate(trace);
  return trace;
}

DecoderTrace read_decoder_bundle(const fs::path& path) {
  const auto mpath = manifest_path(path);
  const auto dir = mpath.parent_path();
  const auto manifest = load_manifest(mpath);
  if (field<std::string>(manifest, "kind") != "decoder") {
    throw TraceError(fmt::format("{} is not a decoder bundle", mpath.string()));
  }
  DecoderTrace trace{
      .n_layers = field<std::size_t>(manifest, "n_layers"),
      .n_heads = field<std::size_t>(manifest, "n_heads"),
      .layout = {field<std::size_t>(manifest, "n_pre_text"), field<std::size_t>(manifest, "n_visual"),
                 field<std::size_t>(manifest, "n_post_text")},
      .grid_rows = field<std::size_t>(manifest, "grid_rows"),
      .grid_cols = field<std::size_t>(manifest, "grid_cols"),
      .last_instr_attention = {},
  };
  const auto layers = field<json>(manifest, "layers");
  if (!layers.is_array() || layers.size() != trace.n_layers) {
    throw TraceError(fmt::format("manifest lists {} layers, expected {}", layers.size(),
                                 trace.n_layers));
  }
  for (std::size_t k = 0; k < layers.size(); ++k) {
    if (field<std::size_t>(layers[k], "layer") != k + 1) {
      throw TraceError("decoder manifest layers must be listed in order 1..K");
    }
    trace.last_instr_attention.push_back(read_tensor(dir / field<std::string>(layers[k], "last_instr")));
  }
  validate(trace);
  return trace;
}

}  // namespace vscan
