#include "vscan/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>

#include <fmt/format.h>

#include "vscan/error.hpp"
#include "vscan/kernels.hpp"
#include "vscan/rng.hpp"

namespace vscan {

namespace {

constexpr double kNoiseHalfWidth = 2.0;
constexpr double kSaliencyScale = 1.5;

enum StreamTag : std::uint64_t {
  kTagSelf = 1,
  kTagCls = 2,
  kTagEmbed = 3,
  kTagSaliency = 4,
  kTagDecoder = 5,
};

void require_positive(std::size_t v, const char* name) {
  if (v == 0) throw ConfigError(name, "must be >= 1");
}

double locality_weight(double strength, std::size_t layer, std::size_t layers) {
  if (layers == 1) return strength;
  return strength * static_cast<double>(layers - layer) / static_cast<double>(layers - 1);
}

std::size_t chebyshev(std::size_t a, std::size_t b, std::size_t cols) {
  const auto ra = a / cols, ca = a % cols, rb = b / cols, cb = b % cols;
  const auto dr = ra > rb ? ra - rb : rb - ra;
  const auto dc = ca > cb ? ca - cb : cb - ca;
  return std::max(dr, dc);
}

using Index = std::int64_t;

}  // namespace

EncoderTrace generate_synthetic_encoder(const EncoderGenParams& p) {
  require_positive(p.grid_h, "grid_h");
  require_positive(p.grid_w, "grid_w");
  require_positive(p.layers, "layers");
  require_positive(p.heads, "heads");
  require_positive(p.embed_dim, "embed_dim");
  if (!(p.locality_strength >= 0.0) || !std::isfinite(p.locality_strength)) {
    throw ConfigError("locality_strength", "must be a finite non-negative number");
  }
  const std::size_t n = p.grid_h * p.grid_w;
  const std::size_t L = p.layers, H = p.heads;

  std::vector<double> saliency(n);
  {
    auto rng = Xorshift64Star::stream(p.seed, {kTagSaliency});
    for (auto& s : saliency) s = rng.uniform();
  }

  std::vector<std::vector<double>> cls(p.with_cls ? L : 0);
  std::vector<std::vector<double>> self(p.with_self ? L : 0);
  for (auto& v : cls) v.resize(H * n);
  for (auto& v : self) v.resize(H * n * n);

  const Index blocks = static_cast<Index>(L * H);
#pragma omp parallel for schedule(dynamic, 1)
  for (Index b = 0; b < blocks; ++b) {
    const std::size_t l = static_cast<std::size_t>(b) / H;
    const std::size_t h = static_cast<std::size_t>(b) % H;
    std::vector<double> logits;
    if (p.with_cls) {
      auto rng = Xorshift64Star::stream(p.seed, {kTagCls, l, h});
      logits.resize(n);
      for (std::size_t j = 0; j < n; ++j) {
        logits[j] = rng.uniform(-kNoiseHalfWidth, kNoiseHalfWidth) + kSaliencyScale * saliency[j];
      }
      kernels::serial::softmax_rows(logits, 1, n, std::span(cls[l]).subspan(h * n, n));
    }
    if (p.with_self) {
      auto rng = Xorshift64Star::stream(p.seed, {kTagSelf, l, h});
      const double w = locality_weight(p.locality_strength, l + 1, L);
      logits.resize(n * n);
      for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
          logits[i * n + j] = rng.uniform(-kNoiseHalfWidth, kNoiseHalfWidth) -
                              w * static_cast<double>(chebyshev(i, j, p.grid_w));
        }
      }
      kernels::serial::softmax_rows(logits, n, n, std::span(self[l]).subspan(h * n * n, n * n));
    }
  }

  std::vector<double> emb(n * p.embed_dim);
  {
    auto rng = Xorshift64Star::stream(p.seed, {kTagEmbed});
    for (std::size_t i = 0; i < n; ++i) {
      double* row = emb.data() + i * p.embed_dim;
      double norm2 = 0.0;
      for (std::size_t k = 0; k < p.embed_dim; ++k) {
        row[k] = rng.uniform(-1.0, 1.0);
        norm2 += row[k] * row[k];
      }
      if (norm2 == 0.0) {
        row[0] = 1.0;
        norm2 = 1.0;
      }
      const double inv = 1.0 / std::sqrt(norm2);
      for (std::size_t k = 0; k < p.embed_dim; ++k) row[k] *= inv;
    }
  }

  EncoderTrace trace{
      .grid_h = p.grid_h,
      .grid_w = p.grid_w,
      .n_layers = L,
      .n_heads = H,
      .cls_attention = std::vector<std::optional<Tensor>>(L),
      .self_attention = std::vector<std::optional<Tensor>>(L),
      .embeddings = Tensor::matrix(n, p.embed_dim, std::move(emb)),
  };
  for (std::size_t l = 0; l < L; ++l) {
    if (p.with_cls) trace.cls_attention[l] = Tensor({H, n}, std::move(cls[l]));
    if (p.with_self) trace.self_attention[l] = Tensor({H, n, n}, std::move(self[l]));
  }
  return trace;
}

std::pair<std::size_t, std::size_t> boost_band(const DecoderGenParams& p) {
  if (p.boost_first != 0) return {p.boost_first, std::max(p.boost_first, p.boost_last)};
  const std::size_t first = p.layers / 3 + 1;
  const std::size_t last = std::max(first, 2 * p.layers / 3);
  return {std::min(first, p.layers), std::min(last, p.layers)};
}

DecoderTrace generate_synthetic_decoder(const DecoderGenParams& p) {
  require_positive(p.layers, "layers");
  require_positive(p.heads, "heads");
  require_positive(p.n_visual, "n_visual");
  if (!std::isfinite(p.position_bias_strength) || p.position_bias_strength < 0.0) {
    throw ConfigError("position_bias_strength", "must be a finite non-negative number");
  }
  if (!std::isfinite(p.visual_boost)) throw ConfigError("visual_boost", "must be finite");
  std::size_t rows = p.grid_rows, cols = p.grid_cols;
  if (cols == 0) {
    rows = 1;
    cols = p.n_visual;
  }
  if (rows * cols != p.n_visual) {
    throw ConfigError("grid", fmt::format("{}x{} does not hold {} visual tokens", rows, cols,
                                          p.n_visual));
  }
  const SeqLayout layout{p.n_pre_text, p.n_visual, p.n_post_text};
  const std::size_t seq = layout.seq_len();
  const std::size_t K = p.layers, H = p.heads;
  const auto [band_first, band_last] = boost_band(p);
  const double half = static_cast<double>(K) / 2.0;

  std::vector<std::vector<double>> layers(K, std::vector<double>(H * seq));
  const Index blocks = static_cast<Index>(K * H);
#pragma omp parallel for schedule(static)
  for (Index b = 0; b < blocks; ++b) {
    const std::size_t k = static_cast<std::size_t>(b) / H;
    const std::size_t h = static_cast<std::size_t>(b) % H;
    auto rng = Xorshift64Star::stream(p.seed, {kTagDecoder, k, h});
    const double bias =
        p.position_bias_strength * std::max(0.0, 1.0 - static_cast<double>(k) / half);
    const bool boosted = k + 1 >= band_first && k + 1 <= band_last;
    std::vector<double> logits(seq);
    for (std::size_t pos = 0; pos < seq; ++pos) {
      const double rel = seq > 1 ? static_cast<double>(pos) / static_cast<double>(seq - 1) : 0.0;
      logits[pos] = rng.uniform(-kNoiseHalfWidth, kNoiseHalfWidth) + bias * rel;
      if (boosted && pos >= layout.visual_begin() && pos < layout.visual_begin() + p.n_visual) {
        logits[pos] += p.visual_boost;
      }
    }
    kernels::serial::softmax_rows(logits, 1, seq, std::span(layers[k]).subspan(h * seq, seq));
  }

  DecoderTrace trace{
      .n_layers = K,
      .n_heads = H,
      .layout = layout,
      .grid_rows = rows,
      .grid_cols = cols,
      .last_instr_attention = {},
  };
  trace.last_instr_attention.reserve(K);
  for (auto& v : layers) trace.last_instr_attention.emplace_back(Shape{H, seq}, std::move(v));
  return trace;
}

}  // namespace vscan
