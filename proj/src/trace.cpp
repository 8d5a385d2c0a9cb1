#include "vscan/trace.hpp"

#include <cmath>

#include <fmt/format.h>
#include <fmt/ranges.h>

#include "vscan/error.hpp"

namespace vscan {

namespace {

void check_layer(std::size_t layer, std::size_t n_layers, const char* what) {
  if (layer < 1 || layer > n_layers) {
    throw TraceError(fmt::format("{} layer {} outside [1, {}]", what, layer, n_layers));
  }
}

void check_row_sums(std::span<const double> data, std::size_t row_len, const std::string& where) {
  const std::size_t rows = data.size() / row_len;
  for (std::size_t r = 0; r < rows; ++r) {
    double total = 0.0;
    for (std::size_t c = 0; c < row_len; ++c) {
      const double v = data[r * row_len + c];
      if (v < 0.0) throw TraceError(fmt::format("{}: negative attention in row {}", where, r));
      total += v;
    }
    if (std::abs(total - 1.0) > kRowSumTolerance) {
      throw TraceError(fmt::format("{}: row {} sums to {:.9g}, expected 1", where, r, total));
    }
  }
}

}  // namespace

bool EncoderTrace::has(ScoreSource source, std::size_t layer) const {
  if (layer < 1 || layer > n_layers) return false;
  const auto& v = source == ScoreSource::kCls ? cls_attention : self_attention;
  return layer <= v.size() && v[layer - 1].has_value();
}

const Tensor& EncoderTrace::cls(std::size_t layer) const {
  check_layer(layer, n_layers, "encoder");
  if (!has(ScoreSource::kCls, layer)) {
    throw TraceError(fmt::format("encoder trace has no [CLS] attention at layer {}", layer));
  }
  return *cls_attention[layer - 1];
}

const Tensor& EncoderTrace::self(std::size_t layer) const {
  check_layer(layer, n_layers, "encoder");
  if (!has(ScoreSource::kSelfAvg, layer)) {
    throw TraceError(fmt::format("encoder trace has no self-attention at layer {}", layer));
  }
  return *self_attention[layer - 1];
}

const Tensor& DecoderTrace::layer(std::size_t k) const {
  check_layer(k, n_layers, "decoder");
  if (k > last_instr_attention.size()) {
    throw TraceError(fmt::format("decoder trace missing layer {}", k));
  }
  return last_instr_attention[k - 1];
}

void validate(const EncoderTrace& trace) {
  if (trace.grid_h == 0 || trace.grid_w == 0 || trace.n_layers == 0 || trace.n_heads == 0) {
    throw TraceError("encoder trace dims must all be >= 1");
  }
  const auto n = trace.n_tokens();
  if (trace.cls_attention.size() != trace.n_layers || trace.self_attention.size() != trace.n_layers) {
    throw TraceError(fmt::format("encoder trace must list {} layers", trace.n_layers));
  }
  if (trace.embeddings.rank() != 2 || trace.embeddings.dim(0) != n) {
    throw TraceError(fmt::format("embeddings must be [{} x D], got {}", n, trace.embeddings.shape()));
  }
  for (std::size_t l = 0; l < trace.n_layers; ++l) {
    if (const auto& cls = trace.cls_attention[l]) {
      if (cls->shape() != Shape{trace.n_heads, n}) {
        throw TraceError(fmt::format("layer {} [CLS] attention has shape {}, expected [{}, {}]",
                                     l + 1, cls->shape(), trace.n_heads, n));
      }
      check_row_sums(cls->data(), n, fmt::format("layer {} [CLS] attention", l + 1));
    }
    if (const auto& self = trace.self_attention[l]) {
      if (self->shape() != Shape{trace.n_heads, n, n}) {
        throw TraceError(fmt::format("layer {} self-attention has shape {}, expected [{}, {}, {}]",
                                     l + 1, self->shape(), trace.n_heads, n, n));
      }
      check_row_sums(self->data(), n, fmt::format("layer {} self-attention", l + 1));
    }
  }
}

void validate(const DecoderTrace& trace) {
  if (trace.n_layers == 0 || trace.n_heads == 0 || trace.layout.n_visual == 0) {
    throw TraceError("decoder trace dims must all be >= 1");
  }
  if (trace.grid_rows * trace.grid_cols != trace.layout.n_visual) {
    throw TraceError(fmt::format("visual grid {}x{} does not hold {} tokens", trace.grid_rows,
                                 trace.grid_cols, trace.layout.n_visual));
  }
  if (trace.last_instr_attention.size() != trace.n_layers) {
    throw TraceError(fmt::format("decoder trace must list {} layers, got {}", trace.n_layers,
                                 trace.last_instr_attention.size()));
  }
  const auto seq = trace.layout.seq_len();
  for (std::size_t k = 0; k < trace.n_layers; ++k) {
    const auto& t = trace.last_instr_attention[k];
    if (t.shape() != Shape{trace.n_heads, seq}) {
      throw TraceError(fmt::format("decoder layer {} has shape {}, expected [{}, {}]", k + 1,
                                   t.shape(), trace.n_heads, seq));
    }
    check_row_sums(t.data(), seq, fmt::format("decoder layer {}", k + 1));
  }
}

}  // namespace vscan
