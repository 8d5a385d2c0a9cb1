#pragma once

#include <cstddef>
#include <optional>
#include <vector>

#include "vscan/numerics.hpp"

namespace vscan {

// Attention rows in traces are post-softmax; loaders reject rows whose sum
// is off by more than this.
inline constexpr double kRowSumTolerance = 1e-5;

enum class ScoreSource { kCls, kSelfAvg };

// Attention and embeddings emitted by a visual encoder over a grid_h x grid_w
// patch grid. Layer arguments are 1-based throughout.
struct EncoderTrace {
  std::size_t grid_h = 0;
  std::size_t grid_w = 0;
  std::size_t n_layers = 0;
  std::size_t n_heads = 0;
  std::vector<std::optional<Tensor>> cls_attention;   // per layer, [heads x n]
  std::vector<std::optional<Tensor>> self_attention;  // per layer, [heads x n x n]
  Tensor embeddings;                                  // [n x embed_dim]

  std::size_t n_tokens() const noexcept { return grid_h * grid_w; }
  std::size_t embed_dim() const { return embeddings.dim(1); }

  bool has(ScoreSource source, std::size_t layer) const;
  // Throws TraceError when the layer is out of range or the kind is absent.
  const Tensor& cls(std::size_t layer) const;
  const Tensor& self(std::size_t layer) const;
};

struct SeqLayout {
  std::size_t n_pre_text = 0;
  std::size_t n_visual = 0;
  std::size_t n_post_text = 0;

  std::size_t seq_len() const noexcept { return n_pre_text + n_visual + n_post_text; }
  std::size_t visual_begin() const noexcept { return n_pre_text; }
};

// Contiguous range of sequence positions holding visual tokens.
struct VisualSpan {
  std::size_t begin = 0;
  std::size_t count = 0;
};

// Last-instruction-token attention rows of an LLM decoder. The last
// instruction token is the final sequence position.
struct DecoderTrace {
  std::size_t n_layers = 0;
  std::size_t n_heads = 0;
  SeqLayout layout;
  // Grid the visual tokens were flattened from, row-major. Product equals
  // layout.n_visual.
  std::size_t grid_rows = 1;
  std::size_t grid_cols = 0;
  std::vector<Tensor> last_instr_attention;  // per layer, [heads x seq_len]

  VisualSpan visual_span() const noexcept { return {layout.visual_begin(), layout.n_visual}; }
  const Tensor& layer(std::size_t k) const;
};

// Structural and row-sum checks. Throw TraceError describing the first
// violation found.
void validate(const EncoderTrace& trace);
void validate(const DecoderTrace& trace);

}  // namespace vscan
