#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "support/oracles.hpp"
#include "vscan/cost_model.hpp"
#include "vscan/decoder_prune.hpp"
#include "vscan/error.hpp"
#include "vscan/synthetic.hpp"

using namespace vscan;

namespace {

DecoderTrace single_layer(SeqLayout layout, std::size_t heads, std::vector<double> rows) {
  DecoderTrace dec{.n_layers = 1, .n_heads = heads, .layout = layout, .grid_rows = 1,
                   .grid_cols = layout.n_visual};
  dec.last_instr_attention.emplace_back(Shape{heads, layout.seq_len()}, std::move(rows));
  return dec;
}

// Profile with n merged tokens and a given retained count, built directly.
LayerTokenProfile flat_profile(std::size_t n_merged, double r2, std::size_t k, std::size_t K) {
  std::vector<double> scores(n_merged, 1.0);
  return prune_at_layer(scores, {k, r2, K}, n_merged);
}

}  // namespace

TEST_CASE("text_attention_scores") {
  const auto uniform = single_layer({3, 4, 3}, 1, std::vector<double>(10, 0.1));
  const auto s = text_attention_scores(uniform, 1, uniform.visual_span());
  REQUIRE(s.size() == 4);
  for (auto v : s.data()) CHECK(v == doctest::Approx(0.1).epsilon(1e-15));

  const auto two = single_layer({1, 2, 1}, 2, {0, 1, 0, 0, 0, 0, 1, 0});
  CHECK(text_attention_scores(two, 1, two.visual_span()) == Tensor::vector({0.5, 0.5}));

  CHECK_THROWS_AS(text_attention_scores(two, 1, {3, 2}), LayoutError);
  CHECK_THROWS_AS(text_attention_scores(two, 1, {0, 0}), LayoutError);
  CHECK_THROWS_AS(text_attention_scores(two, 2, two.visual_span()), TraceError);
}

TEST_CASE("recency bias shows as positive rank correlation with position") {
  int positive = 0;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const auto dec = generate_synthetic_decoder({.seed = seed, .layers = 8, .n_visual = 64,
                                                 .position_bias_strength = 5.0});
    const auto s = text_attention_scores(dec, 1, dec.visual_span());
    std::vector<double> pos(s.size()), val(s.data().begin(), s.data().end());
    for (std::size_t i = 0; i < pos.size(); ++i) pos[i] = static_cast<double>(i);
    if (vscan::testing::spearman(pos, val) > 0) ++positive;
  }
  CHECK(positive == 10);
}

TEST_CASE("prune_at_layer examples") {
  const auto half = flat_profile(288, 0.5, 16, 32);
  CHECK(half.retained.size() == 144);
  CHECK(half.n_merged == 288);
  CHECK(half.prune_layer == 16);
  REQUIRE(half.tokens_per_layer.size() == 32);
  for (std::size_t j = 1; j <= 32; ++j) {
    CAPTURE(j);
    CHECK(half.tokens_per_layer[j - 1] == (j <= 16 ? 288u : 144u));
  }

  const auto all = flat_profile(50, 1.0, 4, 8);
  CHECK(all.retained.size() == 50);
  CHECK(std::all_of(all.tokens_per_layer.begin(), all.tokens_per_layer.end(),
                    [](auto n) { return n == 50; }));

  const auto none = flat_profile(10, 0.0, 2, 4);
  CHECK(none.retained.empty());
  CHECK(none.tokens_per_layer == std::vector<std::size_t>{10, 10, 0, 0});

  const std::vector<double> s{0.4, 0.1, 0.3, 0.2};
  CHECK(prune_at_layer(s, {1, 0.5, 2}, 4).retained == IndexList{0, 2});

  CHECK_THROWS_AS(prune_at_layer(s, {1, 0.5, 2}, 5), ShapeError);
  CHECK_THROWS_AS(prune_at_layer(s, {3, 0.5, 2}, 4), ConfigError);
  CHECK_THROWS_AS(prune_at_layer(s, {1, 1.5, 2}, 4), ConfigError);
}

TEST_CASE("retained_count") {
  CHECK(retained_count(96, 1.0 / 3) == 32);
  CHECK(retained_count(10, 0.15) == 2);
  CHECK(retained_count(7, 1.0) == 7);
  CHECK(retained_count(7, 0.0) == 0);
}

TEST_CASE("prune_at_layer matches the subset oracle and is rank-invariant") {
  Xorshift64Star rng(31);
  for (int trial = 0; trial < 400; ++trial) {
    const auto n = vscan::testing::uniform_index(rng, 1, 12);
    const auto K = vscan::testing::uniform_index(rng, 1, 40);
    const auto k = vscan::testing::uniform_index(rng, 1, K);
    const double r2 = rng.uniform();
    const auto scores = vscan::testing::random_int_scores(rng, n, 4);
    const auto profile = prune_at_layer(scores, {k, r2, K}, n);
    const auto m = round_half_up(r2 * static_cast<double>(n));
    CHECK(profile.retained == vscan::testing::best_subset(scores, m));

    std::vector<double> mapped(n);
    for (std::size_t i = 0; i < n; ++i) mapped[i] = std::exp(scores[i]) - 5.0;
    CHECK(prune_at_layer(mapped, {k, r2, K}, n).retained == profile.retained);

    // Monotone, with a single step after layer k when 0 < m < n.
    std::size_t steps = 0;
    for (std::size_t j = 1; j < K; ++j) {
      CHECK(profile.tokens_per_layer[j] <= profile.tokens_per_layer[j - 1]);
      if (profile.tokens_per_layer[j] != profile.tokens_per_layer[j - 1]) ++steps;
    }
    if (m > 0 && m < n && k < K) CHECK(steps == 1);
  }
}

TEST_CASE("KV cache fractions") {
  const auto identity = flat_profile(576, 1.0, 16, 32);
  const auto full = kv_cache_entries(identity, 576, 63);
  CHECK(full.fraction == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(full.tokens_per_layer.front() == 639);

  // Expected values from the closed form, independently of the profile code.
  auto expected = [](double n_merged, double m, double k, double K, double n, double text) {
    return (k * (n_merged + text) + (K - k) * (m + text)) / (K * (n + text));
  };

  const auto n_small = round_half_up(0.167 * 576);
  const auto small = kv_cache_entries(flat_profile(n_small, 0.333, 16, 32), 576, 63);
  CHECK(n_small == 96);
  CHECK(small.fraction == doctest::Approx(expected(96, 32, 16, 32, 576, 63)).epsilon(1e-12));
  CHECK(std::abs(small.fraction - 0.199) <= 0.005);

  const auto n_big = round_half_up(0.5 * 576);
  const auto big = kv_cache_entries(flat_profile(n_big, 0.333, 16, 32), 576, 63);
  CHECK(big.fraction == doctest::Approx(expected(288, 96, 16, 32, 576, 63)).epsilon(1e-12));
  CHECK(std::abs(big.fraction - 0.399) <= 0.005);

  // Fewer text tokens widen the gap from the visual-only ratio.
  const auto visual_only = kv_cache_entries(flat_profile(96, 1.0 / 3, 16, 32), 576, 0);
  CHECK(visual_only.fraction == doctest::Approx(average_retention(96.0 / 576, 1.0 / 3, 16, 32)));
}
