// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any failure.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <set>
#include <string>

#include <fmt/format.h>

#include "support/oracles.hpp"
#include "vscan/cost_model.hpp"
#include "vscan/decoder_prune.hpp"
#include "vscan/analysis.hpp"
#include "vscan/encoder_scan.hpp"
#include "vscan/synthetic.hpp"

using namespace vscan;
namespace t = vscan::testing;

namespace {

struct Verdict {
  bool pass = true;
  std::string detail;

  void require(bool ok, const std::string& what) {
    if (!ok && pass) detail = what;
    pass = pass && ok;
  }
};

bool near_rel(double got, double expected, double tol) {
  return std::abs(got - expected) <= tol * expected;
}

Verdict flops_goldens() {
  Verdict v;
  const ModelDims dims{32, 4096, 11008};
  const std::pair<double, double> cases[] = {{576, 3.817}, {192, 1.253}, {128, 0.833},
                                             {64, 0.415},  {2880, 20.825}, {320, 2.099}};
  std::string got;
  for (auto [n, tflops] : cases) {
    const double f = flops_uniform(n, dims) / 1e12;
    got += fmt::format(" {}:{:.3f}", n, f);
    v.require(near_rel(f, tflops, 0.005), fmt::format("n={} gave {:.4f}T, want {}T", n, f, tflops));
  }
  if (v.pass) v.detail = "TFLOPs" + got;
  return v;
}

Verdict budget_arithmetic() {
  Verdict v;
  const double avg = average_retention(0.167, 0.333, 16, 32);
  v.require(std::abs(avg - 0.111) <= 0.002, fmt::format("avg {:.4f}", avg));
  const std::pair<std::size_t, double> rows[] = {{2, 0.733}, {8, 0.667},  {12, 0.6},
                                                 {16, 0.5},  {20, 0.333}, {24, 0.0}};
  double worst = 0.0;
  for (auto [k, r2] : rows) {
    const double a = average_retention(1.0, r2, k, 32);
    worst = std::max(worst, std::abs(a - 0.75));
    v.require(std::abs(a - 0.75) <= 0.01, fmt::format("k={} R2={} gave {:.4f}", k, r2, a));
  }
  if (v.pass) v.detail = fmt::format("avg={:.4f}, six decode-only rows within {:.4f} of 0.75", avg, worst);
  return v;
}

Verdict kv_fractions() {
  Verdict v;
  std::string got;
  for (auto [r1, expected] : {std::pair{0.167, 0.199}, std::pair{0.5, 0.399}}) {
    const auto n_merged = round_half_up(r1 * 576);
    const std::vector<double> scores(n_merged, 1.0);
    const auto profile = prune_at_layer(scores, {16, 0.333, 32}, n_merged);
    const double f = kv_cache_entries(profile, 576, 63).fraction;
    got += fmt::format(" {:.4f}", f);
    v.require(std::abs(f - expected) <= 0.005, fmt::format("R1={} gave {:.4f}, want {}", r1, f, expected));
  }
  if (v.pass) v.detail = "fractions" + got + " (n_text_total=63)";
  return v;
}

Verdict selection_properties() {
  Verdict v;
  Xorshift64Star rng(0xAC4);
  for (int trial = 0; trial < 1000 && v.pass; ++trial) {
    std::size_t h, w;
    do {
      h = t::uniform_index(rng, 1, 16);
      w = t::uniform_index(rng, 1, 16);
    } while (h * w > 64);
    const auto n = h * w;
    ScanConfig cfg{.retention = rng.uniform(0.0, 1.0), .global_fraction = rng.uniform(),
                   .window_rows = t::uniform_index(rng, 1, h),
                   .window_cols = t::uniform_index(rng, 1, w)};
    const auto T = round_half_up(cfg.retention * static_cast<double>(n));
    if (T == 0) cfg.retention = 1.0;
    const auto local = t::random_scores(rng, n);
    const auto global = t::random_scores(rng, n);
    const auto sel = select_from_scores(local, global, h, w, cfg);
    const auto tag = fmt::format("case {} ({}x{}, R1={:.3f})", trial, h, w, cfg.retention);

    v.require(sel.selected.size() == round_half_up(cfg.retention * static_cast<double>(n)),
              tag + ": selected count");
    std::set<std::size_t> g(sel.global_indices.begin(), sel.global_indices.end());
    for (auto i : sel.local_indices) v.require(!g.count(i), tag + ": global/local overlap");

    std::vector<double> tl(n), tg(n);
    for (std::size_t i = 0; i < n; ++i) {
      tl[i] = std::exp(4 * local[i]);
      tg[i] = 3 * global[i] * global[i] * global[i] - 1;
    }
    const auto again = select_from_scores(tl, tg, h, w, cfg);
    v.require(again.local_indices == sel.local_indices &&
                  again.global_indices == sel.global_indices,
              tag + ": rank invariance");

    std::vector<double> emb(n * 4);
    for (auto& e : emb) e = rng.uniform(-1, 1);
    const auto merged = merge_tokens(Tensor::matrix(n, 4, emb), sel);
    std::vector<std::size_t> group(n, 0);
    for (auto s : merged.selected) ++group[s];
    for (const auto& [from, to] : merged.merge_assignment) ++group[to];
    std::size_t total = 0;
    for (auto c : group) total += c;
    v.require(total == n && merged.merged_embeddings->rows() == merged.selected.size(),
              tag + ": merge conservation");
  }

  // Exhaustive oracles for n <= 12 with heavy ties.
  std::size_t oracle_cases = 0;
  for (std::size_t n = 1; n <= 12 && v.pass; ++n) {
    for (int rep = 0; rep < 40; ++rep) {
      const auto scores = t::random_int_scores(rng, n, 3);
      for (std::size_t k = 0; k <= n; ++k) {
        const auto want = t::best_subset(scores, k);
        const auto got = top_k_indices(std::span<const double>(scores), k);
        v.require(got == want, fmt::format("top-k n={} k={}", n, k));
        ++oracle_cases;
      }
      const double r2 = rng.uniform();
      const auto m = round_half_up(r2 * static_cast<double>(n));
      const auto profile = prune_at_layer(scores, {1, r2, 2}, n);
      v.require(profile.retained == t::best_subset(scores, m), fmt::format("prune n={} R2={}", n, r2));
      ++oracle_cases;
    }
  }
  if (v.pass) v.detail = fmt::format("1000 random cases, {} exhaustive oracle cases", oracle_cases);
  return v;
}

Verdict synthetic_phenomena() {
  Verdict v;
  int locality_ok = 0, bias_ok = 0;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto enc = generate_synthetic_encoder({.seed = seed, .grid_h = 12, .grid_w = 12,
                                                 .layers = 6, .heads = 4, .embed_dim = 8,
                                                 .locality_strength = 10.0, .with_cls = false});
    if (t::near_mass(enc, 1) > t::near_mass(enc, 6)) ++locality_ok;

    const auto dec = generate_synthetic_decoder({.seed = seed, .layers = 32, .heads = 4,
                                                 .n_pre_text = 8, .n_visual = 144,
                                                 .n_post_text = 16, .grid_rows = 12,
                                                 .grid_cols = 12, .position_bias_strength = 5.0});
    const auto rows = position_bias_histogram(dec, 1, 0.25).row_totals();
    std::size_t bottom = 0, total = 0;
    for (std::size_t r = 0; r < rows.size(); ++r) {
      total += rows[r];
      if (r >= rows.size() / 2) bottom += rows[r];
    }
    if (static_cast<double>(bottom) > 0.6 * static_cast<double>(total)) ++bias_ok;
  }
  v.require(locality_ok >= 19, fmt::format("locality held in {}/20 seeds", locality_ok));
  v.require(bias_ok >= 19, fmt::format("bottom-half bias held in {}/20 seeds", bias_ok));
  v.detail = fmt::format("locality {}/20, position bias {}/20", locality_ok, bias_ok);
  return v;
}

Verdict cross_module() {
  Verdict v;
  Xorshift64Star rng(0xAC6);
  double worst = 0.0;
  for (int trial = 0; trial < 100 && v.pass; ++trial) {
    const auto h = t::uniform_index(rng, 2, 24), w = t::uniform_index(rng, 2, 24);
    const auto n = h * w;
    const auto K = t::uniform_index(rng, 1, 40);
    const auto k = t::uniform_index(rng, 1, K);
    const double r2 = rng.uniform();
    double r1 = rng.uniform(0.05, 1.0);
    if (round_half_up(r1 * static_cast<double>(n)) == 0) r1 = 1.0;

    const auto enc = generate_synthetic_encoder({.seed = rng(), .grid_h = h, .grid_w = w,
                                                 .layers = 2, .heads = 2, .embed_dim = 4,
                                                 .with_self = false});
    const auto sel = merge_tokens(enc.embeddings,
                                  select_tokens(enc, {.retention = r1, .global_fraction = rng.uniform(),
                                                      .local_layer = 1, .output_layer = 2,
                                                      .window_rows = t::uniform_index(rng, 1, h),
                                                      .window_cols = t::uniform_index(rng, 1, w)}));
    const auto n_merged = sel.selected.size();
    const auto dec = generate_synthetic_decoder({.seed = rng(), .layers = K, .heads = 2,
                                                 .n_visual = n_merged});
    const auto scores = text_attention_scores(dec, k, dec.visual_span());
    const auto profile = prune_at_layer(scores.data(), {k, r2, K}, n_merged);

    double sum = 0.0;
    for (auto c : profile.tokens_per_layer) sum += static_cast<double>(c);
    const double measured = sum / static_cast<double>(K) / static_cast<double>(n);
    const double gap = std::abs(measured - average_retention(r1, r2, k, K));
    worst = std::max(worst, gap * static_cast<double>(n));
    v.require(gap <= 1.0 / static_cast<double>(n),
              fmt::format("case {}: n={} K={} k={} gap {:.3g} > 1/n", trial, n, K, k, gap));
  }
  if (v.pass) v.detail = fmt::format("100 configs, worst gap {:.3f}/n", worst);
  return v;
}

}  // namespace

int main() {
  const std::pair<const char*, std::function<Verdict()>> criteria[] = {
      {"AC1 FLOPs golden values", flops_goldens},
      {"AC2 budget arithmetic", budget_arithmetic},
      {"AC3 KV-cache fractions", kv_fractions},
      {"AC4 selection property suite", selection_properties},
      {"AC5 synthetic attention phenomena", synthetic_phenomena},
      {"AC6 cross-module retention consistency", cross_module},
  };
  int failures = 0;
  for (const auto& [name, check] : criteria) {
    const auto start = std::chrono::steady_clock::now();
    Verdict v;
    try {
      v = check();
    } catch (const std::exception& e) {
      v = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    std::printf("[%s] %s: %s (%.2fs)\n", v.pass ? "PASS" : "FAIL", name, v.detail.c_str(), secs);
    if (!v.pass) ++failures;
  }
  std::printf("[INFO] AC7 accuracy tables: not reproducible without trained models and benchmark "
              "data; covered by AC1-AC6 instead\n");
  return failures == 0 ? 0 : 1;
}
