#include <doctest.h>

#include <cmath>

#include "lf/model.hpp"

using namespace lf;

namespace {

ModelConfig tiny_charlm() {
  ModelConfig cfg;
  cfg.arch = Arch::charlm;
  cfg.layers = 2;
  cfg.heads = 2;
  cfg.dmodel = 16;
  cfg.max_positions = 64;
  cfg.pattern.assign(2, LayerPatternSpec{2, 1, 0});
  return cfg;
}

ModelConfig tiny_led() {
  ModelConfig cfg;
  cfg.arch = Arch::led;
  cfg.layers = 2;
  cfg.dec_layers = 2;
  cfg.heads = 2;
  cfg.dmodel = 16;
  cfg.max_positions = 64;
  cfg.pattern.assign(2, LayerPatternSpec{3, 1, 0});
  return cfg;
}

std::vector<std::size_t> random_bytes(std::size_t n, Rng& rng) {
  std::vector<std::size_t> out(n);
  for (auto& t : out) t = rng.uniform_int(256);
  return out;
}

void zero_params(auto& model) {
  for (auto& [name, p] : model.named_params())
    std::fill(p.data(), p.data() + p.size(), 0.0);
}

}  // namespace

TEST_CASE("charlm is strictly causal under 100 perturbation probes") {
  auto m = Model<double>::init(tiny_charlm(), 1);
  Rng rng(2);
  const std::size_t n = 24;
  for (int probe = 0; probe < 100; ++probe) {
    auto tokens = random_bytes(n, rng);
    const std::size_t j = 1 + rng.uniform_int(n - 1);
    auto logits = charlm_forward(tokens, m);
    auto mutated = tokens;
    mutated[j] = (mutated[j] + 1 + rng.uniform_int(254)) % 256;
    auto logits2 = charlm_forward(mutated, m);
    for (std::size_t i = 0; i < j; ++i)
      for (std::size_t v = 0; v < m.cfg.vocab; ++v)
        REQUIRE(logits.at(i, v) == logits2.at(i, v));  // bitwise, zero tolerance
  }
}

TEST_CASE("untrained charlm sits near the uniform BPC") {
  auto m = Model<double>::init(tiny_charlm(), 3);
  Rng rng(4);
  auto window = random_bytes(33, rng);
  const double loss = charlm_loss(window, m).at(0);
  CHECK(std::isfinite(loss));
  const double bpc = loss / std::log(2.0);
  CHECK(std::abs(bpc - std::log2(260.0)) < 0.5);
}

TEST_CASE("charlm rejects inputs beyond max_positions") {
  auto m = Model<double>::init(tiny_charlm(), 5);
  Rng rng(6);
  CHECK_THROWS_AS(charlm_forward(random_bytes(65, rng), m), UsageError);
}

TEST_CASE("mlm selection count stays in the binomial band") {
  Rng rng(7);
  auto tokens = random_bytes(1000, rng);
  const MlmBatch batch = mlm_corrupt(tokens, 0.15, 42);
  CHECK(batch.selected_count >= 100);
  CHECK(batch.selected_count <= 200);
  // Corruption splits: every selected position is mask, random byte, or kept.
  std::size_t masked = 0, changed = 0, kept = 0;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (!batch.selected[i]) {
      CHECK(batch.corrupted[i] == tokens[i]);
      continue;
    }
    if (batch.corrupted[i] == kMaskId) ++masked;
    else if (batch.corrupted[i] != tokens[i]) ++changed;
    else ++kept;
    CHECK(batch.targets[i] == tokens[i]);
  }
  CHECK(masked > (batch.selected_count * 6) / 10);
  CHECK(masked + changed + kept == batch.selected_count);
}

TEST_CASE("mlm with no selected positions is an error") {
  Rng rng(8);
  auto tokens = random_bytes(1, rng);
  bool threw = false;
  // Tiny input and low probability: some seed in this range selects nothing.
  for (std::uint64_t seed = 0; seed < 32 && !threw; ++seed) {
    try {
      mlm_corrupt(tokens, 0.01, seed);
    } catch (const UsageError&) {
      threw = true;
    }
  }
  CHECK(threw);
}

TEST_CASE("mlm with a zeroed model scores masked positions at uniform BPC") {
  ModelConfig cfg = tiny_charlm();
  cfg.arch = Arch::mlm;
  auto m = Model<double>::init(cfg, 9);
  zero_params(m);
  Rng rng(10);
  auto tokens = random_bytes(48, rng);
  const double loss = mlm_loss(tokens, m, 0.3, 11).at(0);
  CHECK(loss == doctest::Approx(std::log(260.0)).epsilon(1e-9));
  CHECK(loss / std::log(2.0) == doctest::Approx(std::log2(260.0)).epsilon(1e-9));
}

TEST_CASE("led decoder is causal in the target prefix") {
  auto m = Model<double>::init(tiny_led(), 12);
  Rng rng(13);
  std::vector<std::size_t> src{kBosId};
  for (auto b : random_bytes(15, rng)) src.push_back(b);
  auto tgt = random_bytes(12, rng);
  tgt.front() = kBosId;
  for (int probe = 0; probe < 30; ++probe) {
    const std::size_t j = 1 + rng.uniform_int(tgt.size() - 1);
    auto logits = led_forward(src, tgt, m);
    auto mutated = tgt;
    mutated[j] = (mutated[j] + 1) % 256;
    auto logits2 = led_forward(src, mutated, m);
    for (std::size_t i = 0; i < j; ++i)
      for (std::size_t v = 0; v < m.cfg.vocab; ++v)
        REQUIRE(logits.at(i, v) == logits2.at(i, v));
  }
}

TEST_CASE("led encoder global token reaches every position") {
  auto m = Model<double>::init(tiny_led(), 14);
  Rng rng(15);
  std::vector<std::size_t> src{kBosId};
  for (auto b : random_bytes(19, rng)) src.push_back(b);
  auto base = led_encode(src, m);
  auto mutated = src;
  mutated[0] = kPadId;  // perturb the global <s> position
  // led_encode insists on <s>; perturb through the embedding instead by
  // swapping a token that only the global position can broadcast from.
  mutated[0] = kBosId;
  mutated[1] = (src[1] + 7) % 256;
  auto shifted = led_encode(mutated, m);
  // Token 1 is inside windows of nearby rows only, yet the global column at 0
  // re-broadcasts it: after 2 layers every row moves.
  std::size_t moved = 0;
  for (std::size_t i = 0; i < base.dim(0); ++i) {
    double diff = 0;
    for (std::size_t t = 0; t < base.dim(1); ++t)
      diff = std::max(diff, std::abs(base.at(i, t) - shifted.at(i, t)));
    if (diff > 1e-12) ++moved;
  }
  CHECK(moved == base.dim(0));
}

TEST_CASE("led requires the start token") {
  auto m = Model<double>::init(tiny_led(), 16);
  CHECK_THROWS_AS(led_encode({5, 6, 7}, m), UsageError);
}

TEST_CASE("led encoder with covering window matches the dense-kernel route") {
  ModelConfig cfg = tiny_led();
  cfg.pattern.assign(cfg.layers, LayerPatternSpec{32, 1, 0});  // h >= ns
  auto m = Model<double>::init(cfg, 17);
  Rng rng(18);
  std::vector<std::size_t> src{kBosId};
  for (auto b : random_bytes(11, rng)) src.push_back(b);
  auto banded = led_encode(src, m);
  m.cfg.kernel = BandImpl::dense;
  auto dense = led_encode(src, m);
  for (std::size_t i = 0; i < banded.size(); ++i)
    CHECK(std::abs(banded.at(i) - dense.at(i)) <= 1e-10);
}

TEST_CASE("beam search beats greedy on the two-step branch example") {
  // vocab {0,1,...,10, eos=11}: from <s>, p(0)=0.6, p(1)=0.4;
  // after 0: p(eos)=0.1, everything else 0.09/...; after 1: p(eos)=0.9.
  const std::size_t eos = 11;
  auto scorer = [&](const std::vector<std::size_t>& prefix) {
    std::vector<double> p(12, 1e-12);
    if (prefix.size() == 1) {
      p[0] = 0.6;
      p[1] = 0.4;
    } else if (prefix.size() == 2 && prefix[1] == 0) {
      p[eos] = 0.1;
      for (std::size_t t = 0; t < 11; ++t) p[t] = 0.9 / 11.0;  // each < 0.1
    } else if (prefix.size() == 2 && prefix[1] == 1) {
      p[eos] = 0.9;
      for (std::size_t t = 0; t < 11; ++t) p[t] = 0.1 / 11.0;
    } else {
      p[eos] = 1.0;
    }
    std::vector<double> lp(12);
    for (std::size_t t = 0; t < 12; ++t) lp[t] = std::log(p[t]);
    return lp;
  };
  const auto greedy_path = beam_search_with(scorer, 1, 8, 0.0, eos);
  CHECK(greedy_path == std::vector<std::size_t>{0});  // 0.6 then eos at 0.1
  const auto beam_path = beam_search_with(scorer, 2, 8, 0.0, eos);
  CHECK(beam_path == std::vector<std::size_t>{1});  // 0.4 * 0.9 = 0.36 wins
}

TEST_CASE("beam search rejects beam=0 and honors max_len") {
  auto scorer = [](const std::vector<std::size_t>&) {
    std::vector<double> lp(4, std::log(0.25));
    lp[3] = std::log(1e-9);  // eos stays unlikely
    return lp;
  };
  CHECK_THROWS_AS(beam_search_with(scorer, 0, 5, 0.0, 3), UsageError);
  CHECK(beam_search_with(scorer, 2, 5, 0.0, 3).size() <= 5);
}

TEST_CASE("model beam=1 equals greedy decoding") {
  auto m = Model<double>::init(tiny_led(), 19);
  Rng rng(20);
  for (int t = 0; t < 3; ++t) {
    std::vector<std::size_t> src{kBosId};
    for (auto b : random_bytes(9, rng)) src.push_back(b);
    CHECK(beam_search(m, src, 1, 12, 0.0) == greedy_decode(m, src, 12));
  }
}

TEST_CASE("parameter count matches the documented formula") {
  {
    auto cfg = tiny_charlm();
    auto m = Model<double>::init(cfg, 21);
    CHECK(m.parameter_count() == cfg.expected_parameter_count());
    // embeddings 260*16 + 64*16, 2 blocks of (2*32 + 7*256 + (16*64+64+64*16+16)),
    // final LN 32.
    const std::size_t per_block = 2 * 32 + 7 * 256 + (16 * 64 + 64 + 64 * 16 + 16);
    CHECK(m.parameter_count() == 260 * 16 + 64 * 16 + 2 * per_block + 32);
  }
  {
    auto cfg = tiny_led();
    auto m = Model<double>::init(cfg, 22);
    CHECK(m.parameter_count() == cfg.expected_parameter_count());
  }
  {
    auto cfg = tiny_charlm();
    cfg.relative_bias = true;
    auto m = Model<double>::init(cfg, 23);
    CHECK(m.parameter_count() == cfg.expected_parameter_count());
    // causal slots = h+1 = 3 per head per layer.
    CHECK(cfg.expected_parameter_count() ==
          tiny_charlm().expected_parameter_count() + 2 * 2 * 3);
  }
}

TEST_CASE("relative bias shifts band scores without breaking causality") {
  auto cfg = tiny_charlm();
  cfg.relative_bias = true;
  auto m = Model<double>::init(cfg, 24);
  Rng rng(25);
  auto tokens = random_bytes(16, rng);
  auto logits = charlm_forward(tokens, m);
  for (std::size_t i = 0; i < logits.size(); ++i) CHECK(std::isfinite(logits.at(i)));
  m.blocks[0].attn.rel_bias[0].at(0) = 3.0;
  auto shifted = charlm_forward(tokens, m);
  double diff = 0;
  for (std::size_t i = 0; i < logits.size(); ++i)
    diff = std::max(diff, std::abs(logits.at(i) - shifted.at(i)));
  CHECK(diff > 0);
}
