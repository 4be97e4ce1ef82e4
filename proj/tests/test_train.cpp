#include <doctest.h>

#include <cmath>
#include <sstream>

#include "lf/train.hpp"

using namespace lf;

namespace {

ModelConfig tiny_cfg(std::size_t layers = 1, std::size_t dmodel = 16,
                     std::size_t max_positions = 64, long h = 2) {
  ModelConfig cfg;
  cfg.arch = Arch::charlm;
  cfg.layers = layers;
  cfg.heads = 2;
  cfg.dmodel = dmodel;
  cfg.max_positions = max_positions;
  cfg.pattern.assign(layers, LayerPatternSpec{h, 1, 0});
  return cfg;
}

std::vector<std::uint8_t> periodic_corpus(std::size_t len, std::size_t period = 3) {
  std::vector<std::uint8_t> bytes(len);
  for (std::size_t i = 0; i < len; ++i) bytes[i] = 'a' + (i % period);
  return bytes;
}

std::uint64_t param_checksum(const Model<float>& m) {
  std::uint64_t h = 1469598103934665603ULL;
  for (const auto& [name, p] : m.named_params()) {
    const auto* bytes = reinterpret_cast<const std::uint8_t*>(p.data());
    for (std::size_t i = 0; i < p.size() * sizeof(float); ++i) {
      h ^= bytes[i];
      h *= 1099511628211ULL;
    }
  }
  return h;
}

}  // namespace

TEST_CASE("phase schedule halves the LR binary-exactly") {
  Phase base;
  base.seqlen = 2048;
  base.lr = 2.5e-4;
  base.half_windows = {16, 4096};  // windows 32 (bottom) and 8192 (top)
  const PhaseSchedule s = make_phase_schedule(base, 5);
  CHECK(s.phases[4].lr == 1.5625e-5);
  for (std::size_t k = 0; k < 5; ++k)
    CHECK(s.phases[k].lr * std::ldexp(1.0, static_cast<int>(k)) == base.lr);
  CHECK(s.phases[4].seqlen == 32768);
  CHECK(s.phases[1].half_windows == std::vector<long>{32, 8192});  // 64 / 16384 full
}

TEST_CASE("phase overrides replace fields; the memory-capped seqlen is accepted") {
  Phase base;
  base.seqlen = 2048;
  base.lr = 2.5e-4;
  PhaseOverride cap;
  cap.phase = 5;
  cap.seqlen = 23040;
  const PhaseSchedule s = make_phase_schedule(base, 5, {cap});
  CHECK(s.phases[4].seqlen == 23040);
  CHECK(s.phases[3].seqlen == 16384);
  CHECK(s.phases[4].lr == 1.5625e-5);
}

TEST_CASE("an override shrinking seqlen below the previous phase is rejected") {
  Phase base;
  base.seqlen = 2048;
  PhaseOverride bad;
  bad.phase = 3;
  bad.seqlen = 1024;
  CHECK_THROWS_AS(make_phase_schedule(base, 5, {bad}), UsageError);
}

TEST_CASE("warmup is a linear ramp into a constant phase LR") {
  const double lr = 3e-3;
  CHECK(warmup_lr(lr, 10, 100, 0.1, 10000) == lr);
  CHECK(warmup_lr(lr, 1, 100, 0.1, 10000) == doctest::Approx(lr / 10).epsilon(1e-15));
  CHECK(warmup_lr(lr, 55, 100, 0.1, 10000) == lr);
  CHECK(warmup_lr(lr, 7, 100, 0.1, 10000) == doctest::Approx(lr * 0.7).epsilon(1e-15));
  // The cap kicks in on very long phases.
  CHECK(warmup_lr(lr, 10000, 1000000, 0.1, 10000) == lr);
}

TEST_CASE("gradient clipping rescales to the threshold") {
  auto p = Tensor<float>::zeros({4}, true);
  p.ensure_grad();
  p.grad()[0] = 6.0f;
  p.grad()[1] = 8.0f;  // norm 10
  std::vector<std::pair<std::string, Tensor<float>>> params{{"p", p}};
  const double norm = clip_global_norm(params, 0.25);
  CHECK(norm == doctest::Approx(10.0).epsilon(1e-6));
  double clipped = 0;
  for (std::size_t i = 0; i < 4; ++i) clipped += p.grad()[i] * p.grad()[i];
  CHECK(std::sqrt(clipped) == doctest::Approx(0.25).epsilon(1e-6));
}

TEST_CASE("eval window plan: first full, then trailing steps, remainder right-aligned") {
  const auto w = plan_eval_windows(12, {8, 2});
  REQUIRE(w.size() == 3);
  CHECK(w[0].start == 0);
  CHECK(w[0].score_begin == 0);
  CHECK(w[0].score_end == 8);
  CHECK(w[1].start == 2);
  CHECK(w[1].score_begin == 8);
  CHECK(w[1].score_end == 10);
  CHECK(w[2].start == 4);
  CHECK(w[2].score_begin == 10);
  CHECK(w[2].score_end == 12);

  const auto odd = plan_eval_windows(13, {8, 2});
  CHECK(odd.back().start == 5);          // right-aligned at N-L
  CHECK(odd.back().score_begin == 12);   // scores exactly the leftover token
  CHECK(odd.back().score_end == 13);
}

TEST_CASE("eval windows partition every token exactly once") {
  Rng rng(31);
  for (int t = 0; t < 20; ++t) {
    const std::size_t L = 4 + rng.uniform_int(40);
    const std::size_t s = 1 + rng.uniform_int(L);
    const std::size_t n = L + rng.uniform_int(200);
    const auto windows = plan_eval_windows(n, {L, s});
    std::vector<int> scored(n, 0);
    for (const auto& w : windows) {
      CHECK(w.start + L <= n);
      CHECK(w.score_begin >= w.start);
      CHECK(w.score_end <= w.start + L);
      for (std::size_t p = w.score_begin; p < w.score_end; ++p) ++scored[p];
    }
    for (std::size_t p = 0; p < n; ++p) REQUIRE(scored[p] == 1);
  }
}

TEST_CASE("eval protocol rejects a corpus shorter than the window") {
  CHECK_THROWS_WITH_AS(plan_eval_windows(5, {8, 2}), doctest::Contains("smaller eval length"),
                       UsageError);
  CHECK_THROWS_AS(plan_eval_windows(20, {8, 9}), UsageError);  // s > L
}

TEST_CASE("a uniform model evaluates at exactly the uniform BPC") {
  auto m = Model<double>::init(tiny_cfg(), 7);
  for (auto& [name, p] : m.named_params()) std::fill(p.data(), p.data() + p.size(), 0.0);
  const auto corpus = periodic_corpus(100);
  const double bpc = eval_bpc_sliding(m, corpus, {16, 8});
  CHECK(bpc == doctest::Approx(std::log2(260.0)).epsilon(1e-9));
}

TEST_CASE("s = L matches an independently computed chunked evaluation") {
  auto m = Model<float>::init(tiny_cfg(), 8);
  const auto corpus = periodic_corpus(64, 5);
  const std::size_t L = 16;
  const double got = eval_bpc_sliding(m, corpus, {L, L});

  // Naive chunked evaluation, written out directly: disjoint windows, each
  // fed with its predecessor byte (<s> for the first).
  double nll = 0;
  for (std::size_t start = 0; start < corpus.size(); start += L) {
    std::vector<std::size_t> feed;
    feed.push_back(start == 0 ? kBosId : corpus[start - 1]);
    for (std::size_t p = start; p < start + L; ++p) feed.push_back(corpus[p]);
    auto logits = charlm_forward(feed, m);
    for (std::size_t q = 0; q < L; ++q) {
      double mx = logits.at(q, 0);
      for (std::size_t v = 1; v < m.cfg.vocab; ++v)
        mx = std::max(mx, static_cast<double>(logits.at(q, v)));
      double denom = 0;
      for (std::size_t v = 0; v < m.cfg.vocab; ++v)
        denom += std::exp(static_cast<double>(logits.at(q, v)) - mx);
      nll += std::log(denom) + mx - static_cast<double>(logits.at(q, corpus[start + q]));
    }
  }
  const double expect = nll / (static_cast<double>(corpus.size()) * std::log(2.0));
  CHECK(got == doctest::Approx(expect).epsilon(1e-9));
}

TEST_CASE("training is bitwise reproducible for a fixed seed") {
  const auto corpus = periodic_corpus(512);
  auto run = [&] {
    auto m = Model<float>::init(tiny_cfg(), 99);
    AdamW<float> opt;
    Phase phase;
    phase.seqlen = 32;
    phase.lr = 1e-3;
    phase.steps = 100;
    phase.batch = 2;
    TrainOpts opts;
    opts.seed = 1234;
    train_phase(m, opt, corpus, phase, opts);
    return param_checksum(m);
  };
  CHECK(run() == run());
}

TEST_CASE("training loss drops from step 50 to step 500 (median of 3 seeds)") {
  const auto corpus = periodic_corpus(2048);
  std::vector<double> early, late;
  for (std::uint64_t seed : {11ULL, 22ULL, 33ULL}) {
    auto m = Model<float>::init(tiny_cfg(1, 32, 64, 4), seed);
    AdamW<float> opt;
    Phase phase;
    phase.seqlen = 32;
    phase.lr = 3e-3;
    phase.steps = 500;
    phase.batch = 2;
    TrainOpts opts;
    opts.seed = seed;
    const auto logs = train_phase(m, opt, corpus, phase, opts);
    early.push_back(logs[49].loss_nats);
    late.push_back(logs[499].loss_nats);
  }
  std::sort(early.begin(), early.end());
  std::sort(late.begin(), late.end());
  CHECK(late[1] < early[1]);
}

TEST_CASE("train_phase validates the corpus length") {
  auto m = Model<float>::init(tiny_cfg(), 1);
  AdamW<float> opt;
  Phase phase;
  phase.seqlen = 512;
  CHECK_THROWS_AS(train_phase(m, opt, periodic_corpus(64), phase, {}), UsageError);
}

TEST_CASE("metrics log rows carry step, lr, loss, bpc, grad_norm and phase") {
  auto m = Model<float>::init(tiny_cfg(), 2);
  AdamW<float> opt;
  Phase phase;
  phase.seqlen = 16;
  phase.lr = 1e-3;
  phase.steps = 3;
  phase.batch = 1;
  TrainOpts opts;
  opts.phase_index = 2;
  std::ostringstream os;
  opts.metrics = &os;
  write_metrics_header(os);
  train_phase(m, opt, periodic_corpus(64), phase, opts);
  std::istringstream is(os.str());
  std::string line;
  std::getline(is, line);
  CHECK(line == "step,lr,loss_nats,bpc,grad_norm,phase");
  std::size_t rows = 0;
  while (std::getline(is, line)) {
    CHECK(std::count(line.begin(), line.end(), ',') == 5);
    CHECK(line.back() == '2');  // phase column
    ++rows;
  }
  CHECK(rows == 3);
}

TEST_CASE("ablation presets cover the four configurations") {
  const auto presets = ablation_presets();
  CHECK(presets.size() == 8);  // desk + 12-layer variants

  const auto& inc = find_preset("increasing_w_paper");
  REQUIRE(inc.pattern.size() == 12);
  CHECK(inc.pattern.front().half_window * 2 == 32);
  CHECK(inc.pattern.back().half_window * 2 == 512);
  for (std::size_t l = 1; l < 12; ++l)
    CHECK(inc.pattern[l].half_window >= inc.pattern[l - 1].half_window);

  const auto& fixed = find_preset("fixed_w_paper");
  for (const auto& p : fixed.pattern) CHECK(p.half_window * 2 == 230);

  const auto& dec = find_preset("decreasing_w_paper");
  CHECK(dec.pattern.front().half_window * 2 == 512);
  CHECK(dec.pattern.back().half_window * 2 == 32);

  const auto& dil = find_preset("dilation_2heads_paper");
  CHECK(dil.heads == 8);
  for (std::size_t l = 0; l < 6; ++l) CHECK(dil.pattern[l].dilation == 1);
  CHECK(dil.pattern[6].dilation == 2);
  CHECK(dil.pattern[7].dilation == 2);
  CHECK(dil.pattern[8].dilation == 3);
  CHECK(dil.pattern[9].dilation == 3);
  CHECK(dil.pattern[10].dilation == 4);
  CHECK(dil.pattern[11].dilation == 4);
  for (std::size_t l = 6; l < 12; ++l) CHECK(dil.pattern[l].dilated_heads == 2);

  // Windows stay even after geometric rounding.
  for (const auto& preset : presets)
    for (const auto& p : preset.pattern) CHECK(p.half_window >= 1);

  CHECK_THROWS_AS(find_preset("nonsense"), UsageError);

  // The default increasing preset is non-decreasing, per-layer (desk too).
  const auto& desk = find_preset("increasing_w");
  for (std::size_t l = 1; l < desk.pattern.size(); ++l)
    CHECK(desk.pattern[l].half_window >= desk.pattern[l - 1].half_window);
}
