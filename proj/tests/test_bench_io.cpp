#include <doctest.h>

#include <cstdio>
#include <fstream>

#include "lf/bench.hpp"
#include "lf/checkpoint.hpp"
#include "lf/config.hpp"
#include "lf/corpus.hpp"
#include "oracles.hpp"

using namespace lf;

namespace {

ModelConfig tiny_cfg() {
  ModelConfig cfg;
  cfg.arch = Arch::charlm;
  cfg.layers = 1;
  cfg.heads = 2;
  cfg.dmodel = 8;
  cfg.max_positions = 16;
  cfg.pattern.assign(1, LayerPatternSpec{2, 1, 0});
  return cfg;
}

}  // namespace

TEST_CASE("count_memory closed forms") {
  CHECK(count_memory(BandImpl::dense, 1024, 8).score_elements == 1048576);
  CHECK(count_memory(BandImpl::loop, 8, 2).score_elements == 34);
  const auto chunk = count_memory(BandImpl::chunk, 2048, 256);
  const auto loop = count_memory(BandImpl::loop, 2048, 256);
  const double ratio = static_cast<double>(chunk.score_elements) /
                       static_cast<double>(loop.score_elements);
  CHECK(ratio > 1.8);
  CHECK(ratio < 2.1);
}

TEST_CASE("counting laws hold across a 256-combination grid") {
  const std::size_t ns[] = {8, 12, 16, 24, 32, 48, 64, 96, 128, 192, 256, 384, 512, 768,
                            1024, 1536};
  const long hs[] = {1, 2, 3, 4, 6, 8, 12, 16, 24, 32, 48, 64, 96, 128, 192, 256};
  for (std::size_t n : ns)
    for (long h : hs) {
      CHECK(count_memory(BandImpl::dense, n, h).score_elements == n * n);
      CHECK(count_memory(BandImpl::loop, n, h).score_elements ==
            oracle::count_pairs(n, h, 1, false, {}));
      const std::size_t padded = chunk_padded_len(n, h);
      CHECK(count_memory(BandImpl::chunk, n, h).score_elements ==
            (padded / h - 1) * (2 * h) * (2 * h));
    }
}

TEST_CASE("dense/loop peak ratio grows at least 4x when n grows 8x") {
  for (long h : {8L, 32L}) {
    const auto small_d = count_memory(BandImpl::dense, 512, h);
    const auto small_l = count_memory(BandImpl::loop, 512, h);
    const auto big_d = count_memory(BandImpl::dense, 4096, h);
    const auto big_l = count_memory(BandImpl::loop, 4096, h);
    const double r_small = static_cast<double>(small_d.peak_elements) /
                           static_cast<double>(small_l.peak_elements);
    const double r_big = static_cast<double>(big_d.peak_elements) /
                         static_cast<double>(big_l.peak_elements);
    CHECK(r_big >= 4.0 * r_small);
  }
}

TEST_CASE("analytic scaling slopes: dense exactly 2, loop approaches 1") {
  std::vector<double> ns{1024, 2048, 4096, 8192};
  std::vector<double> dense, loop;
  for (double n : ns) {
    dense.push_back(
        static_cast<double>(count_memory(BandImpl::dense, static_cast<std::size_t>(n), 2)
                                .score_elements));
    loop.push_back(
        static_cast<double>(count_memory(BandImpl::loop, static_cast<std::size_t>(n), 2)
                                .score_elements));
  }
  CHECK(fit_loglog_slope(ns, dense) == doctest::Approx(2.0).epsilon(1e-12));
  CHECK(fit_loglog_slope(ns, loop) == doctest::Approx(1.0).epsilon(1e-3));
}

TEST_CASE("fit_loglog_slope on exact powers") {
  CHECK(fit_loglog_slope({1, 2, 4, 8}, {1, 4, 16, 64}) == doctest::Approx(2.0));
  CHECK(fit_loglog_slope({2, 4, 8}, {10, 20, 40}) == doctest::Approx(1.0));
}

TEST_CASE("time_scaling validates its grid") {
  CHECK_THROWS_AS(time_scaling(BandImpl::loop, {64, 128}, 4, 5), UsageError);
  CHECK_THROWS_AS(time_scaling(BandImpl::loop, {64, 128, 256}, 4, 3), UsageError);
  CHECK_THROWS_AS(time_scaling(BandImpl::loop, {128, 64, 256}, 4, 5), UsageError);
}

TEST_CASE("checkpoint round-trip is bitwise and deterministic") {
  auto m = Model<float>::init(tiny_cfg(), 77);
  const std::string p1 = "ckpt_a.lfck", p2 = "ckpt_b.lfck";
  save_model(m, p1);
  auto loaded = model_from_raw<float>(load_checkpoint_file(p1));
  const auto orig = m.named_params();
  const auto back = loaded.named_params();
  REQUIRE(orig.size() == back.size());
  for (std::size_t i = 0; i < orig.size(); ++i) {
    CHECK(orig[i].first == back[i].first);
    REQUIRE(orig[i].second.size() == back[i].second.size());
    for (std::size_t j = 0; j < orig[i].second.size(); ++j)
      REQUIRE(orig[i].second.at(j) == back[i].second.at(j));
  }
  save_model(loaded, p2);
  std::ifstream f1(p1, std::ios::binary), f2(p2, std::ios::binary);
  std::vector<char> b1((std::istreambuf_iterator<char>(f1)), std::istreambuf_iterator<char>());
  std::vector<char> b2((std::istreambuf_iterator<char>(f2)), std::istreambuf_iterator<char>());
  CHECK(b1 == b2);  // save -> load -> save is byte-identical
  std::remove(p1.c_str());
  std::remove(p2.c_str());
}

TEST_CASE("corrupted checkpoints are rejected, no partial model") {
  auto m = Model<float>::init(tiny_cfg(), 78);
  const std::string path = "ckpt_corrupt.lfck";
  save_model(m, path);
  {
    std::fstream f(path, std::ios::in | std::ios::out | std::ios::binary);
    f.seekp(200);
    char byte;
    f.seekg(200);
    f.get(byte);
    byte ^= 0x40;
    f.seekp(200);
    f.put(byte);
  }
  CHECK_THROWS_WITH_AS(load_checkpoint_file(path), doctest::Contains("CRC"), DataError);
  std::remove(path.c_str());
}

TEST_CASE("truncated checkpoints are rejected") {
  auto m = Model<float>::init(tiny_cfg(), 79);
  const std::string path = "ckpt_trunc.lfck";
  save_model(m, path);
  std::ifstream in(path, std::ios::binary);
  std::vector<char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  in.close();
  bytes.resize(bytes.size() / 2);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  out.close();
  CHECK_THROWS_AS(load_checkpoint_file(path), DataError);
  std::remove(path.c_str());
}

TEST_CASE("bad magic is rejected") {
  const std::string path = "ckpt_magic.lfck";
  std::ofstream out(path, std::ios::binary);
  out << "NOTACKPTFILE____________";
  out.close();
  CHECK_THROWS_WITH_AS(load_checkpoint_file(path), doctest::Contains("magic"), DataError);
  std::remove(path.c_str());
}

TEST_CASE("checkpoints preserve the dtype") {
  ModelConfig cfg = tiny_cfg();
  cfg.dtype = Dtype::f64;
  auto m = Model<double>::init(cfg, 80);
  const std::string path = "ckpt_dtype.lfck";
  save_model(m, path);
  const auto raw = load_checkpoint_file(path);
  CHECK(checkpoint_dtype(raw) == Dtype::f64);
  auto loaded = model_from_raw<double>(raw);
  CHECK(loaded.tok_embed.at(0) == m.tok_embed.at(0));
  CHECK_THROWS_WITH_AS(model_from_raw<float>(raw), doctest::Contains("dtype"), DataError);
  std::remove(path.c_str());
}

TEST_CASE("unknown tensor names are listed on load") {
  auto m = Model<float>::init(tiny_cfg(), 81);
  auto raw = model_to_raw(m);
  RawTensor extra;
  extra.name = "mystery.tensor";
  extra.dtype = Dtype::f32;
  extra.dims = {2};
  extra.bytes.assign(8, 0);
  raw.push_back(extra);
  CHECK_THROWS_WITH_AS(model_from_raw<float>(raw), doctest::Contains("mystery.tensor"),
                       DataError);
}

TEST_CASE("missing tensors are reported") {
  auto m = Model<float>::init(tiny_cfg(), 82);
  auto raw = model_to_raw(m);
  raw.erase(std::remove_if(raw.begin(), raw.end(),
                           [](const RawTensor& t) { return t.name == "tok_embed"; }),
            raw.end());
  CHECK_THROWS_WITH_AS(model_from_raw<float>(raw), doctest::Contains("tok_embed"), DataError);
}

TEST_CASE("load_corpus splits 90/5/5 and counts distinct bytes") {
  const std::string path = "corpus_test.bin";
  {
    std::ofstream out(path, std::ios::binary);
    for (int i = 0; i < 100; ++i) out.put(static_cast<char>('a' + (i % 2)));
  }
  const Corpus c = load_corpus(path);
  CHECK(c.bytes.size() == 100);
  CHECK(c.train_end == 90);
  CHECK(c.dev_end == 95);
  CHECK(c.distinct_bytes == 2);
  CHECK(c.train().size() == 90);
  CHECK(c.dev().size() == 5);
  CHECK(c.test().size() == 5);

  // Byte-exact round trip.
  std::ofstream out2(path + ".copy", std::ios::binary);
  out2.write(reinterpret_cast<const char*>(c.bytes.data()),
             static_cast<std::streamsize>(c.bytes.size()));
  out2.close();
  const Corpus c2 = load_corpus(path + ".copy");
  CHECK(c2.bytes == c.bytes);
  std::remove(path.c_str());
  std::remove((path + ".copy").c_str());
}

TEST_CASE("empty corpus is an error") {
  const std::string path = "corpus_empty.bin";
  std::ofstream(path).close();
  CHECK_THROWS_AS(load_corpus(path), DataError);
  std::remove(path.c_str());
}

TEST_CASE("config parsing is strict about unknown keys") {
  CHECK_THROWS_WITH_AS(
      parse_train_config(R"({"model":{"arch":"charlm"},"sched":{}})", "test"),
      doctest::Contains("sched"), DataError);
  CHECK_THROWS_WITH_AS(
      parse_train_config(R"({"model":{"arch":"charlm","layres":2}})", "test"),
      doctest::Contains("layres"), DataError);
}

TEST_CASE("config rejects odd windows and conflicting pattern sources") {
  CHECK_THROWS_AS(parse_train_config(
                      R"({"model":{"arch":"charlm","layers":1,"windows":[7]}})", "test"),
                  DataError);
  CHECK_THROWS_AS(
      parse_train_config(
          R"({"model":{"arch":"charlm","preset":"fixed_w","windows":[8,8,8,8]}})", "test"),
      DataError);
}

TEST_CASE("a minimal config parses with defaults and presets resolve") {
  const auto cfg = parse_train_config(
      R"({"seed": 7, "model": {"arch":"charlm","layers":2,"heads":2,"dmodel":32,
          "max_positions":128,"windows":[8,16]},
          "schedule": {"phases":2,
            "base":{"seqlen":32,"lr":0.001,"steps":10,"batch":2,"half_windows":[4,8]},
            "overrides":[{"phase":2,"seqlen":48}]}})",
      "test");
  CHECK(cfg.seed == 7);
  CHECK(cfg.model.pattern[0].half_window == 4);
  CHECK(cfg.model.pattern[1].half_window == 8);
  REQUIRE(cfg.has_schedule);
  CHECK(cfg.schedule.phases.size() == 2);
  CHECK(cfg.schedule.phases[1].seqlen == 48);
  CHECK(cfg.schedule.phases[1].lr == 0.0005);
  CHECK(cfg.schedule.phases[1].half_windows == std::vector<long>{8, 16});

  const auto preset_cfg = parse_train_config(
      R"({"model": {"arch":"charlm","preset":"increasing_w","dmodel":32,"heads":4}})",
      "test");
  CHECK(preset_cfg.model.layers == 4);
  CHECK(preset_cfg.model.pattern.front().half_window * 2 == 8);
  CHECK(preset_cfg.model.pattern.back().half_window * 2 == 64);
}
