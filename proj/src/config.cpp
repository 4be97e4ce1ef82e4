#include "lf/config.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

namespace lf {

namespace {

using nlohmann::json;

void check_keys(const json& obj, const std::set<std::string>& allowed,
                const std::string& where) {
  if (!obj.is_object()) throw DataError("config: " + where + " must be an object");
  std::string unknown;
  for (const auto& [key, value] : obj.items()) {
    if (!allowed.count(key)) unknown += (unknown.empty() ? "" : ", ") + key;
  }
  if (!unknown.empty())
    throw DataError("config: unknown keys in " + where + ": " + unknown);
}

std::vector<long> half_windows_from(const json& obj, std::size_t layers,
                                    const std::string& where) {
  const bool has_w = obj.contains("windows");
  const bool has_h = obj.contains("half_windows");
  if (has_w && has_h)
    throw DataError("config: " + where + " sets both windows and half_windows");
  if (!has_w && !has_h) return {};
  std::vector<long> out;
  if (has_w) {
    for (const auto& v : obj.at("windows")) {
      const long w = v.get<long>();
      if (w < 0 || w % 2 != 0)
        throw DataError("config: " + where + " windows must be even and >= 0");
      out.push_back(w / 2);
    }
  } else {
    for (const auto& v : obj.at("half_windows")) out.push_back(v.get<long>());
  }
  if (layers != 0 && out.size() != layers)
    throw DataError("config: " + where + " needs one window per layer (" +
                    std::to_string(layers) + ")");
  return out;
}

ModelConfig parse_model(const json& obj) {
  check_keys(obj,
             {"arch", "dtype", "layers", "heads", "dmodel", "vocab", "max_positions",
              "dropout", "kernel", "relative_bias", "windows", "half_windows", "dilations",
              "dilated_heads", "dec_layers", "enc_globals", "preset"},
             "model");
  ModelConfig c;
  c.arch = arch_from_name(obj.value("arch", "charlm"));
  c.dtype = obj.value("dtype", std::string("f32")) == "f64" ? Dtype::f64 : Dtype::f32;
  if (obj.contains("dtype")) {
    const std::string d = obj.at("dtype").get<std::string>();
    if (d != "f32" && d != "f64") throw DataError("config: dtype must be f32 or f64");
  }
  c.layers = obj.value("layers", std::size_t(2));
  c.heads = obj.value("heads", std::size_t(4));
  c.dmodel = obj.value("dmodel", std::size_t(64));
  c.vocab = obj.value("vocab", kVocab);
  c.max_positions = obj.value("max_positions", std::size_t(512));
  c.dropout = obj.value("dropout", 0.0);
  c.kernel = band_impl_from_name(obj.value("kernel", std::string("loop")));
  c.relative_bias = obj.value("relative_bias", false);
  c.dec_layers = obj.value("dec_layers", std::size_t(0));
  if (obj.contains("enc_globals")) {
    c.enc_globals.clear();
    for (const auto& v : obj.at("enc_globals")) c.enc_globals.push_back(v.get<std::size_t>());
  }

  if (obj.contains("preset")) {
    if (obj.contains("windows") || obj.contains("half_windows") || obj.contains("dilations"))
      throw DataError("config: preset conflicts with explicit windows/dilations");
    const AblationPreset& p = find_preset(obj.at("preset").get<std::string>());
    c.pattern = p.pattern;
    c.layers = p.pattern.size();
    c.heads = obj.value("heads", p.heads);
  } else {
    const std::vector<long> hw = half_windows_from(obj, c.layers, "model");
    c.pattern.assign(c.layers, LayerPatternSpec{});
    for (std::size_t l = 0; l < c.layers; ++l)
      c.pattern[l].half_window = hw.empty() ? 8 : hw[l];
    if (obj.contains("dilations")) {
      const auto& dil = obj.at("dilations");
      if (dil.size() != c.layers)
        throw DataError("config: dilations needs one entry per layer");
      for (std::size_t l = 0; l < c.layers; ++l) c.pattern[l].dilation = dil[l].get<long>();
    }
    if (obj.contains("dilated_heads")) {
      const auto& dh = obj.at("dilated_heads");
      if (dh.is_number()) {
        for (auto& p : c.pattern) p.dilated_heads = dh.get<long>();
      } else {
        if (dh.size() != c.layers)
          throw DataError("config: dilated_heads needs one entry per layer (or a scalar)");
        for (std::size_t l = 0; l < c.layers; ++l)
          c.pattern[l].dilated_heads = dh[l].get<long>();
      }
    }
  }
  c.validate();
  return c;
}

Phase parse_phase_base(const json& obj, std::size_t layers) {
  check_keys(obj, {"seqlen", "lr", "steps", "batch", "windows", "half_windows"},
             "schedule.base");
  Phase p;
  p.seqlen = obj.value("seqlen", std::size_t(2048));
  p.lr = obj.value("lr", 2.5e-4);
  p.steps = obj.value("steps", std::size_t(100));
  p.batch = obj.value("batch", std::size_t(32));
  p.half_windows = half_windows_from(obj, layers, "schedule.base");
  return p;
}

PhaseSchedule parse_schedule(const json& obj, std::size_t layers) {
  check_keys(obj,
             {"phases", "base", "overrides", "grad_clip", "warmup_frac", "warmup_max",
              "adam"},
             "schedule");
  const std::size_t k = obj.value("phases", std::size_t(1));
  if (!obj.contains("base")) throw DataError("config: schedule.base is required");
  const Phase base = parse_phase_base(obj.at("base"), layers);
  std::vector<PhaseOverride> overrides;
  if (obj.contains("overrides")) {
    for (const auto& ov : obj.at("overrides")) {
      check_keys(ov, {"phase", "seqlen", "lr", "steps", "batch", "windows", "half_windows"},
                 "schedule.overrides[]");
      PhaseOverride o;
      if (!ov.contains("phase")) throw DataError("config: override needs a phase number");
      o.phase = ov.at("phase").get<std::size_t>();
      if (ov.contains("seqlen")) o.seqlen = ov.at("seqlen").get<std::size_t>();
      if (ov.contains("lr")) o.lr = ov.at("lr").get<double>();
      if (ov.contains("steps")) o.steps = ov.at("steps").get<std::size_t>();
      if (ov.contains("batch")) o.batch = ov.at("batch").get<std::size_t>();
      const std::vector<long> hw = half_windows_from(ov, layers, "schedule.overrides[]");
      if (!hw.empty()) o.half_windows = hw;
      overrides.push_back(std::move(o));
    }
  }
  PhaseSchedule s = make_phase_schedule(base, k, overrides);
  s.grad_clip = obj.value("grad_clip", 0.25);
  s.warmup_frac = obj.value("warmup_frac", 0.1);
  s.warmup_max = obj.value("warmup_max", std::size_t(10000));
  if (obj.contains("adam")) {
    const json& a = obj.at("adam");
    check_keys(a, {"beta1", "beta2", "eps", "weight_decay"}, "schedule.adam");
    s.adam.beta1 = a.value("beta1", 0.9);
    s.adam.beta2 = a.value("beta2", 0.999);
    s.adam.eps = a.value("eps", 1e-8);
    s.adam.weight_decay = a.value("weight_decay", 0.01);
  }
  return s;
}

CopyTaskConfig parse_copy_task(const json& obj, std::uint64_t seed) {
  check_keys(obj,
             {"payload_len", "alphabet", "steps", "batch", "lr", "grad_clip", "warmup_frac",
              "eval_every", "eval_quick", "eval_sequences", "target_exact"},
             "copy_task");
  CopyTaskConfig c;
  c.payload_len = obj.value("payload_len", std::size_t(63));
  c.alphabet = obj.value("alphabet", std::size_t(16));
  c.steps = obj.value("steps", std::size_t(2000));
  c.batch = obj.value("batch", std::size_t(8));
  c.lr = obj.value("lr", 1e-3);
  c.grad_clip = obj.value("grad_clip", 0.25);
  c.warmup_frac = obj.value("warmup_frac", 0.1);
  c.eval_every = obj.value("eval_every", std::size_t(250));
  c.eval_quick = obj.value("eval_quick", std::size_t(50));
  c.eval_sequences = obj.value("eval_sequences", std::size_t(200));
  c.target_exact = obj.value("target_exact", 0.9);
  c.seed = seed;
  return c;
}

}  // namespace

TrainConfig parse_train_config(const std::string& text, const std::string& origin) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw DataError("config: " + origin + ": " + e.what());
  }
  check_keys(doc, {"model", "schedule", "copy_task", "seed"}, origin);
  if (!doc.contains("model")) throw DataError("config: " + origin + " has no model section");
  TrainConfig cfg;
  cfg.seed = doc.value("seed", std::uint64_t(0));
  cfg.model = parse_model(doc.at("model"));
  if (doc.contains("schedule")) {
    cfg.schedule = parse_schedule(doc.at("schedule"), cfg.model.layers);
    cfg.has_schedule = true;
  }
  if (doc.contains("copy_task")) {
    cfg.copy_task = parse_copy_task(doc.at("copy_task"), cfg.seed);
    cfg.has_copy_task = true;
  }
  return cfg;
}

TrainConfig load_train_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("config: cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_train_config(ss.str(), path);
}

}  // namespace lf
