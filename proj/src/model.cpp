#include "lf/model.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>

namespace lf {

const char* arch_name(Arch a) {
  switch (a) {
    case Arch::charlm: return "charlm";
    case Arch::mlm: return "mlm";
    case Arch::led: return "led";
  }
  return "?";
}

Arch arch_from_name(const std::string& name) {
  if (name == "charlm") return Arch::charlm;
  if (name == "mlm") return Arch::mlm;
  if (name == "led") return Arch::led;
  throw UsageError("unknown architecture '" + name + "'");
}

void ModelConfig::validate() const {
  if (vocab != kVocab)
    throw UsageError("model: vocab must be " + std::to_string(kVocab) +
                     " (256 bytes + 4 reserved ids)");
  if (dmodel == 0 || heads == 0 || dmodel % heads != 0)
    throw UsageError("model: dmodel must be a positive multiple of heads");
  if (layers == 0) throw UsageError("model: at least one layer required");
  if (pattern.size() != layers)
    throw UsageError("model: pattern schedule has " + std::to_string(pattern.size()) +
                     " entries for " + std::to_string(layers) + " layers");
  if (max_positions == 0) throw UsageError("model: max_positions must be positive");
  if (dropout < 0 || dropout >= 1) throw UsageError("model: dropout must be in [0,1)");
  for (const auto& p : pattern) {
    if (p.half_window < 0 || p.dilation < 1 || p.dilated_heads < 0 ||
        p.dilated_heads > static_cast<long>(heads))
      throw UsageError("model: invalid layer pattern spec");
  }
  if (arch == Arch::led) {
    if (dec_layers == 0) throw UsageError("led: dec_layers must be >= 1");
    if (enc_globals.empty() ||
        !std::binary_search(enc_globals.begin(), enc_globals.end(), std::size_t(0)))
      throw UsageError("led: encoder globals must include position 0");
  }
}

namespace {

std::size_t ln_params(std::size_t dm) { return 2 * dm; }
std::size_t ffn_params(std::size_t dm) { return dm * 4 * dm + 4 * dm + 4 * dm * dm + dm; }

}  // namespace

std::size_t ModelConfig::expected_parameter_count() const {
  const std::size_t dm = dmodel;
  std::size_t total = vocab * dm + max_positions * dm;  // output head tied
  for (std::size_t l = 0; l < layers; ++l) {
    total += 2 * ln_params(dm) + 7 * dm * dm + ffn_params(dm);
    if (relative_bias) {
      const std::size_t slots =
          band_slot_count(pattern[l].half_window, trunk_mode());
      total += heads * slots;
    }
  }
  total += ln_params(dm);
  if (arch == Arch::led) {
    for (std::size_t l = 0; l < dec_layers; ++l)
      total += 3 * ln_params(dm) + 8 * dm * dm + ffn_params(dm);
    total += ln_params(dm);
  }
  return total;
}

namespace {

template <typename T>
Tensor<T> init_matrix(std::size_t rows, std::size_t cols, Rng& rng, T stddev = T(0.02)) {
  Tensor<T> t = Tensor<T>::zeros({rows, cols});
  for (std::size_t i = 0; i < t.size(); ++i)
    t.at(i) = static_cast<T>(rng.normal(0.0, static_cast<double>(stddev)));
  return t;
}

template <typename T>
std::vector<HeadPattern> resolve_head_patterns(const LayerPatternSpec& spec,
                                               std::size_t heads) {
  std::vector<HeadPattern> hp(heads);
  const std::size_t plain = heads - static_cast<std::size_t>(spec.dilated_heads);
  for (std::size_t a = 0; a < heads; ++a) {
    hp[a].half_window = spec.half_window;
    hp[a].dilation = a < plain ? 1 : spec.dilation;
  }
  return hp;
}

template <typename T>
TransformerBlock<T> init_block(const ModelConfig& cfg, const LayerPatternSpec& spec, Rng& rng) {
  const std::size_t dm = cfg.dmodel;
  TransformerBlock<T> b;
  b.ln1_gamma = Tensor<T>::full({dm}, T(1));
  b.ln1_beta = Tensor<T>::zeros({dm});
  b.attn.heads = cfg.heads;
  b.attn.dk = cfg.dk();
  b.attn.wqs = init_matrix<T>(dm, dm, rng);
  b.attn.wks = init_matrix<T>(dm, dm, rng);
  b.attn.wvs = init_matrix<T>(dm, dm, rng);
  init_global_projections(b.attn);
  b.attn.wo = init_matrix<T>(dm, dm, rng);
  b.attn.head_patterns = resolve_head_patterns<T>(spec, cfg.heads);
  if (cfg.relative_bias) {
    const std::size_t slots = band_slot_count(spec.half_window, cfg.trunk_mode());
    for (std::size_t a = 0; a < cfg.heads; ++a)
      b.attn.rel_bias.push_back(Tensor<T>::zeros({slots}));
  }
  b.ln2_gamma = Tensor<T>::full({dm}, T(1));
  b.ln2_beta = Tensor<T>::zeros({dm});
  b.ffn_w1 = init_matrix<T>(dm, 4 * dm, rng);
  b.ffn_b1 = Tensor<T>::zeros({4 * dm});
  b.ffn_w2 = init_matrix<T>(4 * dm, dm, rng);
  b.ffn_b2 = Tensor<T>::zeros({dm});
  return b;
}

template <typename T>
DecoderBlock<T> init_dec_block(const ModelConfig& cfg, Rng& rng) {
  const std::size_t dm = cfg.dmodel;
  DecoderBlock<T> b;
  b.ln1_gamma = Tensor<T>::full({dm}, T(1));
  b.ln1_beta = Tensor<T>::zeros({dm});
  b.self_attn.heads = cfg.heads;
  b.self_attn.dk = cfg.dk();
  b.self_attn.wq = init_matrix<T>(dm, dm, rng);
  b.self_attn.wk = init_matrix<T>(dm, dm, rng);
  b.self_attn.wv = init_matrix<T>(dm, dm, rng);
  b.self_attn.wo = init_matrix<T>(dm, dm, rng);
  b.lnc_gamma = Tensor<T>::full({dm}, T(1));
  b.lnc_beta = Tensor<T>::zeros({dm});
  b.cross_attn.heads = cfg.heads;
  b.cross_attn.dk = cfg.dk();
  b.cross_attn.wq = init_matrix<T>(dm, dm, rng);
  b.cross_attn.wk = init_matrix<T>(dm, dm, rng);
  b.cross_attn.wv = init_matrix<T>(dm, dm, rng);
  b.cross_attn.wo = init_matrix<T>(dm, dm, rng);
  b.ln2_gamma = Tensor<T>::full({dm}, T(1));
  b.ln2_beta = Tensor<T>::zeros({dm});
  b.ffn_w1 = init_matrix<T>(dm, 4 * dm, rng);
  b.ffn_b1 = Tensor<T>::zeros({4 * dm});
  b.ffn_w2 = init_matrix<T>(4 * dm, dm, rng);
  b.ffn_b2 = Tensor<T>::zeros({dm});
  return b;
}

}  // namespace

template <typename T>
Model<T> Model<T>::init(const ModelConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  Model<T> m;
  m.cfg = cfg;
  Rng rng(seed);
  m.tok_embed = init_matrix<T>(cfg.vocab, cfg.dmodel, rng);
  m.pos_embed = init_matrix<T>(cfg.max_positions, cfg.dmodel, rng);
  for (std::size_t l = 0; l < cfg.layers; ++l)
    m.blocks.push_back(init_block<T>(cfg, cfg.pattern[l], rng));
  m.final_ln_gamma = Tensor<T>::full({cfg.dmodel}, T(1));
  m.final_ln_beta = Tensor<T>::zeros({cfg.dmodel});
  if (cfg.arch == Arch::led) {
    for (std::size_t l = 0; l < cfg.dec_layers; ++l)
      m.dec_blocks.push_back(init_dec_block<T>(cfg, rng));
    m.dec_ln_gamma = Tensor<T>::full({cfg.dmodel}, T(1));
    m.dec_ln_beta = Tensor<T>::zeros({cfg.dmodel});
  }
  m.set_trainable(true);
  return m;
}

template <typename T>
std::vector<std::pair<std::string, Tensor<T>>> Model<T>::named_params() const {
  std::vector<std::pair<std::string, Tensor<T>>> out;
  auto tag = [](const std::string& prefix, std::size_t l) {
    char buf[8];
    std::snprintf(buf, sizeof(buf), "%02zu", l);
    return prefix + buf;
  };
  out.emplace_back("tok_embed", tok_embed);
  out.emplace_back("pos_embed", pos_embed);
  for (std::size_t l = 0; l < blocks.size(); ++l) {
    const auto& b = blocks[l];
    const std::string p = tag("enc", l) + ".";
    out.emplace_back(p + "ln1.gamma", b.ln1_gamma);
    out.emplace_back(p + "ln1.beta", b.ln1_beta);
    out.emplace_back(p + "attn.wqs", b.attn.wqs);
    out.emplace_back(p + "attn.wks", b.attn.wks);
    out.emplace_back(p + "attn.wvs", b.attn.wvs);
    out.emplace_back(p + "attn.wqg", b.attn.wqg);
    out.emplace_back(p + "attn.wkg", b.attn.wkg);
    out.emplace_back(p + "attn.wvg", b.attn.wvg);
    out.emplace_back(p + "attn.wo", b.attn.wo);
    for (std::size_t a = 0; a < b.attn.rel_bias.size(); ++a)
      out.emplace_back(p + "attn.rel_bias.h" + std::to_string(a), b.attn.rel_bias[a]);
    out.emplace_back(p + "ln2.gamma", b.ln2_gamma);
    out.emplace_back(p + "ln2.beta", b.ln2_beta);
    out.emplace_back(p + "ffn.w1", b.ffn_w1);
    out.emplace_back(p + "ffn.b1", b.ffn_b1);
    out.emplace_back(p + "ffn.w2", b.ffn_w2);
    out.emplace_back(p + "ffn.b2", b.ffn_b2);
  }
  out.emplace_back("final_ln.gamma", final_ln_gamma);
  out.emplace_back("final_ln.beta", final_ln_beta);
  for (std::size_t l = 0; l < dec_blocks.size(); ++l) {
    const auto& b = dec_blocks[l];
    const std::string p = tag("dec", l) + ".";
    out.emplace_back(p + "ln1.gamma", b.ln1_gamma);
    out.emplace_back(p + "ln1.beta", b.ln1_beta);
    out.emplace_back(p + "self.wq", b.self_attn.wq);
    out.emplace_back(p + "self.wk", b.self_attn.wk);
    out.emplace_back(p + "self.wv", b.self_attn.wv);
    out.emplace_back(p + "self.wo", b.self_attn.wo);
    out.emplace_back(p + "lnc.gamma", b.lnc_gamma);
    out.emplace_back(p + "lnc.beta", b.lnc_beta);
    out.emplace_back(p + "cross.wq", b.cross_attn.wq);
    out.emplace_back(p + "cross.wk", b.cross_attn.wk);
    out.emplace_back(p + "cross.wv", b.cross_attn.wv);
    out.emplace_back(p + "cross.wo", b.cross_attn.wo);
    out.emplace_back(p + "ln2.gamma", b.ln2_gamma);
    out.emplace_back(p + "ln2.beta", b.ln2_beta);
    out.emplace_back(p + "ffn.w1", b.ffn_w1);
    out.emplace_back(p + "ffn.b1", b.ffn_b1);
    out.emplace_back(p + "ffn.w2", b.ffn_w2);
    out.emplace_back(p + "ffn.b2", b.ffn_b2);
  }
  if (cfg.arch == Arch::led) {
    out.emplace_back("dec_ln.gamma", dec_ln_gamma);
    out.emplace_back("dec_ln.beta", dec_ln_beta);
  }
  return out;
}

template <typename T>
std::size_t Model<T>::parameter_count() const {
  std::size_t total = 0;
  for (const auto& [name, t] : named_params()) total += t.size();
  return total;
}

template <typename T>
void Model<T>::set_trainable(bool trainable) {
  for (auto& [name, t] : named_params()) t.set_requires_grad(trainable);
}

template <typename T>
void Model<T>::zero_grads() {
  for (auto& [name, t] : named_params()) {
    t.ensure_grad();
    t.zero_grad();
  }
}

template <typename T>
void Model<T>::set_layer_half_windows(const std::vector<long>& half_windows) {
  if (half_windows.size() != cfg.layers)
    throw UsageError("set_layer_half_windows: expected " + std::to_string(cfg.layers) +
                     " entries");
  if (cfg.relative_bias)
    throw UsageError("set_layer_half_windows: relative bias tables are sized to the "
                     "configured windows and cannot be resized");
  for (std::size_t l = 0; l < cfg.layers; ++l) {
    cfg.pattern[l].half_window = half_windows[l];
    for (auto& hp : blocks[l].attn.head_patterns) hp.half_window = half_windows[l];
  }
}

namespace {

template <typename T>
Tensor<T> ffn_forward(const Tensor<T>& x, const Tensor<T>& w1, const Tensor<T>& b1,
                      const Tensor<T>& w2, const Tensor<T>& b2) {
  return add_rows(matmul(gelu(add_rows(matmul(x, w1), b1)), w2), b2);
}

template <typename T>
Tensor<T> maybe_dropout(const Tensor<T>& x, const ModelConfig& cfg, const ForwardOpts& opts) {
  if (opts.dropout_rng && cfg.dropout > 0) return dropout(x, cfg.dropout, *opts.dropout_rng);
  return x;
}

template <typename T>
Tensor<T> encoder_block_forward(const Tensor<T>& x, const TransformerBlock<T>& b,
                                const PatternConfig& cfg_l, const ModelConfig& cfg,
                                const ForwardOpts& opts) {
  Tensor<T> h = layernorm(x, b.ln1_gamma, b.ln1_beta);
  Tensor<T> a = longformer_self_attention(h, b.attn, cfg_l, cfg.kernel);
  Tensor<T> y = add(x, maybe_dropout(a, cfg, opts));
  Tensor<T> h2 = layernorm(y, b.ln2_gamma, b.ln2_beta);
  Tensor<T> f = ffn_forward(h2, b.ffn_w1, b.ffn_b1, b.ffn_w2, b.ffn_b2);
  return add(y, maybe_dropout(f, cfg, opts));
}

template <typename T>
Tensor<T> embed_tokens(const std::vector<std::size_t>& tokens, const Model<T>& m) {
  const std::size_t n = tokens.size();
  if (n == 0) throw UsageError("forward: empty token sequence");
  if (n > m.cfg.max_positions)
    throw UsageError("forward: sequence length " + std::to_string(n) +
                     " exceeds max_positions " + std::to_string(m.cfg.max_positions));
  std::vector<std::size_t> positions(n);
  std::iota(positions.begin(), positions.end(), std::size_t(0));
  return add(embedding(m.tok_embed, tokens), embedding(m.pos_embed, positions));
}

template <typename T>
Tensor<T> trunk_forward(const std::vector<std::size_t>& tokens, const Model<T>& m,
                        AttnMode mode, const std::vector<std::size_t>& globals,
                        const ForwardOpts& opts) {
  Tensor<T> x = maybe_dropout(embed_tokens(tokens, m), m.cfg, opts);
  const std::size_t n = tokens.size();
  for (std::size_t l = 0; l < m.blocks.size(); ++l) {
    PatternConfig cfg_l;
    cfg_l.n = n;
    cfg_l.half_window = m.cfg.pattern[l].half_window;
    cfg_l.dilation = 1;  // per-head dilations come from head_patterns
    cfg_l.mode = mode;
    cfg_l.global_positions = globals;
    x = encoder_block_forward(x, m.blocks[l], cfg_l, m.cfg, opts);
  }
  return layernorm(x, m.final_ln_gamma, m.final_ln_beta);
}

template <typename T>
Tensor<T> tied_logits(const Tensor<T>& hidden, const Model<T>& m) {
  return matmul(hidden, transpose(m.tok_embed));
}

}  // namespace

template <typename T>
Tensor<T> charlm_forward(const std::vector<std::size_t>& tokens, const Model<T>& m,
                         const ForwardOpts& opts) {
  if (m.cfg.arch != Arch::charlm) throw UsageError("charlm_forward: model is not a charlm");
  return tied_logits(trunk_forward(tokens, m, AttnMode::causal, {}, opts), m);
}

template <typename T>
Tensor<T> charlm_loss(const std::vector<std::size_t>& window, const Model<T>& m,
                      const ForwardOpts& opts) {
  if (window.size() < 2) throw UsageError("charlm_loss: window must hold >= 2 tokens");
  std::vector<std::size_t> input(window.begin(), window.end() - 1);
  std::vector<std::size_t> targets(window.begin() + 1, window.end());
  Tensor<T> logits = charlm_forward(input, m, opts);
  return cross_entropy(logits, targets, Tensor<T>::full({targets.size()}, T(1)));
}

MlmBatch mlm_corrupt(const std::vector<std::size_t>& tokens, double mask_prob,
                     std::uint64_t seed) {
  if (mask_prob <= 0 || mask_prob >= 1) throw UsageError("mlm: mask_prob must be in (0,1)");
  MlmBatch b;
  b.corrupted = tokens;
  b.targets = tokens;
  b.selected.assign(tokens.size(), 0);
  Rng rng(seed);
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (rng.uniform() >= mask_prob) continue;
    b.selected[i] = 1;
    ++b.selected_count;
    const double r = rng.uniform();
    if (r < 0.8) {
      b.corrupted[i] = kMaskId;
    } else if (r < 0.9) {
      b.corrupted[i] = rng.uniform_int(256);
    }  // else keep the original token
  }
  if (b.selected_count == 0)
    throw UsageError("mlm: no positions selected; use a longer input or a higher mask_prob");
  return b;
}

template <typename T>
Tensor<T> mlm_loss(const std::vector<std::size_t>& tokens, const Model<T>& m, double mask_prob,
                   std::uint64_t seed, const ForwardOpts& opts) {
  if (m.cfg.arch != Arch::mlm) throw UsageError("mlm_loss: model is not an mlm");
  MlmBatch batch = mlm_corrupt(tokens, mask_prob, seed);
  Tensor<T> hidden = trunk_forward(batch.corrupted, m, AttnMode::bidirectional, {}, opts);
  Tensor<T> logits = tied_logits(hidden, m);
  Tensor<T> weights = Tensor<T>::zeros({tokens.size()});
  for (std::size_t i = 0; i < tokens.size(); ++i)
    if (batch.selected[i]) weights.at(i) = T(1);
  return cross_entropy(logits, batch.targets, weights);
}

template <typename T>
Tensor<T> led_encode(const std::vector<std::size_t>& src, const Model<T>& m,
                     const ForwardOpts& opts) {
  if (m.cfg.arch != Arch::led) throw UsageError("led: model is not an led");
  if (src.empty() || src[0] != kBosId)
    throw UsageError("led: source must begin with the <s> token");
  return trunk_forward(src, m, AttnMode::bidirectional, m.cfg.enc_globals, opts);
}

template <typename T>
Tensor<T> led_decode(const Tensor<T>& memory, const std::vector<std::size_t>& tgt_prefix,
                     const Model<T>& m, const ForwardOpts& opts) {
  Tensor<T> x = maybe_dropout(embed_tokens(tgt_prefix, m), m.cfg, opts);
  for (const auto& b : m.dec_blocks) {
    Tensor<T> h = layernorm(x, b.ln1_gamma, b.ln1_beta);
    Tensor<T> a = dense_multihead_attention(h, h, b.self_attn, /*causal=*/true);
    x = add(x, maybe_dropout(a, m.cfg, opts));
    Tensor<T> hc = layernorm(x, b.lnc_gamma, b.lnc_beta);
    Tensor<T> c = dense_multihead_attention(hc, memory, b.cross_attn, /*causal=*/false);
    x = add(x, maybe_dropout(c, m.cfg, opts));
    Tensor<T> h2 = layernorm(x, b.ln2_gamma, b.ln2_beta);
    Tensor<T> f = ffn_forward(h2, b.ffn_w1, b.ffn_b1, b.ffn_w2, b.ffn_b2);
    x = add(x, maybe_dropout(f, m.cfg, opts));
  }
  return tied_logits(layernorm(x, m.dec_ln_gamma, m.dec_ln_beta), m);
}

template <typename T>
Tensor<T> led_forward(const std::vector<std::size_t>& src,
                      const std::vector<std::size_t>& tgt_prefix, const Model<T>& m,
                      const ForwardOpts& opts) {
  return led_decode(led_encode(src, m, opts), tgt_prefix, m, opts);
}

template <typename T>
Tensor<T> led_loss(const std::vector<std::size_t>& src, const std::vector<std::size_t>& tgt,
                   const Model<T>& m, const ForwardOpts& opts) {
  if (tgt.empty()) throw UsageError("led_loss: empty target");
  std::vector<std::size_t> dec_input;
  dec_input.reserve(tgt.size());
  dec_input.push_back(kBosId);
  dec_input.insert(dec_input.end(), tgt.begin(), tgt.end() - 1);
  Tensor<T> logits = led_forward(src, dec_input, m, opts);
  return cross_entropy(logits, tgt, Tensor<T>::full({tgt.size()}, T(1)));
}

namespace {

// Log-softmax of a logits row, plain values.
template <typename T>
std::vector<double> row_logprobs(const Tensor<T>& logits, std::size_t row) {
  const std::size_t v = logits.dim(1);
  std::vector<double> out(v);
  double mx = static_cast<double>(logits.at(row, 0));
  for (std::size_t j = 1; j < v; ++j) mx = std::max(mx, static_cast<double>(logits.at(row, j)));
  double denom = 0;
  for (std::size_t j = 0; j < v; ++j) denom += std::exp(static_cast<double>(logits.at(row, j)) - mx);
  const double lse = std::log(denom) + mx;
  for (std::size_t j = 0; j < v; ++j) out[j] = static_cast<double>(logits.at(row, j)) - lse;
  return out;
}

struct Hypothesis {
  std::vector<std::size_t> tokens;  // includes the leading <s>
  double logprob = 0.0;
  bool finished = false;
};

double hypothesis_score(const Hypothesis& h, double length_penalty) {
  const std::size_t len = std::max<std::size_t>(1, h.tokens.size() - 1);
  return h.logprob / std::pow(static_cast<double>(len), length_penalty);
}

}  // namespace

std::vector<std::size_t> beam_search_with(
    const std::function<std::vector<double>(const std::vector<std::size_t>&)>& next_logprobs,
    std::size_t beam, std::size_t max_len, double length_penalty, std::size_t eos_id) {
  if (beam == 0) throw UsageError("beam_search: beam must be >= 1");
  std::vector<Hypothesis> live{Hypothesis{{kBosId}, 0.0, false}};
  std::vector<Hypothesis> finished;
  for (std::size_t step = 0; step < max_len && !live.empty(); ++step) {
    std::vector<Hypothesis> candidates;
    for (const auto& h : live) {
      const std::vector<double> lp = next_logprobs(h.tokens);
      // Only the best `beam` continuations of each hypothesis can survive.
      std::vector<std::size_t> order(lp.size());
      std::iota(order.begin(), order.end(), std::size_t(0));
      const std::size_t keep = std::min(beam, order.size());
      std::partial_sort(order.begin(), order.begin() + keep, order.end(),
                        [&](std::size_t a, std::size_t b) {
                          if (lp[a] != lp[b]) return lp[a] > lp[b];
                          return a < b;
                        });
      for (std::size_t k = 0; k < keep; ++k) {
        Hypothesis next = h;
        next.logprob += lp[order[k]];
        if (order[k] == eos_id) {
          next.finished = true;
        } else {
          next.tokens.push_back(order[k]);
        }
        candidates.push_back(std::move(next));
      }
    }
    std::stable_sort(candidates.begin(), candidates.end(),
                     [](const Hypothesis& a, const Hypothesis& b) {
                       return a.logprob > b.logprob;
                     });
    if (candidates.size() > beam) candidates.resize(beam);
    live.clear();
    for (auto& c : candidates) {
      if (c.finished) {
        finished.push_back(std::move(c));
      } else {
        live.push_back(std::move(c));
      }
    }
  }
  for (auto& h : live) finished.push_back(std::move(h));  // hit the length cap
  if (finished.empty()) return {};
  const Hypothesis* best = &finished[0];
  double best_score = hypothesis_score(finished[0], length_penalty);
  for (std::size_t i = 1; i < finished.size(); ++i) {
    const double s = hypothesis_score(finished[i], length_penalty);
    if (s > best_score) {
      best = &finished[i];
      best_score = s;
    }
  }
  return {best->tokens.begin() + 1, best->tokens.end()};
}

template <typename T>
std::vector<std::size_t> beam_search(const Model<T>& m, const std::vector<std::size_t>& src,
                                     std::size_t beam, std::size_t max_len,
                                     double length_penalty) {
  typename Graph<T>::NoGradScope no_grad;
  Tensor<T> memory = led_encode(src, m);
  auto scorer = [&](const std::vector<std::size_t>& prefix) {
    Tensor<T> logits = led_decode(memory, prefix, m);
    return row_logprobs(logits, logits.dim(0) - 1);
  };
  return beam_search_with(scorer, beam, max_len, length_penalty, kEosId);
}

template <typename T>
std::vector<std::size_t> greedy_decode(const Model<T>& m, const std::vector<std::size_t>& src,
                                       std::size_t max_len) {
  typename Graph<T>::NoGradScope no_grad;
  Tensor<T> memory = led_encode(src, m);
  std::vector<std::size_t> prefix{kBosId};
  std::vector<std::size_t> out;
  for (std::size_t step = 0; step < max_len; ++step) {
    Tensor<T> logits = led_decode(memory, prefix, m);
    const std::vector<double> lp = row_logprobs(logits, logits.dim(0) - 1);
    std::size_t best = 0;
    for (std::size_t j = 1; j < lp.size(); ++j)
      if (lp[j] > lp[best]) best = j;
    if (best == kEosId) break;
    out.push_back(best);
    prefix.push_back(best);
  }
  return out;
}

#define LF_INSTANTIATE_MODEL(T)                                                               \
  template struct Model<T>;                                                                   \
  template Tensor<T> charlm_forward<T>(const std::vector<std::size_t>&, const Model<T>&,     \
                                       const ForwardOpts&);                                   \
  template Tensor<T> charlm_loss<T>(const std::vector<std::size_t>&, const Model<T>&,        \
                                    const ForwardOpts&);                                      \
  template Tensor<T> mlm_loss<T>(const std::vector<std::size_t>&, const Model<T>&, double,   \
                                 std::uint64_t, const ForwardOpts&);                          \
  template Tensor<T> led_encode<T>(const std::vector<std::size_t>&, const Model<T>&,         \
                                   const ForwardOpts&);                                       \
  template Tensor<T> led_decode<T>(const Tensor<T>&, const std::vector<std::size_t>&,        \
                                   const Model<T>&, const ForwardOpts&);                      \
  template Tensor<T> led_forward<T>(const std::vector<std::size_t>&,                         \
                                    const std::vector<std::size_t>&, const Model<T>&,        \
                                    const ForwardOpts&);                                      \
  template Tensor<T> led_loss<T>(const std::vector<std::size_t>&,                            \
                                 const std::vector<std::size_t>&, const Model<T>&,           \
                                 const ForwardOpts&);                                         \
  template std::vector<std::size_t> beam_search<T>(const Model<T>&,                          \
                                                   const std::vector<std::size_t>&,          \
                                                   std::size_t, std::size_t, double);        \
  template std::vector<std::size_t> greedy_decode<T>(const Model<T>&,                        \
                                                     const std::vector<std::size_t>&,        \
                                                     std::size_t);

LF_INSTANTIATE_MODEL(float)
LF_INSTANTIATE_MODEL(double)

#undef LF_INSTANTIATE_MODEL

}  // namespace lf
