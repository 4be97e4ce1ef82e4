#include "lf/train.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>

namespace lf {

PhaseSchedule make_phase_schedule(const Phase& base, std::size_t k,
                                  const std::vector<PhaseOverride>& overrides) {
  if (k == 0) throw UsageError("make_phase_schedule: at least one phase required");
  PhaseSchedule s;
  for (std::size_t i = 0; i < k; ++i) {
    Phase p = base;
    p.seqlen = base.seqlen << i;
    p.lr = std::ldexp(base.lr, -static_cast<int>(i));  // binary-exact halving
    for (auto& h : p.half_windows) h = h << i;
    s.phases.push_back(std::move(p));
  }
  for (const auto& ov : overrides) {
    if (ov.phase < 1 || ov.phase > k)
      throw UsageError("make_phase_schedule: override for phase " + std::to_string(ov.phase) +
                       " out of range");
    Phase& p = s.phases[ov.phase - 1];
    if (ov.seqlen) p.seqlen = *ov.seqlen;
    if (ov.half_windows) p.half_windows = *ov.half_windows;
    if (ov.lr) p.lr = *ov.lr;
    if (ov.steps) p.steps = *ov.steps;
    if (ov.batch) p.batch = *ov.batch;
  }
  for (std::size_t i = 1; i < k; ++i) {
    if (s.phases[i].seqlen < s.phases[i - 1].seqlen)
      throw UsageError("make_phase_schedule: phase " + std::to_string(i + 1) +
                       " seqlen shrinks below phase " + std::to_string(i));
  }
  return s;
}

template <typename T>
void AdamW<T>::step(std::vector<std::pair<std::string, Tensor<T>>>& params, double lr,
                    const TrainMask* mask) {
  ++t_;
  const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
  for (auto& [name, p] : params) {
    if (!p.has_grad()) continue;
    auto& m = m_[name];
    auto& v = v_[name];
    if (m.size() != p.size()) m.assign(p.size(), T(0));
    if (v.size() != p.size()) v.assign(p.size(), T(0));
    const std::vector<std::uint8_t>* flags = nullptr;
    if (mask) {
      auto it = mask->entries.find(name);
      if (it != mask->entries.end()) flags = &it->second;
    }
    const T* g = p.grad();
    T* w = p.data();
    for (std::size_t i = 0; i < p.size(); ++i) {
      if (flags && !(*flags)[i]) continue;
      m[i] = static_cast<T>(cfg_.beta1 * m[i] + (1.0 - cfg_.beta1) * g[i]);
      v[i] = static_cast<T>(cfg_.beta2 * v[i] + (1.0 - cfg_.beta2) * g[i] * g[i]);
      const double mhat = m[i] / bc1;
      const double vhat = v[i] / bc2;
      w[i] -= static_cast<T>(lr * (mhat / (std::sqrt(vhat) + cfg_.eps) +
                                   cfg_.weight_decay * w[i]));
    }
  }
}

template <typename T>
void discard_frozen_grads(std::vector<std::pair<std::string, Tensor<T>>>& params,
                          const TrainMask& mask) {
  for (auto& [name, p] : params) {
    auto it = mask.entries.find(name);
    if (it == mask.entries.end() || !p.has_grad()) continue;
    T* g = p.grad();
    for (std::size_t i = 0; i < p.size(); ++i)
      if (!it->second[i]) g[i] = T(0);
  }
}

template <typename T>
double clip_global_norm(std::vector<std::pair<std::string, Tensor<T>>>& params,
                        double max_norm) {
  double sq = 0;
  for (auto& [name, p] : params) {
    if (!p.has_grad()) continue;
    const T* g = p.grad();
    for (std::size_t i = 0; i < p.size(); ++i)
      sq += static_cast<double>(g[i]) * static_cast<double>(g[i]);
  }
  const double norm = std::sqrt(sq);
  if (norm > max_norm && norm > 0) {
    const T s = static_cast<T>(max_norm / norm);
    for (auto& [name, p] : params) {
      if (!p.has_grad()) continue;
      T* g = p.grad();
      for (std::size_t i = 0; i < p.size(); ++i) g[i] *= s;
    }
  }
  return norm;
}

double warmup_lr(double phase_lr, std::size_t step, std::size_t phase_steps,
                 double warmup_frac, std::size_t warmup_max) {
  std::size_t warmup =
      static_cast<std::size_t>(std::ceil(warmup_frac * static_cast<double>(phase_steps)));
  warmup = std::min(std::max<std::size_t>(warmup, 1), warmup_max);
  if (step >= warmup) return phase_lr;
  return phase_lr * static_cast<double>(step) / static_cast<double>(warmup);
}

void write_metrics_header(std::ostream& os) {
  os << "step,lr,loss_nats,bpc,grad_norm,phase\n";
}

void write_metrics_row(std::ostream& os, const StepLog& row) {
  os << row.step << ',' << row.lr << ',' << row.loss_nats << ',' << row.bpc << ','
     << row.grad_norm << ',' << row.phase << '\n';
}

template <typename T>
std::vector<StepLog> train_phase(Model<T>& m, AdamW<T>& opt,
                                 const std::vector<std::uint8_t>& corpus, const Phase& phase,
                                 const TrainOpts& opts) {
  if (corpus.size() < phase.seqlen + 1)
    throw UsageError("train_phase: corpus has " + std::to_string(corpus.size()) +
                     " bytes, need at least seqlen+1 = " + std::to_string(phase.seqlen + 1));
  if (phase.batch == 0) throw UsageError("train_phase: batch must be >= 1");
  if (!phase.half_windows.empty()) m.set_layer_half_windows(phase.half_windows);

  auto params = m.named_params();
  Rng data_rng(opts.seed * 0x100000001b3ULL + opts.phase_index);
  Rng dropout_rng(opts.seed ^ 0xd1b54a32d192ed03ULL);
  ForwardOpts fwd;
  if (m.cfg.dropout > 0) fwd.dropout_rng = &dropout_rng;

  std::vector<StepLog> logs;
  logs.reserve(phase.steps);
  const std::size_t max_start = corpus.size() - phase.seqlen - 1;
  for (std::size_t step = 1; step <= phase.steps; ++step) {
    m.zero_grads();
    Graph<T> graph;
    Tensor<T> total;
    {
      typename Graph<T>::Scope scope(graph);
      for (std::size_t b = 0; b < phase.batch; ++b) {
        const std::size_t start = data_rng.uniform_int(max_start + 1);
        std::vector<std::size_t> window(corpus.begin() + start,
                                        corpus.begin() + start + phase.seqlen + 1);
        Tensor<T> loss = charlm_loss(window, m, fwd);
        total = b == 0 ? loss : add(total, loss);
      }
      if (phase.batch > 1) total = scale(total, T(1) / static_cast<T>(phase.batch));
    }
    const double loss_val = static_cast<double>(total.at(0));
    if (!std::isfinite(loss_val))
      throw NumericError("train_phase: non-finite loss at phase " +
                         std::to_string(opts.phase_index) + " step " + std::to_string(step));
    graph.backward(total);
    if (opts.mask) discard_frozen_grads(params, *opts.mask);
    const double grad_norm = clip_global_norm(params, opts.grad_clip);
    const double lr =
        warmup_lr(phase.lr, step, phase.steps, opts.warmup_frac, opts.warmup_max);
    opt.step(params, lr, opts.mask);

    StepLog row;
    row.phase = opts.phase_index;
    row.step = step;
    row.lr = lr;
    row.loss_nats = loss_val;
    row.bpc = loss_val / std::log(2.0);
    row.grad_norm = grad_norm;
    if (opts.metrics) write_metrics_row(*opts.metrics, row);
    logs.push_back(row);
    if (opts.stop_below_loss > 0 && loss_val < opts.stop_below_loss) break;
  }
  return logs;
}

namespace {

long round_to_even(double w) {
  long r = static_cast<long>(std::lround(w / 2.0)) * 2;
  return std::max<long>(r, 2);
}

std::vector<LayerPatternSpec> geometric_windows(std::size_t layers, long w_lo, long w_hi) {
  std::vector<LayerPatternSpec> out(layers);
  for (std::size_t l = 0; l < layers; ++l) {
    const double t = layers == 1 ? 0.0
                                 : static_cast<double>(l) / static_cast<double>(layers - 1);
    const double w = static_cast<double>(w_lo) *
                     std::pow(static_cast<double>(w_hi) / static_cast<double>(w_lo), t);
    out[l].half_window = round_to_even(w) / 2;
  }
  return out;
}

std::vector<LayerPatternSpec> fixed_windows(std::size_t layers, long w) {
  std::vector<LayerPatternSpec> out(layers);
  for (auto& s : out) s.half_window = w / 2;
  return out;
}

// Dilation grows over the top layer groups and applies to 2 heads only;
// remaining heads stay contiguous.
void add_dilation_groups(std::vector<LayerPatternSpec>& pattern,
                         const std::vector<std::pair<std::size_t, long>>& groups) {
  for (auto& [start, d] : groups) {
    for (std::size_t l = start; l < pattern.size(); ++l) {
      pattern[l].dilation = d;
      pattern[l].dilated_heads = 2;
    }
  }
}

}  // namespace

std::vector<AblationPreset> ablation_presets() {
  std::vector<AblationPreset> out;

  // Desk-scale variants: 4 layers, 4 heads, windows 8..64.
  out.push_back({"increasing_w", 4, geometric_windows(4, 8, 64)});
  out.push_back({"decreasing_w", 4, geometric_windows(4, 64, 8)});
  out.push_back({"fixed_w", 4, fixed_windows(4, 30)});
  {
    AblationPreset p{"dilation_2heads", 4, geometric_windows(4, 8, 64)};
    add_dilation_groups(p.pattern, {{2, 2}, {3, 3}});
    out.push_back(std::move(p));
  }

  // 12-layer configurations with windows spanning 32..512.
  out.push_back({"increasing_w_paper", 8, geometric_windows(12, 32, 512)});
  out.push_back({"decreasing_w_paper", 8, geometric_windows(12, 512, 32)});
  out.push_back({"fixed_w_paper", 8, fixed_windows(12, 230)});
  {
    AblationPreset p{"dilation_2heads_paper", 8, geometric_windows(12, 32, 512)};
    add_dilation_groups(p.pattern, {{6, 2}, {8, 3}, {10, 4}});
    out.push_back(std::move(p));
  }
  return out;
}

const AblationPreset& find_preset(const std::string& name) {
  static const std::vector<AblationPreset> presets = ablation_presets();
  for (const auto& p : presets)
    if (p.name == name) return p;
  std::string names;
  for (const auto& p : presets) names += p.name + " ";
  throw UsageError("unknown preset '" + name + "'; available: " + names);
}

#define LF_INSTANTIATE_TRAIN(T)                                                              \
  template class AdamW<T>;                                                                   \
  template void discard_frozen_grads<T>(std::vector<std::pair<std::string, Tensor<T>>>&,     \
                                        const TrainMask&);                                   \
  template double clip_global_norm<T>(std::vector<std::pair<std::string, Tensor<T>>>&,       \
                                      double);                                               \
  template std::vector<StepLog> train_phase<T>(Model<T>&, AdamW<T>&,                         \
                                               const std::vector<std::uint8_t>&,             \
                                               const Phase&, const TrainOpts&);

LF_INSTANTIATE_TRAIN(float)
LF_INSTANTIATE_TRAIN(double)

#undef LF_INSTANTIATE_TRAIN

}  // namespace lf
