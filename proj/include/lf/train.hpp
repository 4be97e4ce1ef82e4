#pragma once

#include <iosfwd>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "lf/embed_init.hpp"
#include "lf/model.hpp"

namespace lf {

struct AdamConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.01;
};

// One stage of the curriculum.
struct Phase {
  std::size_t seqlen = 2048;
  std::vector<long> half_windows;  // per layer; empty keeps the model's current windows
  double lr = 2.5e-4;
  std::size_t steps = 100;
  std::size_t batch = 32;
};

struct PhaseOverride {
  std::size_t phase = 0;  // 1-based
  std::optional<std::size_t> seqlen;
  std::optional<std::vector<long>> half_windows;
  std::optional<double> lr;
  std::optional<std::size_t> steps;
  std::optional<std::size_t> batch;
};

struct PhaseSchedule {
  std::vector<Phase> phases;
  double grad_clip = 0.25;
  double warmup_frac = 0.1;       // warmup steps = ceil(frac * steps), capped below
  std::size_t warmup_max = 10000;
  AdamConfig adam;
};

// Phase k defaults: seqlen and windows double, lr halves (binary exact).
// Overrides replace individual fields; shrinking seqlen below the previous
// phase is rejected.
PhaseSchedule make_phase_schedule(const Phase& base, std::size_t k,
                                  const std::vector<PhaseOverride>& overrides = {});

// Decoupled-weight-decay adaptive optimizer. Frozen coordinates are skipped
// entirely: no update, no state, no decay.
template <typename T>
class AdamW {
 public:
  explicit AdamW(AdamConfig cfg = {}) : cfg_(cfg) {}

  void step(std::vector<std::pair<std::string, Tensor<T>>>& params, double lr,
            const TrainMask* mask = nullptr);
  std::size_t step_count() const { return t_; }

 private:
  AdamConfig cfg_;
  std::size_t t_ = 0;
  std::unordered_map<std::string, std::vector<T>> m_, v_;
};

// Zeroes the gradients of frozen coordinates.
template <typename T>
void discard_frozen_grads(std::vector<std::pair<std::string, Tensor<T>>>& params,
                          const TrainMask& mask);

// Scales every gradient so the global norm is at most max_norm; returns the
// pre-clip norm.
template <typename T>
double clip_global_norm(std::vector<std::pair<std::string, Tensor<T>>>& params,
                        double max_norm);

// Linear ramp to phase_lr over the warmup steps, constant afterwards.
// step is 1-based.
double warmup_lr(double phase_lr, std::size_t step, std::size_t phase_steps,
                 double warmup_frac, std::size_t warmup_max);

struct StepLog {
  std::size_t phase = 1;
  std::size_t step = 0;
  double lr = 0, loss_nats = 0, bpc = 0, grad_norm = 0;
};

void write_metrics_header(std::ostream& os);
void write_metrics_row(std::ostream& os, const StepLog& row);

struct TrainOpts {
  std::uint64_t seed = 0;
  std::size_t phase_index = 1;
  double grad_clip = 0.25;
  double warmup_frac = 0.1;
  std::size_t warmup_max = 10000;
  const TrainMask* mask = nullptr;
  std::ostream* metrics = nullptr;
  double stop_below_loss = 0.0;  // early stop on training loss; 0 disables
};

// Runs phase.steps updates of the char LM on windows sampled from the corpus.
// Deterministic given seed and LF_THREADS.
template <typename T>
std::vector<StepLog> train_phase(Model<T>& m, AdamW<T>& opt,
                                 const std::vector<std::uint8_t>& corpus, const Phase& phase,
                                 const TrainOpts& opts);

struct AblationPreset {
  std::string name;
  std::size_t heads = 8;
  std::vector<LayerPatternSpec> pattern;
};

// Window-shaping and dilation presets: increasing_w / fixed_w / decreasing_w /
// dilation_2heads, each in a desk-scale variant and a *_paper 12-layer
// variant.
std::vector<AblationPreset> ablation_presets();
const AblationPreset& find_preset(const std::string& name);

// Overlapping-window evaluation: windows start at 0, s, 2s, ...; the first
// window scores all eval_len tokens, later ones only their trailing s; a
// right-aligned remainder window covers any leftover suffix so every corpus
// token is scored exactly once.
struct EvalProtocol {
  std::size_t eval_len = 0;
  std::size_t step = 0;
};

struct EvalWindow {
  std::size_t start = 0;
  std::size_t score_begin = 0;
  std::size_t score_end = 0;
};

std::vector<EvalWindow> plan_eval_windows(std::size_t corpus_len, const EvalProtocol& proto);

template <typename T>
double eval_bpc_sliding(const Model<T>& m, const std::vector<std::uint8_t>& corpus,
                        const EvalProtocol& proto);

}  // namespace lf
