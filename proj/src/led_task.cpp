#include "lf/led_task.hpp"

#include <cmath>
#include <ostream>

namespace lf {

std::pair<std::vector<std::size_t>, std::vector<std::size_t>> copy_task_sample(
    const CopyTaskConfig& cfg, Rng& rng) {
  if (cfg.alphabet < 2 || cfg.alphabet > 26)
    throw UsageError("copy task: alphabet must be in [2,26]");
  std::vector<std::size_t> payload(cfg.payload_len);
  for (auto& b : payload) b = 'a' + rng.uniform_int(cfg.alphabet);
  std::vector<std::size_t> src;
  src.reserve(cfg.payload_len + 1);
  src.push_back(kBosId);
  src.insert(src.end(), payload.begin(), payload.end());
  std::vector<std::size_t> tgt = payload;
  tgt.push_back(kEosId);
  return {std::move(src), std::move(tgt)};
}

template <typename T>
double copy_task_exact_match(const Model<T>& m, const CopyTaskConfig& cfg, std::size_t count,
                             std::uint64_t eval_seed) {
  Rng rng(eval_seed);
  std::size_t hits = 0;
  for (std::size_t i = 0; i < count; ++i) {
    auto [src, tgt] = copy_task_sample(cfg, rng);
    const std::vector<std::size_t> out = greedy_decode(m, src, cfg.payload_len + 8);
    tgt.pop_back();  // drop </s>; greedy output stops before it
    if (out == tgt) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(count);
}

template <typename T>
LedTrainResult train_led_copy(Model<T>& m, const CopyTaskConfig& cfg, std::ostream* metrics) {
  if (m.cfg.arch != Arch::led) throw UsageError("train_led_copy: model is not an led");
  auto params = m.named_params();
  AdamW<T> opt(cfg.adam);
  Rng data_rng(cfg.seed ^ 0xc0ffee11ULL);
  // Held-out sequences come from a separate stream.
  const std::uint64_t eval_seed = cfg.seed ^ 0x9e3779b97f4a7c15ULL;

  LedTrainResult result;
  double last_loss = 0;
  for (std::size_t step = 1; step <= cfg.steps; ++step) {
    m.zero_grads();
    Graph<T> graph;
    Tensor<T> total;
    {
      typename Graph<T>::Scope scope(graph);
      for (std::size_t b = 0; b < cfg.batch; ++b) {
        auto [src, tgt] = copy_task_sample(cfg, data_rng);
        Tensor<T> loss = led_loss(src, tgt, m);
        total = b == 0 ? loss : add(total, loss);
      }
      if (cfg.batch > 1) total = scale(total, T(1) / static_cast<T>(cfg.batch));
    }
    last_loss = static_cast<double>(total.at(0));
    if (!std::isfinite(last_loss))
      throw NumericError("train_led_copy: non-finite loss at step " + std::to_string(step));
    graph.backward(total);
    clip_global_norm(params, cfg.grad_clip);
    const double lr = warmup_lr(cfg.lr, step, cfg.steps, cfg.warmup_frac, cfg.warmup_max);
    opt.step(params, lr);
    result.steps_run = step;

    if (metrics && (step % 25 == 0 || step == 1))
      *metrics << step << ',' << lr << ',' << last_loss << ','
               << last_loss / std::log(2.0) << '\n';

    if (step % cfg.eval_every == 0 || step == cfg.steps) {
      const double quick = copy_task_exact_match(m, cfg, cfg.eval_quick, eval_seed);
      if (metrics) *metrics << "# step " << step << " quick_exact_match " << quick << '\n';
      if (quick >= cfg.target_exact) {
        const double full = copy_task_exact_match(m, cfg, cfg.eval_sequences, eval_seed);
        if (metrics) *metrics << "# step " << step << " full_exact_match " << full << '\n';
        if (full >= cfg.target_exact) {
          result.final_exact_match = full;
          result.final_loss = last_loss;
          return result;
        }
      }
    }
  }
  result.final_exact_match = copy_task_exact_match(m, cfg, cfg.eval_sequences, eval_seed);
  result.final_loss = last_loss;
  return result;
}

#define LF_INSTANTIATE_LED(T)                                                              \
  template double copy_task_exact_match<T>(const Model<T>&, const CopyTaskConfig&,         \
                                           std::size_t, std::uint64_t);                    \
  template LedTrainResult train_led_copy<T>(Model<T>&, const CopyTaskConfig&, std::ostream*);

LF_INSTANTIATE_LED(float)
LF_INSTANTIATE_LED(double)

#undef LF_INSTANTIATE_LED

}  // namespace lf
