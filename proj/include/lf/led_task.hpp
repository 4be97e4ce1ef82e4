#pragma once

#include <iosfwd>
#include <utility>

#include "lf/train.hpp"

namespace lf {

// Synthetic sequence-copy task: the encoder reads <s> + payload (longer than
// its attention window) and the decoder must reproduce the payload.
struct CopyTaskConfig {
  std::size_t payload_len = 63;  // source length = payload + leading <s>
  std::size_t alphabet = 16;     // payload bytes drawn from 'a'..('a'+alphabet-1)
  std::size_t steps = 2000;
  std::size_t batch = 8;
  double lr = 1e-3;
  double grad_clip = 0.25;
  double warmup_frac = 0.1;
  std::size_t warmup_max = 10000;
  std::size_t eval_every = 250;        // quick exact-match probes during training
  std::size_t eval_quick = 50;
  std::size_t eval_sequences = 200;    // final held-out evaluation
  double target_exact = 0.9;
  std::uint64_t seed = 0;
  AdamConfig adam;
};

// (src, tgt): src = <s> + payload, tgt = payload + </s>.
std::pair<std::vector<std::size_t>, std::vector<std::size_t>> copy_task_sample(
    const CopyTaskConfig& cfg, Rng& rng);

// Greedy exact-match rate over `count` sequences drawn from eval_seed.
template <typename T>
double copy_task_exact_match(const Model<T>& m, const CopyTaskConfig& cfg, std::size_t count,
                             std::uint64_t eval_seed);

struct LedTrainResult {
  std::size_t steps_run = 0;
  double final_exact_match = 0;
  double final_loss = 0;
};

// Teacher-forced training with periodic exact-match probes; stops early once
// the quick probe clears target_exact and the full held-out set confirms it.
template <typename T>
LedTrainResult train_led_copy(Model<T>& m, const CopyTaskConfig& cfg,
                              std::ostream* metrics = nullptr);

}  // namespace lf
