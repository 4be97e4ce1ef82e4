#pragma once

#include <functional>
#include <vector>

#include "lf/band.hpp"
#include "lf/ops.hpp"
#include "lf/pattern.hpp"
#include "lf/tensor.hpp"

namespace lf {

// Multi-head self-attention parameters with separate projection sets: the
// *_s matrices drive the sliding-window scores, the *_g matrices drive the
// global-attention scores and values.
template <typename T>
struct AttentionParams {
  std::size_t heads = 1;
  std::size_t dk = 0;
  Tensor<T> wqs, wks, wvs;  // [dmodel, heads*dk]
  Tensor<T> wqg, wkg, wvg;
  Tensor<T> wo;  // [heads*dk, dmodel]
  std::vector<HeadPattern> head_patterns;  // size heads
  std::vector<Tensor<T>> rel_bias;         // optional per-head [slots]; empty = off
};

// Copies the sliding projections into the global ones (fresh storage, no
// aliasing). Idempotent; training may diverge them afterwards.
template <typename T>
void init_global_projections(AttentionParams<T>& p);

// Full layer: each non-global query takes a single joint softmax over its
// band keys (sliding projections) and all global keys (global projections,
// deduplicated when a global key falls inside the window); global queries
// attend to the whole row with the global projections. Heads are concatenated
// and projected by wo. cfg supplies n, mode and the global positions; the
// per-head (h,d) come from p.head_patterns.
template <typename T>
Tensor<T> longformer_self_attention(const Tensor<T>& x, const AttentionParams<T>& p,
                                    const PatternConfig& cfg,
                                    BandImpl impl = BandImpl::loop);

// Plain dense multi-head attention used by the LED decoder (causal self and
// full cross attention).
template <typename T>
struct DenseAttentionParams {
  std::size_t heads = 1;
  std::size_t dk = 0;
  Tensor<T> wq, wk, wv;  // [dmodel, heads*dk]
  Tensor<T> wo;          // [heads*dk, dmodel]
};

template <typename T>
Tensor<T> dense_multihead_attention(const Tensor<T>& q_input, const Tensor<T>& kv_input,
                                    const DenseAttentionParams<T>& p, bool causal);

// Output positions whose row changes by more than `threshold` when all
// components of input row `probe` are shifted by `delta`. Deterministic
// double-precision forward, dropout off.
std::vector<std::size_t> influence_width(
    const std::function<Tensor<double>(const Tensor<double>&)>& forward,
    const Tensor<double>& x, std::size_t probe, double delta = 1e-3,
    double threshold = 1e-9);

}  // namespace lf
