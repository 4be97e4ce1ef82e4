#pragma once

#include <cstdint>
#include <vector>

#include "lf/rng.hpp"
#include "lf/tensor.hpp"

namespace lf {

// Dense ops over row-major tensors. When a Graph<T> scope is active and an
// input is tracked, each op records its backward rule on the tape.

template <typename T>
Tensor<T> matmul(const Tensor<T>& a, const Tensor<T>& b);  // [m,k]x[k,p]

template <typename T>
Tensor<T> transpose(const Tensor<T>& a);  // [m,n] -> [n,m]

template <typename T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b);

template <typename T>
Tensor<T> sub(const Tensor<T>& a, const Tensor<T>& b);

template <typename T>
Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b);

template <typename T>
Tensor<T> scale(const Tensor<T>& a, T s);

// [n,d] + [d], broadcast over rows.
template <typename T>
Tensor<T> add_rows(const Tensor<T>& x, const Tensor<T>& bias);

// Softmax over the last dimension. Masked entries come out exactly 0 and
// receive no gradient; a fully masked row is an error. Max-subtraction keeps
// the result shift-invariant.
template <typename T>
Tensor<T> masked_softmax(const Tensor<T>& x, const std::vector<std::uint8_t>& mask);

template <typename T>
Tensor<T> softmax(const Tensor<T>& x);

// Per-row normalization over the last dimension, then affine by gamma/beta.
template <typename T>
Tensor<T> layernorm(const Tensor<T>& x, const Tensor<T>& gamma, const Tensor<T>& beta,
                    T eps = T(1e-5));

// tanh approximation: 0.5*x*(1 + tanh(sqrt(2/pi)*(x + 0.044715*x^3))).
template <typename T>
Tensor<T> gelu(const Tensor<T>& x);

// Weighted mean negative log-likelihood in nats over rows of [t,V] logits.
// Weights are treated as constants.
template <typename T>
Tensor<T> cross_entropy(const Tensor<T>& logits, const std::vector<std::size_t>& targets,
                        const Tensor<T>& weights);

// table[V,d] gathered by ids -> [t,d]; backward scatter-adds into the table.
template <typename T>
Tensor<T> embedding(const Tensor<T>& table, const std::vector<std::size_t>& ids);

template <typename T>
Tensor<T> gather_rows(const Tensor<T>& x, const std::vector<std::size_t>& idx);

// out = base with rows idx replaced by repl (idx entries must be unique).
template <typename T>
Tensor<T> overwrite_rows(const Tensor<T>& base, const std::vector<std::size_t>& idx,
                         const Tensor<T>& repl);

// out = base with columns idx replaced by the columns of repl [n,|idx|].
template <typename T>
Tensor<T> overwrite_cols(const Tensor<T>& base, const std::vector<std::size_t>& idx,
                         const Tensor<T>& repl);

template <typename T>
Tensor<T> slice_cols(const Tensor<T>& x, std::size_t offset, std::size_t len);

template <typename T>
Tensor<T> concat_cols(const std::vector<Tensor<T>>& parts);

template <typename T>
Tensor<T> sum(const Tensor<T>& x);  // scalar

// Inverted dropout; identity when p == 0.
template <typename T>
Tensor<T> dropout(const Tensor<T>& x, double p, Rng& rng);

}  // namespace lf
