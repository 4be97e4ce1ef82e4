#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "lf/pattern.hpp"
#include "lf/tensor.hpp"

namespace lf {

enum class BandImpl { loop, chunk, dense };
const char* band_impl_name(BandImpl impl);
BandImpl band_impl_from_name(const std::string& name);

struct MemoryAccount {
  BandImpl impl = BandImpl::loop;
  std::size_t score_elements = 0;  // score values actually computed
  std::size_t peak_elements = 0;   // max live value count
};

// Band storage of attention scores: one row per query, one column per
// in-window key slot. Slot k of row i maps to key i + (k-h)*d
// (bidirectional) or i - (h-k)*d (causal). Out-of-range slots are masked
// and carry no gradient.
template <typename T>
struct BandScores {
  std::size_t n = 0;
  std::size_t slots = 0;  // 2h+1 bidirectional, h+1 causal
  long half_window = 0;
  long dilation = 1;
  AttnMode mode = AttnMode::bidirectional;
  Tensor<T> data;                   // [n, slots]
  std::vector<std::uint8_t> valid;  // n*slots
  MemoryAccount account;

  // Mapped key index for (row, slot); may fall outside [0, n).
  long key_of(std::size_t i, std::size_t k) const {
    const long off = static_cast<long>(k) - half_window;
    return static_cast<long>(i) + off * dilation;
  }
  bool is_valid(std::size_t i, std::size_t k) const { return valid[i * slots + k] != 0; }
};

inline std::size_t band_slot_count(long half_window, AttnMode mode) {
  return mode == AttnMode::bidirectional ? static_cast<std::size_t>(2 * half_window + 1)
                                         : static_cast<std::size_t>(half_window + 1);
}

// Chunk geometry: overlapping blocks of 2h rows with stride h on the padded
// length.
std::size_t chunk_padded_len(std::size_t n, long h);
std::size_t chunk_count(std::size_t n, long h);
std::size_t chunk_score_elements(std::size_t n, long h);

// Number of in-range band slots (no globals).
std::size_t band_valid_count(std::size_t n, long h, long d, AttnMode mode);

// Banded QK^T / sqrt(dk), one diagonal at a time. Supports any dilation and
// both modes; computes only the in-range slots.
template <typename T>
BandScores<T> band_qk_loop(const Tensor<T>& q, const Tensor<T>& k, const PatternConfig& cfg);

// Same product via overlapping 2h-row blocks multiplied densely and then
// masked back to the band. Non-dilated only; pads n to a multiple of h
// internally and drops the padded rows before returning.
template <typename T>
BandScores<T> band_qk_chunk(const Tensor<T>& q, const Tensor<T>& k, const PatternConfig& cfg);

// Marks band slots whose key is a global position (those logits come from the
// global projections instead, so the local slot must not contribute twice).
template <typename T>
std::vector<std::uint8_t> dedupe_mask(const BandScores<T>& scores,
                                      const std::vector<std::size_t>& globals);

template <typename T>
struct BandSoftmaxResult {
  BandScores<T> probs;     // valid marks the slots that took part in the softmax
  Tensor<T> global_probs;  // [n,g]; undefined when there are no global columns
};

// Single joint softmax per query row over the active band slots plus the
// global-key columns. global_scores may be an undefined tensor when g == 0;
// dedupe may be empty.
template <typename T>
BandSoftmaxResult<T> band_softmax(const BandScores<T>& scores, const Tensor<T>& global_scores,
                                  const std::vector<std::uint8_t>& dedupe);

// out[i] = sum over active band slots p * v[key] + sum over global columns
// gp * v_global_rows[column].
template <typename T>
Tensor<T> band_pv(const BandScores<T>& probs, const Tensor<T>& v, const Tensor<T>& global_probs,
                  const Tensor<T>& v_global_rows);

// Adds a per-slot bias vector [slots] to every row of the band (the optional
// learned relative-position bias).
template <typename T>
BandScores<T> band_add_bias(const BandScores<T>& scores, const Tensor<T>& bias);

// Testing bridge: scatter the band into an [n,n] matrix (zeros elsewhere).
// Values only; nothing is recorded.
template <typename T>
Tensor<T> band_to_dense(const BandScores<T>& b);

template <typename T>
BandScores<T> dense_to_band(const Tensor<T>& dense, const PatternConfig& cfg);

}  // namespace lf
