#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "lf/attention.hpp"
#include "lf/rng.hpp"

namespace lf {

// Byte vocabulary plus reserved ids.
inline constexpr std::size_t kMaskId = 256;
inline constexpr std::size_t kPadId = 257;
inline constexpr std::size_t kBosId = 258;
inline constexpr std::size_t kEosId = 259;
inline constexpr std::size_t kVocab = 260;

enum class Arch { charlm, mlm, led };
const char* arch_name(Arch a);
Arch arch_from_name(const std::string& name);

// Per-layer window geometry. The top `dilated_heads` heads use `dilation`,
// every other head runs contiguous (d=1).
struct LayerPatternSpec {
  long half_window = 8;
  long dilation = 1;
  long dilated_heads = 0;
};

struct ModelConfig {
  Arch arch = Arch::charlm;
  Dtype dtype = Dtype::f32;
  std::size_t layers = 2;
  std::size_t heads = 4;
  std::size_t dmodel = 64;
  std::size_t vocab = kVocab;
  std::size_t max_positions = 512;
  std::size_t dec_layers = 0;  // LED only
  double dropout = 0.0;
  BandImpl kernel = BandImpl::loop;
  bool relative_bias = false;
  std::vector<LayerPatternSpec> pattern;        // size == layers
  std::vector<std::size_t> enc_globals = {0};   // LED encoder global positions

  std::size_t dk() const { return dmodel / heads; }
  AttnMode trunk_mode() const {
    return arch == Arch::charlm ? AttnMode::causal : AttnMode::bidirectional;
  }
  void validate() const;
  std::size_t expected_parameter_count() const;
};

template <typename T>
struct TransformerBlock {
  Tensor<T> ln1_gamma, ln1_beta;
  AttentionParams<T> attn;
  Tensor<T> ln2_gamma, ln2_beta;
  Tensor<T> ffn_w1, ffn_b1;  // [dm,4dm],[4dm]
  Tensor<T> ffn_w2, ffn_b2;  // [4dm,dm],[dm]
};

template <typename T>
struct DecoderBlock {
  Tensor<T> ln1_gamma, ln1_beta;
  DenseAttentionParams<T> self_attn;
  Tensor<T> lnc_gamma, lnc_beta;
  DenseAttentionParams<T> cross_attn;
  Tensor<T> ln2_gamma, ln2_beta;
  Tensor<T> ffn_w1, ffn_b1;
  Tensor<T> ffn_w2, ffn_b2;
};

// Transformer stack with learned absolute position embeddings and the output
// head tied to the token embedding.
template <typename T>
struct Model {
  ModelConfig cfg;
  Tensor<T> tok_embed;  // [vocab, dmodel]
  Tensor<T> pos_embed;  // [max_positions, dmodel]
  std::vector<TransformerBlock<T>> blocks;  // trunk or LED encoder
  std::vector<DecoderBlock<T>> dec_blocks;  // LED only
  Tensor<T> final_ln_gamma, final_ln_beta;
  Tensor<T> dec_ln_gamma, dec_ln_beta;  // LED only

  static Model init(const ModelConfig& cfg, std::uint64_t seed);

  std::vector<std::pair<std::string, Tensor<T>>> named_params() const;
  std::size_t parameter_count() const;
  void set_trainable(bool trainable);
  void zero_grads();

  // Staged training: swap the per-layer half-windows in place.
  void set_layer_half_windows(const std::vector<long>& half_windows);
};

struct ForwardOpts {
  Rng* dropout_rng = nullptr;  // dropout is active only when an rng is supplied
};

// Autoregressive byte LM. logits[i] scores token i+1 given tokens[0..i].
template <typename T>
Tensor<T> charlm_forward(const std::vector<std::size_t>& tokens, const Model<T>& m,
                         const ForwardOpts& opts = {});

// Mean next-token NLL (nats) over a window of length >= 2.
template <typename T>
Tensor<T> charlm_loss(const std::vector<std::size_t>& window, const Model<T>& m,
                      const ForwardOpts& opts = {});

struct MlmBatch {
  std::vector<std::size_t> corrupted;      // model input
  std::vector<std::size_t> targets;        // original tokens
  std::vector<std::uint8_t> selected;      // 1 where the loss applies
  std::size_t selected_count = 0;
};

MlmBatch mlm_corrupt(const std::vector<std::size_t>& tokens, double mask_prob,
                     std::uint64_t seed);

// BERT-style corruption (80% <mask>, 10% random byte, 10% keep); loss averaged
// over the corrupted positions only.
template <typename T>
Tensor<T> mlm_loss(const std::vector<std::size_t>& tokens, const Model<T>& m, double mask_prob,
                   std::uint64_t seed, const ForwardOpts& opts = {});

template <typename T>
Tensor<T> led_encode(const std::vector<std::size_t>& src, const Model<T>& m,
                     const ForwardOpts& opts = {});

template <typename T>
Tensor<T> led_decode(const Tensor<T>& memory, const std::vector<std::size_t>& tgt_prefix,
                     const Model<T>& m, const ForwardOpts& opts = {});

// Sparse local+global encoder, full causal self-attention decoder, dense
// cross-attention. src must begin with <s>.
template <typename T>
Tensor<T> led_forward(const std::vector<std::size_t>& src,
                      const std::vector<std::size_t>& tgt_prefix, const Model<T>& m,
                      const ForwardOpts& opts = {});

// Teacher forcing: decoder input <s> + tgt[:-1], labels tgt (ending in </s>).
template <typename T>
Tensor<T> led_loss(const std::vector<std::size_t>& src, const std::vector<std::size_t>& tgt,
                   const Model<T>& m, const ForwardOpts& opts = {});

// next_logprobs receives the decoder prefix (starting with <s>) and returns
// log-probabilities for the next token. Hypotheses are scored by
// logprob / len^length_penalty; ties break toward the smaller token id.
std::vector<std::size_t> beam_search_with(
    const std::function<std::vector<double>(const std::vector<std::size_t>&)>& next_logprobs,
    std::size_t beam, std::size_t max_len, double length_penalty, std::size_t eos_id);

template <typename T>
std::vector<std::size_t> beam_search(const Model<T>& m, const std::vector<std::size_t>& src,
                                     std::size_t beam, std::size_t max_len,
                                     double length_penalty);

template <typename T>
std::vector<std::size_t> greedy_decode(const Model<T>& m, const std::vector<std::size_t>& src,
                                       std::size_t max_len);

}  // namespace lf
