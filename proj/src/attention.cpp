#include "lf/attention.hpp"

#include <algorithm>
#include <cmath>

namespace lf {

template <typename T>
void init_global_projections(AttentionParams<T>& p) {
  if (!p.wqs.defined() || !p.wks.defined() || !p.wvs.defined())
    throw UsageError("init_global_projections: sliding projections not initialized");
  p.wqg = p.wqs.clone();
  p.wkg = p.wks.clone();
  p.wvg = p.wvs.clone();
}

namespace {

template <typename T>
void check_layer_inputs(const Tensor<T>& x, const AttentionParams<T>& p,
                        const PatternConfig& cfg) {
  if (x.rank() != 2) throw ShapeError("attention: input must be [n,dmodel]");
  const std::size_t dm = x.dim(1);
  if (p.heads * p.dk != dm)
    throw ShapeError("attention: heads*dk (" + std::to_string(p.heads * p.dk) +
                     ") != dmodel (" + std::to_string(dm) + ")");
  if (p.head_patterns.size() != p.heads)
    throw ShapeError("attention: head pattern list does not match head count");
  if (x.dim(0) != cfg.n) throw ShapeError("attention: input rows differ from pattern n");
  cfg.validate();
  if (cfg.mode == AttnMode::causal && !cfg.global_positions.empty())
    throw UsageError("attention: global positions are not supported in causal mode");
}

template <typename T>
PatternConfig head_config(const PatternConfig& cfg, const AttentionParams<T>& p,
                          std::size_t head) {
  PatternConfig hc = cfg;
  hc.half_window = p.head_patterns[head].half_window;
  hc.dilation = p.head_patterns[head].dilation;
  return hc;
}

// Dense-oracle route: the same math with the full [n,n] score matrix
// materialized; used for verification and benchmarking.
template <typename T>
Tensor<T> dense_head(const Tensor<T>& qs, const Tensor<T>& ks, const Tensor<T>& vs,
                     const Tensor<T>& qg, const Tensor<T>& kg, const Tensor<T>& vg,
                     const PatternConfig& hc) {
  const std::size_t n = hc.n, dk = qs.dim(1);
  const T inv_sqrt = T(1) / std::sqrt(static_cast<T>(dk));
  const auto& globals = hc.global_positions;
  Tensor<T> scores = scale(matmul(qs, transpose(ks)), inv_sqrt);
  if (!globals.empty()) {
    Tensor<T> kg_rows = gather_rows(kg, globals);
    scores = overwrite_cols(scores, globals, scale(matmul(qs, transpose(kg_rows)), inv_sqrt));
    Tensor<T> qg_rows = gather_rows(qg, globals);
    scores = overwrite_rows(scores, globals, scale(matmul(qg_rows, transpose(kg)), inv_sqrt));
  }
  std::vector<std::uint8_t> mask = render_pattern(hc);
  Tensor<T> probs = masked_softmax(scores, mask);
  if (globals.empty()) return matmul(probs, vs);
  Tensor<T> vg_rows = gather_rows(vg, globals);
  Tensor<T> v_mixed = overwrite_rows(vs, globals, vg_rows);
  Tensor<T> out = matmul(probs, v_mixed);
  Tensor<T> out_global = matmul(gather_rows(probs, globals), vg);
  return overwrite_rows(out, globals, out_global);
}

template <typename T>
Tensor<T> band_head(const Tensor<T>& qs, const Tensor<T>& ks, const Tensor<T>& vs,
                    const Tensor<T>& qg, const Tensor<T>& kg, const Tensor<T>& vg,
                    const PatternConfig& hc, BandImpl impl, const Tensor<T>& rel_bias) {
  const std::size_t dk = qs.dim(1);
  const T inv_sqrt = T(1) / std::sqrt(static_cast<T>(dk));
  const auto& globals = hc.global_positions;
  BandScores<T> band =
      impl == BandImpl::chunk ? band_qk_chunk(qs, ks, hc) : band_qk_loop(qs, ks, hc);
  if (rel_bias.defined()) band = band_add_bias(band, rel_bias);
  if (globals.empty()) {
    BandSoftmaxResult<T> sm = band_softmax(band, Tensor<T>(), {});
    return band_pv(sm.probs, vs, Tensor<T>(), Tensor<T>());
  }
  Tensor<T> kg_rows = gather_rows(kg, globals);
  Tensor<T> global_scores = scale(matmul(qs, transpose(kg_rows)), inv_sqrt);
  BandSoftmaxResult<T> sm = band_softmax(band, global_scores, dedupe_mask(band, globals));
  Tensor<T> vg_rows = gather_rows(vg, globals);
  Tensor<T> out = band_pv(sm.probs, vs, sm.global_probs, vg_rows);
  // Global queries: full rows through the global projections, O(g*n).
  Tensor<T> qg_rows = gather_rows(qg, globals);
  Tensor<T> row_scores = scale(matmul(qg_rows, transpose(kg)), inv_sqrt);
  Tensor<T> row_out = matmul(softmax(row_scores), vg);
  return overwrite_rows(out, globals, row_out);
}

}  // namespace

template <typename T>
Tensor<T> longformer_self_attention(const Tensor<T>& x, const AttentionParams<T>& p,
                                    const PatternConfig& cfg, BandImpl impl) {
  check_layer_inputs(x, p, cfg);
  if (!p.rel_bias.empty() && impl == BandImpl::dense)
    throw UsageError("attention: relative bias requires a band kernel");
  const bool has_globals = !cfg.global_positions.empty();
  Tensor<T> qs_all = matmul(x, p.wqs);
  Tensor<T> ks_all = matmul(x, p.wks);
  Tensor<T> vs_all = matmul(x, p.wvs);
  Tensor<T> qg_all, kg_all, vg_all;
  if (has_globals) {
    qg_all = matmul(x, p.wqg);
    kg_all = matmul(x, p.wkg);
    vg_all = matmul(x, p.wvg);
  }
  std::vector<Tensor<T>> head_outputs;
  head_outputs.reserve(p.heads);
  for (std::size_t a = 0; a < p.heads; ++a) {
    const std::size_t off = a * p.dk;
    Tensor<T> qs = slice_cols(qs_all, off, p.dk);
    Tensor<T> ks = slice_cols(ks_all, off, p.dk);
    Tensor<T> vs = slice_cols(vs_all, off, p.dk);
    Tensor<T> qg, kg, vg;
    if (has_globals) {
      qg = slice_cols(qg_all, off, p.dk);
      kg = slice_cols(kg_all, off, p.dk);
      vg = slice_cols(vg_all, off, p.dk);
    }
    const PatternConfig hc = head_config(cfg, p, a);
    if (impl == BandImpl::dense) {
      head_outputs.push_back(dense_head(qs, ks, vs, qg, kg, vg, hc));
    } else {
      Tensor<T> bias = p.rel_bias.empty() ? Tensor<T>() : p.rel_bias[a];
      head_outputs.push_back(band_head(qs, ks, vs, qg, kg, vg, hc, impl, bias));
    }
  }
  return matmul(concat_cols(head_outputs), p.wo);
}

template <typename T>
Tensor<T> dense_multihead_attention(const Tensor<T>& q_input, const Tensor<T>& kv_input,
                                    const DenseAttentionParams<T>& p, bool causal) {
  if (q_input.rank() != 2 || kv_input.rank() != 2)
    throw ShapeError("dense attention: inputs must be rank-2");
  if (p.heads * p.dk != q_input.dim(1))
    throw ShapeError("dense attention: heads*dk != dmodel");
  const std::size_t nq = q_input.dim(0), nk = kv_input.dim(0);
  if (causal && nq != nk)
    throw UsageError("dense attention: causal mask requires equal query/key lengths");
  const T inv_sqrt = T(1) / std::sqrt(static_cast<T>(p.dk));
  Tensor<T> q_all = matmul(q_input, p.wq);
  Tensor<T> k_all = matmul(kv_input, p.wk);
  Tensor<T> v_all = matmul(kv_input, p.wv);
  std::vector<std::uint8_t> mask;
  if (causal) {
    mask.assign(nq * nk, 0);
    for (std::size_t i = 0; i < nq; ++i)
      for (std::size_t j = 0; j <= i; ++j) mask[i * nk + j] = 1;
  }
  std::vector<Tensor<T>> heads;
  heads.reserve(p.heads);
  for (std::size_t a = 0; a < p.heads; ++a) {
    const std::size_t off = a * p.dk;
    Tensor<T> qh = slice_cols(q_all, off, p.dk);
    Tensor<T> kh = slice_cols(k_all, off, p.dk);
    Tensor<T> vh = slice_cols(v_all, off, p.dk);
    Tensor<T> scores = scale(matmul(qh, transpose(kh)), inv_sqrt);
    Tensor<T> probs = causal ? masked_softmax(scores, mask) : softmax(scores);
    heads.push_back(matmul(probs, vh));
  }
  return matmul(concat_cols(heads), p.wo);
}

std::vector<std::size_t> influence_width(
    const std::function<Tensor<double>(const Tensor<double>&)>& forward,
    const Tensor<double>& x, std::size_t probe, double delta, double threshold) {
  if (x.rank() != 2 || probe >= x.dim(0))
    throw UsageError("influence_width: probe row out of range");
  Graph<double>::NoGradScope no_grad;
  Tensor<double> base = forward(x);
  Tensor<double> xp = x.clone();
  const std::size_t d = x.dim(1);
  for (std::size_t j = 0; j < d; ++j) xp.at(probe, j) += delta;
  Tensor<double> shifted = forward(xp);
  if (base.shape() != shifted.shape())
    throw NumericError("influence_width: forward output shape changed under perturbation");
  std::vector<std::size_t> affected;
  const std::size_t rows = base.dim(0), cols = base.dim(1);
  for (std::size_t i = 0; i < rows; ++i) {
    double diff = 0;
    for (std::size_t j = 0; j < cols; ++j)
      diff = std::max(diff, std::abs(base.at(i, j) - shifted.at(i, j)));
    if (diff > threshold) affected.push_back(i);
  }
  return affected;
}

#define LF_INSTANTIATE_ATTN(T)                                                             \
  template struct AttentionParams<T>;                                                      \
  template struct DenseAttentionParams<T>;                                                 \
  template void init_global_projections<T>(AttentionParams<T>&);                           \
  template Tensor<T> longformer_self_attention<T>(const Tensor<T>&,                        \
                                                  const AttentionParams<T>&,               \
                                                  const PatternConfig&, BandImpl);         \
  template Tensor<T> dense_multihead_attention<T>(const Tensor<T>&, const Tensor<T>&,      \
                                                  const DenseAttentionParams<T>&, bool);

LF_INSTANTIATE_ATTN(float)
LF_INSTANTIATE_ATTN(double)

#undef LF_INSTANTIATE_ATTN

}  // namespace lf
