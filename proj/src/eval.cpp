#include <algorithm>
#include <cmath>

#include "lf/train.hpp"

namespace lf {

std::vector<EvalWindow> plan_eval_windows(std::size_t corpus_len, const EvalProtocol& proto) {
  const std::size_t L = proto.eval_len, s = proto.step;
  if (L == 0 || s == 0 || s > L)
    throw UsageError("eval protocol: need 1 <= step <= eval_len");
  if (corpus_len < L)
    throw UsageError("eval protocol: corpus has " + std::to_string(corpus_len) +
                     " tokens, shorter than eval_len " + std::to_string(L) +
                     "; use a smaller eval length");
  std::vector<EvalWindow> windows;
  windows.push_back({0, 0, L});  // the first window scores everything it sees
  std::size_t scored = L;
  for (std::size_t t = 1; t * s + L <= corpus_len; ++t) {
    windows.push_back({t * s, t * s + L - s, t * s + L});
    scored += s;
  }
  if (scored < corpus_len) {
    // Right-aligned remainder window covering the not-yet-scored suffix.
    windows.push_back({corpus_len - L, scored, corpus_len});
  }
  return windows;
}

namespace {

template <typename T>
double window_nll(const Model<T>& m, const std::vector<std::uint8_t>& corpus,
                  const EvalWindow& w, std::size_t L) {
  // The scored positions need a predecessor inside the input; when the first
  // scored token sits at the window start, prepend the preceding corpus byte
  // (or <s> at the very beginning).
  const bool need_pred = w.score_begin == w.start;
  std::vector<std::size_t> feed;
  feed.reserve(L + 1);
  if (need_pred) feed.push_back(w.start == 0 ? kBosId : corpus[w.start - 1]);
  for (std::size_t p = w.start; p < w.start + L; ++p) feed.push_back(corpus[p]);
  Tensor<T> logits = charlm_forward(feed, m);
  const std::size_t v = logits.dim(1);
  const std::size_t shift = need_pred ? 1 : 0;
  double nll = 0;
  for (std::size_t p = w.score_begin; p < w.score_end; ++p) {
    const std::size_t row = p - w.start + shift - 1;
    const std::size_t target = corpus[p];
    double mx = static_cast<double>(logits.at(row, 0));
    for (std::size_t j = 1; j < v; ++j)
      mx = std::max(mx, static_cast<double>(logits.at(row, j)));
    double denom = 0;
    for (std::size_t j = 0; j < v; ++j)
      denom += std::exp(static_cast<double>(logits.at(row, j)) - mx);
    nll += std::log(denom) + mx - static_cast<double>(logits.at(row, target));
  }
  return nll;
}

}  // namespace

template <typename T>
double eval_bpc_sliding(const Model<T>& m, const std::vector<std::uint8_t>& corpus,
                        const EvalProtocol& proto) {
  if (m.cfg.arch != Arch::charlm)
    throw UsageError("eval_bpc_sliding: model is not a charlm");
  if (proto.eval_len + 1 > m.cfg.max_positions)
    throw UsageError("eval_bpc_sliding: eval_len+1 exceeds max_positions; use a smaller "
                     "eval length");
  const std::vector<EvalWindow> windows = plan_eval_windows(corpus.size(), proto);
  typename Graph<T>::NoGradScope no_grad;
  double total_nll = 0;
  for (const auto& w : windows) total_nll += window_nll(m, corpus, w, proto.eval_len);
  return total_nll / (static_cast<double>(corpus.size()) * std::log(2.0));
}

template double eval_bpc_sliding<float>(const Model<float>&, const std::vector<std::uint8_t>&,
                                        const EvalProtocol&);
template double eval_bpc_sliding<double>(const Model<double>&,
                                         const std::vector<std::uint8_t>&,
                                         const EvalProtocol&);

}  // namespace lf
