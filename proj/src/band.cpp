#include "lf/band.hpp"

#include <algorithm>
#include <cmath>
#include <memory>

#include "lf/parallel.hpp"

namespace lf {

const char* band_impl_name(BandImpl impl) {
  switch (impl) {
    case BandImpl::loop: return "loop";
    case BandImpl::chunk: return "chunk";
    case BandImpl::dense: return "dense";
  }
  return "?";
}

BandImpl band_impl_from_name(const std::string& name) {
  if (name == "loop") return BandImpl::loop;
  if (name == "chunk") return BandImpl::chunk;
  if (name == "dense") return BandImpl::dense;
  throw UsageError("unknown implementation '" + name + "' (expected loop, chunk or dense)");
}

std::size_t chunk_padded_len(std::size_t n, long h) {
  const std::size_t uh = static_cast<std::size_t>(h);
  std::size_t blocks = (n + uh - 1) / uh;
  if (blocks < 2) blocks = 2;
  return blocks * uh;
}

std::size_t chunk_count(std::size_t n, long h) {
  return chunk_padded_len(n, h) / static_cast<std::size_t>(h) - 1;
}

std::size_t chunk_score_elements(std::size_t n, long h) {
  const std::size_t side = 2 * static_cast<std::size_t>(h);
  return chunk_count(n, h) * side * side;
}

std::size_t band_valid_count(std::size_t n, long h, long d, AttnMode mode) {
  std::size_t count = 0;
  const long ln = static_cast<long>(n);
  for (long i = 0; i < ln; ++i) {
    const long lo = mode == AttnMode::bidirectional ? -h : -h;
    const long hi = mode == AttnMode::bidirectional ? h : 0;
    for (long k = lo; k <= hi; ++k) {
      const long j = i + k * d;
      if (j >= 0 && j < ln) ++count;
    }
  }
  return count;
}

namespace {

template <typename T>
void check_qk_shapes(const Tensor<T>& q, const Tensor<T>& k, const PatternConfig& cfg,
                     const char* op) {
  if (q.rank() != 2 || k.rank() != 2 || q.shape() != k.shape())
    throw ShapeError(std::string(op) + ": Q and K must share shape [n,dk], got " +
                     shape_str(q.shape()) + " and " + shape_str(k.shape()));
  if (q.dim(0) != cfg.n)
    throw ShapeError(std::string(op) + ": Q has " + std::to_string(q.dim(0)) +
                     " rows but pattern n=" + std::to_string(cfg.n));
  cfg.validate();
}

template <typename T>
BandScores<T> make_band(const PatternConfig& cfg, bool tracked) {
  BandScores<T> b;
  b.n = cfg.n;
  b.half_window = cfg.half_window;
  b.dilation = cfg.dilation;
  b.mode = cfg.mode;
  b.slots = band_slot_count(cfg.half_window, cfg.mode);
  b.data = Tensor<T>::zeros({b.n, b.slots});
  if (tracked) {
    b.data.set_requires_grad(true);
    b.data.ensure_grad();
  }
  b.valid.assign(b.n * b.slots, 0);
  return b;
}

}  // namespace

template <typename T>
BandScores<T> band_qk_loop(const Tensor<T>& q, const Tensor<T>& k, const PatternConfig& cfg) {
  check_qk_shapes(q, k, cfg, "band_qk_loop");
  const std::size_t n = cfg.n, dk = q.dim(1);
  const bool tracked = detail::tracking(q, k);
  BandScores<T> b = make_band<T>(cfg, tracked);
  const T scale = T(1) / std::sqrt(static_cast<T>(dk));
  const std::size_t slots = b.slots;
  const T* pq = q.data();
  const T* pk = k.data();
  T* pd = b.data.data();
  parallel_for(n, [&](std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) {
      for (std::size_t s = 0; s < slots; ++s) {
        const long j = b.key_of(i, s);
        if (j < 0 || j >= static_cast<long>(n)) continue;
        const T* qi = pq + i * dk;
        const T* kj = pk + static_cast<std::size_t>(j) * dk;
        T dot = 0;
        for (std::size_t t = 0; t < dk; ++t) dot += qi[t] * kj[t];
        pd[i * slots + s] = dot * scale;
        b.valid[i * slots + s] = 1;
      }
    }
  });
  detail::check_finite(b.data, "band_qk_loop");
  b.account.impl = BandImpl::loop;
  b.account.score_elements =
      static_cast<std::size_t>(std::count(b.valid.begin(), b.valid.end(), std::uint8_t(1)));
  b.account.peak_elements = n * slots;
  if (tracked) {
    Tensor<T> tq = q, tk = k, td = b.data;
    if (tq.requires_grad()) tq.ensure_grad();
    if (tk.requires_grad()) tk.ensure_grad();
    auto valid = std::make_shared<std::vector<std::uint8_t>>(b.valid);
    const long h = b.half_window, d = b.dilation;
    Graph<T>::current()->record("band_qk_loop", [tq, tk, td, valid, n, slots, dk, scale, h,
                                                 d]() mutable {
      const T* g = td.grad();
      const T* vq = tq.data();
      const T* vk = tk.data();
      T* dq = tq.requires_grad() ? tq.grad() : nullptr;
      T* dkg = tk.requires_grad() ? tk.grad() : nullptr;
      for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t s = 0; s < slots; ++s) {
          if (!(*valid)[i * slots + s]) continue;
          const long j = static_cast<long>(i) + (static_cast<long>(s) - h) * d;
          const T gs = g[i * slots + s] * scale;
          const T* qi = vq + i * dk;
          const T* kj = vk + static_cast<std::size_t>(j) * dk;
          if (dq) {
            T* row = dq + i * dk;
            for (std::size_t t = 0; t < dk; ++t) row[t] += gs * kj[t];
          }
          if (dkg) {
            T* row = dkg + static_cast<std::size_t>(j) * dk;
            for (std::size_t t = 0; t < dk; ++t) row[t] += gs * qi[t];
          }
        }
      }
    });
  }
  return b;
}

template <typename T>
BandScores<T> band_qk_chunk(const Tensor<T>& q, const Tensor<T>& k, const PatternConfig& cfg) {
  check_qk_shapes(q, k, cfg, "band_qk_chunk");
  if (cfg.dilation != 1)
    throw UsageError("band_qk_chunk: dilation " + std::to_string(cfg.dilation) +
                     " unsupported (non-dilated case only); use the loop kernel");
  if (cfg.half_window < 1)
    throw UsageError("band_qk_chunk: half_window must be >= 1");
  const std::size_t n = cfg.n, dk = q.dim(1);
  const long h = cfg.half_window;
  const std::size_t side = 2 * static_cast<std::size_t>(h);
  const std::size_t chunks = chunk_count(n, h);
  const bool tracked = detail::tracking(q, k);
  BandScores<T> b = make_band<T>(cfg, tracked);
  const std::size_t slots = b.slots;
  const T scale = T(1) / std::sqrt(static_cast<T>(dk));
  const T* pq = q.data();
  const T* pk = k.data();

  // All chunk blocks live at once; padded entries stay zero and are masked
  // out during assembly.
  std::vector<T> blocks(chunks * side * side, T(0));
  parallel_for(chunks, [&](std::size_t cb, std::size_t ce) {
    for (std::size_t c = cb; c < ce; ++c) {
      T* block = blocks.data() + c * side * side;
      const std::size_t base = c * static_cast<std::size_t>(h);
      for (std::size_t r = 0; r < side; ++r) {
        const std::size_t gi = base + r;
        if (gi >= n) continue;
        const T* qi = pq + gi * dk;
        for (std::size_t s = 0; s < side; ++s) {
          const std::size_t gj = base + s;
          if (gj >= n) continue;
          const T* kj = pk + gj * dk;
          T dot = 0;
          for (std::size_t t = 0; t < dk; ++t) dot += qi[t] * kj[t];
          block[r * side + s] = dot * scale;
        }
      }
    }
  });

  // Mask out everything off the band and scatter into band storage. Pairs
  // covered by two overlapping chunks carry bitwise-identical values.
  T* pd = b.data.data();
  for (std::size_t c = 0; c < chunks; ++c) {
    const T* block = blocks.data() + c * side * side;
    const std::size_t base = c * static_cast<std::size_t>(h);
    for (std::size_t r = 0; r < side; ++r) {
      const std::size_t gi = base + r;
      if (gi >= n) continue;
      for (std::size_t s = 0; s < side; ++s) {
        const std::size_t gj = base + s;
        if (gj >= n) continue;
        const long off = static_cast<long>(gj) - static_cast<long>(gi);
        if (off < -h || off > h) continue;
        if (cfg.mode == AttnMode::causal && off > 0) continue;
        const std::size_t slot = static_cast<std::size_t>(off + h);
        pd[gi * slots + slot] = block[r * side + s];
        b.valid[gi * slots + slot] = 1;
      }
    }
  }
  detail::check_finite(b.data, "band_qk_chunk");
  b.account.impl = BandImpl::chunk;
  b.account.score_elements = chunks * side * side;
  b.account.peak_elements = n * slots + chunks * side * side;

  if (tracked) {
    Tensor<T> tq = q, tk = k, td = b.data;
    if (tq.requires_grad()) tq.ensure_grad();
    if (tk.requires_grad()) tk.ensure_grad();
    auto valid = std::make_shared<std::vector<std::uint8_t>>(b.valid);
    const AttnMode mode = cfg.mode;
    Graph<T>::current()->record("band_qk_chunk", [tq, tk, td, valid, n, slots, dk, scale, h,
                                                  chunks, side, mode]() mutable {
      // Walks the same chunk structure; each in-band pair is handled by its
      // canonical (lowest-index) covering chunk so nothing is double-counted.
      const T* g = td.grad();
      const T* vq = tq.data();
      const T* vk = tk.data();
      T* dq = tq.requires_grad() ? tq.grad() : nullptr;
      T* dkg = tk.requires_grad() ? tk.grad() : nullptr;
      const std::size_t uh = static_cast<std::size_t>(h);
      for (std::size_t c = 0; c < chunks; ++c) {
        const std::size_t base = c * uh;
        for (std::size_t r = 0; r < side; ++r) {
          const std::size_t gi = base + r;
          if (gi >= n) continue;
          for (std::size_t s = 0; s < side; ++s) {
            const std::size_t gj = base + s;
            if (gj >= n) continue;
            const long off = static_cast<long>(gj) - static_cast<long>(gi);
            if (off < -h || off > h) continue;
            if (mode == AttnMode::causal && off > 0) continue;
            const std::size_t canonical =
                std::min(std::min(gi, gj) / uh, chunks - 1);
            if (canonical != c) continue;
            const std::size_t slot = static_cast<std::size_t>(off + h);
            if (!(*valid)[gi * slots + slot]) continue;
            const T gs = g[gi * slots + slot] * scale;
            const T* qi = vq + gi * dk;
            const T* kj = vk + gj * dk;
            if (dq) {
              T* row = dq + gi * dk;
              for (std::size_t t = 0; t < dk; ++t) row[t] += gs * kj[t];
            }
            if (dkg) {
              T* row = dkg + gj * dk;
              for (std::size_t t = 0; t < dk; ++t) row[t] += gs * qi[t];
            }
          }
        }
      }
    });
  }
  return b;
}

template <typename T>
std::vector<std::uint8_t> dedupe_mask(const BandScores<T>& scores,
                                      const std::vector<std::size_t>& globals) {
  std::vector<std::uint8_t> mask(scores.n * scores.slots, 0);
  if (globals.empty()) return mask;
  for (std::size_t i = 0; i < scores.n; ++i) {
    for (std::size_t s = 0; s < scores.slots; ++s) {
      if (!scores.is_valid(i, s)) continue;
      const long j = scores.key_of(i, s);
      if (std::binary_search(globals.begin(), globals.end(), static_cast<std::size_t>(j)))
        mask[i * scores.slots + s] = 1;
    }
  }
  return mask;
}

template <typename T>
BandSoftmaxResult<T> band_softmax(const BandScores<T>& scores, const Tensor<T>& global_scores,
                                  const std::vector<std::uint8_t>& dedupe) {
  const std::size_t n = scores.n, slots = scores.slots;
  const std::size_t g = global_scores.defined() ? global_scores.dim(1) : 0;
  if (g > 0 && (global_scores.rank() != 2 || global_scores.dim(0) != n))
    throw ShapeError("band_softmax: global scores must be [n,g]");
  if (!dedupe.empty() && dedupe.size() != n * slots)
    throw ShapeError("band_softmax: dedupe mask size mismatch");

  std::vector<std::uint8_t> active(scores.valid);
  if (!dedupe.empty())
    for (std::size_t i = 0; i < active.size(); ++i)
      if (dedupe[i]) active[i] = 0;

  const bool tracked =
      Graph<T>::current() && (scores.data.requires_grad() ||
                              (global_scores.defined() && global_scores.requires_grad()));

  BandSoftmaxResult<T> out;
  out.probs = scores;  // copy geometry + account
  out.probs.data = Tensor<T>::zeros({n, slots});
  out.probs.valid = active;
  if (g > 0) out.global_probs = Tensor<T>::zeros({n, g});
  if (tracked) {
    out.probs.data.set_requires_grad(true);
    out.probs.data.ensure_grad();
    if (g > 0) {
      out.global_probs.set_requires_grad(true);
      out.global_probs.ensure_grad();
    }
  }

  const T* px = scores.data.data();
  const T* pgx = g > 0 ? global_scores.data() : nullptr;
  T* py = out.probs.data.data();
  T* pgy = g > 0 ? out.global_probs.data() : nullptr;
  for (std::size_t i = 0; i < n; ++i) {
    T mx = 0;
    bool any = false;
    for (std::size_t s = 0; s < slots; ++s) {
      if (!active[i * slots + s]) continue;
      if (!any || px[i * slots + s] > mx) mx = px[i * slots + s];
      any = true;
    }
    for (std::size_t c = 0; c < g; ++c) {
      if (!any || pgx[i * g + c] > mx) mx = pgx[i * g + c];
      any = true;
    }
    if (!any)
      throw UsageError("band_softmax: row " + std::to_string(i) + " has zero valid entries");
    T denom = 0;
    for (std::size_t s = 0; s < slots; ++s) {
      if (!active[i * slots + s]) continue;
      py[i * slots + s] = std::exp(px[i * slots + s] - mx);
      denom += py[i * slots + s];
    }
    for (std::size_t c = 0; c < g; ++c) {
      pgy[i * g + c] = std::exp(pgx[i * g + c] - mx);
      denom += pgy[i * g + c];
    }
    const T inv = T(1) / denom;
    for (std::size_t s = 0; s < slots; ++s)
      if (active[i * slots + s]) py[i * slots + s] *= inv;
    for (std::size_t c = 0; c < g; ++c) pgy[i * g + c] *= inv;
  }
  detail::check_finite(out.probs.data, "band_softmax");

  if (tracked) {
    Tensor<T> tx = scores.data, tgx = global_scores;
    Tensor<T> ty = out.probs.data, tgy = out.global_probs;
    if (tx.requires_grad()) tx.ensure_grad();
    if (g > 0 && tgx.requires_grad()) tgx.ensure_grad();
    auto act = std::make_shared<std::vector<std::uint8_t>>(active);
    Graph<T>::current()->record("band_softmax", [tx, tgx, ty, tgy, act, n, slots, g]() mutable {
      const T* y = ty.data();
      const T* gy = ty.grad();
      const T* yg = g > 0 ? tgy.data() : nullptr;
      const T* gyg = g > 0 ? tgy.grad() : nullptr;
      T* dx = tx.requires_grad() ? tx.grad() : nullptr;
      T* dgx = (g > 0 && tgx.requires_grad()) ? tgx.grad() : nullptr;
      for (std::size_t i = 0; i < n; ++i) {
        T dot = 0;
        for (std::size_t s = 0; s < slots; ++s)
          if ((*act)[i * slots + s]) dot += gy[i * slots + s] * y[i * slots + s];
        for (std::size_t c = 0; c < g; ++c) dot += gyg[i * g + c] * yg[i * g + c];
        if (dx)
          for (std::size_t s = 0; s < slots; ++s)
            if ((*act)[i * slots + s])
              dx[i * slots + s] += y[i * slots + s] * (gy[i * slots + s] - dot);
        if (dgx)
          for (std::size_t c = 0; c < g; ++c)
            dgx[i * g + c] += yg[i * g + c] * (gyg[i * g + c] - dot);
      }
    });
  }
  return out;
}

template <typename T>
Tensor<T> band_pv(const BandScores<T>& probs, const Tensor<T>& v, const Tensor<T>& global_probs,
                  const Tensor<T>& v_global_rows) {
  const std::size_t n = probs.n, slots = probs.slots;
  if (v.rank() != 2 || v.dim(0) != n)
    throw ShapeError("band_pv: V must be [n,dk], got " + shape_str(v.shape()));
  const std::size_t dk = v.dim(1);
  const std::size_t g = global_probs.defined() ? global_probs.dim(1) : 0;
  if (g > 0) {
    if (global_probs.dim(0) != n) throw ShapeError("band_pv: global probs must be [n,g]");
    if (!v_global_rows.defined() || v_global_rows.rank() != 2 || v_global_rows.dim(0) != g ||
        v_global_rows.dim(1) != dk)
      throw ShapeError("band_pv: global value rows must be [g,dk]");
  }
  const bool tracked =
      Graph<T>::current() &&
      (probs.data.requires_grad() || v.requires_grad() ||
       (g > 0 && (global_probs.requires_grad() || v_global_rows.requires_grad())));
  Tensor<T> out = Tensor<T>::zeros({n, dk});
  if (tracked) {
    out.set_requires_grad(true);
    out.ensure_grad();
  }
  const T* pp = probs.data.data();
  const T* pv = v.data();
  const T* pgp = g > 0 ? global_probs.data() : nullptr;
  const T* pvg = g > 0 ? v_global_rows.data() : nullptr;
  T* po = out.data();
  parallel_for(n, [&](std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) {
      T* orow = po + i * dk;
      for (std::size_t s = 0; s < slots; ++s) {
        if (!probs.valid[i * slots + s]) continue;
        const long j = probs.key_of(i, s);
        const T p = pp[i * slots + s];
        const T* vrow = pv + static_cast<std::size_t>(j) * dk;
        for (std::size_t t = 0; t < dk; ++t) orow[t] += p * vrow[t];
      }
      for (std::size_t c = 0; c < g; ++c) {
        const T p = pgp[i * g + c];
        const T* vrow = pvg + c * dk;
        for (std::size_t t = 0; t < dk; ++t) orow[t] += p * vrow[t];
      }
    }
  });
  detail::check_finite(out, "band_pv");
  if (tracked) {
    Tensor<T> tp = probs.data, tv = v, tgp = global_probs, tvg = v_global_rows, to = out;
    if (tp.requires_grad()) tp.ensure_grad();
    if (tv.requires_grad()) tv.ensure_grad();
    if (g > 0 && tgp.requires_grad()) tgp.ensure_grad();
    if (g > 0 && tvg.requires_grad()) tvg.ensure_grad();
    auto valid = std::make_shared<std::vector<std::uint8_t>>(probs.valid);
    const long h = probs.half_window, d = probs.dilation;
    Graph<T>::current()->record("band_pv", [tp, tv, tgp, tvg, to, valid, n, slots, dk, g, h,
                                            d]() mutable {
      const T* gout = to.grad();
      const T* vp = tp.data();
      const T* vv = tv.data();
      T* dp = tp.requires_grad() ? tp.grad() : nullptr;
      T* dv = tv.requires_grad() ? tv.grad() : nullptr;
      for (std::size_t i = 0; i < n; ++i) {
        const T* grow = gout + i * dk;
        for (std::size_t s = 0; s < slots; ++s) {
          if (!(*valid)[i * slots + s]) continue;
          const std::size_t j =
              static_cast<std::size_t>(static_cast<long>(i) + (static_cast<long>(s) - h) * d);
          if (dp) {
            T acc = 0;
            const T* vrow = vv + j * dk;
            for (std::size_t t = 0; t < dk; ++t) acc += grow[t] * vrow[t];
            dp[i * slots + s] += acc;
          }
          if (dv) {
            const T p = vp[i * slots + s];
            T* drow = dv + j * dk;
            for (std::size_t t = 0; t < dk; ++t) drow[t] += p * grow[t];
          }
        }
      }
      if (g > 0) {
        const T* vgp = tgp.data();
        const T* vvg = tvg.data();
        T* dgp = tgp.requires_grad() ? tgp.grad() : nullptr;
        T* dvg = tvg.requires_grad() ? tvg.grad() : nullptr;
        for (std::size_t i = 0; i < n; ++i) {
          const T* grow = gout + i * dk;
          for (std::size_t c = 0; c < g; ++c) {
            if (dgp) {
              T acc = 0;
              const T* vrow = vvg + c * dk;
              for (std::size_t t = 0; t < dk; ++t) acc += grow[t] * vrow[t];
              dgp[i * g + c] += acc;
            }
            if (dvg) {
              const T p = vgp[i * g + c];
              T* drow = dvg + c * dk;
              for (std::size_t t = 0; t < dk; ++t) drow[t] += p * grow[t];
            }
          }
        }
      }
    });
  }
  return out;
}

template <typename T>
BandScores<T> band_add_bias(const BandScores<T>& scores, const Tensor<T>& bias) {
  if (bias.rank() != 1 || bias.dim(0) != scores.slots)
    throw ShapeError("band_add_bias: bias must be [slots]");
  const std::size_t n = scores.n, slots = scores.slots;
  const bool tracked =
      Graph<T>::current() && (scores.data.requires_grad() || bias.requires_grad());
  BandScores<T> out = scores;
  out.data = Tensor<T>::zeros({n, slots});
  if (tracked) {
    out.data.set_requires_grad(true);
    out.data.ensure_grad();
  }
  const T* px = scores.data.data();
  const T* pb = bias.data();
  T* py = out.data.data();
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t s = 0; s < slots; ++s)
      if (scores.valid[i * slots + s]) py[i * slots + s] = px[i * slots + s] + pb[s];
  if (tracked) {
    Tensor<T> tx = scores.data, tb = bias, ty = out.data;
    if (tx.requires_grad()) tx.ensure_grad();
    if (tb.requires_grad()) tb.ensure_grad();
    auto valid = std::make_shared<std::vector<std::uint8_t>>(scores.valid);
    Graph<T>::current()->record("band_add_bias", [tx, tb, ty, valid, n, slots]() mutable {
      const T* g = ty.grad();
      T* dx = tx.requires_grad() ? tx.grad() : nullptr;
      T* db = tb.requires_grad() ? tb.grad() : nullptr;
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t s = 0; s < slots; ++s) {
          if (!(*valid)[i * slots + s]) continue;
          if (dx) dx[i * slots + s] += g[i * slots + s];
          if (db) db[s] += g[i * slots + s];
        }
    });
  }
  return out;
}

template <typename T>
Tensor<T> band_to_dense(const BandScores<T>& b) {
  if (b.n > 4096) throw UsageError("band_to_dense: n exceeds the 4096 guard");
  Tensor<T> out = Tensor<T>::zeros({b.n, b.n});
  for (std::size_t i = 0; i < b.n; ++i)
    for (std::size_t s = 0; s < b.slots; ++s) {
      if (!b.is_valid(i, s)) continue;
      out.at(i, static_cast<std::size_t>(b.key_of(i, s))) = b.data.at(i, s);
    }
  return out;
}

template <typename T>
BandScores<T> dense_to_band(const Tensor<T>& dense, const PatternConfig& cfg) {
  if (dense.rank() != 2 || dense.dim(0) != cfg.n || dense.dim(1) != cfg.n)
    throw ShapeError("dense_to_band: expected [n,n]");
  BandScores<T> b = make_band<T>(cfg, false);
  for (std::size_t i = 0; i < b.n; ++i)
    for (std::size_t s = 0; s < b.slots; ++s) {
      const long j = b.key_of(i, s);
      if (j < 0 || j >= static_cast<long>(b.n)) continue;
      b.data.at(i, s) = dense.at(i, static_cast<std::size_t>(j));
      b.valid[i * b.slots + s] = 1;
    }
  b.account.impl = BandImpl::dense;
  b.account.score_elements = cfg.n * cfg.n;
  b.account.peak_elements = cfg.n * cfg.n;
  return b;
}

#define LF_INSTANTIATE_BAND(T)                                                                 \
  template struct BandScores<T>;                                                               \
  template BandScores<T> band_qk_loop<T>(const Tensor<T>&, const Tensor<T>&,                   \
                                         const PatternConfig&);                                \
  template BandScores<T> band_qk_chunk<T>(const Tensor<T>&, const Tensor<T>&,                  \
                                          const PatternConfig&);                               \
  template std::vector<std::uint8_t> dedupe_mask<T>(const BandScores<T>&,                      \
                                                    const std::vector<std::size_t>&);          \
  template BandSoftmaxResult<T> band_softmax<T>(const BandScores<T>&, const Tensor<T>&,        \
                                                const std::vector<std::uint8_t>&);             \
  template Tensor<T> band_pv<T>(const BandScores<T>&, const Tensor<T>&, const Tensor<T>&,      \
                                const Tensor<T>&);                                             \
  template BandScores<T> band_add_bias<T>(const BandScores<T>&, const Tensor<T>&);             \
  template Tensor<T> band_to_dense<T>(const BandScores<T>&);                                   \
  template BandScores<T> dense_to_band<T>(const Tensor<T>&, const PatternConfig&);

LF_INSTANTIATE_BAND(float)
LF_INSTANTIATE_BAND(double)

#undef LF_INSTANTIATE_BAND

}  // namespace lf
