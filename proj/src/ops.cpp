#include "lf/ops.hpp"

#include <algorithm>
#include <cmath>
#include <memory>

#include "lf/parallel.hpp"

namespace lf {

namespace {

template <typename T>
void require_rank2(const Tensor<T>& t, const char* op) {
  if (t.rank() != 2) throw ShapeError(std::string(op) + ": expected rank-2, got " + shape_str(t.shape()));
}

template <typename T>
void require_same_shape(const Tensor<T>& a, const Tensor<T>& b, const char* op) {
  if (a.shape() != b.shape())
    throw ShapeError(std::string(op) + ": shape mismatch " + shape_str(a.shape()) + " vs " +
                     shape_str(b.shape()));
}

template <typename T>
std::size_t last_dim(const Tensor<T>& t, const char* op) {
  if (t.rank() == 0 || t.size() == 0) throw ShapeError(std::string(op) + ": empty tensor");
  return t.shape().back();
}

template <typename T>
Tensor<T> make_output(std::vector<std::size_t> shape, bool tracked) {
  Tensor<T> out = Tensor<T>::zeros(std::move(shape));
  if (tracked) {
    out.set_requires_grad(true);
    out.ensure_grad();
  }
  return out;
}

template <typename T>
void prepare_input_grad(Tensor<T>& t) {
  if (t.requires_grad()) t.ensure_grad();
}

}  // namespace

template <typename T>
Tensor<T> matmul(const Tensor<T>& a, const Tensor<T>& b) {
  require_rank2(a, "matmul");
  require_rank2(b, "matmul");
  const std::size_t m = a.dim(0), k = a.dim(1), p = b.dim(1);
  if (b.dim(0) != k)
    throw ShapeError("matmul: inner dimensions disagree, " + shape_str(a.shape()) + " x " +
                     shape_str(b.shape()));
  const bool tracked = detail::tracking(a, b);
  Tensor<T> out = make_output<T>({m, p}, tracked);
  const T* pa = a.data();
  const T* pb = b.data();
  T* pc = out.data();
  parallel_for(m, [&](std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) {
      T* crow = pc + i * p;
      const T* arow = pa + i * k;
      for (std::size_t t = 0; t < k; ++t) {
        const T av = arow[t];
        const T* brow = pb + t * p;
        for (std::size_t j = 0; j < p; ++j) crow[j] += av * brow[j];
      }
    }
  });
  detail::check_finite(out, "matmul");
  if (tracked) {
    Tensor<T> ta = a, tb = b, to = out;
    prepare_input_grad(ta);
    prepare_input_grad(tb);
    Graph<T>::current()->record("matmul", [ta, tb, to, m, k, p]() mutable {
      const T* g = to.grad();
      if (ta.requires_grad()) {
        T* da = ta.grad();
        const T* vb = tb.data();
        parallel_for(m, [&](std::size_t begin, std::size_t end) {
          for (std::size_t i = begin; i < end; ++i) {
            const T* grow = g + i * p;
            T* darow = da + i * k;
            for (std::size_t t = 0; t < k; ++t) {
              const T* brow = vb + t * p;
              T s = 0;
              for (std::size_t j = 0; j < p; ++j) s += grow[j] * brow[j];
              darow[t] += s;
            }
          }
        });
      }
      if (tb.requires_grad()) {
        T* db = tb.grad();
        const T* va = ta.data();
        parallel_for(k, [&](std::size_t begin, std::size_t end) {
          for (std::size_t i = 0; i < m; ++i) {
            const T* grow = g + i * p;
            const T* arow = va + i * k;
            for (std::size_t t = begin; t < end; ++t) {
              const T av = arow[t];
              T* dbrow = db + t * p;
              for (std::size_t j = 0; j < p; ++j) dbrow[j] += av * grow[j];
            }
          }
        });
      }
    });
  }
  return out;
}

template <typename T>
Tensor<T> transpose(const Tensor<T>& a) {
  require_rank2(a, "transpose");
  const std::size_t m = a.dim(0), n = a.dim(1);
  const bool tracked = detail::tracking(a);
  Tensor<T> out = make_output<T>({n, m}, tracked);
  const T* pa = a.data();
  T* pc = out.data();
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) pc[j * m + i] = pa[i * n + j];
  if (tracked) {
    Tensor<T> ta = a, to = out;
    prepare_input_grad(ta);
    Graph<T>::current()->record("transpose", [ta, to, m, n]() mutable {
      const T* g = to.grad();
      T* da = ta.grad();
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) da[i * n + j] += g[j * m + i];
    });
  }
  return out;
}

namespace {

template <typename T, typename Fwd, typename Bwd>
Tensor<T> binary_elementwise(const Tensor<T>& a, const Tensor<T>& b, const char* name, Fwd fwd,
                             Bwd bwd) {
  require_same_shape(a, b, name);
  const bool tracked = detail::tracking(a, b);
  Tensor<T> out = make_output<T>(a.shape(), tracked);
  const std::size_t n = a.size();
  const T* pa = a.data();
  const T* pb = b.data();
  T* pc = out.data();
  for (std::size_t i = 0; i < n; ++i) pc[i] = fwd(pa[i], pb[i]);
  detail::check_finite(out, name);
  if (tracked) {
    Tensor<T> ta = a, tb = b, to = out;
    prepare_input_grad(ta);
    prepare_input_grad(tb);
    Graph<T>::current()->record(name, [ta, tb, to, bwd]() mutable {
      const std::size_t n2 = to.size();
      const T* g = to.grad();
      T* da = ta.requires_grad() ? ta.grad() : nullptr;
      T* db = tb.requires_grad() ? tb.grad() : nullptr;
      const T* va = ta.data();
      const T* vb = tb.data();
      for (std::size_t i = 0; i < n2; ++i) bwd(g[i], va[i], vb[i], da ? da + i : nullptr, db ? db + i : nullptr);
    });
  }
  return out;
}

}  // namespace

template <typename T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b) {
  return binary_elementwise(
      a, b, "add", [](T x, T y) { return x + y; },
      [](T g, T, T, T* da, T* db) {
        if (da) *da += g;
        if (db) *db += g;
      });
}

template <typename T>
Tensor<T> sub(const Tensor<T>& a, const Tensor<T>& b) {
  return binary_elementwise(
      a, b, "sub", [](T x, T y) { return x - y; },
      [](T g, T, T, T* da, T* db) {
        if (da) *da += g;
        if (db) *db -= g;
      });
}

template <typename T>
Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b) {
  return binary_elementwise(
      a, b, "mul", [](T x, T y) { return x * y; },
      [](T g, T x, T y, T* da, T* db) {
        if (da) *da += g * y;
        if (db) *db += g * x;
      });
}

template <typename T>
Tensor<T> scale(const Tensor<T>& a, T s) {
  const bool tracked = detail::tracking(a);
  Tensor<T> out = make_output<T>(a.shape(), tracked);
  const std::size_t n = a.size();
  const T* pa = a.data();
  T* pc = out.data();
  for (std::size_t i = 0; i < n; ++i) pc[i] = pa[i] * s;
  detail::check_finite(out, "scale");
  if (tracked) {
    Tensor<T> ta = a, to = out;
    prepare_input_grad(ta);
    Graph<T>::current()->record("scale", [ta, to, s]() mutable {
      const std::size_t n2 = to.size();
      const T* g = to.grad();
      T* da = ta.grad();
      for (std::size_t i = 0; i < n2; ++i) da[i] += g[i] * s;
    });
  }
  return out;
}

template <typename T>
Tensor<T> add_rows(const Tensor<T>& x, const Tensor<T>& bias) {
  require_rank2(x, "add_rows");
  const std::size_t n = x.dim(0), d = x.dim(1);
  if (bias.rank() != 1 || bias.dim(0) != d)
    throw ShapeError("add_rows: bias " + shape_str(bias.shape()) + " does not match " +
                     shape_str(x.shape()));
  const bool tracked = detail::tracking(x, bias);
  Tensor<T> out = make_output<T>({n, d}, tracked);
  const T* px = x.data();
  const T* pb = bias.data();
  T* pc = out.data();
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < d; ++j) pc[i * d + j] = px[i * d + j] + pb[j];
  if (tracked) {
    Tensor<T> tx = x, tb = bias, to = out;
    prepare_input_grad(tx);
    prepare_input_grad(tb);
    Graph<T>::current()->record("add_rows", [tx, tb, to, n, d]() mutable {
      const T* g = to.grad();
      if (tx.requires_grad()) {
        T* dx = tx.grad();
        for (std::size_t i = 0; i < n * d; ++i) dx[i] += g[i];
      }
      if (tb.requires_grad()) {
        T* db = tb.grad();
        for (std::size_t i = 0; i < n; ++i)
          for (std::size_t j = 0; j < d; ++j) db[j] += g[i * d + j];
      }
    });
  }
  return out;
}

namespace {

template <typename T>
Tensor<T> softmax_impl(const Tensor<T>& x, const std::uint8_t* mask) {
  const std::size_t m = last_dim(x, "masked_softmax");
  const std::size_t rows = x.size() / m;
  const bool tracked = detail::tracking(x);
  Tensor<T> out = make_output<T>(x.shape(), tracked);
  const T* px = x.data();
  T* py = out.data();
  for (std::size_t r = 0; r < rows; ++r) {
    const T* row = px + r * m;
    T* yrow = py + r * m;
    T mx = 0;
    bool any = false;
    for (std::size_t j = 0; j < m; ++j) {
      if (mask && !mask[r * m + j]) continue;
      if (!any || row[j] > mx) mx = row[j];
      any = true;
    }
    if (!any)
      throw UsageError("masked_softmax: fully masked row " + std::to_string(r) +
                       " (attention row with no keys)");
    T denom = 0;
    for (std::size_t j = 0; j < m; ++j) {
      if (mask && !mask[r * m + j]) {
        yrow[j] = 0;
        continue;
      }
      yrow[j] = std::exp(row[j] - mx);
      denom += yrow[j];
    }
    const T inv = T(1) / denom;
    for (std::size_t j = 0; j < m; ++j) yrow[j] *= inv;
  }
  detail::check_finite(out, "masked_softmax");
  if (tracked) {
    Tensor<T> tx = x, to = out;
    prepare_input_grad(tx);
    std::shared_ptr<std::vector<std::uint8_t>> mk;
    if (mask) mk = std::make_shared<std::vector<std::uint8_t>>(mask, mask + x.size());
    Graph<T>::current()->record("masked_softmax", [tx, to, mk, rows, m]() mutable {
      const T* g = to.grad();
      const T* y = to.data();
      T* dx = tx.grad();
      const std::uint8_t* mp = mk ? mk->data() : nullptr;
      for (std::size_t r = 0; r < rows; ++r) {
        T dot = 0;
        for (std::size_t j = 0; j < m; ++j) {
          if (mp && !mp[r * m + j]) continue;
          dot += g[r * m + j] * y[r * m + j];
        }
        for (std::size_t j = 0; j < m; ++j) {
          if (mp && !mp[r * m + j]) continue;
          dx[r * m + j] += y[r * m + j] * (g[r * m + j] - dot);
        }
      }
    });
  }
  return out;
}

}  // namespace

template <typename T>
Tensor<T> masked_softmax(const Tensor<T>& x, const std::vector<std::uint8_t>& mask) {
  if (mask.size() != x.size())
    throw ShapeError("masked_softmax: mask size " + std::to_string(mask.size()) +
                     " does not match tensor " + shape_str(x.shape()));
  return softmax_impl(x, mask.data());
}

template <typename T>
Tensor<T> softmax(const Tensor<T>& x) {
  return softmax_impl<T>(x, nullptr);
}

template <typename T>
Tensor<T> layernorm(const Tensor<T>& x, const Tensor<T>& gamma, const Tensor<T>& beta, T eps) {
  const std::size_t d = last_dim(x, "layernorm");
  if (gamma.rank() != 1 || gamma.dim(0) != d || beta.rank() != 1 || beta.dim(0) != d)
    throw ShapeError("layernorm: gamma/beta must be [d] for input " + shape_str(x.shape()));
  const std::size_t rows = x.size() / d;
  const bool tracked = Graph<T>::current() &&
                       (x.requires_grad() || gamma.requires_grad() || beta.requires_grad());
  Tensor<T> out = make_output<T>(x.shape(), tracked);
  auto xhat = std::make_shared<std::vector<T>>(x.size());
  auto inv_std = std::make_shared<std::vector<T>>(rows);
  const T* px = x.data();
  const T* pg = gamma.data();
  const T* pb = beta.data();
  T* py = out.data();
  for (std::size_t r = 0; r < rows; ++r) {
    const T* row = px + r * d;
    T mu = 0;
    for (std::size_t j = 0; j < d; ++j) mu += row[j];
    mu /= static_cast<T>(d);
    T var = 0;
    for (std::size_t j = 0; j < d; ++j) {
      const T c = row[j] - mu;
      var += c * c;
    }
    var /= static_cast<T>(d);
    const T inv = T(1) / std::sqrt(var + eps);
    (*inv_std)[r] = inv;
    for (std::size_t j = 0; j < d; ++j) {
      const T h = (row[j] - mu) * inv;
      (*xhat)[r * d + j] = h;
      py[r * d + j] = pg[j] * h + pb[j];
    }
  }
  detail::check_finite(out, "layernorm");
  if (tracked) {
    Tensor<T> tx = x, tg = gamma, tb = beta, to = out;
    prepare_input_grad(tx);
    prepare_input_grad(tg);
    prepare_input_grad(tb);
    Graph<T>::current()->record("layernorm", [tx, tg, tb, to, xhat, inv_std, rows, d]() mutable {
      const T* g = to.grad();
      const T* pg2 = tg.data();
      for (std::size_t r = 0; r < rows; ++r) {
        const T* grow = g + r * d;
        const T* hrow = xhat->data() + r * d;
        if (tg.requires_grad()) {
          T* dg = tg.grad();
          for (std::size_t j = 0; j < d; ++j) dg[j] += grow[j] * hrow[j];
        }
        if (tb.requires_grad()) {
          T* db = tb.grad();
          for (std::size_t j = 0; j < d; ++j) db[j] += grow[j];
        }
        if (tx.requires_grad()) {
          T m1 = 0, m2 = 0;
          for (std::size_t j = 0; j < d; ++j) {
            const T dh = grow[j] * pg2[j];
            m1 += dh;
            m2 += dh * hrow[j];
          }
          m1 /= static_cast<T>(d);
          m2 /= static_cast<T>(d);
          T* dx = tx.grad() + r * d;
          const T inv = (*inv_std)[r];
          for (std::size_t j = 0; j < d; ++j) {
            const T dh = grow[j] * pg2[j];
            dx[j] += inv * (dh - m1 - hrow[j] * m2);
          }
        }
      }
    });
  }
  return out;
}

template <typename T>
Tensor<T> gelu(const Tensor<T>& x) {
  // Constants of the tanh approximation, fixed for reproducibility.
  const T c = T(0.7978845608028654);  // sqrt(2/pi)
  const T a = T(0.044715);
  const bool tracked = detail::tracking(x);
  Tensor<T> out = make_output<T>(x.shape(), tracked);
  const std::size_t n = x.size();
  const T* px = x.data();
  T* py = out.data();
  for (std::size_t i = 0; i < n; ++i) {
    const T v = px[i];
    const T th = std::tanh(c * (v + a * v * v * v));
    py[i] = T(0.5) * v * (T(1) + th);
  }
  detail::check_finite(out, "gelu");
  if (tracked) {
    Tensor<T> tx = x, to = out;
    prepare_input_grad(tx);
    Graph<T>::current()->record("gelu", [tx, to, c, a]() mutable {
      const std::size_t n2 = to.size();
      const T* g = to.grad();
      const T* v = tx.data();
      T* dx = tx.grad();
      for (std::size_t i = 0; i < n2; ++i) {
        const T u = v[i];
        const T th = std::tanh(c * (u + a * u * u * u));
        const T d = T(0.5) * (T(1) + th) +
                    T(0.5) * u * (T(1) - th * th) * c * (T(1) + T(3) * a * u * u);
        dx[i] += g[i] * d;
      }
    });
  }
  return out;
}

template <typename T>
Tensor<T> cross_entropy(const Tensor<T>& logits, const std::vector<std::size_t>& targets,
                        const Tensor<T>& weights) {
  require_rank2(logits, "cross_entropy");
  const std::size_t t = logits.dim(0), v = logits.dim(1);
  if (targets.size() != t)
    throw ShapeError("cross_entropy: " + std::to_string(targets.size()) + " targets for " +
                     std::to_string(t) + " rows");
  if (weights.rank() != 1 || weights.dim(0) != t)
    throw ShapeError("cross_entropy: weights must be [t]");
  T wsum = 0;
  for (std::size_t i = 0; i < t; ++i) {
    if (targets[i] >= v)
      throw UsageError("cross_entropy: target id " + std::to_string(targets[i]) +
                       " out of range [0," + std::to_string(v) + ")");
    const T w = weights.at(i);
    if (w < 0) throw UsageError("cross_entropy: negative weight");
    wsum += w;
  }
  if (!(wsum > 0)) throw UsageError("cross_entropy: weights sum to zero");
  const bool tracked = detail::tracking(logits);
  Tensor<T> out = make_output<T>({1}, tracked);
  auto probs = std::make_shared<std::vector<T>>(logits.size());
  const T* pl = logits.data();
  T total = 0;
  for (std::size_t i = 0; i < t; ++i) {
    const T* row = pl + i * v;
    T mx = row[0];
    for (std::size_t j = 1; j < v; ++j) mx = std::max(mx, row[j]);
    T denom = 0;
    for (std::size_t j = 0; j < v; ++j) {
      const T e = std::exp(row[j] - mx);
      (*probs)[i * v + j] = e;
      denom += e;
    }
    const T inv = T(1) / denom;
    for (std::size_t j = 0; j < v; ++j) (*probs)[i * v + j] *= inv;
    const T nll = std::log(denom) + mx - row[targets[i]];
    total += weights.at(i) * nll;
  }
  out.at(0) = total / wsum;
  detail::check_finite(out, "cross_entropy");
  if (tracked) {
    Tensor<T> tl = logits, tw = weights, to = out;
    prepare_input_grad(tl);
    auto tg = std::make_shared<std::vector<std::size_t>>(targets);
    Graph<T>::current()->record("cross_entropy", [tl, tw, to, probs, tg, t, v, wsum]() mutable {
      const T g = to.grad()[0];
      T* dl = tl.grad();
      for (std::size_t i = 0; i < t; ++i) {
        const T wi = tw.at(i) / wsum;
        if (wi == 0) continue;
        for (std::size_t j = 0; j < v; ++j) dl[i * v + j] += g * wi * (*probs)[i * v + j];
        dl[i * v + (*tg)[i]] -= g * wi;
      }
    });
  }
  return out;
}

template <typename T>
Tensor<T> embedding(const Tensor<T>& table, const std::vector<std::size_t>& ids) {
  require_rank2(table, "embedding");
  const std::size_t v = table.dim(0), d = table.dim(1);
  const std::size_t n = ids.size();
  for (std::size_t id : ids)
    if (id >= v) throw UsageError("embedding: id " + std::to_string(id) + " out of range");
  const bool tracked = detail::tracking(table);
  Tensor<T> out = make_output<T>({n, d}, tracked);
  const T* pt = table.data();
  T* py = out.data();
  for (std::size_t i = 0; i < n; ++i)
    std::copy(pt + ids[i] * d, pt + (ids[i] + 1) * d, py + i * d);
  if (tracked) {
    Tensor<T> tt = table, to = out;
    prepare_input_grad(tt);
    auto idp = std::make_shared<std::vector<std::size_t>>(ids);
    Graph<T>::current()->record("embedding", [tt, to, idp, d]() mutable {
      const T* g = to.grad();
      T* dt = tt.grad();
      for (std::size_t i = 0; i < idp->size(); ++i)
        for (std::size_t j = 0; j < d; ++j) dt[(*idp)[i] * d + j] += g[i * d + j];
    });
  }
  return out;
}

template <typename T>
Tensor<T> gather_rows(const Tensor<T>& x, const std::vector<std::size_t>& idx) {
  return embedding(x, idx);
}

template <typename T>
Tensor<T> overwrite_rows(const Tensor<T>& base, const std::vector<std::size_t>& idx,
                         const Tensor<T>& repl) {
  require_rank2(base, "overwrite_rows");
  const std::size_t n = base.dim(0), d = base.dim(1);
  if (repl.rank() != 2 || repl.dim(0) != idx.size() || repl.dim(1) != d)
    throw ShapeError("overwrite_rows: replacement " + shape_str(repl.shape()) +
                     " does not match " + std::to_string(idx.size()) + " rows of width " +
                     std::to_string(d));
  auto replaced = std::make_shared<std::vector<std::uint8_t>>(n, 0);
  for (std::size_t r : idx) {
    if (r >= n) throw UsageError("overwrite_rows: row " + std::to_string(r) + " out of range");
    if ((*replaced)[r]) throw UsageError("overwrite_rows: duplicate row index");
    (*replaced)[r] = 1;
  }
  const bool tracked = detail::tracking(base, repl);
  Tensor<T> out = make_output<T>({n, d}, tracked);
  std::copy(base.data(), base.data() + n * d, out.data());
  for (std::size_t k = 0; k < idx.size(); ++k)
    std::copy(repl.data() + k * d, repl.data() + (k + 1) * d, out.data() + idx[k] * d);
  if (tracked) {
    Tensor<T> tb = base, tr = repl, to = out;
    prepare_input_grad(tb);
    prepare_input_grad(tr);
    auto idp = std::make_shared<std::vector<std::size_t>>(idx);
    Graph<T>::current()->record("overwrite_rows", [tb, tr, to, idp, replaced, n, d]() mutable {
      const T* g = to.grad();
      if (tb.requires_grad()) {
        T* db = tb.grad();
        for (std::size_t i = 0; i < n; ++i) {
          if ((*replaced)[i]) continue;
          for (std::size_t j = 0; j < d; ++j) db[i * d + j] += g[i * d + j];
        }
      }
      if (tr.requires_grad()) {
        T* dr = tr.grad();
        for (std::size_t k = 0; k < idp->size(); ++k)
          for (std::size_t j = 0; j < d; ++j) dr[k * d + j] += g[(*idp)[k] * d + j];
      }
    });
  }
  return out;
}

template <typename T>
Tensor<T> overwrite_cols(const Tensor<T>& base, const std::vector<std::size_t>& idx,
                         const Tensor<T>& repl) {
  require_rank2(base, "overwrite_cols");
  const std::size_t n = base.dim(0), m = base.dim(1);
  if (repl.rank() != 2 || repl.dim(0) != n || repl.dim(1) != idx.size())
    throw ShapeError("overwrite_cols: replacement " + shape_str(repl.shape()) +
                     " does not match [n," + std::to_string(idx.size()) + "]");
  auto replaced = std::make_shared<std::vector<std::uint8_t>>(m, 0);
  for (std::size_t c : idx) {
    if (c >= m) throw UsageError("overwrite_cols: column " + std::to_string(c) + " out of range");
    if ((*replaced)[c]) throw UsageError("overwrite_cols: duplicate column index");
    (*replaced)[c] = 1;
  }
  const bool tracked = detail::tracking(base, repl);
  Tensor<T> out = make_output<T>({n, m}, tracked);
  std::copy(base.data(), base.data() + n * m, out.data());
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t k = 0; k < idx.size(); ++k) out.data()[i * m + idx[k]] = repl.at(i, k);
  if (tracked) {
    Tensor<T> tb = base, tr = repl, to = out;
    prepare_input_grad(tb);
    prepare_input_grad(tr);
    auto idp = std::make_shared<std::vector<std::size_t>>(idx);
    Graph<T>::current()->record("overwrite_cols", [tb, tr, to, idp, replaced, n, m]() mutable {
      const T* g = to.grad();
      if (tb.requires_grad()) {
        T* db = tb.grad();
        for (std::size_t i = 0; i < n; ++i)
          for (std::size_t j = 0; j < m; ++j)
            if (!(*replaced)[j]) db[i * m + j] += g[i * m + j];
      }
      if (tr.requires_grad()) {
        T* dr = tr.grad();
        const std::size_t gcols = idp->size();
        for (std::size_t i = 0; i < n; ++i)
          for (std::size_t k = 0; k < gcols; ++k) dr[i * gcols + k] += g[i * m + (*idp)[k]];
      }
    });
  }
  return out;
}

template <typename T>
Tensor<T> slice_cols(const Tensor<T>& x, std::size_t offset, std::size_t len) {
  require_rank2(x, "slice_cols");
  const std::size_t n = x.dim(0), m = x.dim(1);
  if (offset + len > m)
    throw ShapeError("slice_cols: [" + std::to_string(offset) + "," +
                     std::to_string(offset + len) + ") exceeds width " + std::to_string(m));
  const bool tracked = detail::tracking(x);
  Tensor<T> out = make_output<T>({n, len}, tracked);
  for (std::size_t i = 0; i < n; ++i)
    std::copy(x.data() + i * m + offset, x.data() + i * m + offset + len, out.data() + i * len);
  if (tracked) {
    Tensor<T> tx = x, to = out;
    prepare_input_grad(tx);
    Graph<T>::current()->record("slice_cols", [tx, to, offset, len, n, m]() mutable {
      const T* g = to.grad();
      T* dx = tx.grad();
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < len; ++j) dx[i * m + offset + j] += g[i * len + j];
    });
  }
  return out;
}

template <typename T>
Tensor<T> concat_cols(const std::vector<Tensor<T>>& parts) {
  if (parts.empty()) throw ShapeError("concat_cols: no inputs");
  const std::size_t n = parts[0].dim(0);
  std::size_t total = 0;
  bool any_grad = false;
  for (const auto& p : parts) {
    require_rank2(p, "concat_cols");
    if (p.dim(0) != n) throw ShapeError("concat_cols: row counts differ");
    total += p.dim(1);
    any_grad = any_grad || p.requires_grad();
  }
  const bool tracked = Graph<T>::current() && any_grad;
  Tensor<T> out = make_output<T>({n, total}, tracked);
  std::size_t off = 0;
  for (const auto& p : parts) {
    const std::size_t w = p.dim(1);
    for (std::size_t i = 0; i < n; ++i)
      std::copy(p.data() + i * w, p.data() + (i + 1) * w, out.data() + i * total + off);
    off += w;
  }
  if (tracked) {
    auto ps = std::make_shared<std::vector<Tensor<T>>>(parts);
    for (auto& p : *ps) prepare_input_grad(p);
    Tensor<T> to = out;
    Graph<T>::current()->record("concat_cols", [ps, to, n, total]() mutable {
      const T* g = to.grad();
      std::size_t off2 = 0;
      for (auto& p : *ps) {
        const std::size_t w = p.dim(1);
        if (p.requires_grad()) {
          T* dp = p.grad();
          for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < w; ++j) dp[i * w + j] += g[i * total + off2 + j];
        }
        off2 += w;
      }
    });
  }
  return out;
}

template <typename T>
Tensor<T> sum(const Tensor<T>& x) {
  const bool tracked = detail::tracking(x);
  Tensor<T> out = make_output<T>({1}, tracked);
  T s = 0;
  const T* px = x.data();
  for (std::size_t i = 0; i < x.size(); ++i) s += px[i];
  out.at(0) = s;
  detail::check_finite(out, "sum");
  if (tracked) {
    Tensor<T> tx = x, to = out;
    prepare_input_grad(tx);
    Graph<T>::current()->record("sum", [tx, to]() mutable {
      const T g = to.grad()[0];
      T* dx = tx.grad();
      for (std::size_t i = 0; i < tx.size(); ++i) dx[i] += g;
    });
  }
  return out;
}

template <typename T>
Tensor<T> dropout(const Tensor<T>& x, double p, Rng& rng) {
  if (p < 0 || p >= 1) throw UsageError("dropout: p must be in [0,1)");
  if (p == 0) return x;
  const bool tracked = detail::tracking(x);
  Tensor<T> out = make_output<T>(x.shape(), tracked);
  auto mask = std::make_shared<std::vector<T>>(x.size());
  const T keep = T(1) / T(1 - p);
  const T* px = x.data();
  T* py = out.data();
  for (std::size_t i = 0; i < x.size(); ++i) {
    const T m = rng.uniform() >= p ? keep : T(0);
    (*mask)[i] = m;
    py[i] = px[i] * m;
  }
  if (tracked) {
    Tensor<T> tx = x, to = out;
    prepare_input_grad(tx);
    Graph<T>::current()->record("dropout", [tx, to, mask]() mutable {
      const T* g = to.grad();
      T* dx = tx.grad();
      for (std::size_t i = 0; i < tx.size(); ++i) dx[i] += g[i] * (*mask)[i];
    });
  }
  return out;
}

#define LF_INSTANTIATE_OPS(T)                                                                  \
  template Tensor<T> matmul<T>(const Tensor<T>&, const Tensor<T>&);                           \
  template Tensor<T> transpose<T>(const Tensor<T>&);                                          \
  template Tensor<T> add<T>(const Tensor<T>&, const Tensor<T>&);                              \
  template Tensor<T> sub<T>(const Tensor<T>&, const Tensor<T>&);                              \
  template Tensor<T> mul<T>(const Tensor<T>&, const Tensor<T>&);                              \
  template Tensor<T> scale<T>(const Tensor<T>&, T);                                           \
  template Tensor<T> add_rows<T>(const Tensor<T>&, const Tensor<T>&);                         \
  template Tensor<T> masked_softmax<T>(const Tensor<T>&, const std::vector<std::uint8_t>&);   \
  template Tensor<T> softmax<T>(const Tensor<T>&);                                            \
  template Tensor<T> layernorm<T>(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&, T);   \
  template Tensor<T> gelu<T>(const Tensor<T>&);                                               \
  template Tensor<T> cross_entropy<T>(const Tensor<T>&, const std::vector<std::size_t>&,      \
                                      const Tensor<T>&);                                      \
  template Tensor<T> embedding<T>(const Tensor<T>&, const std::vector<std::size_t>&);         \
  template Tensor<T> gather_rows<T>(const Tensor<T>&, const std::vector<std::size_t>&);       \
  template Tensor<T> overwrite_rows<T>(const Tensor<T>&, const std::vector<std::size_t>&,     \
                                       const Tensor<T>&);                                     \
  template Tensor<T> overwrite_cols<T>(const Tensor<T>&, const std::vector<std::size_t>&,     \
                                       const Tensor<T>&);                                     \
  template Tensor<T> slice_cols<T>(const Tensor<T>&, std::size_t, std::size_t);               \
  template Tensor<T> concat_cols<T>(const std::vector<Tensor<T>>&);                           \
  template Tensor<T> sum<T>(const Tensor<T>&);                                                \
  template Tensor<T> dropout<T>(const Tensor<T>&, double, Rng&);

LF_INSTANTIATE_OPS(float)
LF_INSTANTIATE_OPS(double)

#undef LF_INSTANTIATE_OPS

}  // namespace lf
