#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <memory>
#include <numbers>
#include <span>
#include <type_traits>
#include <vector>

#include "flowcast/autodiff/kernels.hpp"
#include "flowcast/autodiff/tape.hpp"

namespace flowcast::ad {

namespace detail {
template <typename T>
void require(bool ok, const char* what) {
  if (!ok) throw Error(what);
}
}  // namespace detail

/// y = x W (+ b). x: [n, k], W: [k, m], b: [1, m].
template <typename T>
Var<T> linear(Var<T> x, Var<T> w, const Var<T>* b = nullptr) {
  auto& tp = *x.tape;
  const std::size_t n = x.rows(), k = x.cols(), m = w.cols();
  detail::require<T>(w.rows() == k, "linear: inner dimension mismatch");
  if (b) detail::require<T>(b->size() == m, "linear: bias size mismatch");
  std::vector<T> y(n * m, T(0));
  if (b) {
    const T* bd = b->data();
    for (std::size_t i = 0; i < n; ++i) std::copy(bd, bd + m, y.begin() + i * m);
  }
  kernels::gemm_nn(x.data(), w.data(), y.data(), n, k, m);
  const bool has_b = b != nullptr;
  const std::size_t bid = b ? b->id : 0;
  const bool needs = tp.needs(x) || tp.needs(w) || (b && tp.needs(*b));
  return tp.result(std::move(y), n, m, needs, [xid = x.id, wid = w.id, bid, has_b, n, k, m](Tape<T>& t, std::size_t self) {
    const T* gy = t.node(self).grad.data();
    if (t.node(xid).needs_grad) kernels::gemm_nt(gy, t.node(wid).data(), t.grad(xid), n, m, k);
    if (t.node(wid).needs_grad) kernels::gemm_tn(t.node(xid).data(), gy, t.grad(wid), n, k, m);
    if (has_b && t.node(bid).needs_grad) {
      T* gb = t.grad(bid);
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < m; ++j) gb[j] += gy[i * m + j];
    }
  });
}

template <typename T>
Var<T> linear(Var<T> x, Var<T> w, Var<T> b) {
  return linear(x, w, &b);
}

template <typename T>
Var<T> add(Var<T> a, Var<T> b) {
  auto& tp = *a.tape;
  detail::require<T>(a.rows() == b.rows() && a.cols() == b.cols(), "add: shape mismatch");
  std::vector<T> y(a.size());
  const T *ad = a.data(), *bd = b.data();
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = ad[i] + bd[i];
  return tp.result(std::move(y), a.rows(), a.cols(), tp.needs(a) || tp.needs(b),
                   [aid = a.id, bid = b.id](Tape<T>& t, std::size_t self) {
                     const auto& g = t.node(self).grad;
                     for (std::size_t id : {aid, bid}) {
                       if (!t.node(id).needs_grad) continue;
                       T* ga = t.grad(id);
                       for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
                     }
                   });
}

/// x + alpha * y
template <typename T>
Var<T> axpy(Var<T> x, Var<T> y, T alpha) {
  auto& tp = *x.tape;
  detail::require<T>(x.rows() == y.rows() && x.cols() == y.cols(), "axpy: shape mismatch");
  std::vector<T> out(x.size());
  const T *xd = x.data(), *yd = y.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = xd[i] + alpha * yd[i];
  return tp.result(std::move(out), x.rows(), x.cols(), tp.needs(x) || tp.needs(y),
                   [xid = x.id, yid = y.id, alpha](Tape<T>& t, std::size_t self) {
                     const auto& g = t.node(self).grad;
                     if (t.node(xid).needs_grad) {
                       T* gx = t.grad(xid);
                       for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i];
                     }
                     if (t.node(yid).needs_grad) {
                       T* gy = t.grad(yid);
                       for (std::size_t i = 0; i < g.size(); ++i) gy[i] += alpha * g[i];
                     }
                   });
}

template <typename T>
Var<T> scale(Var<T> x, T s) {
  auto& tp = *x.tape;
  std::vector<T> out(x.size());
  const T* xd = x.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = s * xd[i];
  return tp.result(std::move(out), x.rows(), x.cols(), tp.needs(x), [xid = x.id, s](Tape<T>& t, std::size_t self) {
    const auto& g = t.node(self).grad;
    T* gx = t.grad(xid);
    for (std::size_t i = 0; i < g.size(); ++i) gx[i] += s * g[i];
  });
}

/// Row-wise normalisation to zero mean and unit variance, no affine part.
template <typename T>
Var<T> layernorm(Var<T> x, T eps = T(1e-6)) {
  auto& tp = *x.tape;
  const std::size_t n = x.rows(), c = x.cols();
  std::vector<T> y(n * c), rstd(n);
  const T* xd = x.data();
  for (std::size_t i = 0; i < n; ++i) {
    const T* xi = xd + i * c;
    T mu = 0;
    for (std::size_t j = 0; j < c; ++j) mu += xi[j];
    mu /= T(c);
    T var = 0;
    for (std::size_t j = 0; j < c; ++j) var += (xi[j] - mu) * (xi[j] - mu);
    var /= T(c);
    rstd[i] = T(1) / std::sqrt(var + eps);
    for (std::size_t j = 0; j < c; ++j) y[i * c + j] = (xi[j] - mu) * rstd[i];
  }
  return tp.result(std::move(y), n, c, tp.needs(x),
                   [xid = x.id, rstd = std::move(rstd), n, c](Tape<T>& t, std::size_t self) {
                     const T* gy = t.node(self).grad.data();
                     const T* y = t.node(self).data();
                     T* gx = t.grad(xid);
                     for (std::size_t i = 0; i < n; ++i) {
                       T mg = 0, mgy = 0;
                       for (std::size_t j = 0; j < c; ++j) {
                         mg += gy[i * c + j];
                         mgy += gy[i * c + j] * y[i * c + j];
                       }
                       mg /= T(c);
                       mgy /= T(c);
                       for (std::size_t j = 0; j < c; ++j) {
                         gx[i * c + j] += rstd[i] * (gy[i * c + j] - mg - y[i * c + j] * mgy);
                       }
                     }
                   });
}

/// y = x * (one_plus ? 1 + s : s) + shift, with s and shift broadcast over rows.
template <typename T>
Var<T> affine_rows(Var<T> x, Var<T> s, Var<T> shift, bool one_plus) {
  auto& tp = *x.tape;
  const std::size_t n = x.rows(), c = x.cols();
  detail::require<T>(s.size() == c && shift.size() == c, "affine_rows: size mismatch");
  std::vector<T> y(n * c);
  const T *xd = x.data(), *sd = s.data(), *hd = shift.data();
  const T off = one_plus ? T(1) : T(0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < c; ++j) y[i * c + j] = xd[i * c + j] * (off + sd[j]) + hd[j];
  const bool needs = tp.needs(x) || tp.needs(s) || tp.needs(shift);
  return tp.result(std::move(y), n, c, needs,
                   [xid = x.id, sid = s.id, hid = shift.id, off, n, c](Tape<T>& t, std::size_t self) {
                     const T* gy = t.node(self).grad.data();
                     const T* xd = t.node(xid).data();
                     const T* sd = t.node(sid).data();
                     if (t.node(xid).needs_grad) {
                       T* gx = t.grad(xid);
                       for (std::size_t i = 0; i < n; ++i)
                         for (std::size_t j = 0; j < c; ++j) gx[i * c + j] += gy[i * c + j] * (off + sd[j]);
                     }
                     if (t.node(sid).needs_grad) {
                       T* gs = t.grad(sid);
                       for (std::size_t i = 0; i < n; ++i)
                         for (std::size_t j = 0; j < c; ++j) gs[j] += gy[i * c + j] * xd[i * c + j];
                     }
                     if (t.node(hid).needs_grad) {
                       T* gh = t.grad(hid);
                       for (std::size_t i = 0; i < n; ++i)
                         for (std::size_t j = 0; j < c; ++j) gh[j] += gy[i * c + j];
                     }
                   });
}

/// x + gate * y with gate broadcast over rows.
template <typename T>
Var<T> gated_add(Var<T> x, Var<T> y, Var<T> gate) {
  auto& tp = *x.tape;
  const std::size_t n = x.rows(), c = x.cols();
  detail::require<T>(y.rows() == n && y.cols() == c && gate.size() == c, "gated_add: shape mismatch");
  std::vector<T> out(n * c);
  const T *xd = x.data(), *yd = y.data(), *gd = gate.data();
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < c; ++j) out[i * c + j] = xd[i * c + j] + gd[j] * yd[i * c + j];
  const bool needs = tp.needs(x) || tp.needs(y) || tp.needs(gate);
  return tp.result(std::move(out), n, c, needs,
                   [xid = x.id, yid = y.id, gid = gate.id, n, c](Tape<T>& t, std::size_t self) {
                     const T* g = t.node(self).grad.data();
                     if (t.node(xid).needs_grad) {
                       T* gx = t.grad(xid);
                       for (std::size_t i = 0; i < n * c; ++i) gx[i] += g[i];
                     }
                     const T* gd = t.node(gid).data();
                     if (t.node(yid).needs_grad) {
                       T* gy = t.grad(yid);
                       for (std::size_t i = 0; i < n; ++i)
                         for (std::size_t j = 0; j < c; ++j) gy[i * c + j] += gd[j] * g[i * c + j];
                     }
                     if (t.node(gid).needs_grad) {
                       const T* yd = t.node(yid).data();
                       T* gg = t.grad(gid);
                       for (std::size_t i = 0; i < n; ++i)
                         for (std::size_t j = 0; j < c; ++j) gg[j] += g[i * c + j] * yd[i * c + j];
                     }
                   });
}

namespace detail {
template <typename T, typename F, typename DF>
Var<T> pointwise(Var<T> x, F f, DF df) {
  auto& tp = *x.tape;
  std::vector<T> y(x.size());
  const T* xd = x.data();
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = f(xd[i]);
  return tp.result(std::move(y), x.rows(), x.cols(), tp.needs(x), [xid = x.id, df](Tape<T>& t, std::size_t self) {
    const auto& g = t.node(self).grad;
    const T* xd = t.node(xid).data();
    T* gx = t.grad(xid);
    for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i] * df(xd[i]);
  });
}
}  // namespace detail

/// tanh-approximated GELU.
template <typename T>
Var<T> gelu(Var<T> x) {
  constexpr T c = T(0.7978845608028654);  // sqrt(2/pi)
  constexpr T a = T(0.044715);
  return detail::pointwise<T>(
      x, [](T v) { return T(0.5) * v * (T(1) + std::tanh(c * (v + a * v * v * v))); },
      [](T v) {
        const T th = std::tanh(c * (v + a * v * v * v));
        return T(0.5) * (T(1) + th) + T(0.5) * v * (T(1) - th * th) * c * (T(1) + T(3) * a * v * v);
      });
}

template <typename T>
Var<T> silu(Var<T> x) {
  return detail::pointwise<T>(
      x, [](T v) { return v / (T(1) + std::exp(-v)); },
      [](T v) {
        const T s = T(1) / (T(1) + std::exp(-v));
        return s * (T(1) + v * (T(1) - s));
      });
}

template <typename T>
Var<T> slice_cols(Var<T> x, std::size_t start, std::size_t len) {
  auto& tp = *x.tape;
  const std::size_t n = x.rows(), c = x.cols();
  detail::require<T>(start + len <= c, "slice_cols: out of range");
  std::vector<T> y(n * len);
  const T* xd = x.data();
  for (std::size_t i = 0; i < n; ++i) std::copy(xd + i * c + start, xd + i * c + start + len, y.begin() + i * len);
  return tp.result(std::move(y), n, len, tp.needs(x), [xid = x.id, start, len, n, c](Tape<T>& t, std::size_t self) {
    const T* g = t.node(self).grad.data();
    T* gx = t.grad(xid);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < len; ++j) gx[i * c + start + j] += g[i * len + j];
  });
}

template <typename T>
Var<T> slice_rows(Var<T> x, std::size_t start, std::size_t count) {
  auto& tp = *x.tape;
  const std::size_t c = x.cols();
  detail::require<T>(start + count <= x.rows(), "slice_rows: out of range");
  std::vector<T> y(x.data() + start * c, x.data() + (start + count) * c);
  return tp.result(std::move(y), count, c, tp.needs(x), [xid = x.id, start, c](Tape<T>& t, std::size_t self) {
    const auto& g = t.node(self).grad;
    T* gx = t.grad(xid) + start * c;
    for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i];
  });
}

template <typename T>
Var<T> concat_rows(Var<T> a, Var<T> b) {
  auto& tp = *a.tape;
  detail::require<T>(a.cols() == b.cols(), "concat_rows: column mismatch");
  std::vector<T> y(a.size() + b.size());
  std::copy(a.data(), a.data() + a.size(), y.begin());
  std::copy(b.data(), b.data() + b.size(), y.begin() + static_cast<std::ptrdiff_t>(a.size()));
  const std::size_t na = a.size();
  return tp.result(std::move(y), a.rows() + b.rows(), a.cols(), tp.needs(a) || tp.needs(b),
                   [aid = a.id, bid = b.id, na](Tape<T>& t, std::size_t self) {
                     const auto& g = t.node(self).grad;
                     if (t.node(aid).needs_grad) {
                       T* ga = t.grad(aid);
                       for (std::size_t i = 0; i < na; ++i) ga[i] += g[i];
                     }
                     if (t.node(bid).needs_grad) {
                       T* gb = t.grad(bid);
                       for (std::size_t i = na; i < g.size(); ++i) gb[i - na] += g[i];
                     }
                   });
}

/// Element gather: out[k] = x[index[k]], or 0 where index[k] < 0. Covers
/// patching, padding (replicate/wrap/zero), cropping and reshuffles.
using IndexMap = std::shared_ptr<const std::vector<long>>;

template <typename T>
Var<T> gather(Var<T> x, IndexMap index, std::size_t rows, std::size_t cols) {
  auto& tp = *x.tape;
  detail::require<T>(index->size() == rows * cols, "gather: index size mismatch");
  std::vector<T> y(rows * cols);
  const T* xd = x.data();
  const auto& idx = *index;
  for (std::size_t k = 0; k < y.size(); ++k) y[k] = idx[k] >= 0 ? xd[idx[k]] : T(0);
  return tp.result(std::move(y), rows, cols, tp.needs(x), [xid = x.id, index](Tape<T>& t, std::size_t self) {
    const auto& g = t.node(self).grad;
    const auto& idx = *index;
    T* gx = t.grad(xid);
    for (std::size_t k = 0; k < g.size(); ++k) {
      if (idx[k] >= 0) gx[idx[k]] += g[k];
    }
  });
}

/// Row gather: out row r = x row index[r], or zeros where index[r] < 0.
template <typename T>
Var<T> gather_rows(Var<T> x, IndexMap index) {
  auto& tp = *x.tape;
  const std::size_t c = x.cols(), rows = index->size();
  std::vector<T> y(rows * c, T(0));
  const T* xd = x.data();
  for (std::size_t r = 0; r < rows; ++r) {
    const long s = (*index)[r];
    if (s >= 0) std::copy(xd + s * c, xd + (s + 1) * c, y.begin() + static_cast<std::ptrdiff_t>(r * c));
  }
  return tp.result(std::move(y), rows, c, tp.needs(x), [xid = x.id, index, c](Tape<T>& t, std::size_t self) {
    const T* g = t.node(self).grad.data();
    T* gx = t.grad(xid);
    for (std::size_t r = 0; r < index->size(); ++r) {
      const long s = (*index)[r];
      if (s < 0) continue;
      for (std::size_t j = 0; j < c; ++j) gx[s * c + j] += g[r * c + j];
    }
  });
}

/// Windowed multi-head attention geometry. Slots are window-major; each slot
/// carries a label, and a query attends only to keys in its window with the
/// same label. Label -1 marks padding (never a key; its output row is zero).
struct AttentionLayout {
  std::size_t windows = 0;
  std::size_t window_tokens = 0;
  std::size_t heads = 0;
  std::size_t dim = 0;
  std::size_t n_rel = 0;
  std::vector<long> rel_index;   // window_tokens^2 entries into the bias table
  std::vector<int> slot_label;   // windows * window_tokens
};

/// qkv: [windows*Nt, 3*dim] as (q | k | v); bias: [n_rel, heads]. Returns [windows*Nt, dim].
template <typename T>
Var<T> window_attention(Var<T> qkv, Var<T> bias, std::shared_ptr<const AttentionLayout> layout) {
  auto& tp = *qkv.tape;
  const auto& L = *layout;
  const std::size_t nt = L.window_tokens, H = L.heads, E = L.dim, hd = E / H, stride = 3 * E;
  detail::require<T>(qkv.rows() == L.windows * nt && qkv.cols() == stride, "window_attention: qkv shape");
  detail::require<T>(bias.rows() == L.n_rel && bias.cols() == H, "window_attention: bias shape");
  const T sc = T(1) / std::sqrt(T(hd));
  std::vector<T> out(L.windows * nt * E, T(0));
  std::vector<T> probs(L.windows * H * nt * nt, T(0));
  const T* q = qkv.data();
  const T* bd = bias.data();
  std::vector<T> row(nt);
  for (std::size_t w = 0; w < L.windows; ++w) {
    const int* lab = L.slot_label.data() + w * nt;
    for (std::size_t h = 0; h < H; ++h) {
      T* P = probs.data() + (w * H + h) * nt * nt;
      for (std::size_t i = 0; i < nt; ++i) {
        if (lab[i] < 0) continue;
        const T* qi = q + (w * nt + i) * stride + h * hd;
        T mx = -std::numeric_limits<T>::infinity();
        for (std::size_t j = 0; j < nt; ++j) {
          if (lab[j] != lab[i]) continue;
          const T* kj = q + (w * nt + j) * stride + E + h * hd;
          T s = 0;
          for (std::size_t d = 0; d < hd; ++d) s += qi[d] * kj[d];
          s = s * sc + bd[L.rel_index[i * nt + j] * H + h];
          row[j] = s;
          mx = std::max(mx, s);
        }
        T sum = 0;
        for (std::size_t j = 0; j < nt; ++j) {
          if (lab[j] != lab[i]) continue;
          P[i * nt + j] = std::exp(row[j] - mx);
          sum += P[i * nt + j];
        }
        const T inv = T(1) / sum;
        T* oi = out.data() + (w * nt + i) * E + h * hd;
        for (std::size_t j = 0; j < nt; ++j) {
          if (lab[j] != lab[i]) continue;
          P[i * nt + j] *= inv;
          const T p = P[i * nt + j];
          const T* vj = q + (w * nt + j) * stride + 2 * E + h * hd;
          for (std::size_t d = 0; d < hd; ++d) oi[d] += p * vj[d];
        }
      }
    }
  }
  const bool needs = tp.needs(qkv) || tp.needs(bias);
  return tp.result(
      std::move(out), L.windows * nt, E, needs,
      [qid = qkv.id, bid = bias.id, layout, probs = std::move(probs), sc](Tape<T>& t, std::size_t self) {
        const auto& L = *layout;
        const std::size_t nt = L.window_tokens, H = L.heads, E = L.dim, hd = E / H, stride = 3 * E;
        const T* go = t.node(self).grad.data();
        const T* q = t.node(qid).data();
        T* gq = t.grad(qid);
        T* gb = t.node(bid).needs_grad ? t.grad(bid) : nullptr;
        std::vector<T> dp(nt);
        for (std::size_t w = 0; w < L.windows; ++w) {
          const int* lab = L.slot_label.data() + w * nt;
          for (std::size_t h = 0; h < H; ++h) {
            const T* P = probs.data() + (w * H + h) * nt * nt;
            for (std::size_t i = 0; i < nt; ++i) {
              if (lab[i] < 0) continue;
              const T* goi = go + (w * nt + i) * E + h * hd;
              T dot = 0;
              for (std::size_t j = 0; j < nt; ++j) {
                if (lab[j] != lab[i]) continue;
                const T* vj = q + (w * nt + j) * stride + 2 * E + h * hd;
                T* gvj = gq + (w * nt + j) * stride + 2 * E + h * hd;
                const T p = P[i * nt + j];
                T s = 0;
                for (std::size_t d = 0; d < hd; ++d) {
                  s += goi[d] * vj[d];
                  gvj[d] += p * goi[d];
                }
                dp[j] = s;
                dot += p * s;
              }
              const T* qi = q + (w * nt + i) * stride + h * hd;
              T* gqi = gq + (w * nt + i) * stride + h * hd;
              for (std::size_t j = 0; j < nt; ++j) {
                if (lab[j] != lab[i]) continue;
                const T ds = P[i * nt + j] * (dp[j] - dot);
                if (gb) gb[L.rel_index[i * nt + j] * H + h] += ds;
                const T* kj = q + (w * nt + j) * stride + E + h * hd;
                T* gkj = gq + (w * nt + j) * stride + E + h * hd;
                const T dss = ds * sc;
                for (std::size_t d = 0; d < hd; ++d) {
                  gqi[d] += dss * kj[d];
                  gkj[d] += dss * qi[d];
                }
              }
            }
          }
        }
      });
}

/// scale * sum_k weight[k] * (pred[k] - target[k])^2 as a 1x1 value.
template <typename T>
Var<T> weighted_square_error(Var<T> pred, std::type_identity_t<std::span<const T>> target, std::shared_ptr<const std::vector<T>> weight,
                             T scale_factor) {
  auto& tp = *pred.tape;
  const std::size_t n = pred.size();
  detail::require<T>(target.size() == n && weight->size() == n, "weighted_square_error: size mismatch");
  std::vector<T> diff(n);
  const T* p = pred.data();
  T acc = 0;
  for (std::size_t k = 0; k < n; ++k) {
    diff[k] = p[k] - target[k];
    acc += (*weight)[k] * diff[k] * diff[k];
  }
  std::vector<T> y{scale_factor * acc};
  return tp.result(std::move(y), 1, 1, tp.needs(pred),
                   [pid = pred.id, weight, diff = std::move(diff), scale_factor](Tape<T>& t, std::size_t self) {
                     const T g = t.node(self).grad[0] * scale_factor * T(2);
                     T* gp = t.grad(pid);
                     for (std::size_t k = 0; k < diff.size(); ++k) gp[k] += g * (*weight)[k] * diff[k];
                   });
}

}  // namespace flowcast::ad
