#include "syncap/ops.hpp"

#include <cmath>
#include <limits>
#include <string>

namespace syncap::num {

namespace {

template <class T>
std::vector<T>& scratch() {
  thread_local std::vector<T> s;
  return s;
}

[[noreturn]] void shape_failure(const char* op, const std::string& what) {
  throw ShapeError(std::string(op) + ": " + what);
}

// The message is only built when the check fails.
#define SYNCAP_CHECK(ok, op, what)    \
  do {                                \
    if (!(ok)) shape_failure(op, what); \
  } while (0)

template <class T>
std::string dims(const Tensor<T>& t) {
  return std::to_string(t.rows) + "x" + std::to_string(t.cols);
}

template <class T>
void accumulate(Tensor<T>& dst, const Tensor<T>& src) {
  for (std::size_t i = 0; i < dst.data.size(); ++i) dst.data[i] += src.data[i];
}

/// Elementwise op whose derivative is a function of (input, output).
template <class T, class F, class D>
Var<T> unary(Var<T> a, F f, D df) {
  const auto& x = a.value();
  Tensor<T> y(x.rows, x.cols);
  for (std::size_t i = 0; i < x.data.size(); ++i) y.data[i] = f(x.data[i]);
  const int ia = a.id;
  return a.tape->push(std::move(y), {a}, [ia, df](Tape<T>& t, int self) {
    const auto& g = t.grad(self);
    const auto& x = t.value(ia);
    const auto& y = t.value(self);
    auto& dx = t.grad(ia);
    for (std::size_t i = 0; i < g.data.size(); ++i) dx.data[i] += g.data[i] * df(x.data[i], y.data[i]);
  });
}

}  // namespace

template <class T>
Var<T> matmul(Var<T> a, Var<T> b) {
  const auto& A = a.value();
  const auto& B = b.value();
  SYNCAP_CHECK(A.cols == B.rows, "matmul", dims(A) + " * " + dims(B));
  Tensor<T> C(A.rows, B.cols);
  kernels::gemm_nn(A.rows, A.cols, B.cols, A.data.data(), B.data.data(), C.data.data());
  const int ia = a.id, ib = b.id;
  return a.tape->push(std::move(C), {a, b}, [ia, ib](Tape<T>& t, int self) {
    const auto& G = t.grad(self);
    const auto& A = t.value(ia);
    const auto& B = t.value(ib);
    if (t.needs_grad(ia))
      kernels::gemm_nn(A.rows, B.cols, A.cols, G.data.data(), t.transposed(ib).data.data(),
                       t.grad(ia).data.data());
    if (t.needs_grad(ib))
      kernels::gemm_tn(A.rows, A.cols, B.cols, A.data.data(), G.data.data(),
                       t.grad(ib).data.data());
  });
}

template <class T>
Var<T> add(Var<T> a, Var<T> b) {
  const auto& A = a.value();
  const auto& B = b.value();
  const bool bcast = B.rows == 1 && A.rows != 1 && B.cols == A.cols;
  SYNCAP_CHECK(A.same_shape(B) || bcast, "add", dims(A) + " + " + dims(B));
  Tensor<T> C = A;
  for (int r = 0; r < A.rows; ++r) {
    T* c = C.row(r);
    const T* s = B.row(bcast ? 0 : r);
    for (int j = 0; j < A.cols; ++j) c[j] += s[j];
  }
  const int ia = a.id, ib = b.id;
  return a.tape->push(std::move(C), {a, b}, [ia, ib, bcast](Tape<T>& t, int self) {
    const auto& G = t.grad(self);
    if (t.needs_grad(ia)) accumulate(t.grad(ia), G);
    if (t.needs_grad(ib)) {
      auto& dB = t.grad(ib);
      if (!bcast) {
        accumulate(dB, G);
      } else {
        for (int r = 0; r < G.rows; ++r)
          for (int j = 0; j < G.cols; ++j) dB.data[j] += G(r, j);
      }
    }
  });
}

template <class T>
Var<T> sub(Var<T> a, Var<T> b) {
  return add(a, scale(b, T(-1)));
}

template <class T>
Var<T> mul(Var<T> a, Var<T> b) {
  const auto& A = a.value();
  const auto& B = b.value();
  SYNCAP_CHECK(A.same_shape(B), "mul", dims(A) + " .* " + dims(B));
  Tensor<T> C(A.rows, A.cols);
  for (std::size_t i = 0; i < C.data.size(); ++i) C.data[i] = A.data[i] * B.data[i];
  const int ia = a.id, ib = b.id;
  return a.tape->push(std::move(C), {a, b}, [ia, ib](Tape<T>& t, int self) {
    const auto& G = t.grad(self);
    const auto& A = t.value(ia);
    const auto& B = t.value(ib);
    if (t.needs_grad(ia)) {
      auto& d = t.grad(ia);
      for (std::size_t i = 0; i < G.data.size(); ++i) d.data[i] += G.data[i] * B.data[i];
    }
    if (t.needs_grad(ib)) {
      auto& d = t.grad(ib);
      for (std::size_t i = 0; i < G.data.size(); ++i) d.data[i] += G.data[i] * A.data[i];
    }
  });
}

template <class T>
Var<T> scale(Var<T> a, T s) {
  return unary<T>(
      a, [s](T x) { return s * x; }, [s](T, T) { return s; });
}

template <class T>
Var<T> sigmoid(Var<T> a) {
  return unary<T>(
      a, [](T x) { return T(1) / (T(1) + std::exp(-x)); },
      [](T, T y) { return y * (T(1) - y); });
}

template <class T>
Var<T> tanh(Var<T> a) {
  return unary<T>(
      a, [](T x) { return std::tanh(x); }, [](T, T y) { return T(1) - y * y; });
}

template <class T>
Var<T> gelu(Var<T> a) {
  constexpr T c = T(0.7978845608028654);  // sqrt(2/pi)
  constexpr T k = T(0.044715);
  return unary<T>(
      a,
      [](T x) { return T(0.5) * x * (T(1) + std::tanh(c * (x + k * x * x * x))); },
      [](T x, T) {
        const T u = std::tanh(c * (x + k * x * x * x));
        return T(0.5) * (T(1) + u) + T(0.5) * x * (T(1) - u * u) * c * (T(1) + T(3) * k * x * x);
      });
}

template <class T>
Var<T> concat_cols(const std::vector<Var<T>>& parts) {
  SYNCAP_CHECK(!parts.empty(), "concat_cols", "no inputs");
  const int rows = parts[0].rows();
  int cols = 0;
  bool needs = false;
  for (const auto& p : parts) {
    SYNCAP_CHECK(p.rows() == rows, "concat_cols", "row counts differ");
    cols += p.cols();
    needs = needs || p.tape->needs_grad(p);
  }
  Tensor<T> out(rows, cols);
  std::vector<int> ids, offs;
  int off = 0;
  for (const auto& p : parts) {
    const auto& v = p.value();
    for (int r = 0; r < rows; ++r) std::copy(v.row(r), v.row(r) + v.cols, out.row(r) + off);
    ids.push_back(p.id);
    offs.push_back(off);
    off += v.cols;
  }
  return parts[0].tape->push(std::move(out), needs, [ids, offs](Tape<T>& t, int self) {
    const auto& G = t.grad(self);
    for (std::size_t k = 0; k < ids.size(); ++k) {
      if (!t.needs_grad(ids[k])) continue;
      auto& d = t.grad(ids[k]);
      for (int r = 0; r < G.rows; ++r) {
        const T* g = G.row(r) + offs[k];
        T* dr = d.row(r);
        for (int j = 0; j < d.cols; ++j) dr[j] += g[j];
      }
    }
  });
}

template <class T>
Var<T> concat_rows(const std::vector<Var<T>>& parts) {
  SYNCAP_CHECK(!parts.empty(), "concat_rows", "no inputs");
  const int cols = parts[0].cols();
  int rows = 0;
  bool needs = false;
  for (const auto& p : parts) {
    SYNCAP_CHECK(p.cols() == cols, "concat_rows", "column counts differ");
    rows += p.rows();
    needs = needs || p.tape->needs_grad(p);
  }
  Tensor<T> out(rows, cols);
  std::vector<int> ids, offs;
  std::size_t pos = 0;
  int off = 0;
  for (const auto& p : parts) {
    const auto& v = p.value();
    std::copy(v.data.begin(), v.data.end(), out.data.begin() + static_cast<std::ptrdiff_t>(pos));
    pos += v.data.size();
    ids.push_back(p.id);
    offs.push_back(off);
    off += v.rows;
  }
  return parts[0].tape->push(std::move(out), needs, [ids, offs](Tape<T>& t, int self) {
    const auto& G = t.grad(self);
    for (std::size_t k = 0; k < ids.size(); ++k) {
      if (!t.needs_grad(ids[k])) continue;
      auto& d = t.grad(ids[k]);
      const T* g = G.row(offs[k]);
      for (std::size_t i = 0; i < d.data.size(); ++i) d.data[i] += g[i];
    }
  });
}

template <class T>
Var<T> slice_cols(Var<T> a, int start, int len) {
  const auto& A = a.value();
  SYNCAP_CHECK(start >= 0 && len >= 0 && start + len <= A.cols, "slice_cols", "range outside " + dims(A));
  Tensor<T> out(A.rows, len);
  for (int r = 0; r < A.rows; ++r) std::copy(A.row(r) + start, A.row(r) + start + len, out.row(r));
  const int ia = a.id;
  return a.tape->push(std::move(out), {a}, [ia, start](Tape<T>& t, int self) {
    const auto& G = t.grad(self);
    auto& d = t.grad(ia);
    for (int r = 0; r < G.rows; ++r) {
      T* dr = d.row(r) + start;
      const T* g = G.row(r);
      for (int j = 0; j < G.cols; ++j) dr[j] += g[j];
    }
  });
}

template <class T>
Var<T> slice_rows(Var<T> a, int start, int len) {
  const auto& A = a.value();
  SYNCAP_CHECK(start >= 0 && len >= 0 && start + len <= A.rows, "slice_rows", "range outside " + dims(A));
  Tensor<T> out(len, A.cols);
  std::copy(A.row(start), A.row(start) + static_cast<std::size_t>(len) * A.cols, out.data.begin());
  const int ia = a.id;
  return a.tape->push(std::move(out), {a}, [ia, start](Tape<T>& t, int self) {
    const auto& G = t.grad(self);
    T* d = t.grad(ia).row(start);
    for (std::size_t i = 0; i < G.data.size(); ++i) d[i] += G.data[i];
  });
}

template <class T>
Var<T> gather_rows(Var<T> a, const std::vector<int>& idx) {
  const auto& A = a.value();
  Tensor<T> out(static_cast<int>(idx.size()), A.cols);
  for (std::size_t i = 0; i < idx.size(); ++i) {
    if (idx[i] < 0 || idx[i] >= A.rows)
      throw IndexError("gather_rows: row " + std::to_string(idx[i]) + " outside " + dims(A));
    std::copy(A.row(idx[i]), A.row(idx[i]) + A.cols, out.row(static_cast<int>(i)));
  }
  const int ia = a.id;
  if (!a.tape->needs_grad(a)) return a.tape->push(std::move(out), false, nullptr);
  return a.tape->push(std::move(out), {a}, [ia, idx](Tape<T>& t, int self) {
    const auto& G = t.grad(self);
    auto& d = t.grad(ia);
    for (std::size_t i = 0; i < idx.size(); ++i) {
      T* dr = d.row(idx[i]);
      const T* g = G.row(static_cast<int>(i));
      for (int j = 0; j < G.cols; ++j) dr[j] += g[j];
    }
  });
}

template <class T>
Var<T> transpose(Var<T> a) {
  const auto& A = a.value();
  Tensor<T> out(A.cols, A.rows);
  kernels::transpose(A.rows, A.cols, A.data.data(), out.data.data());
  const int ia = a.id;
  return a.tape->push(std::move(out), {a}, [ia](Tape<T>& t, int self) {
    const auto& G = t.grad(self);
    auto& d = t.grad(ia);
    for (int r = 0; r < G.rows; ++r)
      for (int c = 0; c < G.cols; ++c) d(c, r) += G(r, c);
  });
}

template <class T>
Var<T> softmax_rows(Var<T> a) {
  const auto& A = a.value();
  SYNCAP_CHECK(A.cols >= 1, "softmax_rows", "zero columns");
  Tensor<T> Y(A.rows, A.cols);
  for (int r = 0; r < A.rows; ++r) {
    const T* x = A.row(r);
    T* y = Y.row(r);
    const T mx = *std::max_element(x, x + A.cols);
    T s = 0;
    for (int j = 0; j < A.cols; ++j) s += (y[j] = std::exp(x[j] - mx));
    for (int j = 0; j < A.cols; ++j) y[j] /= s;
  }
  const int ia = a.id;
  return a.tape->push(std::move(Y), {a}, [ia](Tape<T>& t, int self) {
    const auto& G = t.grad(self);
    const auto& Y = t.value(self);
    auto& d = t.grad(ia);
    for (int r = 0; r < G.rows; ++r) {
      const T* g = G.row(r);
      const T* y = Y.row(r);
      T dot = 0;
      for (int j = 0; j < G.cols; ++j) dot += g[j] * y[j];
      T* dr = d.row(r);
      for (int j = 0; j < G.cols; ++j) dr[j] += y[j] * (g[j] - dot);
    }
  });
}

template <class T>
Var<T> mean_rows(Var<T> a) {
  const auto& A = a.value();
  SYNCAP_CHECK(A.rows >= 1, "mean_rows", "zero rows");
  Tensor<T> out(1, A.cols);
  for (int r = 0; r < A.rows; ++r)
    for (int j = 0; j < A.cols; ++j) out.data[j] += A(r, j);
  const T inv = T(1) / T(A.rows);
  for (auto& x : out.data) x *= inv;
  const int ia = a.id;
  return a.tape->push(std::move(out), {a}, [ia, inv](Tape<T>& t, int self) {
    const auto& G = t.grad(self);
    auto& d = t.grad(ia);
    for (int r = 0; r < d.rows; ++r)
      for (int j = 0; j < d.cols; ++j) d(r, j) += G.data[j] * inv;
  });
}

template <class T>
Var<T> sum_all(Var<T> a) {
  const auto& A = a.value();
  T s = 0;
  for (T x : A.data) s += x;
  const int ia = a.id;
  return a.tape->push(Tensor<T>(1, 1, s), {a}, [ia](Tape<T>& t, int self) {
    const T g = t.grad(self).data[0];
    for (auto& x : t.grad(ia).data) x += g;
  });
}

template <class T>
Var<T> l2_normalize_rows(Var<T> a) {
  const auto& A = a.value();
  Tensor<T> Y(A.rows, A.cols);
  std::vector<T> norms(static_cast<std::size_t>(A.rows));
  for (int r = 0; r < A.rows; ++r) {
    T s = 0;
    for (int j = 0; j < A.cols; ++j) s += A(r, j) * A(r, j);
    const T n = std::max(std::sqrt(s), T(1e-12));
    norms[static_cast<std::size_t>(r)] = n;
    for (int j = 0; j < A.cols; ++j) Y(r, j) = A(r, j) / n;
  }
  const int ia = a.id;
  return a.tape->push(std::move(Y), {a}, [ia, norms](Tape<T>& t, int self) {
    const auto& G = t.grad(self);
    const auto& Y = t.value(self);
    auto& d = t.grad(ia);
    for (int r = 0; r < G.rows; ++r) {
      T dot = 0;
      for (int j = 0; j < G.cols; ++j) dot += G(r, j) * Y(r, j);
      const T n = norms[static_cast<std::size_t>(r)];
      for (int j = 0; j < G.cols; ++j) d(r, j) += (G(r, j) - Y(r, j) * dot) / n;
    }
  });
}

template <class T>
Var<T> layer_norm(Var<T> x, Var<T> gamma, Var<T> beta, T eps) {
  const auto& X = x.value();
  const int n = X.cols;
  SYNCAP_CHECK(gamma.rows() == 1 && gamma.cols() == n && beta.rows() == 1 && beta.cols() == n,
        "layer_norm", "gain/bias must be 1x" + std::to_string(n));
  const auto& g = gamma.value();
  const auto& b = beta.value();
  Tensor<T> Y(X.rows, n), Xhat(X.rows, n);
  std::vector<T> inv(static_cast<std::size_t>(X.rows));
  for (int r = 0; r < X.rows; ++r) {
    T mu = 0, var = 0;
    for (int j = 0; j < n; ++j) mu += X(r, j);
    mu /= T(n);
    for (int j = 0; j < n; ++j) var += (X(r, j) - mu) * (X(r, j) - mu);
    var /= T(n);
    const T is = T(1) / std::sqrt(var + eps);
    inv[static_cast<std::size_t>(r)] = is;
    for (int j = 0; j < n; ++j) {
      Xhat(r, j) = (X(r, j) - mu) * is;
      Y(r, j) = Xhat(r, j) * g.data[j] + b.data[j];
    }
  }
  const int ix = x.id, ig = gamma.id, ib = beta.id;
  return x.tape->push(std::move(Y), {x, gamma, beta},
                      [ix, ig, ib, Xhat = std::move(Xhat), inv](Tape<T>& t, int self) {
    const auto& G = t.grad(self);
    const auto& gv = t.value(ig);
    const int n = G.cols;
    if (t.needs_grad(ig)) {
      auto& dg = t.grad(ig);
      for (int r = 0; r < G.rows; ++r)
        for (int j = 0; j < n; ++j) dg.data[j] += G(r, j) * Xhat(r, j);
    }
    if (t.needs_grad(ib)) {
      auto& db = t.grad(ib);
      for (int r = 0; r < G.rows; ++r)
        for (int j = 0; j < n; ++j) db.data[j] += G(r, j);
    }
    if (t.needs_grad(ix)) {
      auto& dx = t.grad(ix);
      std::vector<T> dxh(static_cast<std::size_t>(n));
      for (int r = 0; r < G.rows; ++r) {
        T m1 = 0, m2 = 0;
        for (int j = 0; j < n; ++j) {
          dxh[j] = G(r, j) * gv.data[j];
          m1 += dxh[j];
          m2 += dxh[j] * Xhat(r, j);
        }
        m1 /= T(n);
        m2 /= T(n);
        const T is = inv[static_cast<std::size_t>(r)];
        for (int j = 0; j < n; ++j) dx(r, j) += is * (dxh[j] - m1 - Xhat(r, j) * m2);
      }
    }
  });
}

template <class T>
Var<T> lstm_gates(Var<T> pre, Var<T> c) {
  const auto& P = pre.value();
  const auto& C = c.value();
  const int H = C.cols;
  SYNCAP_CHECK(P.rows == C.rows && P.cols == 4 * H, "lstm_gates", dims(P) + " vs cell " + dims(C));
  Tensor<T> gates(P.rows, 4 * H);
  Tensor<T> out(P.rows, 2 * H);
  for (int r = 0; r < P.rows; ++r) {
    const T* p = P.row(r);
    T* a = gates.row(r);
    for (int j = 0; j < H; ++j) {
      a[j] = T(1) / (T(1) + std::exp(-p[j]));
      a[H + j] = T(1) / (T(1) + std::exp(-p[H + j]));
      a[2 * H + j] = std::tanh(p[2 * H + j]);
      a[3 * H + j] = T(1) / (T(1) + std::exp(-p[3 * H + j]));
    }
    T* o = out.row(r);
    const T* cr = C.row(r);
    for (int j = 0; j < H; ++j) {
      const T cn = a[H + j] * cr[j] + a[j] * a[2 * H + j];
      o[H + j] = cn;
      o[j] = a[3 * H + j] * std::tanh(cn);
    }
  }
  const int ip = pre.id, ic = c.id;
  return pre.tape->push(std::move(out), {pre, c},
                        [ip, ic, gates = std::move(gates)](Tape<T>& t, int self) {
    const auto& G = t.grad(self);
    const auto& O = t.value(self);
    const auto& C = t.value(ic);
    const int H = C.cols;
    Tensor<T>* dP = t.needs_grad(ip) ? &t.grad(ip) : nullptr;
    Tensor<T>* dC = t.needs_grad(ic) ? &t.grad(ic) : nullptr;
    for (int r = 0; r < G.rows; ++r) {
      const T* a = gates.row(r);
      const T* g = G.row(r);
      const T* o = O.row(r);
      const T* cr = C.row(r);
      for (int j = 0; j < H; ++j) {
        const T i = a[j], f = a[H + j], gg = a[2 * H + j], og = a[3 * H + j];
        const T tc = std::tanh(o[H + j]);
        const T dc = g[H + j] + g[j] * og * (T(1) - tc * tc);
        if (dP) {
          T* dp = dP->row(r);
          dp[j] += dc * gg * i * (T(1) - i);
          dp[H + j] += dc * cr[j] * f * (T(1) - f);
          dp[2 * H + j] += dc * i * (T(1) - gg * gg);
          dp[3 * H + j] += g[j] * tc * og * (T(1) - og);
        }
        if (dC) dC->row(r)[j] += dc * f;
      }
    }
  });
}

template <class T>
Var<T> additive_scores(Var<T> q, Var<T> k, Var<T> w, int regions) {
  const auto& Q = q.value();
  const auto& K = k.value();
  const auto& W = w.value();
  if (regions <= 0) throw EmptyInputError("attention over zero regions");
  const int B = Q.rows, A = Q.cols;
  const bool shared = K.rows == regions && B != 1;
  SYNCAP_CHECK(K.cols == A && W.rows == 1 && W.cols == A, "additive_scores",
        "query " + dims(Q) + ", keys " + dims(K) + ", scorer " + dims(W));
  SYNCAP_CHECK(shared || K.rows == B * regions, "additive_scores", "keys must have batch*regions rows");
  Tensor<T> th(B * regions, A);
  Tensor<T> Y(B, regions);
  for (int b = 0; b < B; ++b) {
    for (int r = 0; r < regions; ++r) {
      const T* kr = K.row(shared ? r : b * regions + r);
      T* h = th.row(b * regions + r);
      T e = 0;
      for (int j = 0; j < A; ++j) {
        h[j] = std::tanh(Q(b, j) + kr[j]);
        e += W.data[j] * h[j];
      }
      Y(b, r) = e;
    }
    T* y = Y.row(b);
    const T mx = *std::max_element(y, y + regions);
    T s = 0;
    for (int r = 0; r < regions; ++r) s += (y[r] = std::exp(y[r] - mx));
    for (int r = 0; r < regions; ++r) y[r] /= s;
  }
  const int iq = q.id, ik = k.id, iw = w.id;
  return q.tape->push(std::move(Y), {q, k, w},
                      [iq, ik, iw, regions, shared, th = std::move(th)](Tape<T>& t, int self) {
    const auto& G = t.grad(self);
    const auto& Y = t.value(self);
    const auto& W = t.value(iw);
    const int B = G.rows, A = W.cols;
    Tensor<T>* dQ = t.needs_grad(iq) ? &t.grad(iq) : nullptr;
    Tensor<T>* dK = t.needs_grad(ik) ? &t.grad(ik) : nullptr;
    Tensor<T>* dW = t.needs_grad(iw) ? &t.grad(iw) : nullptr;
    std::vector<T> de(static_cast<std::size_t>(regions));
    for (int b = 0; b < B; ++b) {
      T dot = 0;
      for (int r = 0; r < regions; ++r) dot += G(b, r) * Y(b, r);
      for (int r = 0; r < regions; ++r) de[r] = Y(b, r) * (G(b, r) - dot);
      for (int r = 0; r < regions; ++r) {
        const T* h = th.row(b * regions + r);
        if (dW)
          for (int j = 0; j < A; ++j) dW->data[j] += de[r] * h[j];
        if (dQ || dK) {
          T* dq = dQ ? dQ->row(b) : nullptr;
          T* dk = dK ? dK->row(shared ? r : b * regions + r) : nullptr;
          for (int j = 0; j < A; ++j) {
            const T dpre = de[r] * W.data[j] * (T(1) - h[j] * h[j]);
            if (dq) dq[j] += dpre;
            if (dk) dk[j] += dpre;
          }
        }
      }
    }
  });
}

template <class T>
Var<T> pool_regions(Var<T> weights, Var<T> values) {
  const auto& Wt = weights.value();
  const auto& Vv = values.value();
  const int B = Wt.rows, R = Wt.cols, D = Vv.cols;
  const bool shared = Vv.rows == R && B != 1;
  SYNCAP_CHECK(shared || Vv.rows == B * R, "pool_regions", "values must have batch*regions rows");
  Tensor<T> out(B, D);
  for (int b = 0; b < B; ++b) {
    T* o = out.row(b);
    for (int r = 0; r < R; ++r) {
      const T a = Wt(b, r);
      const T* v = Vv.row(shared ? r : b * R + r);
      for (int j = 0; j < D; ++j) o[j] += a * v[j];
    }
  }
  const int iw = weights.id, iv = values.id;
  return weights.tape->push(std::move(out), {weights, values},
                            [iw, iv, shared](Tape<T>& t, int self) {
    const auto& G = t.grad(self);
    const auto& Wt = t.value(iw);
    const auto& Vv = t.value(iv);
    const int B = Wt.rows, R = Wt.cols, D = Vv.cols;
    Tensor<T>* dW = t.needs_grad(iw) ? &t.grad(iw) : nullptr;
    Tensor<T>* dV = t.needs_grad(iv) ? &t.grad(iv) : nullptr;
    for (int b = 0; b < B; ++b) {
      const T* g = G.row(b);
      for (int r = 0; r < R; ++r) {
        const int vr = shared ? r : b * R + r;
        const T* v = Vv.row(vr);
        if (dW) {
          T s = 0;
          for (int j = 0; j < D; ++j) s += g[j] * v[j];
          (*dW)(b, r) += s;
        }
        if (dV) {
          T* dv = dV->row(vr);
          const T a = Wt(b, r);
          for (int j = 0; j < D; ++j) dv[j] += a * g[j];
        }
      }
    }
  });
}

template <class T>
Attention<T> attention(Var<T> q, Var<T> keys, Var<T> values, Var<T> w, int regions) {
  auto weights = additive_scores(q, keys, w, regions);
  return {pool_regions(weights, values), weights};
}

template <class T>
Var<T> multihead_attention(Var<T> q, Var<T> k, Var<T> v, int batch, int tq, int tk, int heads,
                           bool causal) {
  const auto& Q = q.value();
  const auto& K = k.value();
  const auto& Vv = v.value();
  const int D = Q.cols;
  if (tk <= 0) throw EmptyInputError("attention over zero keys");
  SYNCAP_CHECK(heads > 0 && D % heads == 0, "multihead_attention", "width not divisible by heads");
  const bool shared = batch > 1 && K.rows == tk;
  const int krows = shared ? tk : batch * tk;
  SYNCAP_CHECK(Q.rows == batch * tq && K.rows == krows && Vv.rows == krows && K.cols == D &&
            Vv.cols == D,
        "multihead_attention", "q " + dims(Q) + ", k " + dims(K) + ", v " + dims(Vv));
  const int dh = D / heads;
  const T sc = T(1) / std::sqrt(T(dh));
  const int shift = tk - tq;
  // P[b][h][i][j]
  Tensor<T> P(batch * heads * tq, tk);
  Tensor<T> out(batch * tq, D);
  for (int b = 0; b < batch; ++b)
    for (int h = 0; h < heads; ++h)
      for (int i = 0; i < tq; ++i) {
        T* p = P.row((b * heads + h) * tq + i);
        const T* qi = Q.row(b * tq + i) + h * dh;
        const int jmax = causal ? std::min(tk, i + shift + 1) : tk;
        T mx = -std::numeric_limits<T>::infinity();
        for (int j = 0; j < jmax; ++j) {
          const T* kj = K.row(shared ? j : b * tk + j) + h * dh;
          T s = 0;
          for (int c = 0; c < dh; ++c) s += qi[c] * kj[c];
          p[j] = s * sc;
          mx = std::max(mx, p[j]);
        }
        T z = 0;
        for (int j = 0; j < jmax; ++j) z += (p[j] = std::exp(p[j] - mx));
        for (int j = 0; j < jmax; ++j) p[j] /= z;
        T* o = out.row(b * tq + i) + h * dh;
        for (int j = 0; j < jmax; ++j) {
          const T* vj = Vv.row(shared ? j : b * tk + j) + h * dh;
          for (int c = 0; c < dh; ++c) o[c] += p[j] * vj[c];
        }
      }
  const int iq = q.id, ik = k.id, iv = v.id;
  return q.tape->push(
      std::move(out), {q, k, v},
      [iq, ik, iv, batch, tq, tk, heads, dh, sc, shared, P = std::move(P)](Tape<T>& t, int self) {
        const auto& G = t.grad(self);
        const auto& Q = t.value(iq);
        const auto& K = t.value(ik);
        const auto& Vv = t.value(iv);
        Tensor<T>* dQ = t.needs_grad(iq) ? &t.grad(iq) : nullptr;
        Tensor<T>* dK = t.needs_grad(ik) ? &t.grad(ik) : nullptr;
        Tensor<T>* dV = t.needs_grad(iv) ? &t.grad(iv) : nullptr;
        std::vector<T> dp(static_cast<std::size_t>(tk));
        for (int b = 0; b < batch; ++b)
          for (int h = 0; h < heads; ++h)
            for (int i = 0; i < tq; ++i) {
              const T* p = P.row((b * heads + h) * tq + i);
              const T* g = G.row(b * tq + i) + h * dh;
              T dot = 0;
              for (int j = 0; j < tk; ++j) {
                const T* vj = Vv.row(shared ? j : b * tk + j) + h * dh;
                T s = 0;
                for (int c = 0; c < dh; ++c) s += g[c] * vj[c];
                dp[j] = s;
                dot += s * p[j];
                if (dV && p[j] != T(0)) {
                  T* dv = dV->row(shared ? j : b * tk + j) + h * dh;
                  for (int c = 0; c < dh; ++c) dv[c] += p[j] * g[c];
                }
              }
              const T* qi = Q.row(b * tq + i) + h * dh;
              for (int j = 0; j < tk; ++j) {
                const T ds = p[j] * (dp[j] - dot) * sc;
                if (ds == T(0)) continue;
                const T* kj = K.row(shared ? j : b * tk + j) + h * dh;
                if (dQ) {
                  T* dq = dQ->row(b * tq + i) + h * dh;
                  for (int c = 0; c < dh; ++c) dq[c] += ds * kj[c];
                }
                if (dK) {
                  T* dk = dK->row(shared ? j : b * tk + j) + h * dh;
                  for (int c = 0; c < dh; ++c) dk[c] += ds * qi[c];
                }
              }
            }
      });
}

template <class T>
Var<T> softmax_xent(Var<T> logits, const std::vector<int>& targets) {
  const auto& L = logits.value();
  SYNCAP_CHECK(static_cast<int>(targets.size()) == L.rows, "softmax_xent",
        std::to_string(targets.size()) + " targets for " + dims(L));
  if (L.cols < 2) throw ShapeError("softmax_xent: need at least two classes");
  Tensor<T> Pr(L.rows, L.cols);
  T loss = 0;
  for (int r = 0; r < L.rows; ++r) {
    const int y = targets[static_cast<std::size_t>(r)];
    if (y == -1) continue;
    if (y < 0 || y >= L.cols)
      throw IndexError("softmax_xent: target " + std::to_string(y) + " outside vocabulary of " +
                       std::to_string(L.cols));
    const T* x = L.row(r);
    T* p = Pr.row(r);
    const T mx = *std::max_element(x, x + L.cols);
    T s = 0;
    for (int j = 0; j < L.cols; ++j) s += (p[j] = std::exp(x[j] - mx));
    for (int j = 0; j < L.cols; ++j) p[j] /= s;
    loss += -(x[y] - mx - std::log(s));
  }
  const int il = logits.id;
  return logits.tape->push(Tensor<T>(1, 1, loss), {logits},
                           [il, targets, Pr = std::move(Pr)](Tape<T>& t, int self) {
    const T g = t.grad(self).data[0];
    auto& d = t.grad(il);
    for (int r = 0; r < d.rows; ++r) {
      const int y = targets[static_cast<std::size_t>(r)];
      if (y == -1) continue;
      const T* p = Pr.row(r);
      T* dr = d.row(r);
      for (int j = 0; j < d.cols; ++j) dr[j] += g * p[j];
      dr[y] -= g;
    }
  });
}

template <class T>
Var<T> vse_hardest_loss(Var<T> img, Var<T> sen, T margin) {
  const auto& I = img.value();
  const auto& S = sen.value();
  const int N = I.rows;
  SYNCAP_CHECK(I.same_shape(S), "vse_hardest_loss", dims(I) + " vs " + dims(S));
  if (N < 2) throw EmptyInputError("contrastive loss needs at least two pairs");
  Tensor<T> sim(N, N);
  kernels::gemm_nt(N, I.cols, N, I.data.data(), S.data.data(), sim.data.data(), scratch<T>());
  // For pair i: hardest caption negative for image i, hardest image negative for caption i.
  std::vector<int> neg_s(static_cast<std::size_t>(N)), neg_i(static_cast<std::size_t>(N));
  std::vector<char> act_s(static_cast<std::size_t>(N)), act_i(static_cast<std::size_t>(N));
  T loss = 0;
  for (int i = 0; i < N; ++i) {
    int js = -1, ki = -1;
    for (int j = 0; j < N; ++j) {
      if (j == i) continue;
      if (js < 0 || sim(i, j) > sim(i, js)) js = j;
      if (ki < 0 || sim(j, i) > sim(ki, i)) ki = j;
    }
    const T hs = margin - sim(i, i) + sim(i, js);
    const T hi = margin - sim(i, i) + sim(ki, i);
    neg_s[i] = js;
    neg_i[i] = ki;
    act_s[i] = hs > 0;
    act_i[i] = hi > 0;
    loss += std::max(hs, T(0)) + std::max(hi, T(0));
  }
  const int ii = img.id, is = sen.id;
  return img.tape->push(Tensor<T>(1, 1, loss), {img, sen},
                        [ii, is, N, neg_s, neg_i, act_s, act_i](Tape<T>& t, int self) {
    const T g = t.grad(self).data[0];
    Tensor<T> dsim(N, N);
    for (int i = 0; i < N; ++i) {
      if (act_s[i]) {
        dsim(i, i) -= g;
        dsim(i, neg_s[i]) += g;
      }
      if (act_i[i]) {
        dsim(i, i) -= g;
        dsim(neg_i[i], i) += g;
      }
    }
    const auto& I = t.value(ii);
    const auto& S = t.value(is);
    if (t.needs_grad(ii))
      kernels::gemm_nn(N, N, I.cols, dsim.data.data(), S.data.data(), t.grad(ii).data.data());
    if (t.needs_grad(is))
      kernels::gemm_tn(N, N, I.cols, dsim.data.data(), I.data.data(), t.grad(is).data.data());
  });
}

#define SYNCAP_INSTANTIATE(T)                                                              \
  template Var<T> matmul(Var<T>, Var<T>);                                                  \
  template Var<T> add(Var<T>, Var<T>);                                                     \
  template Var<T> sub(Var<T>, Var<T>);                                                     \
  template Var<T> mul(Var<T>, Var<T>);                                                     \
  template Var<T> scale(Var<T>, T);                                                        \
  template Var<T> sigmoid(Var<T>);                                                         \
  template Var<T> tanh(Var<T>);                                                            \
  template Var<T> gelu(Var<T>);                                                            \
  template Var<T> concat_cols(const std::vector<Var<T>>&);                                 \
  template Var<T> concat_rows(const std::vector<Var<T>>&);                                 \
  template Var<T> slice_cols(Var<T>, int, int);                                            \
  template Var<T> slice_rows(Var<T>, int, int);                                            \
  template Var<T> gather_rows(Var<T>, const std::vector<int>&);                            \
  template Var<T> transpose(Var<T>);                                                       \
  template Var<T> softmax_rows(Var<T>);                                                    \
  template Var<T> mean_rows(Var<T>);                                                       \
  template Var<T> sum_all(Var<T>);                                                         \
  template Var<T> l2_normalize_rows(Var<T>);                                               \
  template Var<T> layer_norm(Var<T>, Var<T>, Var<T>, T);                                   \
  template Var<T> lstm_gates(Var<T>, Var<T>);                                              \
  template Var<T> additive_scores(Var<T>, Var<T>, Var<T>, int);                            \
  template Var<T> pool_regions(Var<T>, Var<T>);                                            \
  template Attention<T> attention(Var<T>, Var<T>, Var<T>, Var<T>, int);                    \
  template Var<T> multihead_attention(Var<T>, Var<T>, Var<T>, int, int, int, int, bool);   \
  template Var<T> softmax_xent(Var<T>, const std::vector<int>&);                           \
  template Var<T> vse_hardest_loss(Var<T>, Var<T>, T);

SYNCAP_INSTANTIATE(float)
SYNCAP_INSTANTIATE(double)

#undef SYNCAP_CHECK

}  // namespace syncap::num
