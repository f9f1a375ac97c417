#pragma once

#include <algorithm>
#include <cstddef>
#include <vector>

#include "syncap/errors.hpp"

namespace syncap::num {

/// Row-major matrix. Vectors are 1 x n; scalars 1 x 1.
template <class T>
struct Tensor {
  int rows = 0;
  int cols = 0;
  std::vector<T> data;

  Tensor() = default;
  Tensor(int r, int c, T fill = T(0))
      : rows(r), cols(c), data(static_cast<std::size_t>(r) * static_cast<std::size_t>(c), fill) {
    if (r < 0 || c < 0) throw ShapeError("negative tensor dimension");
  }
  Tensor(int r, int c, std::vector<T> d) : rows(r), cols(c), data(std::move(d)) {
    if (data.size() != static_cast<std::size_t>(r) * static_cast<std::size_t>(c))
      throw ShapeError("tensor data does not match shape");
  }

  std::size_t size() const { return data.size(); }
  bool empty() const { return data.empty(); }
  std::vector<int> shape() const { return {rows, cols}; }
  bool same_shape(const Tensor& o) const { return rows == o.rows && cols == o.cols; }

  T& operator()(int r, int c) { return data[static_cast<std::size_t>(r) * cols + c]; }
  T operator()(int r, int c) const { return data[static_cast<std::size_t>(r) * cols + c]; }
  T* row(int r) { return data.data() + static_cast<std::size_t>(r) * cols; }
  const T* row(int r) const { return data.data() + static_cast<std::size_t>(r) * cols; }

  void fill(T v) { std::fill(data.begin(), data.end(), v); }

  template <class U>
  Tensor<U> cast() const {
    Tensor<U> out(rows, cols);
    for (std::size_t i = 0; i < data.size(); ++i) out.data[i] = static_cast<U>(data[i]);
    return out;
  }
};

namespace kernels {

// C[m,n] += A[m,k] * B[k,n]. Four rows of B are folded into each pass
// over a row of C.
template <class T>
inline void gemm_nn(int m, int k, int n, const T* __restrict a, const T* __restrict b,
                    T* __restrict c) {
  const auto N = static_cast<std::size_t>(n);
  for (int i = 0; i < m; ++i) {
    T* __restrict ci = c + static_cast<std::size_t>(i) * N;
    const T* ai = a + static_cast<std::size_t>(i) * k;
    int p = 0;
    for (; p + 4 <= k; p += 4) {
      const T s0 = ai[p], s1 = ai[p + 1], s2 = ai[p + 2], s3 = ai[p + 3];
      const T* b0 = b + static_cast<std::size_t>(p) * N;
      const T* b1 = b0 + N;
      const T* b2 = b1 + N;
      const T* b3 = b2 + N;
      for (int j = 0; j < n; ++j) ci[j] += s0 * b0[j] + s1 * b1[j] + s2 * b2[j] + s3 * b3[j];
    }
    for (; p < k; ++p) {
      const T s = ai[p];
      const T* bp = b + static_cast<std::size_t>(p) * N;
      for (int j = 0; j < n; ++j) ci[j] += s * bp[j];
    }
  }
}

// C[k,n] += A[m,k]^T * D[m,n], four rows of A and D per pass.
template <class T>
inline void gemm_tn(int m, int k, int n, const T* __restrict a, const T* __restrict d,
                    T* __restrict c) {
  const auto N = static_cast<std::size_t>(n), K = static_cast<std::size_t>(k);
  int i = 0;
  for (; i + 4 <= m; i += 4) {
    const T* a0 = a + static_cast<std::size_t>(i) * K;
    const T* d0 = d + static_cast<std::size_t>(i) * N;
    const T* d1 = d0 + N;
    const T* d2 = d1 + N;
    const T* d3 = d2 + N;
    for (int p = 0; p < k; ++p) {
      const T s0 = a0[p], s1 = a0[K + p], s2 = a0[2 * K + p], s3 = a0[3 * K + p];
      T* __restrict cp = c + static_cast<std::size_t>(p) * N;
      for (int j = 0; j < n; ++j) cp[j] += s0 * d0[j] + s1 * d1[j] + s2 * d2[j] + s3 * d3[j];
    }
  }
  for (; i < m; ++i) {
    const T* ai = a + static_cast<std::size_t>(i) * K;
    const T* di = d + static_cast<std::size_t>(i) * N;
    for (int p = 0; p < k; ++p) {
      const T s = ai[p];
      T* __restrict cp = c + static_cast<std::size_t>(p) * N;
      for (int j = 0; j < n; ++j) cp[j] += s * di[j];
    }
  }
}

// out[n,k] = B[k,n]^T
template <class T>
inline void transpose(int k, int n, const T* b, T* out) {
  for (int p = 0; p < k; ++p)
    for (int j = 0; j < n; ++j) out[static_cast<std::size_t>(j) * k + p] = b[static_cast<std::size_t>(p) * n + j];
}

// C[m,k] += D[m,n] * B[k,n]^T, via an explicit transpose of B.
template <class T>
inline void gemm_nt(int m, int n, int k, const T* d, const T* b, T* c,
                    std::vector<T>& scratch) {
  scratch.resize(static_cast<std::size_t>(n) * k);
  transpose(k, n, b, scratch.data());
  gemm_nn(m, n, k, d, scratch.data(), c);
}

}  // namespace kernels

}  // namespace syncap::num
