#pragma once

#include <algorithm>
#include <cstdint>
#include <vector>

#include "martnet/common.hpp"

#ifdef _OPENMP
#include <omp.h>
#endif

namespace martnet {

// Dense row-major 2-D array of doubles. Scalars are 1x1, vectors are n x 1.
struct Tensor {
  int64_t rows = 0;
  int64_t cols = 0;
  std::vector<double> v;

  Tensor() = default;
  Tensor(int64_t r, int64_t c) : rows(r), cols(c), v(size_t(r * c), 0.0) {}
  Tensor(int64_t r, int64_t c, std::vector<double> data)
      : rows(r), cols(c), v(std::move(data)) {
    require(int64_t(v.size()) == r * c, "tensor: shape does not match data length");
  }

  int64_t size() const { return rows * cols; }
  double& at(int64_t i, int64_t j) { return v[size_t(i * cols + j)]; }
  double at(int64_t i, int64_t j) const { return v[size_t(i * cols + j)]; }
  double* data() { return v.data(); }
  const double* data() const { return v.data(); }

  static Tensor scalar(double x) {
    Tensor t(1, 1);
    t.v[0] = x;
    return t;
  }
  bool same_shape(const Tensor& o) const { return rows == o.rows && cols == o.cols; }
  bool all_finite() const {
    for (double x : v)
      if (!std::isfinite(x)) return false;
    return true;
  }
};

// ---------------------------------------------------------------------------
// Matmul kernels. All of them assign whole output rows (or fixed row blocks)
// to one thread and keep a fixed accumulation order, so results are bitwise
// identical for any thread count.
// ---------------------------------------------------------------------------

// C[m x n] = A[m x k] * B[n x k]^T   (row-by-row dot products)
inline void matmul_nt(const double* A, int64_t m, int64_t k, const double* B,
                      int64_t n, double* C) {
#ifdef _OPENMP
#pragma omp parallel for schedule(static)
#endif
  for (int64_t i = 0; i < m; ++i) {
    const double* a = A + i * k;
    double* c = C + i * n;
    for (int64_t j = 0; j < n; ++j) {
      const double* b = B + j * k;
      double s = 0.0;
      for (int64_t t = 0; t < k; ++t) s += a[t] * b[t];
      c[j] = s;
    }
  }
}

// C[m x n] = A[m x p] * B[p x n]   (row-axpy; used for dX = dC * W)
inline void matmul_nn(const double* A, int64_t m, int64_t p, const double* B,
                      int64_t n, double* C) {
#ifdef _OPENMP
#pragma omp parallel for schedule(static)
#endif
  for (int64_t i = 0; i < m; ++i) {
    const double* a = A + i * p;
    double* c = C + i * n;
    for (int64_t j = 0; j < n; ++j) c[j] = 0.0;
    for (int64_t t = 0; t < p; ++t) {
      const double av = a[t];
      const double* b = B + t * n;
      for (int64_t j = 0; j < n; ++j) c[j] += av * b[j];
    }
  }
}

// C[n x k] += A[m x n]^T * B[m x k]  (dW accumulation). Fixed-size row blocks
// are reduced serially in block order; the block size is a constant so the
// result does not depend on the thread count.
inline void matmul_tn_acc(const double* A, int64_t m, int64_t n, const double* B,
                          int64_t k, double* C) {
  constexpr int64_t kBlock = 8192;
  const int64_t nblocks = (m + kBlock - 1) / kBlock;
  std::vector<double> partial(size_t(nblocks * n * k), 0.0);
#ifdef _OPENMP
#pragma omp parallel for schedule(static)
#endif
  for (int64_t blk = 0; blk < nblocks; ++blk) {
    double* P = partial.data() + blk * n * k;
    const int64_t lo = blk * kBlock;
    const int64_t hi = std::min(m, lo + kBlock);
    for (int64_t i = lo; i < hi; ++i) {
      const double* a = A + i * n;
      const double* b = B + i * k;
      for (int64_t j = 0; j < n; ++j) {
        const double av = a[j];
        if (av == 0.0) continue;
        double* p = P + j * k;
        for (int64_t t = 0; t < k; ++t) p[t] += av * b[t];
      }
    }
  }
  for (int64_t blk = 0; blk < nblocks; ++blk) {
    const double* P = partial.data() + blk * n * k;
    for (int64_t u = 0; u < n * k; ++u) C[u] += P[u];
  }
}

// out[j] += sum_i A[i x n] column sums, blocked like matmul_tn_acc.
inline void colsum_acc(const double* A, int64_t m, int64_t n, double* out) {
  constexpr int64_t kBlock = 8192;
  const int64_t nblocks = (m + kBlock - 1) / kBlock;
  std::vector<double> partial(size_t(nblocks * n), 0.0);
#ifdef _OPENMP
#pragma omp parallel for schedule(static)
#endif
  for (int64_t blk = 0; blk < nblocks; ++blk) {
    double* p = partial.data() + blk * n;
    const int64_t lo = blk * kBlock;
    const int64_t hi = std::min(m, lo + kBlock);
    for (int64_t i = lo; i < hi; ++i) {
      const double* a = A + i * n;
      for (int64_t j = 0; j < n; ++j) p[j] += a[j];
    }
  }
  for (int64_t blk = 0; blk < nblocks; ++blk) {
    const double* p = partial.data() + blk * n;
    for (int64_t j = 0; j < n; ++j) out[j] += p[j];
  }
}

}  // namespace martnet
