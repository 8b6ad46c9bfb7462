#pragma once

// Dense CPU kernels used by the tensor layer. Every kernel has a serial
// reference path and an OpenMP path. The OpenMP path only parallelizes
// across independent output rows/elements, so both backends produce
// bit-identical results for any thread count.

#include <cmath>
#include <cstdint>
#include <limits>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace ctxempath::kernels {

enum class Backend { Serial, OpenMP };

Backend backend();
void set_backend(Backend b);
bool openmp_compiled();

// Worker cap, seeded from CTX_EMPATH_THREADS at first use.
int thread_cap();
void set_thread_cap(int n);

namespace detail {
inline bool par() { return backend() == Backend::OpenMP; }
}  // namespace detail

// ---------------------------------------------------------------------------
// GEMM
// ---------------------------------------------------------------------------
// Row-major C(m,n) = op(A) * op(B), optionally accumulating into C.
// op(A) is m x k; stored A is k x m when trans_a. Same pattern for B.

template <class T>
inline void gemm_row(bool trans_a, bool trans_b, int i, int m, int n, int k,
                     const T* a, const T* b, T* c_row, bool accumulate) {
  (void)m;
  if (!trans_b) {
    if (!accumulate) {
      for (int j = 0; j < n; ++j) c_row[j] = T(0);
    }
    for (int kk = 0; kk < k; ++kk) {
      const T aik = trans_a ? a[static_cast<long>(kk) * m + i]
                            : a[static_cast<long>(i) * k + kk];
      const T* brow = b + static_cast<long>(kk) * n;
      for (int j = 0; j < n; ++j) c_row[j] += aik * brow[j];
    }
  } else {
    // B stored n x k: dot products over contiguous rows of B.
    for (int j = 0; j < n; ++j) {
      const T* brow = b + static_cast<long>(j) * k;
      T s = T(0);
      if (trans_a) {
        for (int kk = 0; kk < k; ++kk) s += a[static_cast<long>(kk) * m + i] * brow[kk];
      } else {
        const T* arow = a + static_cast<long>(i) * k;
        for (int kk = 0; kk < k; ++kk) s += arow[kk] * brow[kk];
      }
      c_row[j] = accumulate ? c_row[j] + s : s;
    }
  }
}

template <class T>
void gemm_batched_serial(bool trans_a, bool trans_b, int batch, int m, int n, int k,
                         const T* a, long stride_a, const T* b, long stride_b,
                         T* c, long stride_c, bool accumulate) {
  for (int bi = 0; bi < batch; ++bi)
    for (int i = 0; i < m; ++i)
      gemm_row(trans_a, trans_b, i, m, n, k, a + bi * stride_a, b + bi * stride_b,
               c + bi * stride_c + static_cast<long>(i) * n, accumulate);
}

template <class T>
void gemm_batched_omp(bool trans_a, bool trans_b, int batch, int m, int n, int k,
                      const T* a, long stride_a, const T* b, long stride_b,
                      T* c, long stride_c, bool accumulate) {
#ifdef _OPENMP
#pragma omp parallel for collapse(2) schedule(static) num_threads(thread_cap())
  for (int bi = 0; bi < batch; ++bi)
    for (int i = 0; i < m; ++i)
      gemm_row(trans_a, trans_b, i, m, n, k, a + bi * stride_a, b + bi * stride_b,
               c + bi * stride_c + static_cast<long>(i) * n, accumulate);
#else
  gemm_batched_serial(trans_a, trans_b, batch, m, n, k, a, stride_a, b, stride_b, c,
                      stride_c, accumulate);
#endif
}

template <class T>
inline void gemm_batched(bool trans_a, bool trans_b, int batch, int m, int n, int k,
                         const T* a, long stride_a, const T* b, long stride_b,
                         T* c, long stride_c, bool accumulate = false) {
  if (detail::par())
    gemm_batched_omp(trans_a, trans_b, batch, m, n, k, a, stride_a, b, stride_b, c,
                     stride_c, accumulate);
  else
    gemm_batched_serial(trans_a, trans_b, batch, m, n, k, a, stride_a, b, stride_b, c,
                        stride_c, accumulate);
}

template <class T>
inline void gemm(bool trans_a, bool trans_b, int m, int n, int k, const T* a,
                 const T* b, T* c, bool accumulate = false) {
  gemm_batched(trans_a, trans_b, 1, m, n, k, a, 0, b, 0, c, 0, accumulate);
}

// ---------------------------------------------------------------------------
// Softmax over the last axis
// ---------------------------------------------------------------------------
// Masked variant: mask has one byte per key, shared by groups of
// `rows_per_mask` consecutive rows (mask row = row / rows_per_mask).
// Masked-out keys get probability exactly 0.

template <class T>
inline void softmax_one_row(int cols, const T* x, const uint8_t* mask, T* y) {
  T maxv = -std::numeric_limits<T>::infinity();
  for (int j = 0; j < cols; ++j)
    if ((!mask || mask[j]) && x[j] > maxv) maxv = x[j];
  T denom = T(0);
  for (int j = 0; j < cols; ++j) {
    if (!mask || mask[j]) {
      y[j] = std::exp(x[j] - maxv);
      denom += y[j];
    } else {
      y[j] = T(0);
    }
  }
  const T inv = T(1) / denom;
  for (int j = 0; j < cols; ++j) y[j] *= inv;
}

template <class T>
void softmax_rows_serial(int rows, int cols, const T* x, const uint8_t* mask,
                         int rows_per_mask, T* y) {
  for (int r = 0; r < rows; ++r) {
    const uint8_t* mrow = mask ? mask + static_cast<long>(r / rows_per_mask) * cols : nullptr;
    softmax_one_row(cols, x + static_cast<long>(r) * cols, mrow, y + static_cast<long>(r) * cols);
  }
}

template <class T>
void softmax_rows_omp(int rows, int cols, const T* x, const uint8_t* mask,
                      int rows_per_mask, T* y) {
#ifdef _OPENMP
#pragma omp parallel for schedule(static) num_threads(thread_cap())
  for (int r = 0; r < rows; ++r) {
    const uint8_t* mrow = mask ? mask + static_cast<long>(r / rows_per_mask) * cols : nullptr;
    softmax_one_row(cols, x + static_cast<long>(r) * cols, mrow, y + static_cast<long>(r) * cols);
  }
#else
  softmax_rows_serial(rows, cols, x, mask, rows_per_mask, y);
#endif
}

template <class T>
inline void softmax_rows(int rows, int cols, const T* x, const uint8_t* mask,
                         int rows_per_mask, T* y) {
  if (detail::par())
    softmax_rows_omp(rows, cols, x, mask, rows_per_mask, y);
  else
    softmax_rows_serial(rows, cols, x, mask, rows_per_mask, y);
}

// dx += y * (dy - <dy, y>) per row; masked keys have y == 0 so they stay 0.
template <class T>
inline void softmax_backward_rows(int rows, int cols, const T* y, const T* dy, T* dx) {
  auto body = [=](int r) {
    const T* yr = y + static_cast<long>(r) * cols;
    const T* dyr = dy + static_cast<long>(r) * cols;
    T* dxr = dx + static_cast<long>(r) * cols;
    T dot = T(0);
    for (int j = 0; j < cols; ++j) dot += dyr[j] * yr[j];
    for (int j = 0; j < cols; ++j) dxr[j] += yr[j] * (dyr[j] - dot);
  };
  if (detail::par()) {
#ifdef _OPENMP
#pragma omp parallel for schedule(static) num_threads(thread_cap())
    for (int r = 0; r < rows; ++r) body(r);
#else
    for (int r = 0; r < rows; ++r) body(r);
#endif
  } else {
    for (int r = 0; r < rows; ++r) body(r);
  }
}

// ---------------------------------------------------------------------------
// LayerNorm over the last axis
// ---------------------------------------------------------------------------

template <class T>
inline void layer_norm_rows(int rows, int cols, const T* x, const T* gamma,
                            const T* beta, T eps, T* y, T* mean_cache, T* rstd_cache) {
  auto body = [=](int r) {
    const T* xr = x + static_cast<long>(r) * cols;
    T* yr = y + static_cast<long>(r) * cols;
    T mu = T(0);
    for (int j = 0; j < cols; ++j) mu += xr[j];
    mu /= T(cols);
    T var = T(0);
    for (int j = 0; j < cols; ++j) {
      const T d = xr[j] - mu;
      var += d * d;
    }
    var /= T(cols);
    const T rstd = T(1) / std::sqrt(var + eps);
    mean_cache[r] = mu;
    rstd_cache[r] = rstd;
    for (int j = 0; j < cols; ++j) yr[j] = gamma[j] * ((xr[j] - mu) * rstd) + beta[j];
  };
  if (detail::par()) {
#ifdef _OPENMP
#pragma omp parallel for schedule(static) num_threads(thread_cap())
    for (int r = 0; r < rows; ++r) body(r);
#else
    for (int r = 0; r < rows; ++r) body(r);
#endif
  } else {
    for (int r = 0; r < rows; ++r) body(r);
  }
}

template <class T>
inline void layer_norm_backward_rows(int rows, int cols, const T* x, const T* gamma,
                                     const T* mean_cache, const T* rstd_cache,
                                     const T* dy, T* dx, T* dgamma, T* dbeta) {
  // Parameter grads reduce over rows; loop over columns so each output
  // element has one writer.
  auto col_body = [=](int j) {
    T dg = T(0), db = T(0);
    for (int r = 0; r < rows; ++r) {
      const long idx = static_cast<long>(r) * cols + j;
      const T xhat = (x[idx] - mean_cache[r]) * rstd_cache[r];
      dg += dy[idx] * xhat;
      db += dy[idx];
    }
    dgamma[j] += dg;
    dbeta[j] += db;
  };
  auto row_body = [=](int r) {
    const T* xr = x + static_cast<long>(r) * cols;
    const T* dyr = dy + static_cast<long>(r) * cols;
    T* dxr = dx + static_cast<long>(r) * cols;
    const T mu = mean_cache[r];
    const T rstd = rstd_cache[r];
    T mean_g = T(0), mean_gx = T(0);
    for (int j = 0; j < cols; ++j) {
      const T g = gamma[j] * dyr[j];
      const T xhat = (xr[j] - mu) * rstd;
      mean_g += g;
      mean_gx += g * xhat;
    }
    mean_g /= T(cols);
    mean_gx /= T(cols);
    for (int j = 0; j < cols; ++j) {
      const T g = gamma[j] * dyr[j];
      const T xhat = (xr[j] - mu) * rstd;
      dxr[j] += rstd * (g - mean_g - xhat * mean_gx);
    }
  };
  if (detail::par()) {
#ifdef _OPENMP
#pragma omp parallel for schedule(static) num_threads(thread_cap())
    for (int j = 0; j < cols; ++j) col_body(j);
#pragma omp parallel for schedule(static) num_threads(thread_cap())
    for (int r = 0; r < rows; ++r) row_body(r);
#else
    for (int j = 0; j < cols; ++j) col_body(j);
    for (int r = 0; r < rows; ++r) row_body(r);
#endif
  } else {
    for (int j = 0; j < cols; ++j) col_body(j);
    for (int r = 0; r < rows; ++r) row_body(r);
  }
}

// ---------------------------------------------------------------------------
// GELU (tanh approximation)
// ---------------------------------------------------------------------------

template <class T>
inline T gelu_scalar(T x) {
  const T a = T(0.7978845608028654);  // sqrt(2/pi)
  const T u = a * (x + T(0.044715) * x * x * x);
  return T(0.5) * x * (T(1) + std::tanh(u));
}

template <class T>
inline T gelu_grad_scalar(T x) {
  const T a = T(0.7978845608028654);
  const T u = a * (x + T(0.044715) * x * x * x);
  const T t = std::tanh(u);
  const T du = a * (T(1) + T(3) * T(0.044715) * x * x);
  return T(0.5) * (T(1) + t) + T(0.5) * x * (T(1) - t * t) * du;
}

template <class T>
inline void gelu(long n, const T* x, T* y) {
  if (detail::par()) {
#ifdef _OPENMP
#pragma omp parallel for schedule(static) num_threads(thread_cap())
    for (long i = 0; i < n; ++i) y[i] = gelu_scalar(x[i]);
#else
    for (long i = 0; i < n; ++i) y[i] = gelu_scalar(x[i]);
#endif
  } else {
    for (long i = 0; i < n; ++i) y[i] = gelu_scalar(x[i]);
  }
}

template <class T>
inline void gelu_backward(long n, const T* x, const T* dy, T* dx) {
  if (detail::par()) {
#ifdef _OPENMP
#pragma omp parallel for schedule(static) num_threads(thread_cap())
    for (long i = 0; i < n; ++i) dx[i] += dy[i] * gelu_grad_scalar(x[i]);
#else
    for (long i = 0; i < n; ++i) dx[i] += dy[i] * gelu_grad_scalar(x[i]);
#endif
  } else {
    for (long i = 0; i < n; ++i) dx[i] += dy[i] * gelu_grad_scalar(x[i]);
  }
}

// ---------------------------------------------------------------------------
// Elementwise / broadcast / reductions
// ---------------------------------------------------------------------------

template <class T, class F>
inline void elementwise(long n, F&& f) {
  if (detail::par()) {
#ifdef _OPENMP
#pragma omp parallel for schedule(static) num_threads(thread_cap())
    for (long i = 0; i < n; ++i) f(i);
#else
    for (long i = 0; i < n; ++i) f(i);
#endif
  } else {
    for (long i = 0; i < n; ++i) f(i);
  }
}

// y = a + b where b repeats every `cols` elements (suffix broadcast).
template <class T>
inline void add_rows_bcast(long rows, long cols, const T* a, const T* b, T* y) {
  elementwise<T>(rows * cols, [=](long i) { y[i] = a[i] + b[i % cols]; });
}

// db[j] += sum over rows of dy[., j]
template <class T>
inline void reduce_rows_sum(long rows, long cols, const T* dy, T* db) {
  auto body = [=](long j) {
    T s = T(0);
    for (long r = 0; r < rows; ++r) s += dy[r * cols + j];
    db[j] += s;
  };
  if (detail::par()) {
#ifdef _OPENMP
#pragma omp parallel for schedule(static) num_threads(thread_cap())
    for (long j = 0; j < cols; ++j) body(j);
#else
    for (long j = 0; j < cols; ++j) body(j);
#endif
  } else {
    for (long j = 0; j < cols; ++j) body(j);
  }
}

// Serial on purpose: accumulation order defines the result bit-for-bit.
template <class T>
inline double sum_all(long n, const T* x) {
  double s = 0.0;
  for (long i = 0; i < n; ++i) s += static_cast<double>(x[i]);
  return s;
}

template <class T>
inline double sum_sq(long n, const T* x) {
  double s = 0.0;
  for (long i = 0; i < n; ++i) s += static_cast<double>(x[i]) * static_cast<double>(x[i]);
  return s;
}

// ---------------------------------------------------------------------------
// Embedding
// ---------------------------------------------------------------------------

template <class T>
inline void gather_rows(long n_ids, long cols, const T* table, const int32_t* ids, T* out) {
  elementwise<T>(n_ids, [=](long i) {
    const T* src = table + static_cast<long>(ids[i]) * cols;
    T* dst = out + i * cols;
    for (long j = 0; j < cols; ++j) dst[j] = src[j];
  });
}

// Serial: several ids may address the same table row.
template <class T>
inline void scatter_add_rows(long n_ids, long cols, T* table_grad, const int32_t* ids,
                             const T* dout) {
  for (long i = 0; i < n_ids; ++i) {
    T* dst = table_grad + static_cast<long>(ids[i]) * cols;
    const T* src = dout + i * cols;
    for (long j = 0; j < cols; ++j) dst[j] += src[j];
  }
}

// ---------------------------------------------------------------------------
// Adam
// ---------------------------------------------------------------------------
// p -= lr * mhat / (sqrt(vhat) + eps) with mhat = m/bc1, vhat = v/bc2.

template <class T>
inline void adam_update(long n, T* p, const T* g, T* m, T* v, T lr, T beta1, T beta2,
                        T eps, T bc1, T bc2) {
  elementwise<T>(n, [=](long i) {
    m[i] = beta1 * m[i] + (T(1) - beta1) * g[i];
    v[i] = beta2 * v[i] + (T(1) - beta2) * g[i] * g[i];
    const T mhat = m[i] / bc1;
    const T vhat = v[i] / bc2;
    p[i] -= lr * mhat / (std::sqrt(vhat) + eps);
  });
}

}  // namespace ctxempath::kernels
