#include "park/kernels.hpp"

#include <vector>

namespace park::kernels {

// Threading threshold: tiny products are cheaper single-threaded.
static constexpr int64_t kParallelFlops = 1 << 16;

void gemm(const double* a, const double* b, double* c, int m, int k, int n) {
  const int64_t work = static_cast<int64_t>(m) * k * n;
#pragma omp parallel for schedule(static) if (work > kParallelFlops)
  for (int i = 0; i < m; ++i) {
    double* __restrict__ ci = c + static_cast<int64_t>(i) * n;
    for (int j = 0; j < n; ++j) ci[j] = 0.0;
    const double* ai = a + static_cast<int64_t>(i) * k;
    for (int kk = 0; kk < k; ++kk) {
      const double av = ai[kk];
      const double* __restrict__ bk = b + static_cast<int64_t>(kk) * n;
      for (int j = 0; j < n; ++j) ci[j] += av * bk[j];
    }
  }
}

void gemm_acc(const double* a, const double* b, double* c, int m, int k,
              int n) {
  const int64_t work = static_cast<int64_t>(m) * k * n;
#pragma omp parallel for schedule(static) if (work > kParallelFlops)
  for (int i = 0; i < m; ++i) {
    double* __restrict__ ci = c + static_cast<int64_t>(i) * n;
    const double* ai = a + static_cast<int64_t>(i) * k;
    for (int kk = 0; kk < k; ++kk) {
      const double av = ai[kk];
      const double* __restrict__ bk = b + static_cast<int64_t>(kk) * n;
      for (int j = 0; j < n; ++j) ci[j] += av * bk[j];
    }
  }
}

void gemm_nt_acc(const double* a, const double* b, double* c, int m, int k,
                 int n) {
  // b arrives row-major [n,k]; materialize b^T once so the inner loop stays
  // unit-stride, then reuse the accumulate kernel's loop order.
  std::vector<double> bt(static_cast<size_t>(k) * n);
  transpose(b, bt.data(), n, k);
  gemm_acc(a, bt.data(), c, m, k, n);
}

void gemm_tn_acc(const double* a, const double* b, double* c, int m, int k,
                 int n) {
  const int64_t work = static_cast<int64_t>(m) * k * n;
#pragma omp parallel for schedule(static) if (work > kParallelFlops)
  for (int i = 0; i < m; ++i) {
    double* __restrict__ ci = c + static_cast<int64_t>(i) * n;
    for (int kk = 0; kk < k; ++kk) {
      const double av = a[static_cast<int64_t>(kk) * m + i];
      const double* __restrict__ bk = b + static_cast<int64_t>(kk) * n;
      for (int j = 0; j < n; ++j) ci[j] += av * bk[j];
    }
  }
}

void transpose(const double* in, double* out, int rows, int cols) {
  for (int i = 0; i < rows; ++i)
    for (int j = 0; j < cols; ++j)
      out[static_cast<int64_t>(j) * rows + i] =
          in[static_cast<int64_t>(i) * cols + j];
}

namespace serial {

void gemm(const double* a, const double* b, double* c, int m, int k, int n) {
  for (int i = 0; i < m; ++i) {
    double* ci = c + static_cast<int64_t>(i) * n;
    for (int j = 0; j < n; ++j) ci[j] = 0.0;
    const double* ai = a + static_cast<int64_t>(i) * k;
    for (int kk = 0; kk < k; ++kk) {
      const double av = ai[kk];
      const double* bk = b + static_cast<int64_t>(kk) * n;
      for (int j = 0; j < n; ++j) ci[j] += av * bk[j];
    }
  }
}

void gemm_acc(const double* a, const double* b, double* c, int m, int k,
              int n) {
  for (int i = 0; i < m; ++i) {
    double* ci = c + static_cast<int64_t>(i) * n;
    const double* ai = a + static_cast<int64_t>(i) * k;
    for (int kk = 0; kk < k; ++kk) {
      const double av = ai[kk];
      const double* bk = b + static_cast<int64_t>(kk) * n;
      for (int j = 0; j < n; ++j) ci[j] += av * bk[j];
    }
  }
}

void gemm_nt_acc(const double* a, const double* b, double* c, int m, int k,
                 int n) {
  std::vector<double> bt(static_cast<size_t>(k) * n);
  park::kernels::transpose(b, bt.data(), n, k);
  gemm_acc(a, bt.data(), c, m, k, n);
}

void gemm_tn_acc(const double* a, const double* b, double* c, int m, int k,
                 int n) {
  for (int i = 0; i < m; ++i) {
    double* ci = c + static_cast<int64_t>(i) * n;
    for (int kk = 0; kk < k; ++kk) {
      const double av = a[static_cast<int64_t>(kk) * m + i];
      const double* bk = b + static_cast<int64_t>(kk) * n;
      for (int j = 0; j < n; ++j) ci[j] += av * bk[j];
    }
  }
}

}  // namespace serial

}  // namespace park::kernels
