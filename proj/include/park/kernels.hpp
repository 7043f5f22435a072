#pragma once

#include <cstdint>

namespace park::kernels {

// Dense double-precision kernels used by the tensor graph. Every kernel
// assigns each output element to exactly one iteration and keeps the
// per-element accumulation order fixed, so results are bit-identical across
// thread counts and identical to the serial reference below.

// c[m,n] = a[m,k] * b[k,n]
void gemm(const double* a, const double* b, double* c, int m, int k, int n);

// c[m,n] += a[m,k] * b[k,n]
void gemm_acc(const double* a, const double* b, double* c, int m, int k, int n);

// c[m,n] += a[m,k] * b[n,k]^T   (b stored row-major [n,k])
void gemm_nt_acc(const double* a, const double* b, double* c, int m, int k,
                 int n);

// c[m,n] += a[k,m]^T * b[k,n]   (a stored row-major [k,m])
void gemm_tn_acc(const double* a, const double* b, double* c, int m, int k,
                 int n);

// out[cols,rows] = in[rows,cols]^T
void transpose(const double* in, double* out, int rows, int cols);

// Serial reference implementations, same loop orders without the OpenMP
// pragmas. Kept for testing and benchmarking the parallel kernels.
namespace serial {
void gemm(const double* a, const double* b, double* c, int m, int k, int n);
void gemm_acc(const double* a, const double* b, double* c, int m, int k, int n);
void gemm_nt_acc(const double* a, const double* b, double* c, int m, int k,
                 int n);
void gemm_tn_acc(const double* a, const double* b, double* c, int m, int k,
                 int n);
}  // namespace serial

}  // namespace park::kernels
