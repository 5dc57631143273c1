#pragma once

#include <cstddef>

namespace asmatch {

// Dense double-precision kernels. Each has a serial reference and an OpenMP
// variant; the parallel versions keep per-element operation order identical
// to the reference, so outputs match bit for bit.

/// c[n x m] = a[n x k] * b[k x m]
void matmul_serial(const double* a, const double* b, double* c, int n, int k, int m);
void matmul_omp(const double* a, const double* b, double* c, int n, int k, int m);

/// c[n x m] = a[n x k] * b[m x k]^T
void matmul_nt_serial(const double* a, const double* b, double* c, int n, int k, int m);
void matmul_nt_omp(const double* a, const double* b, double* c, int n, int k, int m);

/// out[j] += sum_i a[i x cols] rows (column sums); the matmul backward reduction
void column_sums_serial(const double* a, double* out, int rows, int cols);

/// Dispatchers: route to OpenMP above a size threshold, serial otherwise.
void matmul(const double* a, const double* b, double* c, int n, int k, int m);
void matmul_nt(const double* a, const double* b, double* c, int n, int k, int m);

/// Work size above which the dispatchers go parallel.
constexpr std::size_t kParallelFlopThreshold = 1u << 21;

}  // namespace asmatch
