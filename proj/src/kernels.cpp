#include "asmatch/kernels.hpp"

#include <cstring>

namespace asmatch {

void matmul_serial(const double* __restrict a, const double* __restrict b, double* __restrict c, int n, int k, int m) {
    std::memset(c, 0, sizeof(double) * static_cast<size_t>(n) * m);
    for (int i = 0; i < n; ++i) {
        const double* arow = a + static_cast<size_t>(i) * k;
        double* crow = c + static_cast<size_t>(i) * m;
        for (int l = 0; l < k; ++l) {
            const double av = arow[l];
            const double* brow = b + static_cast<size_t>(l) * m;
            for (int j = 0; j < m; ++j) crow[j] += av * brow[j];
        }
    }
}

void matmul_omp(const double* __restrict a, const double* __restrict b, double* __restrict c, int n, int k, int m) {
#pragma omp parallel for schedule(static)
    for (int i = 0; i < n; ++i) {
        const double* arow = a + static_cast<size_t>(i) * k;
        double* crow = c + static_cast<size_t>(i) * m;
        std::memset(crow, 0, sizeof(double) * static_cast<size_t>(m));
        for (int l = 0; l < k; ++l) {
            const double av = arow[l];
            const double* brow = b + static_cast<size_t>(l) * m;
            for (int j = 0; j < m; ++j) crow[j] += av * brow[j];
        }
    }
}

void matmul_nt_serial(const double* __restrict a, const double* __restrict b, double* __restrict c, int n, int k, int m) {
    for (int i = 0; i < n; ++i) {
        const double* arow = a + static_cast<size_t>(i) * k;
        double* crow = c + static_cast<size_t>(i) * m;
        for (int j = 0; j < m; ++j) {
            const double* brow = b + static_cast<size_t>(j) * k;
            double acc = 0.0;
            for (int l = 0; l < k; ++l) acc += arow[l] * brow[l];
            crow[j] = acc;
        }
    }
}

void matmul_nt_omp(const double* __restrict a, const double* __restrict b, double* __restrict c, int n, int k, int m) {
#pragma omp parallel for schedule(static)
    for (int i = 0; i < n; ++i) {
        const double* arow = a + static_cast<size_t>(i) * k;
        double* crow = c + static_cast<size_t>(i) * m;
        for (int j = 0; j < m; ++j) {
            const double* brow = b + static_cast<size_t>(j) * k;
            double acc = 0.0;
            for (int l = 0; l < k; ++l) acc += arow[l] * brow[l];
            crow[j] = acc;
        }
    }
}

void column_sums_serial(const double* a, double* out, int rows, int cols) {
    for (int i = 0; i < rows; ++i) {
        const double* row = a + static_cast<size_t>(i) * cols;
        for (int j = 0; j < cols; ++j) out[j] += row[j];
    }
}

void matmul(const double* a, const double* b, double* c, int n, int k, int m) {
    if (static_cast<size_t>(n) * k * m >= kParallelFlopThreshold)
        matmul_omp(a, b, c, n, k, m);
    else
        matmul_serial(a, b, c, n, k, m);
}

void matmul_nt(const double* a, const double* b, double* c, int n, int k, int m) {
    if (static_cast<size_t>(n) * k * m >= kParallelFlopThreshold)
        matmul_nt_omp(a, b, c, n, k, m);
    else
        matmul_nt_serial(a, b, c, n, k, m);
}

}  // namespace asmatch
