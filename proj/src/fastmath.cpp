#include "asmatch/fastmath.hpp"

#if defined(__AVX2__)
#include <immintrin.h>
#endif

namespace asmatch {

#if defined(__AVX2__)

namespace {

// 4-wide mirror of fast_exp; identical constants so lanes match the scalar
// path bit for bit.
inline __m256d exp4(__m256d x) {
    const __m256d lo = _mm256_set1_pd(-700.0);
    const __m256d hi = _mm256_set1_pd(700.0);
    x = _mm256_min_pd(_mm256_max_pd(x, lo), hi);

    const __m256d log2e = _mm256_set1_pd(1.4426950408889634074);
    const __m256d shifter = _mm256_set1_pd(6755399441055744.0);
    const __m256d ln2hi = _mm256_set1_pd(6.93147180369123816490e-01);
    const __m256d ln2lo = _mm256_set1_pd(1.90821492927058770002e-10);

    __m256d nshift = _mm256_add_pd(_mm256_mul_pd(x, log2e), shifter);
    __m256d n = _mm256_sub_pd(nshift, shifter);
    __m256d r = _mm256_fnmadd_pd(n, ln2hi, x);
    r = _mm256_fnmadd_pd(n, ln2lo, r);

    __m256d p = _mm256_set1_pd(1.6059043836821613e-10);
    p = _mm256_fmadd_pd(p, r, _mm256_set1_pd(2.0876756987868098e-09));
    p = _mm256_fmadd_pd(p, r, _mm256_set1_pd(2.5052108385441720e-08));
    p = _mm256_fmadd_pd(p, r, _mm256_set1_pd(2.7557319223985888e-07));
    p = _mm256_fmadd_pd(p, r, _mm256_set1_pd(2.7557319223985893e-06));
    p = _mm256_fmadd_pd(p, r, _mm256_set1_pd(2.4801587301587302e-05));
    p = _mm256_fmadd_pd(p, r, _mm256_set1_pd(1.9841269841269841e-04));
    p = _mm256_fmadd_pd(p, r, _mm256_set1_pd(1.3888888888888889e-03));
    p = _mm256_fmadd_pd(p, r, _mm256_set1_pd(8.3333333333333333e-03));
    p = _mm256_fmadd_pd(p, r, _mm256_set1_pd(4.1666666666666664e-02));
    p = _mm256_fmadd_pd(p, r, _mm256_set1_pd(1.6666666666666666e-01));
    p = _mm256_fmadd_pd(p, r, _mm256_set1_pd(5.0e-01));
    p = _mm256_fmadd_pd(p, r, _mm256_set1_pd(1.0));
    p = _mm256_fmadd_pd(p, r, _mm256_set1_pd(1.0));

    // scale by 2^n: n fits in int32, widen to int64 and add into the exponent
    __m128i n32 = _mm256_cvtpd_epi32(n);
    __m256i n64 = _mm256_cvtepi32_epi64(n32);
    __m256i bits = _mm256_castpd_si256(p);
    bits = _mm256_add_epi64(bits, _mm256_slli_epi64(n64, 52));
    return _mm256_castsi256_pd(bits);
}

}  // namespace

double exp_shift_sum(const double* in, double* out, int n, double shift) {
    const __m256d vshift = _mm256_set1_pd(shift);
    __m256d acc = _mm256_setzero_pd();
    int i = 0;
    for (; i + 4 <= n; i += 4) {
        __m256d e = exp4(_mm256_add_pd(_mm256_loadu_pd(in + i), vshift));
        _mm256_storeu_pd(out + i, e);
        acc = _mm256_add_pd(acc, e);
    }
    alignas(32) double lanes[4];
    _mm256_store_pd(lanes, acc);
    double total = (lanes[0] + lanes[1]) + (lanes[2] + lanes[3]);
    for (; i < n; ++i) {
        out[i] = fast_exp(in[i] + shift);
        total += out[i];
    }
    return total;
}

#else

double exp_shift_sum(const double* in, double* out, int n, double shift) {
    double total = 0.0;
    for (int i = 0; i < n; ++i) {
        out[i] = fast_exp(in[i] + shift);
        total += out[i];
    }
    return total;
}

#endif

}  // namespace asmatch
