#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>

namespace asmatch {

/// exp(x) via range reduction and a degree-13 Taylor tail; relative error
/// stays below ~1e-15, and the branch-free form vectorizes in tight loops
/// where glibc's exp call would not. Arguments saturate at +-700 to keep the
/// 2^n bit trick inside the normal double range (saturated results land at
/// ~1e-304 and ~1e304, which is all the softmax/sigmoid callers need).
inline double fast_exp(double x) {
    x = std::min(std::max(x, -700.0), 700.0);

    constexpr double kLog2E = 1.4426950408889634074;
    constexpr double kLn2Hi = 6.93147180369123816490e-01;
    constexpr double kLn2Lo = 1.90821492927058770002e-10;

    // round to nearest via the shifter constant; |x * log2e| < 2^51 always
    constexpr double kShifter = 6755399441055744.0;  // 1.5 * 2^52
    double n = (x * kLog2E + kShifter) - kShifter;
    double r = x - n * kLn2Hi;
    r -= n * kLn2Lo;

    // Taylor tail of e^r on [-ln2/2, ln2/2]
    double p = 1.6059043836821613e-10;   // 1/13!
    p = p * r + 2.0876756987868098e-09;  // 1/12!
    p = p * r + 2.5052108385441720e-08;
    p = p * r + 2.7557319223985888e-07;
    p = p * r + 2.7557319223985893e-06;
    p = p * r + 2.4801587301587302e-05;
    p = p * r + 1.9841269841269841e-04;
    p = p * r + 1.3888888888888889e-03;
    p = p * r + 8.3333333333333333e-03;
    p = p * r + 4.1666666666666664e-02;
    p = p * r + 1.6666666666666666e-01;
    p = p * r + 5.0e-01;
    p = p * r + 1.0;
    p = p * r + 1.0;

    // scale by 2^n through the exponent bits
    int64_t bits;
    double result = p;
    std::memcpy(&bits, &result, sizeof(bits));
    bits += static_cast<int64_t>(n) << 52;
    std::memcpy(&result, &bits, sizeof(result));
    return result;
}

inline double fast_sigmoid(double x) { return 1.0 / (1.0 + fast_exp(-x)); }

/// out[i] = exp(in[i] + shift); returns the sum of the outputs. SIMD paths
/// mirror fast_exp exactly lane by lane.
double exp_shift_sum(const double* in, double* out, int n, double shift);

}  // namespace asmatch
