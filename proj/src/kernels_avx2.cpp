// Compiled with -mavx2 -mfma. Only reached through the dispatch table after
// a CPUID check, so nothing here may be inlined into generic code.

#include <immintrin.h>

#include "dh/kernels.hpp"

namespace dh::kernels::detail {

namespace {

inline double hsum(__m256d v) {
    const __m128d lo = _mm256_castpd256_pd128(v);
    const __m128d hi = _mm256_extractf128_pd(v, 1);
    const __m128d s = _mm_add_pd(lo, hi);
    return _mm_cvtsd_f64(_mm_add_sd(s, _mm_unpackhi_pd(s, s)));
}

double dot(const double* a, const double* b, std::size_t n) {
    __m256d acc0 = _mm256_setzero_pd();
    __m256d acc1 = _mm256_setzero_pd();
    std::size_t i = 0;
    for (; i + 8 <= n; i += 8) {
        acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i), acc0);
        acc1 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i + 4), _mm256_loadu_pd(b + i + 4), acc1);
    }
    for (; i + 4 <= n; i += 4) {
        acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i), acc0);
    }
    double s = hsum(_mm256_add_pd(acc0, acc1));
    for (; i < n; ++i) s += a[i] * b[i];
    return s;
}

void axpy(double alpha, const double* x, double* y, std::size_t n) {
    const __m256d va = _mm256_set1_pd(alpha);
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        _mm256_storeu_pd(y + i, _mm256_fmadd_pd(va, _mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i)));
    }
    for (; i < n; ++i) y[i] += alpha * x[i];
}

void gemv(const double* a, std::size_t rows, std::size_t cols, const double* x, const double* bias,
          double* y) {
    for (std::size_t r = 0; r < rows; ++r) {
        y[r] = (bias ? bias[r] : 0.0) + dot(a + r * cols, x, cols);
    }
}

void gemv_t(const double* a, std::size_t rows, std::size_t cols, const double* x, double* y) {
    for (std::size_t c = 0; c < cols; ++c) y[c] = 0.0;
    for (std::size_t r = 0; r < rows; ++r) axpy(x[r], a + r * cols, y, cols);
}

void ger(double alpha, const double* x, const double* y, double* a, std::size_t rows, std::size_t cols) {
    for (std::size_t r = 0; r < rows; ++r) axpy(alpha * x[r], y, a + r * cols, cols);
}

}  // namespace

const KernelTable& avx2_table() noexcept {
    static const KernelTable t{dot, axpy, gemv, gemv_t, ger};
    return t;
}

}  // namespace dh::kernels::detail
