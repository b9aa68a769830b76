#include "dh/kernels.hpp"

namespace dh::kernels::detail {

namespace {

double dot(const double* a, const double* b, std::size_t n) {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) s += a[i] * b[i];
    return s;
}

void axpy(double alpha, const double* x, double* y, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) y[i] += alpha * x[i];
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

const KernelTable& scalar_table() noexcept {
    static const KernelTable t{dot, axpy, gemv, gemv_t, ger};
    return t;
}

}  // namespace dh::kernels::detail
