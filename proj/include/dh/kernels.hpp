#pragma once

// Dense inner-loop kernels used by the network forward/backward passes.
//
// Every kernel has a scalar reference implementation and, when the build
// supports it, an AVX2+FMA variant. The variant is picked once at startup
// from CPUID; DH_KERNELS=scalar in the environment forces the reference
// path. Variants differ only in summation order, so results agree to a few
// ulps but are not bit-identical across backends. Within one process the
// backend is fixed, which keeps runs reproducible.

#include <cstddef>
#include <span>
#include <string_view>

#include "dh/numerics.hpp"

namespace dh::kernels {

enum class Backend { scalar, avx2 };

struct KernelTable {
    double (*dot)(const double* a, const double* b, std::size_t n);
    // y += alpha * x
    void (*axpy)(double alpha, const double* x, double* y, std::size_t n);
    // y = A x + bias, A is rows x cols row-major; bias may be null
    void (*gemv)(const double* a, std::size_t rows, std::size_t cols, const double* x,
                 const double* bias, double* y);
    // y = A^T x
    void (*gemv_t)(const double* a, std::size_t rows, std::size_t cols, const double* x, double* y);
    // A += alpha * x y^T
    void (*ger)(double alpha, const double* x, const double* y, double* a, std::size_t rows,
                std::size_t cols);
};

const KernelTable& table(Backend backend);
bool available(Backend backend) noexcept;

Backend active_backend() noexcept;
/// Overrides the dispatch choice. Throws InvalidArgument if unavailable.
void set_backend(Backend backend);
std::string_view backend_name(Backend backend) noexcept;

double dot(std::span<const double> a, std::span<const double> b);
void axpy(double alpha, std::span<const double> x, std::span<double> y);
void gemv(const Matrix& a, std::span<const double> x, std::span<const double> bias, std::span<double> y);
void gemv_t(const Matrix& a, std::span<const double> x, std::span<double> y);
void ger(double alpha, std::span<const double> x, std::span<const double> y, Matrix& a);

namespace detail {
const KernelTable& scalar_table() noexcept;
#ifdef DH_HAVE_AVX2
const KernelTable& avx2_table() noexcept;
#endif
}  // namespace detail

}  // namespace dh::kernels
