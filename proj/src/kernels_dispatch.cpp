#include <atomic>
#include <cstdlib>
#include <string>

#include "dh/errors.hpp"
#include "dh/kernels.hpp"

namespace dh::kernels {

namespace {

bool cpu_has_avx2() noexcept {
#if defined(DH_HAVE_AVX2) && (defined(__GNUC__) || defined(__clang__))
    __builtin_cpu_init();
    return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
    return false;
#endif
}

Backend detect() noexcept {
    if (const char* env = std::getenv("DH_KERNELS"); env && std::string(env) == "scalar") {
        return Backend::scalar;
    }
    return cpu_has_avx2() ? Backend::avx2 : Backend::scalar;
}

std::atomic<Backend>& current() {
    static std::atomic<Backend> backend{detect()};
    return backend;
}

const KernelTable& active() { return table(current().load(std::memory_order_relaxed)); }

}  // namespace

bool available(Backend backend) noexcept {
    return backend == Backend::scalar || (backend == Backend::avx2 && cpu_has_avx2());
}

const KernelTable& table(Backend backend) {
    switch (backend) {
        case Backend::scalar:
            return detail::scalar_table();
        case Backend::avx2:
#ifdef DH_HAVE_AVX2
            if (cpu_has_avx2()) return detail::avx2_table();
#endif
            break;
    }
    throw InvalidArgument("kernel backend '" + std::string(backend_name(backend)) + "' is not available");
}

Backend active_backend() noexcept { return current().load(std::memory_order_relaxed); }

void set_backend(Backend backend) {
    if (!available(backend)) {
        throw InvalidArgument("kernel backend '" + std::string(backend_name(backend)) + "' is not available");
    }
    current().store(backend, std::memory_order_relaxed);
}

std::string_view backend_name(Backend backend) noexcept {
    return backend == Backend::avx2 ? "avx2" : "scalar";
}

double dot(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size()) throw InvalidArgument("dot: length mismatch");
    return active().dot(a.data(), b.data(), a.size());
}

void axpy(double alpha, std::span<const double> x, std::span<double> y) {
    if (x.size() != y.size()) throw InvalidArgument("axpy: length mismatch");
    active().axpy(alpha, x.data(), y.data(), x.size());
}

void gemv(const Matrix& a, std::span<const double> x, std::span<const double> bias, std::span<double> y) {
    if (x.size() != a.cols() || y.size() != a.rows() || (!bias.empty() && bias.size() != a.rows())) {
        throw InvalidArgument("gemv: shape mismatch");
    }
    active().gemv(a.values().data(), a.rows(), a.cols(), x.data(), bias.empty() ? nullptr : bias.data(),
                  y.data());
}

void gemv_t(const Matrix& a, std::span<const double> x, std::span<double> y) {
    if (x.size() != a.rows() || y.size() != a.cols()) throw InvalidArgument("gemv_t: shape mismatch");
    active().gemv_t(a.values().data(), a.rows(), a.cols(), x.data(), y.data());
}

void ger(double alpha, std::span<const double> x, std::span<const double> y, Matrix& a) {
    if (x.size() != a.rows() || y.size() != a.cols()) throw InvalidArgument("ger: shape mismatch");
    active().ger(alpha, x.data(), y.data(), a.values().data(), a.rows(), a.cols());
}

}  // namespace dh::kernels
