#include <atomic>
#include <cstdlib>
#include <string>

#include "mcpad/error.hpp"
#include "mcpad/simd/kernels.hpp"

namespace mcpad::simd {
namespace {

Isa probe() noexcept {
#if defined(__x86_64__) || defined(_M_X64)
    __builtin_cpu_init();
    if (__builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma")) return Isa::avx2;
#endif
    return Isa::scalar;
}

Isa initial_isa() noexcept {
    const Isa best = probe();
    if (const char* env = std::getenv("MCPAD_ISA")) {
        if (std::string(env) == "scalar") return Isa::scalar;
    }
    return best;
}

std::atomic<Isa>& current() noexcept {
    static std::atomic<Isa> isa{initial_isa()};
    return isa;
}

void check_same_size(std::size_t a, std::size_t b) {
    if (a != b) throw ArgumentError("kernel operands differ in length");
}

template <typename T>
void check_gemm(const ConstMatrix<T>& a, std::size_t b_inner, const Matrix<T>& c, std::size_t n) {
    if (a.cols != b_inner || c.rows != a.rows || c.cols != n)
        throw ArgumentError("gemm operand shapes do not conform");
}

}  // namespace

Isa detected_isa() noexcept {
    static const Isa isa = probe();
    return isa;
}

Isa active_isa() noexcept { return current().load(std::memory_order_relaxed); }

bool isa_available(Isa isa) noexcept { return isa == Isa::scalar || detected_isa() == Isa::avx2; }

void force_isa(Isa isa) {
    if (!isa_available(isa)) throw ArgumentError("requested ISA is not supported by this CPU");
    current().store(isa, std::memory_order_relaxed);
}

std::string_view isa_name(Isa isa) noexcept { return isa == Isa::avx2 ? "avx2" : "scalar"; }

float dot(std::span<const float> a, std::span<const float> b) {
    check_same_size(a.size(), b.size());
    return active_isa() == Isa::avx2 ? avx2::dot(a.data(), b.data(), a.size())
                                     : scalar::dot(a.data(), b.data(), a.size());
}

double dot(std::span<const double> a, std::span<const double> b) {
    check_same_size(a.size(), b.size());
    return active_isa() == Isa::avx2 ? avx2::dot(a.data(), b.data(), a.size())
                                     : scalar::dot(a.data(), b.data(), a.size());
}

void axpy(float alpha, std::span<const float> x, std::span<float> y) {
    check_same_size(x.size(), y.size());
    if (active_isa() == Isa::avx2)
        avx2::axpy(alpha, x.data(), y.data(), x.size());
    else
        scalar::axpy(alpha, x.data(), y.data(), x.size());
}

void axpy(double alpha, std::span<const double> x, std::span<double> y) {
    check_same_size(x.size(), y.size());
    if (active_isa() == Isa::avx2)
        avx2::axpy(alpha, x.data(), y.data(), x.size());
    else
        scalar::axpy(alpha, x.data(), y.data(), x.size());
}

void gemm_nn(ConstMatrix<float> a, ConstMatrix<float> b, Matrix<float> c) {
    check_gemm(a, b.rows, c, b.cols);
    if (active_isa() == Isa::avx2) avx2::gemm_nn(a, b, c); else scalar::gemm_nn(a, b, c);
}

void gemm_nn(ConstMatrix<double> a, ConstMatrix<double> b, Matrix<double> c) {
    check_gemm(a, b.rows, c, b.cols);
    if (active_isa() == Isa::avx2) avx2::gemm_nn(a, b, c); else scalar::gemm_nn(a, b, c);
}

void gemm_nt(ConstMatrix<float> a, ConstMatrix<float> b, Matrix<float> c) {
    check_gemm(a, b.cols, c, b.rows);
    if (active_isa() == Isa::avx2) avx2::gemm_nt(a, b, c); else scalar::gemm_nt(a, b, c);
}

void gemm_nt(ConstMatrix<double> a, ConstMatrix<double> b, Matrix<double> c) {
    check_gemm(a, b.cols, c, b.rows);
    if (active_isa() == Isa::avx2) avx2::gemm_nt(a, b, c); else scalar::gemm_nt(a, b, c);
}

}  // namespace mcpad::simd
