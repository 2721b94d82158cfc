#pragma once

// Dense arithmetic kernels shared by the CNN core and the linear classifiers.
//
// Every kernel has a portable scalar reference in mcpad::simd::scalar and, on
// x86-64, an AVX2+FMA variant in mcpad::simd::avx2. The unqualified entry
// points dispatch at runtime on the detected ISA; MCPAD_ISA=scalar in the
// environment (or force_isa) pins the reference path.

#include <cstddef>
#include <span>
#include <string_view>

namespace mcpad::simd {

enum class Isa { scalar, avx2 };

[[nodiscard]] Isa detected_isa() noexcept;
[[nodiscard]] Isa active_isa() noexcept;
[[nodiscard]] bool isa_available(Isa isa) noexcept;
void force_isa(Isa isa);
[[nodiscard]] std::string_view isa_name(Isa isa) noexcept;

// Row-major matrix views with an explicit leading dimension.
template <typename T>
struct ConstMatrix {
    const T* data;
    std::size_t rows;
    std::size_t cols;
    std::size_t ld;
};

template <typename T>
struct Matrix {
    T* data;
    std::size_t rows;
    std::size_t cols;
    std::size_t ld;
};

#define MCPAD_SIMD_DECLARE_KERNELS(ns)                                                   \
    namespace ns {                                                                       \
    float dot(const float* a, const float* b, std::size_t n) noexcept;                   \
    double dot(const double* a, const double* b, std::size_t n) noexcept;                \
    void axpy(float alpha, const float* x, float* y, std::size_t n) noexcept;            \
    void axpy(double alpha, const double* x, double* y, std::size_t n) noexcept;         \
    void gemm_nn(ConstMatrix<float> a, ConstMatrix<float> b, Matrix<float> c) noexcept;  \
    void gemm_nn(ConstMatrix<double> a, ConstMatrix<double> b, Matrix<double> c) noexcept; \
    void gemm_nt(ConstMatrix<float> a, ConstMatrix<float> b, Matrix<float> c) noexcept;  \
    void gemm_nt(ConstMatrix<double> a, ConstMatrix<double> b, Matrix<double> c) noexcept; \
    }

MCPAD_SIMD_DECLARE_KERNELS(scalar)
MCPAD_SIMD_DECLARE_KERNELS(avx2)

#undef MCPAD_SIMD_DECLARE_KERNELS

// sum_i a[i] * b[i]
float dot(std::span<const float> a, std::span<const float> b);
double dot(std::span<const double> a, std::span<const double> b);

// y += alpha * x
void axpy(float alpha, std::span<const float> x, std::span<float> y);
void axpy(double alpha, std::span<const double> x, std::span<double> y);

// C += A * B        (A: m x k, B: k x n, C: m x n)
void gemm_nn(ConstMatrix<float> a, ConstMatrix<float> b, Matrix<float> c);
void gemm_nn(ConstMatrix<double> a, ConstMatrix<double> b, Matrix<double> c);

// C += A * B^T      (A: m x k, B: n x k, C: m x n)
void gemm_nt(ConstMatrix<float> a, ConstMatrix<float> b, Matrix<float> c);
void gemm_nt(ConstMatrix<double> a, ConstMatrix<double> b, Matrix<double> c);

}  // namespace mcpad::simd
