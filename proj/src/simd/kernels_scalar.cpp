#include "mcpad/simd/kernels.hpp"

namespace mcpad::simd::scalar {
namespace {

template <typename T>
T dot_impl(const T* a, const T* b, std::size_t n) noexcept {
    T sum{0};
    for (std::size_t i = 0; i < n; ++i) sum += a[i] * b[i];
    return sum;
}

template <typename T>
void axpy_impl(T alpha, const T* x, T* y, std::size_t n) noexcept {
    for (std::size_t i = 0; i < n; ++i) y[i] += alpha * x[i];
}

template <typename T>
void gemm_nn_impl(ConstMatrix<T> a, ConstMatrix<T> b, Matrix<T> c) noexcept {
    for (std::size_t i = 0; i < a.rows; ++i) {
        T* crow = c.data + i * c.ld;
        for (std::size_t p = 0; p < a.cols; ++p) {
            const T aip = a.data[i * a.ld + p];
            const T* brow = b.data + p * b.ld;
            for (std::size_t j = 0; j < b.cols; ++j) crow[j] += aip * brow[j];
        }
    }
}

template <typename T>
void gemm_nt_impl(ConstMatrix<T> a, ConstMatrix<T> b, Matrix<T> c) noexcept {
    for (std::size_t i = 0; i < a.rows; ++i)
        for (std::size_t j = 0; j < b.rows; ++j)
            c.data[i * c.ld + j] += dot_impl(a.data + i * a.ld, b.data + j * b.ld, a.cols);
}

}  // namespace

float dot(const float* a, const float* b, std::size_t n) noexcept { return dot_impl(a, b, n); }
double dot(const double* a, const double* b, std::size_t n) noexcept { return dot_impl(a, b, n); }
void axpy(float alpha, const float* x, float* y, std::size_t n) noexcept { axpy_impl(alpha, x, y, n); }
void axpy(double alpha, const double* x, double* y, std::size_t n) noexcept { axpy_impl(alpha, x, y, n); }
void gemm_nn(ConstMatrix<float> a, ConstMatrix<float> b, Matrix<float> c) noexcept { gemm_nn_impl(a, b, c); }
void gemm_nn(ConstMatrix<double> a, ConstMatrix<double> b, Matrix<double> c) noexcept { gemm_nn_impl(a, b, c); }
void gemm_nt(ConstMatrix<float> a, ConstMatrix<float> b, Matrix<float> c) noexcept { gemm_nt_impl(a, b, c); }
void gemm_nt(ConstMatrix<double> a, ConstMatrix<double> b, Matrix<double> c) noexcept { gemm_nt_impl(a, b, c); }

}  // namespace mcpad::simd::scalar
