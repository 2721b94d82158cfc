// Compiled with -mavx2 -mfma; only reached through the runtime dispatcher
// after the CPU reports both features.

#include "mcpad/simd/kernels.hpp"

#if defined(__x86_64__) || defined(_M_X64)
#include <immintrin.h>
#define MCPAD_HAVE_AVX2_TU 1
#endif

namespace mcpad::simd::avx2 {

#ifdef MCPAD_HAVE_AVX2_TU
namespace {

struct F32 {
    using T = float;
    using V = __m256;
    static constexpr std::size_t lanes = 8;
    static V zero() { return _mm256_setzero_ps(); }
    static V load(const T* p) { return _mm256_loadu_ps(p); }
    static void store(T* p, V v) { _mm256_storeu_ps(p, v); }
    static V set1(T x) { return _mm256_set1_ps(x); }
    static V fma(V a, V b, V c) { return _mm256_fmadd_ps(a, b, c); }
    static V add(V a, V b) { return _mm256_add_ps(a, b); }
    static T hsum(V v) {
        const __m128 lo = _mm256_castps256_ps128(v);
        const __m128 hi = _mm256_extractf128_ps(v, 1);
        __m128 s = _mm_add_ps(lo, hi);
        s = _mm_add_ps(s, _mm_movehl_ps(s, s));
        s = _mm_add_ss(s, _mm_movehdup_ps(s));
        return _mm_cvtss_f32(s);
    }
};

struct F64 {
    using T = double;
    using V = __m256d;
    static constexpr std::size_t lanes = 4;
    static V zero() { return _mm256_setzero_pd(); }
    static V load(const T* p) { return _mm256_loadu_pd(p); }
    static void store(T* p, V v) { _mm256_storeu_pd(p, v); }
    static V set1(T x) { return _mm256_set1_pd(x); }
    static V fma(V a, V b, V c) { return _mm256_fmadd_pd(a, b, c); }
    static V add(V a, V b) { return _mm256_add_pd(a, b); }
    static T hsum(V v) {
        const __m128d lo = _mm256_castpd256_pd128(v);
        const __m128d hi = _mm256_extractf128_pd(v, 1);
        const __m128d s = _mm_add_pd(lo, hi);
        return _mm_cvtsd_f64(_mm_add_sd(s, _mm_unpackhi_pd(s, s)));
    }
};

template <typename Tr>
typename Tr::T dot_impl(const typename Tr::T* a, const typename Tr::T* b, std::size_t n) noexcept {
    constexpr std::size_t L = Tr::lanes;
    auto acc0 = Tr::zero(), acc1 = Tr::zero(), acc2 = Tr::zero(), acc3 = Tr::zero();
    std::size_t i = 0;
    for (; i + 4 * L <= n; i += 4 * L) {
        acc0 = Tr::fma(Tr::load(a + i), Tr::load(b + i), acc0);
        acc1 = Tr::fma(Tr::load(a + i + L), Tr::load(b + i + L), acc1);
        acc2 = Tr::fma(Tr::load(a + i + 2 * L), Tr::load(b + i + 2 * L), acc2);
        acc3 = Tr::fma(Tr::load(a + i + 3 * L), Tr::load(b + i + 3 * L), acc3);
    }
    for (; i + L <= n; i += L) acc0 = Tr::fma(Tr::load(a + i), Tr::load(b + i), acc0);
    auto sum = Tr::hsum(Tr::add(Tr::add(acc0, acc1), Tr::add(acc2, acc3)));
    for (; i < n; ++i) sum += a[i] * b[i];
    return sum;
}

template <typename Tr>
void axpy_impl(typename Tr::T alpha, const typename Tr::T* x, typename Tr::T* y, std::size_t n) noexcept {
    constexpr std::size_t L = Tr::lanes;
    const auto va = Tr::set1(alpha);
    std::size_t i = 0;
    for (; i + 2 * L <= n; i += 2 * L) {
        Tr::store(y + i, Tr::fma(va, Tr::load(x + i), Tr::load(y + i)));
        Tr::store(y + i + L, Tr::fma(va, Tr::load(x + i + L), Tr::load(y + i + L)));
    }
    for (; i + L <= n; i += L) Tr::store(y + i, Tr::fma(va, Tr::load(x + i), Tr::load(y + i)));
    for (; i < n; ++i) y[i] += alpha * x[i];
}

// 4 x (2 vectors) register tile: C[i0..i0+4, j0..j0+2L] += A[i0.., :] * B[:, j0..]
template <typename Tr, std::size_t Rows>
void tile_nn(const ConstMatrix<typename Tr::T>& a, const ConstMatrix<typename Tr::T>& b,
             const Matrix<typename Tr::T>& c, std::size_t i0, std::size_t j0) noexcept {
    constexpr std::size_t L = Tr::lanes;
    typename Tr::V acc[Rows][2];
    for (std::size_t r = 0; r < Rows; ++r) {
        acc[r][0] = Tr::load(c.data + (i0 + r) * c.ld + j0);
        acc[r][1] = Tr::load(c.data + (i0 + r) * c.ld + j0 + L);
    }
    for (std::size_t p = 0; p < a.cols; ++p) {
        const auto* brow = b.data + p * b.ld + j0;
        const auto b0 = Tr::load(brow);
        const auto b1 = Tr::load(brow + L);
        for (std::size_t r = 0; r < Rows; ++r) {
            const auto av = Tr::set1(a.data[(i0 + r) * a.ld + p]);
            acc[r][0] = Tr::fma(av, b0, acc[r][0]);
            acc[r][1] = Tr::fma(av, b1, acc[r][1]);
        }
    }
    for (std::size_t r = 0; r < Rows; ++r) {
        Tr::store(c.data + (i0 + r) * c.ld + j0, acc[r][0]);
        Tr::store(c.data + (i0 + r) * c.ld + j0 + L, acc[r][1]);
    }
}

template <typename Tr>
void gemm_nn_impl(ConstMatrix<typename Tr::T> a, ConstMatrix<typename Tr::T> b,
                  Matrix<typename Tr::T> c) noexcept {
    constexpr std::size_t L = Tr::lanes;
    constexpr std::size_t W = 2 * L;
    const std::size_t m = a.rows, n = b.cols, k = a.cols;
    const std::size_t n_main = n - n % W;
    for (std::size_t j0 = 0; j0 < n_main; j0 += W) {
        std::size_t i0 = 0;
        for (; i0 + 4 <= m; i0 += 4) tile_nn<Tr, 4>(a, b, c, i0, j0);
        for (; i0 < m; ++i0) tile_nn<Tr, 1>(a, b, c, i0, j0);
    }
    if (n_main == n) return;
    for (std::size_t i = 0; i < m; ++i) {
        auto* crow = c.data + i * c.ld;
        for (std::size_t p = 0; p < k; ++p) {
            const auto aip = a.data[i * a.ld + p];
            const auto* brow = b.data + p * b.ld;
            for (std::size_t j = n_main; j < n; ++j) crow[j] += aip * brow[j];
        }
    }
}

// Four dot products sharing the loads of one A row.
template <typename Tr>
void dot4(const typename Tr::T* a, const typename Tr::T* const* b, std::size_t n, typename Tr::T* out) noexcept {
    constexpr std::size_t L = Tr::lanes;
    typename Tr::V acc[4] = {Tr::zero(), Tr::zero(), Tr::zero(), Tr::zero()};
    std::size_t p = 0;
    for (; p + L <= n; p += L) {
        const auto av = Tr::load(a + p);
        for (int r = 0; r < 4; ++r) acc[r] = Tr::fma(av, Tr::load(b[r] + p), acc[r]);
    }
    for (int r = 0; r < 4; ++r) {
        auto sum = Tr::hsum(acc[r]);
        for (std::size_t q = p; q < n; ++q) sum += a[q] * b[r][q];
        out[r] += sum;
    }
}

template <typename Tr>
void gemm_nt_impl(ConstMatrix<typename Tr::T> a, ConstMatrix<typename Tr::T> b,
                  Matrix<typename Tr::T> c) noexcept {
    using T = typename Tr::T;
    const std::size_t n4 = b.rows - b.rows % 4;
    for (std::size_t i = 0; i < a.rows; ++i) {
        const T* arow = a.data + i * a.ld;
        T* crow = c.data + i * c.ld;
        for (std::size_t j = 0; j < n4; j += 4) {
            const T* rows[4] = {b.data + j * b.ld, b.data + (j + 1) * b.ld, b.data + (j + 2) * b.ld,
                                b.data + (j + 3) * b.ld};
            T sums[4] = {0, 0, 0, 0};
            dot4<Tr>(arow, rows, a.cols, sums);
            for (int r = 0; r < 4; ++r) crow[j + r] += sums[r];
        }
        for (std::size_t j = n4; j < b.rows; ++j) crow[j] += dot_impl<Tr>(arow, b.data + j * b.ld, a.cols);
    }
}

}  // namespace

float dot(const float* a, const float* b, std::size_t n) noexcept { return dot_impl<F32>(a, b, n); }
double dot(const double* a, const double* b, std::size_t n) noexcept { return dot_impl<F64>(a, b, n); }
void axpy(float alpha, const float* x, float* y, std::size_t n) noexcept { axpy_impl<F32>(alpha, x, y, n); }
void axpy(double alpha, const double* x, double* y, std::size_t n) noexcept { axpy_impl<F64>(alpha, x, y, n); }
void gemm_nn(ConstMatrix<float> a, ConstMatrix<float> b, Matrix<float> c) noexcept { gemm_nn_impl<F32>(a, b, c); }
void gemm_nn(ConstMatrix<double> a, ConstMatrix<double> b, Matrix<double> c) noexcept { gemm_nn_impl<F64>(a, b, c); }
void gemm_nt(ConstMatrix<float> a, ConstMatrix<float> b, Matrix<float> c) noexcept { gemm_nt_impl<F32>(a, b, c); }
void gemm_nt(ConstMatrix<double> a, ConstMatrix<double> b, Matrix<double> c) noexcept { gemm_nt_impl<F64>(a, b, c); }

#else  // non-x86 builds forward to the reference kernels

float dot(const float* a, const float* b, std::size_t n) noexcept { return scalar::dot(a, b, n); }
double dot(const double* a, const double* b, std::size_t n) noexcept { return scalar::dot(a, b, n); }
void axpy(float alpha, const float* x, float* y, std::size_t n) noexcept { scalar::axpy(alpha, x, y, n); }
void axpy(double alpha, const double* x, double* y, std::size_t n) noexcept { scalar::axpy(alpha, x, y, n); }
void gemm_nn(ConstMatrix<float> a, ConstMatrix<float> b, Matrix<float> c) noexcept { scalar::gemm_nn(a, b, c); }
void gemm_nn(ConstMatrix<double> a, ConstMatrix<double> b, Matrix<double> c) noexcept { scalar::gemm_nn(a, b, c); }
void gemm_nt(ConstMatrix<float> a, ConstMatrix<float> b, Matrix<float> c) noexcept { scalar::gemm_nt(a, b, c); }
void gemm_nt(ConstMatrix<double> a, ConstMatrix<double> b, Matrix<double> c) noexcept { scalar::gemm_nt(a, b, c); }

#endif

}  // namespace mcpad::simd::avx2
