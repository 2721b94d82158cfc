#include <algorithm>
#include <cmath>

#include "mcpad/error.hpp"
#include "mcpad/mccnn.hpp"
#include "mcpad/simd/kernels.hpp"

namespace mcpad::mccnn {
namespace {

std::string shape_str(const std::vector<std::size_t>& s) {
    std::string out = "[";
    for (std::size_t i = 0; i < s.size(); ++i) out += (i ? "," : "") + std::to_string(s[i]);
    return out + "]";
}

template <typename R>
void require_rank(const TensorPtr<R>& t, std::size_t rank, const char* op) {
    if (!t || t->shape.size() != rank)
        throw ShapeError(std::string(op) + " expects a rank-" + std::to_string(rank) + " tensor, got " +
                         (t ? shape_str(t->shape) : "null"));
}

template <typename R>
simd::ConstMatrix<R> cview(const R* p, std::size_t rows, std::size_t cols) {
    return {p, rows, cols, cols};
}

template <typename R>
simd::Matrix<R> mview(R* p, std::size_t rows, std::size_t cols) {
    return {p, rows, cols, cols};
}

struct ConvGeom {
    std::size_t n, c, h, w, o, k, ho, wo;
    int stride, pad;

    [[nodiscard]] std::size_t patch() const { return c * k * k; }
    [[nodiscard]] std::size_t pixels() const { return ho * wo; }
};

// Output columns [lo, hi) whose input column ox*stride + kx - pad lies
// inside [0, w).
inline void valid_cols(const ConvGeom& g, std::size_t kx, std::size_t& lo, std::size_t& hi) {
    const long off = static_cast<long>(kx) - g.pad, s = g.stride, w = static_cast<long>(g.w);
    const long first = off >= 0 ? 0 : (-off + s - 1) / s;
    const long last = (w - 1 - off) < 0 ? -1 : (w - 1 - off) / s;
    lo = static_cast<std::size_t>(std::min<long>(first, static_cast<long>(g.wo)));
    hi = static_cast<std::size_t>(std::clamp<long>(last + 1, static_cast<long>(lo), static_cast<long>(g.wo)));
}

// col: (C*k*k) x (Ho*Wo) for one image.
template <typename R>
void im2col(const R* x, const ConvGeom& g, R* col) {
    std::size_t row = 0;
    for (std::size_t c = 0; c < g.c; ++c)
        for (std::size_t ky = 0; ky < g.k; ++ky)
            for (std::size_t kx = 0; kx < g.k; ++kx, ++row) {
                std::size_t lo = 0, hi = 0;
                valid_cols(g, kx, lo, hi);
                R* dst = col + row * g.pixels();
                for (std::size_t oy = 0; oy < g.ho; ++oy) {
                    R* d = dst + oy * g.wo;
                    const long iy = static_cast<long>(oy) * g.stride + static_cast<long>(ky) - g.pad;
                    if (iy < 0 || iy >= static_cast<long>(g.h)) {
                        std::fill(d, d + g.wo, R(0));
                        continue;
                    }
                    std::fill(d, d + lo, R(0));
                    const R* src = x + (c * g.h + static_cast<std::size_t>(iy)) * g.w;
                    const long shift = static_cast<long>(kx) - g.pad;
                    if (g.stride == 1) {
                        std::copy(src + static_cast<long>(lo) + shift, src + static_cast<long>(hi) + shift, d + lo);
                    } else {
                        for (std::size_t ox = lo; ox < hi; ++ox) d[ox] = src[static_cast<long>(ox) * g.stride + shift];
                    }
                    std::fill(d + hi, d + g.wo, R(0));
                }
            }
}

template <typename R>
void col2im_add(const R* col, const ConvGeom& g, R* dx) {
    std::size_t row = 0;
    for (std::size_t c = 0; c < g.c; ++c)
        for (std::size_t ky = 0; ky < g.k; ++ky)
            for (std::size_t kx = 0; kx < g.k; ++kx, ++row) {
                std::size_t lo = 0, hi = 0;
                valid_cols(g, kx, lo, hi);
                const R* src = col + row * g.pixels();
                const long shift = static_cast<long>(kx) - g.pad;
                for (std::size_t oy = 0; oy < g.ho; ++oy) {
                    const long iy = static_cast<long>(oy) * g.stride + static_cast<long>(ky) - g.pad;
                    if (iy < 0 || iy >= static_cast<long>(g.h)) continue;
                    R* d = dx + (c * g.h + static_cast<std::size_t>(iy)) * g.w;
                    const R* s = src + oy * g.wo;
                    for (std::size_t ox = lo; ox < hi; ++ox) d[static_cast<long>(ox) * g.stride + shift] += s[ox];
                }
            }
}

template <typename R>
bool any_grad(std::initializer_list<const TensorPtr<R>*> ts) {
    for (const auto* t : ts)
        if (*t && (*t)->requires_grad) return true;
    return false;
}

}  // namespace

template <typename R>
Tensor<R>::Tensor(std::vector<std::size_t> s, bool with_grad) : shape(std::move(s)), requires_grad(with_grad) {
    std::size_t n = 1;
    for (auto d : shape) n *= d;
    value.assign(n, R(0));
    if (with_grad) grad.assign(n, R(0));
}

template <typename R>
void Tensor<R>::zero_grad() {
    if (requires_grad) std::fill(grad.begin(), grad.end(), R(0));
}

template <typename R>
TensorPtr<R> Tape<R>::conv2d(const TensorPtr<R>& x, const TensorPtr<R>& w, const TensorPtr<R>& b, int stride,
                             int pad) {
    require_rank(x, 4, "conv2d");
    require_rank(w, 4, "conv2d weight");
    require_rank(b, 1, "conv2d bias");
    if (stride != 1 && stride != 2) throw ShapeError("conv2d stride must be 1 or 2");
    if (pad < 0) throw ShapeError("conv2d padding must be >= 0");
    if (w->dim(1) != x->dim(1) || w->dim(2) != w->dim(3) || b->dim(0) != w->dim(0))
        throw ShapeError("conv2d operands " + shape_str(x->shape) + " * " + shape_str(w->shape) + " do not conform");
    ConvGeom g{x->dim(0), x->dim(1), x->dim(2), x->dim(3), w->dim(0), w->dim(2), 0, 0, stride, pad};
    const long hp = static_cast<long>(g.h) + 2 * pad - static_cast<long>(g.k);
    const long wp = static_cast<long>(g.w) + 2 * pad - static_cast<long>(g.k);
    if (hp < 0 || wp < 0) throw ShapeError("conv2d kernel larger than padded input");
    g.ho = static_cast<std::size_t>(hp / stride + 1);
    g.wo = static_cast<std::size_t>(wp / stride + 1);

    const bool rec = any_grad<R>({&x, &w, &b});
    auto y = make_tensor<R>({g.n, g.o, g.ho, g.wo}, rec);
    const std::size_t K = g.patch(), P = g.pixels();
    // Patches are kept per image only when the backward pass will need them.
    // im2col writes every entry, so the buffer is left uninitialized.
    std::shared_ptr<R[]> cols(new R[(rec ? g.n : 1) * K * P]);
    for (std::size_t n = 0; n < g.n; ++n) {
        R* col = cols.get() + (rec ? n * K * P : 0);
        im2col(x->value.data() + n * g.c * g.h * g.w, g, col);
        R* out = y->value.data() + n * g.o * P;
        for (std::size_t o = 0; o < g.o; ++o) std::fill(out + o * P, out + (o + 1) * P, b->value[o]);
        simd::gemm_nn(cview(w->value.data(), g.o, K), cview<R>(col, K, P), mview(out, g.o, P));
    }
    if (rec)
        ops_.push_back([x, w, b, y, cols, g, K, P] {
            std::vector<R> wt, dcol;
            if (x->requires_grad) {
                wt.resize(K * g.o);
                for (std::size_t o = 0; o < g.o; ++o)
                    for (std::size_t q = 0; q < K; ++q) wt[q * g.o + o] = w->value[o * K + q];
                dcol.resize(K * P);
            }
            for (std::size_t n = 0; n < g.n; ++n) {
                const R* dy = y->grad.data() + n * g.o * P;
                const R* col = cols.get() + n * K * P;
                if (w->requires_grad) simd::gemm_nt(cview(dy, g.o, P), cview(col, K, P), mview(w->grad.data(), g.o, K));
                if (b->requires_grad)
                    for (std::size_t o = 0; o < g.o; ++o) {
                        R s = 0;
                        for (std::size_t p = 0; p < P; ++p) s += dy[o * P + p];
                        b->grad[o] += s;
                    }
                if (x->requires_grad) {
                    std::fill(dcol.begin(), dcol.end(), R(0));
                    simd::gemm_nn(cview(wt.data(), K, g.o), cview(dy, g.o, P), mview(dcol.data(), K, P));
                    col2im_add(dcol.data(), g, x->grad.data() + n * g.c * g.h * g.w);
                }
            }
        });
    return y;
}

template <typename R>
TensorPtr<R> Tape<R>::maxpool2(const TensorPtr<R>& x) {
    require_rank(x, 4, "maxpool2");
    const std::size_t N = x->dim(0), C = x->dim(1), H = x->dim(2), W = x->dim(3);
    if (H % 2 || W % 2) throw ShapeError("maxpool2 needs even spatial size, got " + shape_str(x->shape));
    const std::size_t Ho = H / 2, Wo = W / 2;
    const bool rec = x->requires_grad;
    auto y = make_tensor<R>({N, C, Ho, Wo}, rec);
    auto arg = std::make_shared<std::vector<std::size_t>>(y->numel());
    for (std::size_t nc = 0; nc < N * C; ++nc)
        for (std::size_t oy = 0; oy < Ho; ++oy)
            for (std::size_t ox = 0; ox < Wo; ++ox) {
                std::size_t best = (nc * H + 2 * oy) * W + 2 * ox;
                for (std::size_t dy = 0; dy < 2; ++dy)
                    for (std::size_t dx = 0; dx < 2; ++dx) {
                        const std::size_t i = (nc * H + 2 * oy + dy) * W + 2 * ox + dx;
                        if (x->value[i] > x->value[best]) best = i;
                    }
                const std::size_t o = (nc * Ho + oy) * Wo + ox;
                y->value[o] = x->value[best];
                (*arg)[o] = best;
            }
    if (rec)
        ops_.push_back([x, y, arg] {
            for (std::size_t o = 0; o < y->numel(); ++o) x->grad[(*arg)[o]] += y->grad[o];
        });
    return y;
}

template <typename R>
TensorPtr<R> Tape<R>::mfm(const TensorPtr<R>& x) {
    if (!x || x->shape.size() < 2) throw ShapeError("mfm expects at least a rank-2 tensor");
    const std::size_t N = x->dim(0), C2 = x->dim(1);
    if (C2 % 2) throw ShapeError("mfm needs an even channel count, got " + std::to_string(C2));
    std::size_t inner = 1;
    for (std::size_t i = 2; i < x->shape.size(); ++i) inner *= x->shape[i];
    const std::size_t k = C2 / 2;
    auto shape = x->shape;
    shape[1] = k;
    const bool rec = x->requires_grad;
    auto y = make_tensor<R>(shape, rec);
    for (std::size_t n = 0; n < N; ++n)
        for (std::size_t c = 0; c < k; ++c)
            for (std::size_t i = 0; i < inner; ++i) {
                const R a = x->value[(n * C2 + c) * inner + i], b = x->value[(n * C2 + c + k) * inner + i];
                y->value[(n * k + c) * inner + i] = a >= b ? a : b;
            }
    if (rec)
        ops_.push_back([x, y, N, C2, k, inner] {
            for (std::size_t n = 0; n < N; ++n)
                for (std::size_t c = 0; c < k; ++c)
                    for (std::size_t i = 0; i < inner; ++i) {
                        const std::size_t ia = (n * C2 + c) * inner + i, ib = (n * C2 + c + k) * inner + i;
                        const R g = y->grad[(n * k + c) * inner + i];
                        if (x->value[ia] >= x->value[ib])
                            x->grad[ia] += g;
                        else
                            x->grad[ib] += g;
                    }
        });
    return y;
}

template <typename R>
TensorPtr<R> Tape<R>::flatten(const TensorPtr<R>& x) {
    if (!x || x->shape.empty()) throw ShapeError("flatten expects a batched tensor");
    const std::size_t N = x->dim(0);
    const bool rec = x->requires_grad;
    auto y = make_tensor<R>({N, N ? x->numel() / N : 0}, rec);
    y->value = x->value;
    if (rec)
        ops_.push_back([x, y] {
            for (std::size_t i = 0; i < x->numel(); ++i) x->grad[i] += y->grad[i];
        });
    return y;
}

template <typename R>
TensorPtr<R> Tape<R>::linear(const TensorPtr<R>& x, const TensorPtr<R>& w, const TensorPtr<R>& b) {
    require_rank(x, 2, "linear");
    require_rank(w, 2, "linear weight");
    require_rank(b, 1, "linear bias");
    const std::size_t N = x->dim(0), F = x->dim(1), O = w->dim(0);
    if (w->dim(1) != F || b->dim(0) != O)
        throw ShapeError("linear operands " + shape_str(x->shape) + " * " + shape_str(w->shape) + " do not conform");
    const bool rec = any_grad<R>({&x, &w, &b});
    auto y = make_tensor<R>({N, O}, rec);
    for (std::size_t n = 0; n < N; ++n) std::copy(b->value.begin(), b->value.end(), y->value.begin() + n * O);
    simd::gemm_nt(cview(x->value.data(), N, F), cview(w->value.data(), O, F), mview(y->value.data(), N, O));
    if (rec)
        ops_.push_back([x, w, b, y, N, F, O] {
            if (x->requires_grad)
                simd::gemm_nn(cview(y->grad.data(), N, O), cview(w->value.data(), O, F), mview(x->grad.data(), N, F));
            if (w->requires_grad) {
                std::vector<R> dyt(O * N);
                for (std::size_t n = 0; n < N; ++n)
                    for (std::size_t o = 0; o < O; ++o) dyt[o * N + n] = y->grad[n * O + o];
                simd::gemm_nn(cview(dyt.data(), O, N), cview(x->value.data(), N, F), mview(w->grad.data(), O, F));
            }
            if (b->requires_grad)
                for (std::size_t n = 0; n < N; ++n)
                    for (std::size_t o = 0; o < O; ++o) b->grad[o] += y->grad[n * O + o];
        });
    return y;
}

template <typename R>
TensorPtr<R> Tape<R>::sigmoid(const TensorPtr<R>& x) {
    if (!x) throw ShapeError("sigmoid of a null tensor");
    const bool rec = x->requires_grad;
    auto y = make_tensor<R>(x->shape, rec);
    for (std::size_t i = 0; i < x->numel(); ++i) {
        const R z = std::clamp(x->value[i], R(-40), R(40));
        y->value[i] = R(1) / (R(1) + std::exp(-z));
    }
    if (rec)
        ops_.push_back([x, y] {
            for (std::size_t i = 0; i < x->numel(); ++i) {
                if (x->value[i] < R(-40) || x->value[i] > R(40)) continue;
                const R s = y->value[i];
                x->grad[i] += y->grad[i] * s * (R(1) - s);
            }
        });
    return y;
}

template <typename R>
TensorPtr<R> Tape<R>::concat(const std::vector<TensorPtr<R>>& xs) {
    if (xs.empty()) throw ShapeError("concat of nothing");
    const std::size_t N = xs.front()->dim(0);
    std::size_t F = 0;
    bool rec = false;
    for (const auto& x : xs) {
        require_rank(x, 2, "concat");
        if (x->dim(0) != N) throw ShapeError("concat operands differ in batch size");
        F += x->dim(1);
        rec = rec || x->requires_grad;
    }
    auto y = make_tensor<R>({N, F}, rec);
    std::size_t off = 0;
    for (const auto& x : xs) {
        const std::size_t f = x->dim(1);
        for (std::size_t n = 0; n < N; ++n)
            std::copy_n(x->value.begin() + n * f, f, y->value.begin() + n * F + off);
        off += f;
    }
    if (rec)
        ops_.push_back([xs, y, N, F] {
            std::size_t off = 0;
            for (const auto& x : xs) {
                const std::size_t f = x->dim(1);
                if (x->requires_grad)
                    for (std::size_t n = 0; n < N; ++n)
                        for (std::size_t j = 0; j < f; ++j) x->grad[n * f + j] += y->grad[n * F + off + j];
                off += f;
            }
        });
    return y;
}

template <typename R>
TensorPtr<R> Tape<R>::weighted_bce(const TensorPtr<R>& p, std::span<const Label> labels, double w_bonafide,
                                   double w_attack) {
    require_rank(p, 2, "weighted_bce");
    const std::size_t N = p->dim(0);
    if (p->dim(1) != 1 || labels.size() != N) throw ShapeError("weighted_bce needs N x 1 probabilities and N labels");
    if (N == 0) throw ShapeError("weighted_bce of an empty batch");
    const bool rec = p->requires_grad;
    auto loss = make_tensor<R>({1}, rec);
    double total = 0.0;
    std::vector<int> ys(N);
    for (std::size_t n = 0; n < N; ++n) {
        ys[n] = labels[n] == Label::bonafide ? 1 : 0;
        total += mccnn::weighted_bce(ys[n], static_cast<double>(p->value[n]), {w_bonafide, w_attack});
    }
    loss->value[0] = static_cast<R>(total / static_cast<double>(N));
    if (rec)
        ops_.push_back([p, loss, ys, N, w_bonafide, w_attack] {
            const double g = static_cast<double>(loss->grad[0]) / static_cast<double>(N);
            for (std::size_t n = 0; n < N; ++n) {
                const double v = static_cast<double>(p->value[n]);
                if (v < kProbClamp || v > 1.0 - kProbClamp) continue;
                const double d = ys[n] ? -w_bonafide / v : w_attack / (1.0 - v);
                p->grad[n] += static_cast<R>(g * d);
            }
        });
    return loss;
}

template <typename R>
void Tape<R>::backward(const TensorPtr<R>& loss) {
    if (!loss || loss->numel() != 1) throw ShapeError("backward needs a scalar loss");
    if (!loss->requires_grad) return;
    loss->grad[0] = R(1);
    for (auto it = ops_.rbegin(); it != ops_.rend(); ++it) (*it)();
    ops_.clear();
}

ClassWeights batch_class_weights(std::span<const Label> labels) {
    const auto n = static_cast<double>(labels.size());
    const auto nb = static_cast<double>(std::count(labels.begin(), labels.end(), Label::bonafide));
    const double na = n - nb;
    return {nb > 0 ? n / (2.0 * nb) : 1.0, na > 0 ? n / (2.0 * na) : 1.0};
}

double weighted_bce(int y, double p, ClassWeights w) {
    p = std::clamp(p, kProbClamp, 1.0 - kProbClamp);
    return -(w.bonafide * y * std::log(p) + w.attack * (1 - y) * std::log(1.0 - p));
}

template struct Tensor<float>;
template struct Tensor<double>;
template class Tape<float>;
template class Tape<double>;

}  // namespace mcpad::mccnn
