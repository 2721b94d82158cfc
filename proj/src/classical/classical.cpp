#include <algorithm>
#include <cmath>
#include <limits>

#include "mcpad/classical.hpp"
#include "mcpad/error.hpp"
#include "mcpad/simd/kernels.hpp"

namespace mcpad {
namespace {

double dotd(std::span<const double> a, std::span<const double> b) { return simd::dot(a, b); }
void axpyd(double alpha, std::span<const double> x, std::span<double> y) { simd::axpy(alpha, x, y); }

double sigmoid(double z) {
    z = std::clamp(z, -40.0, 40.0);
    return 1.0 / (1.0 + std::exp(-z));
}

void require_two_classes(const LabeledMatrix& data) {
    const auto bf = std::count(data.y.begin(), data.y.end(), Label::bonafide);
    if (bf == 0 || bf == static_cast<std::ptrdiff_t>(data.rows()))
        throw FitError("training needs both bonafide and attack rows");
}

// Standardized copy of the whole table.
std::vector<double> standardize_all(const LabeledMatrix& data, const Standardizer& st) {
    std::vector<double> z(data.x.size());
    for (std::size_t i = 0; i < data.rows(); ++i)
        for (std::size_t j = 0; j < data.dim; ++j)
            z[i * data.dim + j] = (data.x[i * data.dim + j] - st.mean[j]) / st.std[j];
    return z;
}

struct LrObjective {
    const std::vector<double>& z;
    const LabeledMatrix& data;
    double lambda;

    double loss(std::span<const double> w, double b, std::vector<double>* margins = nullptr) const {
        const std::size_t n = data.rows(), d = data.dim;
        double total = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            const double m = dotd({z.data() + i * d, d}, w) + b;
            if (margins) (*margins)[i] = m;
            const double y = data.y[i] == Label::bonafide ? 1.0 : 0.0;
            // log(1 + e^m) - y*m, evaluated stably.
            total += (m > 0 ? m + std::log1p(std::exp(-m)) : std::log1p(std::exp(m))) - y * m;
        }
        double reg = 0.0;
        for (double v : w) reg += v * v;
        return total / static_cast<double>(n) + lambda * reg;
    }
};

}  // namespace

void LabeledMatrix::validate() const {
    if (dim == 0) throw ArgumentError("feature dimension must be positive");
    if (x.size() != y.size() * dim) throw ArgumentError("feature matrix size does not match labels");
}

std::vector<double> Standardizer::apply(std::span<const double> x) const {
    if (x.size() != dim()) throw ArgumentError("feature dimension does not match the standardizer");
    std::vector<double> z(x.size());
    for (std::size_t j = 0; j < x.size(); ++j) z[j] = (x[j] - mean[j]) / std[j];
    return z;
}

Standardizer standardize_fit(const LabeledMatrix& data, FitPopulation population) {
    data.validate();
    Standardizer st;
    st.population = population;
    st.mean.assign(data.dim, 0.0);
    st.std.assign(data.dim, 0.0);
    std::size_t n = 0;
    const auto selected = [&](std::size_t i) {
        return population == FitPopulation::all || data.y[i] == Label::bonafide;
    };
    for (std::size_t i = 0; i < data.rows(); ++i) {
        if (!selected(i)) continue;
        ++n;
        for (std::size_t j = 0; j < data.dim; ++j) st.mean[j] += data.x[i * data.dim + j];
    }
    if (n < 2) throw FitError("standardizer needs at least 2 rows in its fit population");
    for (auto& m : st.mean) m /= static_cast<double>(n);
    for (std::size_t i = 0; i < data.rows(); ++i) {
        if (!selected(i)) continue;
        for (std::size_t j = 0; j < data.dim; ++j) {
            const double d = data.x[i * data.dim + j] - st.mean[j];
            st.std[j] += d * d;
        }
    }
    for (auto& s : st.std) s = std::max(std::sqrt(s / static_cast<double>(n)), kStdFloor);
    return st;
}

LrModel lr_train(const LabeledMatrix& data, const LrOptions& opt, std::vector<double>* loss_trace) {
    data.validate();
    require_two_classes(data);
    if (!(opt.lambda >= 0.0) || !(opt.lr > 0.0) || opt.epochs < 0) throw ArgumentError("invalid LR options");

    LrModel model;
    model.lambda = opt.lambda;
    model.standardizer = standardize_fit(data, FitPopulation::bonafide_only);
    const auto z = standardize_all(data, model.standardizer);
    const std::size_t n = data.rows(), d = data.dim;
    const LrObjective obj{z, data, opt.lambda};

    std::vector<double> w(d, 0.0), grad(d), trial(d), margins(n);
    double b = 0.0, step = opt.lr;
    double loss = obj.loss(w, b, &margins);
    if (loss_trace) loss_trace->assign(1, loss);
    for (int epoch = 0; epoch < opt.epochs; ++epoch) {
        std::fill(grad.begin(), grad.end(), 0.0);
        double gb = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            const double y = data.y[i] == Label::bonafide ? 1.0 : 0.0;
            const double r = (sigmoid(margins[i]) - y) / static_cast<double>(n);
            axpyd(r, {z.data() + i * d, d}, grad);
            gb += r;
        }
        for (std::size_t j = 0; j < d; ++j) grad[j] += 2.0 * opt.lambda * w[j];

        bool accepted = false;
        for (int halving = 0; halving < 60 && !accepted; ++halving) {
            for (std::size_t j = 0; j < d; ++j) trial[j] = w[j] - step * grad[j];
            const double tb = b - step * gb;
            const double trial_loss = obj.loss(trial, tb);
            if (trial_loss <= loss) {
                w.swap(trial);
                b = tb;
                loss = obj.loss(w, b, &margins);
                accepted = true;
            } else {
                step *= 0.5;
            }
        }
        if (loss_trace) loss_trace->push_back(loss);
        if (!accepted) break;
    }
    model.w = std::move(w);
    model.bias = b;
    return model;
}

double lr_score(const LrModel& model, std::span<const double> x) {
    const auto z = model.standardizer.apply(x);
    if (z.size() != model.w.size()) throw ArgumentError("feature dimension does not match the model");
    return sigmoid(dotd(z, model.w) + model.bias);
}

SvmModel svm_train(const LabeledMatrix& data, const SvmOptions& opt) {
    data.validate();
    require_two_classes(data);
    if (!(opt.C > 0.0) || !(opt.lr > 0.0) || opt.epochs < 0) throw ArgumentError("invalid SVM options");

    SvmModel model;
    model.C = opt.C;
    model.standardizer = standardize_fit(data, opt.population);
    const auto z = standardize_all(data, model.standardizer);
    const std::size_t n = data.rows(), d = data.dim;

    const auto objective = [&](std::span<const double> w, double b) {
        double hinge = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            const double y = data.y[i] == Label::bonafide ? 1.0 : -1.0;
            hinge += std::max(0.0, 1.0 - y * (dotd({z.data() + i * d, d}, w) + b));
        }
        double reg = 0.0;
        for (double v : w) reg += v * v;
        return 0.5 * reg + opt.C * hinge / static_cast<double>(n);
    };

    std::vector<double> w(d, 0.0), grad(d);
    double b = 0.0;
    std::vector<double> best_w = w;
    double best_b = b, best = objective(w, b);
    for (int epoch = 0; epoch < opt.epochs; ++epoch) {
        grad = w;
        double gb = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            const double y = data.y[i] == Label::bonafide ? 1.0 : -1.0;
            const std::span<const double> zi{z.data() + i * d, d};
            if (y * (dotd(zi, w) + b) < 1.0) {
                axpyd(-opt.C * y / static_cast<double>(n), zi, grad);
                gb -= opt.C * y / static_cast<double>(n);
            }
        }
        const double step = opt.lr / std::sqrt(static_cast<double>(epoch) + 1.0);
        for (std::size_t j = 0; j < d; ++j) w[j] -= step * grad[j];
        b -= step * gb;
        const double f = objective(w, b);
        if (f < best) {
            best = f;
            best_w = w;
            best_b = b;
        }
    }
    model.w = std::move(best_w);
    model.bias = best_b;
    return model;
}

double svm_score(const SvmModel& model, std::span<const double> x) {
    const auto z = model.standardizer.apply(x);
    if (z.size() != model.w.size()) throw ArgumentError("feature dimension does not match the model");
    return dotd(z, model.w) + model.bias;
}

double ScoreNormalizer::apply(double s) const noexcept { return std::clamp((s - min) / (max - min), 0.0, 1.0); }

ScoreNormalizer score_normalize_fit(std::span<const double> scores) {
    if (scores.empty()) throw FitError("score normalizer needs scores");
    const auto [lo, hi] = std::minmax_element(scores.begin(), scores.end());
    if (!(*hi > *lo)) throw FitError("score normalizer needs at least 2 distinct scores");
    return {*lo, *hi};
}

double fuse_mean(std::span<const double> normalized) {
    if (normalized.empty()) throw ArgumentError("fusion needs at least one score");
    double sum = 0.0;
    for (double s : normalized) {
        if (!(s >= 0.0 && s <= 1.0)) throw ArgumentError("fused scores must lie in [0, 1]");
        sum += s;
    }
    return sum / static_cast<double>(normalized.size());
}

}  // namespace mcpad
