#include <algorithm>
#include <cmath>
#include <complex>
#include <mutex>
#include <numbers>

#include <fftw3.h>

#include "mcpad/error.hpp"
#include "mcpad/features.hpp"

namespace mcpad {
namespace {

constexpr int kKernelRadius = 2;
constexpr double kSigma = 1.2;
constexpr double kEdgeThreshold = 16.0;
constexpr double kHarrisK = 0.04;
constexpr double kHarrisThreshold = 1e5;
constexpr int kHistogramBins = 32;
constexpr double kLowFrequencyFraction = 0.15;

const std::array<const char*, kIqmCount> kNames{
    "mse", "psnr", "snr", "structural_content", "normalized_cross_correlation", "average_difference",
    "maximum_difference", "normalized_absolute_error", "laplacian_mse", "spectral_magnitude_error",
    "spectral_phase_error", "gradient_magnitude_error", "mean_angle_similarity",
    "mean_angle_magnitude_similarity", "total_edge_difference", "total_corner_difference",
    "histogram_chi_square", "high_low_frequency_index"};

// Symmetric reflection with edge repeat, periodic beyond one reflection.
int mirror(int i, int n) {
    const int period = 2 * n;
    int m = i % period;
    if (m < 0) m += period;
    return m < n ? m : period - 1 - m;
}

std::array<double, 2 * kKernelRadius + 1> gaussian_taps() {
    std::array<double, 2 * kKernelRadius + 1> w{};
    double sum = 0.0;
    for (int k = -kKernelRadius; k <= kKernelRadius; ++k) {
        w[k + kKernelRadius] = std::exp(-(k * k) / (2.0 * kSigma * kSigma));
        sum += w[k + kKernelRadius];
    }
    for (auto& v : w) v /= sum;
    return w;
}

ImageF luminance(const ImageF& rgb) {
    ImageF out(rgb.width, rgb.height, 1);
    for (std::size_t i = 0; i < out.data.size(); ++i)
        out.data[i] = 0.299 * rgb.data[3 * i] + 0.587 * rgb.data[3 * i + 1] + 0.114 * rgb.data[3 * i + 2];
    return out;
}

// 3x3 Sobel derivatives divided by 8 (intensity units per pixel).
void sobel(const ImageF& img, ImageF& gx, ImageF& gy) {
    gx = ImageF(img.width, img.height);
    gy = ImageF(img.width, img.height);
    const auto v = [&](int x, int y) { return img.at(mirror(x, img.width), mirror(y, img.height)); };
    for (int y = 0; y < img.height; ++y)
        for (int x = 0; x < img.width; ++x) {
            gx.at(x, y) = ((v(x + 1, y - 1) + 2 * v(x + 1, y) + v(x + 1, y + 1)) -
                           (v(x - 1, y - 1) + 2 * v(x - 1, y) + v(x - 1, y + 1))) / 8.0;
            gy.at(x, y) = ((v(x - 1, y + 1) + 2 * v(x, y + 1) + v(x + 1, y + 1)) -
                           (v(x - 1, y - 1) + 2 * v(x, y - 1) + v(x + 1, y - 1))) / 8.0;
        }
}

ImageF laplacian(const ImageF& img) {
    ImageF out(img.width, img.height);
    const auto v = [&](int x, int y) { return img.at(mirror(x, img.width), mirror(y, img.height)); };
    for (int y = 0; y < img.height; ++y)
        for (int x = 0; x < img.width; ++x)
            out.at(x, y) = v(x + 1, y) + v(x - 1, y) + v(x, y + 1) + v(x, y - 1) - 4.0 * v(x, y);
    return out;
}

std::mutex& fftw_planner_mutex() {
    static std::mutex m;
    return m;
}

std::vector<std::complex<double>> spectrum(const ImageF& img) {
    const std::size_t n = img.pixels();
    fftw_complex* buf = fftw_alloc_complex(n);
    if (!buf) throw std::bad_alloc();
    fftw_plan plan;
    {
        std::lock_guard lock(fftw_planner_mutex());
        plan = fftw_plan_dft_2d(img.height, img.width, buf, buf, FFTW_FORWARD, FFTW_ESTIMATE);
    }
    for (std::size_t i = 0; i < n; ++i) {
        buf[i][0] = img.data[i];
        buf[i][1] = 0.0;
    }
    fftw_execute(plan);
    std::vector<std::complex<double>> out(n);
    for (std::size_t i = 0; i < n; ++i) out[i] = {buf[i][0] / static_cast<double>(n), buf[i][1] / static_cast<double>(n)};
    {
        std::lock_guard lock(fftw_planner_mutex());
        fftw_destroy_plan(plan);
    }
    fftw_free(buf);
    return out;
}

std::size_t harris_corners(const ImageF& img) {
    ImageF gx, gy;
    sobel(img, gx, gy);
    ImageF response(img.width, img.height);
    for (int y = 0; y < img.height; ++y)
        for (int x = 0; x < img.width; ++x) {
            double sxx = 0, syy = 0, sxy = 0;
            for (int dy = -1; dy <= 1; ++dy)
                for (int dx = -1; dx <= 1; ++dx) {
                    const int xx = mirror(x + dx, img.width), yy = mirror(y + dy, img.height);
                    const double a = gx.at(xx, yy), b = gy.at(xx, yy);
                    sxx += a * a;
                    syy += b * b;
                    sxy += a * b;
                }
            const double tr = sxx + syy;
            response.at(x, y) = sxx * syy - sxy * sxy - kHarrisK * tr * tr;
        }
    std::size_t count = 0;
    for (int y = 0; y < img.height; ++y)
        for (int x = 0; x < img.width; ++x) {
            const double r = response.at(x, y);
            if (r <= kHarrisThreshold) continue;
            bool peak = true;
            for (int dy = -1; dy <= 1 && peak; ++dy)
                for (int dx = -1; dx <= 1; ++dx) {
                    const int xx = x + dx, yy = y + dy;
                    if ((dx || dy) && xx >= 0 && yy >= 0 && xx < img.width && yy < img.height && response.at(xx, yy) > r) {
                        peak = false;
                        break;
                    }
                }
            count += peak;
        }
    return count;
}

std::vector<double> histogram(const ImageF& img) {
    std::vector<double> h(kHistogramBins, 0.0);
    for (double v : img.data) {
        const int b = std::clamp(static_cast<int>(std::floor(v / (256.0 / kHistogramBins))), 0, kHistogramBins - 1);
        h[b] += 1.0;
    }
    for (auto& v : h) v /= static_cast<double>(img.pixels());
    return h;
}

double wrap_phase(double d) {
    d = std::remainder(d, 2.0 * std::numbers::pi);
    return d;
}

double safe_db(double num, double den) {
    if (den <= 0.0) return kPsnrCap;
    if (num <= 0.0) return -kPsnrCap;
    return std::clamp(10.0 * std::log10(num / den), -kPsnrCap, kPsnrCap);
}

}  // namespace

const std::array<const char*, kIqmCount>& iqm_measure_names() { return kNames; }

ImageF iqm_reference(const ImageF& lum) {
    if (lum.channels != 1 || lum.empty()) throw ArgumentError("reference smoothing needs a nonempty gray image");
    const auto w = gaussian_taps();
    ImageF tmp(lum.width, lum.height), out(lum.width, lum.height);
    // Accumulated as center + sum w_k (neighbor - center): constant input stays exact.
    for (int y = 0; y < lum.height; ++y)
        for (int x = 0; x < lum.width; ++x) {
            const double c = lum.at(x, y);
            double acc = 0.0;
            for (int k = -kKernelRadius; k <= kKernelRadius; ++k)
                acc += w[k + kKernelRadius] * (lum.at(mirror(x + k, lum.width), y) - c);
            tmp.at(x, y) = c + acc;
        }
    for (int y = 0; y < lum.height; ++y)
        for (int x = 0; x < lum.width; ++x) {
            const double c = tmp.at(x, y);
            double acc = 0.0;
            for (int k = -kKernelRadius; k <= kKernelRadius; ++k)
                acc += w[k + kKernelRadius] * (tmp.at(x, mirror(y + k, lum.height)) - c);
            out.at(x, y) = c + acc;
        }
    return out;
}

FeatureVector iqm_features(const ImageF& rgb, const std::vector<std::string>& enabled) {
    if (rgb.channels != 3) throw ArgumentError("IQM features need a 3-channel image");
    if (rgb.empty()) throw ArgumentError("IQM features need a nonempty image");
    const ImageF I = luminance(rgb);
    const ImageF R = iqm_reference(I);
    const auto n = static_cast<double>(I.pixels());

    double sq_err = 0, sum_i2 = 0, sum_r2 = 0, sum_ir = 0, sum_diff = 0, max_diff = 0, sum_abs_diff = 0, sum_abs_i = 0;
    for (std::size_t k = 0; k < I.data.size(); ++k) {
        const double a = I.data[k], b = R.data[k], d = a - b;
        sq_err += d * d;
        sum_i2 += a * a;
        sum_r2 += b * b;
        sum_ir += a * b;
        sum_diff += d;
        max_diff = std::max(max_diff, std::abs(d));
        sum_abs_diff += std::abs(d);
        sum_abs_i += std::abs(a);
    }
    const double mse = sq_err / n;

    std::array<double, kIqmCount> m{};
    m[0] = mse;
    m[1] = mse == 0.0 ? kPsnrCap : std::min(kPsnrCap, 10.0 * std::log10(255.0 * 255.0 / mse));
    m[2] = safe_db(sum_i2, sq_err);
    m[3] = sum_r2 > 0.0 ? sum_i2 / sum_r2 : 1.0;
    m[4] = sum_i2 > 0.0 ? sum_ir / sum_i2 : 1.0;
    m[5] = sum_diff / n;
    m[6] = max_diff;
    m[7] = sum_abs_i > 0.0 ? sum_abs_diff / sum_abs_i : 0.0;

    const ImageF LI = laplacian(I), LR = laplacian(R);
    double lap_num = 0, lap_den = 0;
    for (std::size_t k = 0; k < LI.data.size(); ++k) {
        const double d = LI.data[k] - LR.data[k];
        lap_num += d * d;
        lap_den += LI.data[k] * LI.data[k];
    }
    m[8] = lap_den > 0.0 ? lap_num / lap_den : 0.0;

    const auto FI = spectrum(I), FR = spectrum(R);
    double mag_err = 0, phase_err = 0, low = 0, high = 0;
    for (int v = 0; v < I.height; ++v)
        for (int u = 0; u < I.width; ++u) {
            const std::size_t k = static_cast<std::size_t>(v) * I.width + u;
            const double d = std::abs(FI[k]) - std::abs(FR[k]);
            mag_err += d * d;
            const double p = wrap_phase(std::arg(FI[k]) - std::arg(FR[k]));
            phase_err += p * p;
            const int fu = u <= I.width / 2 ? u : u - I.width;
            const int fv = v <= I.height / 2 ? v : v - I.height;
            const bool is_low = std::abs(fu) <= kLowFrequencyFraction * I.width &&
                                std::abs(fv) <= kLowFrequencyFraction * I.height;
            (is_low ? low : high) += std::abs(FI[k]);
        }
    m[9] = mag_err / n;
    m[10] = phase_err / n;
    m[17] = (low + high) > 0.0 ? std::abs(low - high) / (low + high) : 0.0;

    ImageF gxI, gyI, gxR, gyR;
    sobel(I, gxI, gyI);
    sobel(R, gxR, gyR);
    const double max_grad_diff = 2.0 * 255.0 * std::numbers::sqrt2;
    double grad_err = 0, angle_sum = 0, angle_mag_sum = 0, edge_diff = 0;
    std::size_t angle_count = 0;
    for (std::size_t k = 0; k < I.data.size(); ++k) {
        const double ax = gxI.data[k], ay = gyI.data[k], bx = gxR.data[k], by = gyR.data[k];
        const double ma = std::hypot(ax, ay), mb = std::hypot(bx, by);
        grad_err += (ma - mb) * (ma - mb);
        edge_diff += std::abs(static_cast<double>(ma >= kEdgeThreshold) - static_cast<double>(mb >= kEdgeThreshold));
        if (ma > 1e-12 && mb > 1e-12) {
            const double cosine = std::clamp((ax * bx + ay * by) / (ma * mb), -1.0, 1.0);
            const double alpha = 2.0 / std::numbers::pi * std::acos(cosine);
            angle_sum += alpha;
            angle_mag_sum += (1.0 - alpha) * (1.0 - std::hypot(ax - bx, ay - by) / max_grad_diff);
            ++angle_count;
        }
    }
    m[11] = grad_err / n;
    m[12] = angle_count ? 1.0 - angle_sum / static_cast<double>(angle_count) : 1.0;
    m[13] = angle_count ? angle_mag_sum / static_cast<double>(angle_count) : 1.0;
    m[14] = edge_diff / n;

    const auto ci = static_cast<double>(harris_corners(I)), cr = static_cast<double>(harris_corners(R));
    m[15] = std::abs(ci - cr) / std::max({ci, cr, 1.0});

    const auto hi = histogram(I), hr = histogram(R);
    double chi = 0.0;
    for (int b = 0; b < kHistogramBins; ++b)
        if (hi[b] + hr[b] > 0.0) chi += (hi[b] - hr[b]) * (hi[b] - hr[b]) / (hi[b] + hr[b]);
    m[16] = chi;

    FeatureVector fv;
    fv.extractor_id = kIqmExtractorId;
    if (enabled.empty()) {
        fv.values.assign(m.begin(), m.end());
        return fv;
    }
    for (std::size_t k = 0; k < kIqmCount; ++k)
        if (std::find(enabled.begin(), enabled.end(), kNames[k]) != enabled.end()) fv.values.push_back(m[k]);
    for (const auto& name : enabled)
        if (std::find_if(kNames.begin(), kNames.end(), [&](const char* n2) { return name == n2; }) == kNames.end())
            throw ArgumentError("unknown IQM measure '" + name + "'");
    return fv;
}

}  // namespace mcpad
