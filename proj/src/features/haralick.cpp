#include <algorithm>
#include <cmath>
#include <numbers>

#include "mcpad/error.hpp"
#include "mcpad/features.hpp"

namespace mcpad {
namespace {

double xlog2x(double p) { return p > 0.0 ? p * std::log2(p) : 0.0; }

// One separable pass: low = (a[i] + a[i+1]) / sqrt2, high = (a[i] - a[i+1]) / sqrt2.
void haar_rows(const ImageF& in, ImageF& low, ImageF& high) {
    low = ImageF(in.width, in.height);
    high = ImageF(in.width, in.height);
    const double h = 1.0 / std::numbers::sqrt2;
    for (int y = 0; y < in.height; ++y)
        for (int x = 0; x < in.width; ++x) {
            const double a = in.at(x, y), b = in.at((x + 1) % in.width, y);
            low.at(x, y) = h * a + h * b;
            high.at(x, y) = h * a - h * b;
        }
}

void haar_cols(const ImageF& in, ImageF& low, ImageF& high) {
    low = ImageF(in.width, in.height);
    high = ImageF(in.width, in.height);
    const double h = 1.0 / std::numbers::sqrt2;
    for (int y = 0; y < in.height; ++y)
        for (int x = 0; x < in.width; ++x) {
            const double a = in.at(x, y), b = in.at(x, (y + 1) % in.height);
            low.at(x, y) = h * a + h * b;
            high.at(x, y) = h * a - h * b;
        }
}

ImageF crop(const ImageF& img, int x0, int y0, int w, int h) {
    ImageF out(w, h);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) out.at(x, y) = img.at(x0 + x, y0 + y);
    return out;
}

std::pair<double, double> value_range(const ImageF& img) {
    const auto [lo, hi] = std::minmax_element(img.data.begin(), img.data.end());
    return {*lo, *hi};
}

}  // namespace

Subbands rdwt_haar(const ImageF& image) {
    if (image.channels != 1) throw ArgumentError("RDWT needs a single-channel image");
    if (image.width < 2 || image.height < 2) throw ArgumentError("RDWT needs at least a 2x2 image");
    ImageF l, h;
    haar_rows(image, l, h);
    Subbands s;
    haar_cols(l, s.ll, s.lh);
    haar_cols(h, s.hl, s.hh);
    return s;
}

void GlcmConfig::validate() const {
    if (levels < 2) throw ArgumentError("GLCM needs at least 2 levels");
    if (offsets.empty()) throw ArgumentError("GLCM needs at least one offset");
    for (const auto& [dy, dx] : offsets)
        if (dy == 0 && dx == 0) throw ArgumentError("GLCM offset (0, 0) is not allowed");
}

Glcm glcm(const ImageF& region, const GlcmConfig& cfg, std::optional<std::pair<double, double>> range) {
    cfg.validate();
    if (region.empty() || region.channels != 1) throw ArgumentError("GLCM needs a nonempty single-channel region");
    const auto [lo, hi] = range ? *range : value_range(region);
    const int L = cfg.levels;
    std::vector<int> q(region.data.size(), 0);
    if (hi > lo)
        for (std::size_t i = 0; i < q.size(); ++i)
            q[i] = std::clamp(static_cast<int>(std::floor((region.data[i] - lo) / (hi - lo) * L)), 0, L - 1);

    Glcm m;
    m.levels = L;
    m.p.assign(static_cast<std::size_t>(L) * L, 0.0);
    double total = 0.0;
    for (const auto& [dy, dx] : cfg.offsets)
        for (int y = 0; y < region.height; ++y)
            for (int x = 0; x < region.width; ++x) {
                const int x2 = x + dx, y2 = y + dy;
                if (x2 < 0 || y2 < 0 || x2 >= region.width || y2 >= region.height) continue;
                const int a = q[static_cast<std::size_t>(y) * region.width + x];
                const int b = q[static_cast<std::size_t>(y2) * region.width + x2];
                m.p[static_cast<std::size_t>(a) * L + b] += 1.0;
                total += 1.0;
                if (cfg.symmetric) {
                    m.p[static_cast<std::size_t>(b) * L + a] += 1.0;
                    total += 1.0;
                }
            }
    if (total == 0.0) throw ArgumentError("region too small for the GLCM offsets");
    for (auto& v : m.p) v /= total;
    return m;
}

std::array<double, kHaralickCount> haralick13(const Glcm& m) {
    const int L = m.levels;
    if (L < 1 || m.p.size() != static_cast<std::size_t>(L) * L) throw ArgumentError("malformed GLCM");
    double sum = 0.0;
    for (double v : m.p) sum += v;
    if (std::abs(sum - 1.0) > 1e-6) throw ArgumentError("GLCM is not normalized");

    std::vector<double> px(L, 0.0), py(L, 0.0), psum(2 * L - 1, 0.0), pdiff(L, 0.0);
    for (int i = 0; i < L; ++i)
        for (int j = 0; j < L; ++j) {
            const double p = m.at(i, j);
            px[i] += p;
            py[j] += p;
            psum[i + j] += p;
            pdiff[std::abs(i - j)] += p;
        }
    double mx = 0, my = 0;
    for (int i = 0; i < L; ++i) {
        mx += i * px[i];
        my += i * py[i];
    }
    double vx = 0, vy = 0;
    for (int i = 0; i < L; ++i) {
        vx += (i - mx) * (i - mx) * px[i];
        vy += (i - my) * (i - my) * py[i];
    }

    double energy = 0, contrast = 0, cross = 0, idm = 0, entropy = 0, hxy1 = 0, hxy2 = 0;
    for (int i = 0; i < L; ++i)
        for (int j = 0; j < L; ++j) {
            const double p = m.at(i, j);
            energy += p * p;
            cross += i * j * p;
            idm += p / (1.0 + (i - j) * (i - j));
            entropy -= xlog2x(p);
            const double pxy = px[i] * py[j];
            if (pxy > 0.0) {
                hxy1 -= p * std::log2(pxy);
                hxy2 -= pxy * std::log2(pxy);
            }
        }
    for (int k = 0; k < L; ++k) contrast += static_cast<double>(k) * k * pdiff[k];

    double sum_avg = 0, sum_entropy = 0;
    for (int k = 0; k < 2 * L - 1; ++k) {
        sum_avg += k * psum[k];
        sum_entropy -= xlog2x(psum[k]);
    }
    double sum_var = 0;
    for (int k = 0; k < 2 * L - 1; ++k) sum_var += (k - sum_avg) * (k - sum_avg) * psum[k];

    double diff_mean = 0, diff_entropy = 0;
    for (int k = 0; k < L; ++k) {
        diff_mean += k * pdiff[k];
        diff_entropy -= xlog2x(pdiff[k]);
    }
    double diff_var = 0;
    for (int k = 0; k < L; ++k) diff_var += (k - diff_mean) * (k - diff_mean) * pdiff[k];

    double hx = 0, hy = 0;
    for (int i = 0; i < L; ++i) {
        hx -= xlog2x(px[i]);
        hy -= xlog2x(py[i]);
    }

    std::array<double, kHaralickCount> f{};
    f[0] = energy;
    f[1] = contrast;
    f[2] = (vx > 0.0 && vy > 0.0) ? (cross - mx * my) / std::sqrt(vx * vy) : 0.0;
    f[3] = vx;
    f[4] = idm;
    f[5] = sum_avg;
    f[6] = sum_var;
    f[7] = sum_entropy;
    f[8] = entropy;
    f[9] = diff_var;
    f[10] = diff_entropy;
    const double hmax = std::max(hx, hy);
    f[11] = hmax > 0.0 ? (entropy - hxy1) / hmax : 0.0;
    // Entropies are in bits, so the exponential is taken base 2.
    f[12] = std::sqrt(std::max(0.0, 1.0 - std::exp2(-2.0 * (hxy2 - entropy))));
    return f;
}

FeatureVector rdwt_haralick_features(const ImageF& gray, const GlcmConfig& cfg) {
    if (gray.channels != 1) throw ArgumentError("RDWT-Haralick needs a single-channel image");
    if (gray.width < 2 * kHaralickGrid || gray.height < 2 * kHaralickGrid)
        throw ArgumentError("RDWT-Haralick needs at least an 8x8 image");
    const Subbands s = rdwt_haar(gray);
    const int cw = gray.width / kHaralickGrid, ch = gray.height / kHaralickGrid;

    FeatureVector fv;
    fv.extractor_id = kRdwtHaralickExtractorId;
    fv.values.reserve(4 * kHaralickGrid * kHaralickGrid * kHaralickCount);
    for (const ImageF* band : {&s.ll, &s.lh, &s.hl, &s.hh}) {
        const auto range = value_range(*band);
        for (int gy = 0; gy < kHaralickGrid; ++gy)
            for (int gx = 0; gx < kHaralickGrid; ++gx) {
                const auto h = haralick13(glcm(crop(*band, gx * cw, gy * ch, cw, ch), cfg, range));
                fv.values.insert(fv.values.end(), h.begin(), h.end());
            }
    }
    return fv;
}

}  // namespace mcpad
