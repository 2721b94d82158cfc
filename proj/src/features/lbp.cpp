#include <bit>
#include <cmath>
#include <numbers>

#include "mcpad/error.hpp"
#include "mcpad/features.hpp"

namespace mcpad {
namespace {

struct Neighbor {
    double dx, dy;
};

double snap(double v) {
    const double r = std::round(v);
    return std::abs(v - r) < 1e-9 ? r : v;
}

std::vector<Neighbor> neighbors(const LbpConfig& cfg) {
    std::vector<Neighbor> out;
    for (int k = 0; k < cfg.points; ++k) {
        const double angle = 2.0 * std::numbers::pi * k / cfg.points;
        out.push_back({snap(cfg.radius * std::cos(angle)), snap(-cfg.radius * std::sin(angle))});
    }
    return out;
}

// Sign test of (bilinear sample - center), evaluated on differences so that
// equal inputs compare exactly equal.
bool neighbor_ge(const ImageF& img, int x, int y, Neighbor n) {
    const double sx = x + n.dx, sy = y + n.dy;
    const double fx0 = std::floor(sx), fy0 = std::floor(sy);
    const int x0 = static_cast<int>(fx0), y0 = static_cast<int>(fy0);
    const double fx = sx - fx0, fy = sy - fy0;
    const int x1 = std::min(x0 + 1, img.width - 1), y1 = std::min(y0 + 1, img.height - 1);
    const double center = img.at(x, y);
    const double c00 = img.at(x0, y0), c10 = img.at(x1, y0), c01 = img.at(x0, y1), c11 = img.at(x1, y1);
    double delta = c00 - center;
    if (fx != 0.0) delta += fx * (c10 - c00);
    if (fy != 0.0) delta += fy * (c01 - c00);
    if (fx != 0.0 && fy != 0.0) delta += fx * fy * ((c11 - c10) - (c01 - c00));
    return delta >= 0.0;
}

unsigned code_at(const ImageF& img, int x, int y, const std::vector<Neighbor>& nbrs) {
    unsigned code = 0;
    for (std::size_t k = 0; k < nbrs.size(); ++k)
        if (neighbor_ge(img, x, y, nbrs[k])) code |= 1u << k;
    return code;
}

}  // namespace

void LbpConfig::validate() const {
    if (points != 4 && points != 8 && points != 16) throw ArgumentError("LBP neighbor count must be 4, 8 or 16");
    if (radius < 1) throw ArgumentError("LBP radius must be >= 1");
    if (grid_rows < 1 || grid_cols < 1) throw ArgumentError("LBP grid must be at least 1x1");
}

std::size_t LbpConfig::bins_per_block() const {
    if (!uniform) return std::size_t{1} << points;
    return static_cast<std::size_t>(points) * (points - 1) + 3;
}

std::string LbpConfig::extractor_id() const {
    return "lbp-P" + std::to_string(points) + "R" + std::to_string(radius) + (uniform ? "u2" : "") + "-" +
           std::to_string(grid_rows) + "x" + std::to_string(grid_cols);
}

unsigned lbp_code(const ImageF& image, int x, int y, const LbpConfig& cfg) {
    cfg.validate();
    if (image.channels != 1) throw ArgumentError("LBP needs a single-channel image");
    const int r = cfg.radius;
    if (x < r || y < r || x >= image.width - r || y >= image.height - r)
        throw ArgumentError("LBP center lies closer than the radius to the border");
    return code_at(image, x, y, neighbors(cfg));
}

std::vector<std::size_t> uniform_lbp_mapping(int points) {
    const std::size_t codes = std::size_t{1} << points;
    const unsigned mask = static_cast<unsigned>(codes - 1);
    const std::size_t other = static_cast<std::size_t>(points) * (points - 1) + 2;
    std::vector<std::size_t> map(codes, other);
    std::size_t next = 0;
    for (unsigned code = 0; code < codes; ++code) {
        const unsigned rotated = ((code >> 1) | (code << (points - 1))) & mask;
        if (std::popcount(code ^ rotated) <= 2) map[code] = next++;
    }
    return map;
}

FeatureVector lbp_histogram(const ImageF& image, const LbpConfig& cfg) {
    cfg.validate();
    if (image.channels != 1) throw ArgumentError("LBP needs a single-channel image");
    const int r = cfg.radius;
    if (image.width <= 2 * r + 1 || image.height <= 2 * r + 1) throw ArgumentError("image too small for LBP radius");
    const int valid_w = image.width - 2 * r, valid_h = image.height - 2 * r;
    const int block_w = valid_w / cfg.grid_cols, block_h = valid_h / cfg.grid_rows;
    if (block_w < 1 || block_h < 1) throw ArgumentError("image too small for the LBP grid");

    const auto nbrs = neighbors(cfg);
    std::vector<std::size_t> mapping;
    if (cfg.uniform) mapping = uniform_lbp_mapping(cfg.points);
    const std::size_t bins = cfg.bins_per_block();

    FeatureVector fv;
    fv.extractor_id = cfg.extractor_id();
    fv.values.assign(bins * cfg.grid_rows * cfg.grid_cols, 0.0);
    for (int by = 0; by < cfg.grid_rows; ++by)
        for (int bx = 0; bx < cfg.grid_cols; ++bx) {
            double* hist = fv.values.data() + (static_cast<std::size_t>(by) * cfg.grid_cols + bx) * bins;
            for (int y = r + by * block_h; y < r + (by + 1) * block_h; ++y)
                for (int x = r + bx * block_w; x < r + (bx + 1) * block_w; ++x) {
                    const unsigned code = code_at(image, x, y, nbrs);
                    hist[cfg.uniform ? mapping[code] : code] += 1.0;
                }
            const double total = static_cast<double>(block_w) * block_h;
            for (std::size_t b = 0; b < bins; ++b) hist[b] /= total;
        }
    return fv;
}

}  // namespace mcpad
