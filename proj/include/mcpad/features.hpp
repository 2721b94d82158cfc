#pragma once

#include <array>
#include <cstddef>
#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "mcpad/image.hpp"
#include "mcpad/types.hpp"

namespace mcpad {

struct FeatureVector {
    std::vector<double> values;
    SampleMeta meta;
    std::size_t frame_idx = 0;
    std::string extractor_id;
};

// ---- local binary patterns -------------------------------------------------

struct LbpConfig {
    int points = 8;  // 4, 8 or 16
    int radius = 1;
    bool uniform = true;
    int grid_rows = 3;
    int grid_cols = 3;

    void validate() const;
    [[nodiscard]] std::size_t bins_per_block() const;
    [[nodiscard]] std::string extractor_id() const;
};

// Bit k is set iff the bilinear sample at angle 2*pi*k/P (k = 0 east,
// counter-clockwise) is >= the center value.
[[nodiscard]] unsigned lbp_code(const ImageF& image, int x, int y, const LbpConfig& cfg);

// code -> bin; uniform codes (<= 2 circular transitions) in ascending code
// order, then one shared bin for everything else.
[[nodiscard]] std::vector<std::size_t> uniform_lbp_mapping(int points);

// Per-block L1-normalized code histograms, blocks concatenated row-major.
[[nodiscard]] FeatureVector lbp_histogram(const ImageF& image, const LbpConfig& cfg);

// ---- image quality measures -------------------------------------------------

inline constexpr std::size_t kIqmCount = 18;
inline constexpr double kPsnrCap = 100.0;
inline constexpr const char* kIqmExtractorId = "iqm18-v1";

[[nodiscard]] const std::array<const char*, kIqmCount>& iqm_measure_names();

// Luminance of an RGB frame compared with its 5x5, sigma 1.2 Gaussian-smoothed
// copy (symmetric-mirror border). `enabled` selects a subset by name; empty
// means all 18 in canonical order.
[[nodiscard]] FeatureVector iqm_features(const ImageF& rgb, const std::vector<std::string>& enabled = {});

// Smoothing used as the IQM reference image.
[[nodiscard]] ImageF iqm_reference(const ImageF& luminance);

// ---- RDWT + Haralick ---------------------------------------------------------

// One-level undecimated Haar transform, periodic boundary. First letter is
// the horizontal filter, second the vertical one.
struct Subbands {
    ImageF ll, lh, hl, hh;
};

[[nodiscard]] Subbands rdwt_haar(const ImageF& image);

struct GlcmConfig {
    int levels = 8;
    std::vector<std::pair<int, int>> offsets{{0, 1}, {1, 0}, {1, 1}, {1, -1}};  // (dy, dx)
    bool symmetric = true;

    void validate() const;
};

struct Glcm {
    int levels = 0;
    std::vector<double> p;  // row-major levels x levels, sums to 1

    [[nodiscard]] double at(int i, int j) const noexcept { return p[static_cast<std::size_t>(i) * levels + j]; }
};

// Uniform quantization over `range` (default: the region's own min..max);
// counts pooled over all offsets before normalization.
[[nodiscard]] Glcm glcm(const ImageF& region, const GlcmConfig& cfg,
                        std::optional<std::pair<double, double>> range = std::nullopt);

inline constexpr std::size_t kHaralickCount = 13;

// energy, contrast, correlation, variance, inverse difference moment,
// sum average, sum variance, sum entropy, entropy, difference variance,
// difference entropy, information measures of correlation 1 and 2 (log2).
[[nodiscard]] std::array<double, kHaralickCount> haralick13(const Glcm& m);

inline constexpr int kHaralickGrid = 4;
inline constexpr const char* kRdwtHaralickExtractorId = "rdwt-haralick-v1";

[[nodiscard]] FeatureVector rdwt_haralick_features(const ImageF& gray, const GlcmConfig& cfg = {});

// ---- feature dumps -----------------------------------------------------------

struct FeatureRow {
    std::string sample_id;
    std::size_t frame_idx = 0;

    friend bool operator==(const FeatureRow&, const FeatureRow&) = default;
};

struct FeatureTable {
    std::size_t dim = 0;
    std::vector<double> values;  // rows x dim, row-major
    std::vector<FeatureRow> rows;

    [[nodiscard]] std::size_t count() const noexcept { return rows.size(); }
    [[nodiscard]] const double* row(std::size_t i) const noexcept { return values.data() + i * dim; }
    void append(const FeatureVector& fv);
};

// "MCFV", u64 count, u64 dim, then row-major little-endian f64 values; the
// row sidecar "<path>.rows.csv" maps rows to (sample_id, frame_idx).
void write_feature_table(const FeatureTable& table, const std::filesystem::path& path);
[[nodiscard]] FeatureTable read_feature_table(const std::filesystem::path& path);

}  // namespace mcpad
