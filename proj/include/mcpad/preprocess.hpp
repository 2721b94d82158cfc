#pragma once

#include <array>
#include <filesystem>
#include <vector>

#include "mcpad/dataset.hpp"
#include "mcpad/image.hpp"

namespace mcpad {

struct AlignTargets {
    Point2 left_eye{44.0, 50.0};
    Point2 right_eye{84.0, 50.0};
    Point2 mouth{64.0, 96.0};
    int out_size = 128;

    // Default template rescaled from its 128-pixel reference to `out_size`.
    [[nodiscard]] static AlignTargets for_size(int out_size);
    void validate() const;
};

// x' = a x - b y + tx,  y' = b x + a y + ty
struct Similarity {
    double a = 1.0;
    double b = 0.0;
    double tx = 0.0;
    double ty = 0.0;

    [[nodiscard]] double scale() const noexcept;
    [[nodiscard]] double rotation() const noexcept;
    [[nodiscard]] Point2 apply(Point2 p) const noexcept;
    [[nodiscard]] Similarity inverse() const;
    // Row-major 2x3 affine matrix.
    [[nodiscard]] std::array<double, 6> matrix() const noexcept;
};

struct SimilarityFit {
    Similarity transform;  // maps source landmarks onto the targets
    double residual = 0.0; // RMS distance after mapping
};

// Least-squares similarity over the three landmark pairs.
[[nodiscard]] SimilarityFit estimate_similarity(const Landmarks& src, const AlignTargets& dst);

// Bilinear sample; taps outside the image read as 0.
[[nodiscard]] double sample_bilinear(const ImageF& img, double x, double y, int channel = 0) noexcept;

// Resamples `frame` into an out_size x out_size image; `transform` maps
// input coordinates to output coordinates.
[[nodiscard]] ImageF warp(const ImageF& frame, const Similarity& transform, int out_size);

// BT.601 luma, rounded per pixel.
[[nodiscard]] ImageF to_gray(const ImageF& rgb);

struct MadParams {
    double median = 0.0;
    double mad = 0.0;
    double span = 4.0;  // MADs mapped onto half of the 8-bit range
};

[[nodiscard]] MadParams mad_fit(const ImageF& frame, double span = 4.0);
// clamp(round(128 + (128 / span) * (v - median) / mad), 0, 255); 128 when mad == 0.
[[nodiscard]] ImageU8 mad_normalize(const ImageF& frame, const MadParams& params);

struct PreprocessOptions {
    std::size_t frames_per_video = 50;
    double mad_span = 4.0;
};

struct PreprocessResult {
    MultiChannelSample sample;
    std::size_t dropped_frames = 0;
};

// Produces gray/depth/infrared/thermal stacks at targets.out_size, 8-bit,
// all sharing frame_count. Frames without landmarks are dropped.
[[nodiscard]] PreprocessResult preprocess_sample(const MultiChannelSample& raw,
                                                 const std::vector<FrameLandmarks>& landmarks,
                                                 const AlignTargets& targets, const PreprocessOptions& options = {});

// Aligned RGB stack (no grayscale conversion) for the color-channel features.
[[nodiscard]] FrameStack align_color(const MultiChannelSample& raw, const std::vector<FrameLandmarks>& landmarks,
                                     const AlignTargets& targets, const PreprocessOptions& options = {});

[[nodiscard]] std::vector<FrameLandmarks> load_landmarks(const std::filesystem::path& container);

}  // namespace mcpad
