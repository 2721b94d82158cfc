#include "mcpad/preprocess.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <map>

#include "mcpad/error.hpp"

namespace mcpad {
namespace {

using Complex = std::complex<double>;

Complex as_complex(Point2 p) { return {p.x, p.y}; }

double median_of(std::vector<double>& v) {
    const std::size_t n = v.size();
    const auto mid = v.begin() + static_cast<std::ptrdiff_t>(n / 2);
    std::nth_element(v.begin(), mid, v.end());
    const double upper = *mid;
    if (n % 2 == 1) return upper;
    const double lower = *std::max_element(v.begin(), mid);
    return 0.5 * (lower + upper);
}

std::uint8_t to_u8(double v) { return static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0, 255.0))); }

// Retained (raw frame index, landmarks) pairs after temporal sampling.
struct RetainedFrames {
    std::vector<std::pair<std::size_t, Landmarks>> frames;
    std::size_t dropped = 0;
};

RetainedFrames retain_frames(std::size_t frame_count, const std::vector<FrameLandmarks>& landmarks,
                             std::size_t frames_per_video) {
    std::map<std::size_t, Landmarks> by_frame;
    for (const auto& fl : landmarks) by_frame[fl.frame_index] = fl.landmarks;
    RetainedFrames out;
    for (auto idx : sample_frames(frame_count, frames_per_video)) {
        const auto it = by_frame.find(idx);
        if (it == by_frame.end()) {
            ++out.dropped;
            continue;
        }
        out.frames.emplace_back(idx, it->second);
    }
    return out;
}

std::uint16_t common_frame_count(const MultiChannelSample& raw) {
    if (raw.channels.empty()) throw SampleError("sample '" + raw.meta.sample_id + "' has no channels");
    const auto n = raw.channels.front().frame_count;
    for (const auto& c : raw.channels) {
        if (c.channel == ChannelId::gray) throw SampleError("raw sample must not contain a gray channel");
        if (c.frame_count != n) throw SampleError("raw channels are not temporally aligned");
    }
    return n;
}

FrameStack output_stack(ChannelId id, int size, std::size_t frames) {
    FrameStack s;
    s.channel = id;
    s.width = s.height = static_cast<std::uint16_t>(size);
    s.frame_count = static_cast<std::uint16_t>(frames);
    s.bit_depth = 8;
    s.values.reserve(s.frame_size() * frames);
    return s;
}

}  // namespace

AlignTargets AlignTargets::for_size(int out_size) {
    AlignTargets t;
    const double k = out_size / 128.0;
    t.left_eye = {t.left_eye.x * k, t.left_eye.y * k};
    t.right_eye = {t.right_eye.x * k, t.right_eye.y * k};
    t.mouth = {t.mouth.x * k, t.mouth.y * k};
    t.out_size = out_size;
    return t;
}

void AlignTargets::validate() const {
    if (out_size <= 0) throw ArgumentError("output size must be positive");
    for (const auto& p : {left_eye, right_eye, mouth})
        if (!(p.x >= 0 && p.y >= 0 && p.x <= out_size - 1 && p.y <= out_size - 1))
            throw ArgumentError("alignment target lies outside the output image");
    if (left_eye == right_eye) throw ArgumentError("eye targets coincide");
}

double Similarity::scale() const noexcept { return std::hypot(a, b); }
double Similarity::rotation() const noexcept { return std::atan2(b, a); }

Point2 Similarity::apply(Point2 p) const noexcept { return {a * p.x - b * p.y + tx, b * p.x + a * p.y + ty}; }

Similarity Similarity::inverse() const {
    const Complex z(a, b);
    if (std::norm(z) == 0.0) throw GeometryError("similarity transform is singular");
    const Complex zi = 1.0 / z;
    const Complex t = -zi * Complex(tx, ty);
    return {zi.real(), zi.imag(), t.real(), t.imag()};
}

std::array<double, 6> Similarity::matrix() const noexcept { return {a, -b, tx, b, a, ty}; }

SimilarityFit estimate_similarity(const Landmarks& src, const AlignTargets& dst) {
    src.validate();
    const std::array<Complex, 3> s{as_complex(src.left_eye), as_complex(src.right_eye), as_complex(src.mouth)};
    const std::array<Complex, 3> d{as_complex(dst.left_eye), as_complex(dst.right_eye), as_complex(dst.mouth)};
    const Complex s_mean = (s[0] + s[1] + s[2]) / 3.0;
    const Complex d_mean = (d[0] + d[1] + d[2]) / 3.0;
    Complex num(0.0, 0.0);
    double den = 0.0;
    for (std::size_t i = 0; i < 3; ++i) {
        num += std::conj(s[i] - s_mean) * (d[i] - d_mean);
        den += std::norm(s[i] - s_mean);
    }
    if (!(den > 0.0)) throw GeometryError("landmarks have zero spread");
    const Complex z = num / den;
    const Complex t = d_mean - z * s_mean;
    SimilarityFit fit;
    fit.transform = {z.real(), z.imag(), t.real(), t.imag()};
    double sq = 0.0;
    for (std::size_t i = 0; i < 3; ++i) sq += std::norm(z * s[i] + t - d[i]);
    fit.residual = std::sqrt(sq / 3.0);
    return fit;
}

double sample_bilinear(const ImageF& img, double x, double y, int channel) noexcept {
    const double fx0 = std::floor(x), fy0 = std::floor(y);
    const int x0 = static_cast<int>(fx0), y0 = static_cast<int>(fy0);
    const double fx = x - fx0, fy = y - fy0;
    const auto tap = [&](int xx, int yy) {
        return (xx < 0 || yy < 0 || xx >= img.width || yy >= img.height) ? 0.0 : img.at(xx, yy, channel);
    };
    const double c00 = tap(x0, y0), c10 = tap(x0 + 1, y0), c01 = tap(x0, y0 + 1), c11 = tap(x0 + 1, y0 + 1);
    return c00 + fx * (c10 - c00) + fy * (c01 - c00) + fx * fy * (c11 - c10 - c01 + c00);
}

ImageF warp(const ImageF& frame, const Similarity& transform, int out_size) {
    if (out_size <= 0) throw ArgumentError("output size must be positive");
    if (frame.empty()) throw ArgumentError("cannot warp an empty image");
    const Similarity inv = transform.inverse();
    ImageF out(out_size, out_size, frame.channels);
    for (int y = 0; y < out_size; ++y)
        for (int x = 0; x < out_size; ++x) {
            const Point2 p = inv.apply({static_cast<double>(x), static_cast<double>(y)});
            for (int c = 0; c < frame.channels; ++c) out.at(x, y, c) = sample_bilinear(frame, p.x, p.y, c);
        }
    return out;
}

ImageF to_gray(const ImageF& rgb) {
    if (rgb.channels != 3) throw ArgumentError("grayscale conversion needs a 3-channel image");
    ImageF out(rgb.width, rgb.height, 1);
    for (std::size_t i = 0; i < out.data.size(); ++i) {
        const double* p = &rgb.data[3 * i];
        out.data[i] = std::round(0.299 * p[0] + 0.587 * p[1] + 0.114 * p[2]);
    }
    return out;
}

MadParams mad_fit(const ImageF& frame, double span) {
    if (frame.empty()) throw ArgumentError("cannot fit MAD on an empty image");
    if (!(span > 0.0)) throw ArgumentError("MAD span must be positive");
    std::vector<double> values = frame.data;
    MadParams p;
    p.span = span;
    p.median = median_of(values);
    for (auto& v : values) v = std::abs(v - p.median);
    p.mad = median_of(values);
    return p;
}

ImageU8 mad_normalize(const ImageF& frame, const MadParams& params) {
    if (!(params.span > 0.0) || params.mad < 0.0) throw ArgumentError("invalid MAD parameters");
    ImageU8 out(frame.width, frame.height, frame.channels, 128);
    if (params.mad == 0.0) return out;
    const double gain = 128.0 / params.span;
    // Half-way cases round up with a little slack, so an affine rescaling of
    // the input that lands a tie one ulp low still maps to the same byte.
    for (std::size_t i = 0; i < frame.data.size(); ++i) {
        const double v = 128.0 + gain * ((frame.data[i] - params.median) / params.mad);
        out.data[i] = static_cast<std::uint8_t>(std::clamp(std::floor(v + 0.5 + 1e-9), 0.0, 255.0));
    }
    return out;
}

PreprocessResult preprocess_sample(const MultiChannelSample& raw, const std::vector<FrameLandmarks>& landmarks,
                                   const AlignTargets& targets, const PreprocessOptions& options) {
    targets.validate();
    const auto frame_count = common_frame_count(raw);
    const auto retained = retain_frames(frame_count, landmarks, options.frames_per_video);
    if (retained.frames.empty())
        throw SampleError("sample '" + raw.meta.sample_id + "': every sampled frame lacks landmarks");

    const int size = targets.out_size;
    PreprocessResult result;
    result.dropped_frames = retained.dropped;
    result.sample.meta = raw.meta;
    for (const auto& stack : raw.channels) {
        const ChannelId out_id = stack.channel == ChannelId::color ? ChannelId::gray : stack.channel;
        FrameStack out = output_stack(out_id, size, retained.frames.size());
        for (const auto& [idx, marks] : retained.frames) {
            const auto transform = estimate_similarity(marks, targets).transform;
            ImageF src = image_from_values(stack.frame(idx), stack.width, stack.height,
                                           static_cast<int>(stack.components()));
            if (stack.channel == ChannelId::color) {
                const ImageF aligned = warp(to_gray(src), transform, size);
                for (double v : aligned.data) out.values.push_back(to_u8(v));
            } else {
                const ImageF aligned = warp(src, transform, size);
                const ImageU8 norm = mad_normalize(aligned, mad_fit(aligned, options.mad_span));
                out.values.insert(out.values.end(), norm.data.begin(), norm.data.end());
            }
        }
        result.sample.channels.push_back(std::move(out));
    }
    std::sort(result.sample.channels.begin(), result.sample.channels.end(),
              [](const FrameStack& l, const FrameStack& r) { return l.channel < r.channel; });
    return result;
}

FrameStack align_color(const MultiChannelSample& raw, const std::vector<FrameLandmarks>& landmarks,
                       const AlignTargets& targets, const PreprocessOptions& options) {
    targets.validate();
    const auto& color = raw.at(ChannelId::color);
    const auto retained = retain_frames(common_frame_count(raw), landmarks, options.frames_per_video);
    if (retained.frames.empty())
        throw SampleError("sample '" + raw.meta.sample_id + "': every sampled frame lacks landmarks");
    FrameStack out = output_stack(ChannelId::color, targets.out_size, retained.frames.size());
    for (const auto& [idx, marks] : retained.frames) {
        const auto transform = estimate_similarity(marks, targets).transform;
        const ImageF aligned = warp(image_from_values(color.frame(idx), color.width, color.height, 3), transform,
                                    targets.out_size);
        for (double v : aligned.data) out.values.push_back(to_u8(v));
    }
    return out;
}

std::vector<FrameLandmarks> load_landmarks(const std::filesystem::path& container) {
    return parse_landmarks(read_text(landmarks_path_for(container)));
}

}  // namespace mcpad
