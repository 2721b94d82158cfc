#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "mcpad/error.hpp"

namespace mcpad {

// Dense interleaved image. Pixel (x, y), component c lives at
// (y * width + x) * channels + c; pixel centers sit at integer coordinates.
template <typename T>
struct Image {
    int width = 0;
    int height = 0;
    int channels = 1;
    std::vector<T> data;

    Image() = default;
    Image(int w, int h, int c = 1, T fill = T{})
        : width(w), height(h), channels(c), data(static_cast<std::size_t>(w) * h * c, fill) {
        if (w < 0 || h < 0 || c <= 0) throw ArgumentError("invalid image shape");
    }

    [[nodiscard]] bool empty() const noexcept { return data.empty(); }
    [[nodiscard]] std::size_t pixels() const noexcept { return static_cast<std::size_t>(width) * height; }

    [[nodiscard]] T& at(int x, int y, int c = 0) noexcept {
        return data[(static_cast<std::size_t>(y) * width + x) * channels + c];
    }
    [[nodiscard]] const T& at(int x, int y, int c = 0) const noexcept {
        return data[(static_cast<std::size_t>(y) * width + x) * channels + c];
    }

    friend bool operator==(const Image&, const Image&) = default;
};

using ImageF = Image<double>;
using ImageU8 = Image<std::uint8_t>;

template <typename T>
ImageF to_real(const Image<T>& img) {
    ImageF out(img.width, img.height, img.channels);
    for (std::size_t i = 0; i < img.data.size(); ++i) out.data[i] = static_cast<double>(img.data[i]);
    return out;
}

// Wraps raw 16-bit container values as a real image.
inline ImageF image_from_values(std::span<const std::uint16_t> values, int width, int height, int channels) {
    if (values.size() != static_cast<std::size_t>(width) * height * channels)
        throw ArgumentError("value count does not match image shape");
    ImageF out(width, height, channels);
    for (std::size_t i = 0; i < values.size(); ++i) out.data[i] = values[i];
    return out;
}

}  // namespace mcpad
