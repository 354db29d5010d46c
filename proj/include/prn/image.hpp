#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "prn/error.hpp"
#include "prn/tensor.hpp"

namespace prn {

/// Single-channel float image; nominal range [0,1].
struct ImagePlane {
    std::size_t width = 0;
    std::size_t height = 0;
    std::vector<float> data;

    ImagePlane() = default;
    ImagePlane(std::size_t w, std::size_t h, float fill = 0.0f) : width(w), height(h), data(w * h, fill) {}

    float& at(std::size_t row, std::size_t col) { return data[row * width + col]; }
    float at(std::size_t row, std::size_t col) const { return data[row * width + col]; }
    std::size_t size() const { return data.size(); }
    bool empty() const { return data.empty(); }

    /// Copy with every sample clamped to [0,1].
    ImagePlane clamped() const {
        ImagePlane out = *this;
        for (auto& v : out.data) v = std::clamp(v, 0.0f, 1.0f);
        return out;
    }

    bool operator==(const ImagePlane&) const = default;
};

inline Tensor<float> plane_to_tensor(const ImagePlane& p) {
    return Tensor<float>(Shape{1, 1, p.height, p.width}, p.data);
}

inline ImagePlane tensor_to_plane(const Tensor<float>& t) {
    const Shape& s = t.shape();
    if (s.n != 1 || s.c != 1) throw DimensionError("expected a 1x1xHxW tensor, got " + s.str());
    ImagePlane p(s.w, s.h);
    std::copy(t.data().begin(), t.data().end(), p.data.begin());
    return p;
}

enum class ColorSpace { RGB, YCbCr };

/// Three float planes plus the colour space they are expressed in.
struct ColorImage {
    std::size_t width = 0;
    std::size_t height = 0;
    ColorSpace space = ColorSpace::RGB;
    std::array<ImagePlane, 3> planes;

    ColorImage() = default;
    ColorImage(std::size_t w, std::size_t h, ColorSpace s = ColorSpace::RGB)
        : width(w), height(h), space(s), planes{ImagePlane(w, h), ImagePlane(w, h), ImagePlane(w, h)} {}

    /// Image whose three channels all equal `p` (grey RGB).
    static ColorImage from_gray(const ImagePlane& p) {
        ColorImage img(p.width, p.height);
        img.planes = {p, p, p};
        return img;
    }

    /// Interleaved 8-bit samples (rounded, clamped).
    std::vector<std::uint8_t> to_bytes() const {
        std::vector<std::uint8_t> out(width * height * 3);
        for (std::size_t i = 0; i < width * height; ++i)
            for (std::size_t c = 0; c < 3; ++c) out[i * 3 + c] = quantize(planes[c].data[i]);
        return out;
    }

    static ColorImage from_bytes(std::size_t w, std::size_t h, const std::uint8_t* rgb) {
        ColorImage img(w, h);
        for (std::size_t i = 0; i < w * h; ++i)
            for (std::size_t c = 0; c < 3; ++c) img.planes[c].data[i] = static_cast<float>(rgb[i * 3 + c]) / 255.0f;
        return img;
    }

    static std::uint8_t quantize(float v) {
        return static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0f, 1.0f) * 255.0f));
    }

    bool operator==(const ColorImage&) const = default;
};

// ITU-R BT.601 studio-swing conversion on [0,1]-scaled samples: Y spans
// [16/255, 235/255], Cb/Cr are centred on 128/255.
namespace detail {

using Mat3 = std::array<std::array<double, 3>, 3>;

inline constexpr Mat3 kRgbToYcc{{{65.481, 128.553, 24.966}, {-37.797, -74.203, 112.0}, {112.0, -93.786, -18.214}}};
inline constexpr std::array<double, 3> kYccOffset{16.0, 128.0, 128.0};

inline Mat3 invert(const Mat3& m) {
    const double det = m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) -
                       m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0]) +
                       m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0]);
    Mat3 r{};
    r[0][0] = (m[1][1] * m[2][2] - m[1][2] * m[2][1]) / det;
    r[0][1] = (m[0][2] * m[2][1] - m[0][1] * m[2][2]) / det;
    r[0][2] = (m[0][1] * m[1][2] - m[0][2] * m[1][1]) / det;
    r[1][0] = (m[1][2] * m[2][0] - m[1][0] * m[2][2]) / det;
    r[1][1] = (m[0][0] * m[2][2] - m[0][2] * m[2][0]) / det;
    r[1][2] = (m[0][2] * m[1][0] - m[0][0] * m[1][2]) / det;
    r[2][0] = (m[1][0] * m[2][1] - m[1][1] * m[2][0]) / det;
    r[2][1] = (m[0][1] * m[2][0] - m[0][0] * m[2][1]) / det;
    r[2][2] = (m[0][0] * m[1][1] - m[0][1] * m[1][0]) / det;
    return r;
}

}  // namespace detail

inline ColorImage rgb_to_ycbcr(const ColorImage& rgb) {
    if (rgb.space != ColorSpace::RGB) throw ArgumentError("rgb_to_ycbcr: image is not tagged RGB");
    ColorImage out(rgb.width, rgb.height, ColorSpace::YCbCr);
    const auto& m = detail::kRgbToYcc;
    for (std::size_t i = 0; i < rgb.width * rgb.height; ++i) {
        const double r = rgb.planes[0].data[i], g = rgb.planes[1].data[i], b = rgb.planes[2].data[i];
        for (std::size_t c = 0; c < 3; ++c)
            out.planes[c].data[i] =
                static_cast<float>((detail::kYccOffset[c] + m[c][0] * r + m[c][1] * g + m[c][2] * b) / 255.0);
    }
    return out;
}

inline ColorImage ycbcr_to_rgb(const ColorImage& ycc) {
    if (ycc.space != ColorSpace::YCbCr) throw ArgumentError("ycbcr_to_rgb: image is not tagged YCbCr");
    static const detail::Mat3 inv = detail::invert(detail::kRgbToYcc);
    ColorImage out(ycc.width, ycc.height, ColorSpace::RGB);
    for (std::size_t i = 0; i < ycc.width * ycc.height; ++i) {
        double v[3];
        for (std::size_t c = 0; c < 3; ++c) v[c] = ycc.planes[c].data[i] * 255.0 - detail::kYccOffset[c];
        for (std::size_t c = 0; c < 3; ++c)
            out.planes[c].data[i] = static_cast<float>(inv[c][0] * v[0] + inv[c][1] * v[1] + inv[c][2] * v[2]);
    }
    return out;
}

/// Luminance plane of an RGB or YCbCr image.
inline ImagePlane luma(const ColorImage& img) {
    return img.space == ColorSpace::YCbCr ? img.planes[0] : rgb_to_ycbcr(img).planes[0];
}

}  // namespace prn
