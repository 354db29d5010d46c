#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <string>

#include "prn/conv.hpp"
#include "prn/error.hpp"

namespace prn {

/// Catmull-Rom style cubic convolution kernel (a = -0.5).
inline double cubic_kernel(double x) {
    constexpr double a = -0.5;
    const double t = std::abs(x);
    if (t <= 1.0) return (a + 2.0) * t * t * t - (a + 3.0) * t * t + 1.0;
    if (t < 2.0) return a * t * t * t - 5.0 * a * t * t + 8.0 * a * t - 4.0 * a;
    return 0.0;
}

inline void check_scale(int scale) {
    if (scale < 2 || scale > 4) throw ArgumentError("unsupported scale factor " + std::to_string(scale));
}

/// Side length of the upsampling kernel for a scale factor: the full cubic
/// support (4 low-res pixels) plus one tap for odd factors so it stays centred.
inline std::size_t deconv_kernel_size(int scale) {
    check_scale(scale);
    return static_cast<std::size_t>(4 * scale + scale % 2);
}

/// Uniform Xavier/Glorot initialisation; bias zero. Deterministic for a given seed.
template <typename T = float>
LayerParams<T> xavier_init(const ConvSpec& spec, std::uint64_t seed) {
    LayerParams<T> p(spec);
    const double fan_in = static_cast<double>(spec.in_channels * spec.kh * spec.kw);
    const double fan_out = static_cast<double>(spec.out_channels * spec.kh * spec.kw);
    const double limit = std::sqrt(6.0 / (fan_in + fan_out));
    std::mt19937_64 rng(seed);
    // Map raw 53-bit draws ourselves so the sequence does not depend on the
    // standard library's distribution implementation.
    for (auto& v : p.weights.data()) {
        const double u = static_cast<double>(rng() >> 11) * 0x1.0p-53;
        v = static_cast<T>((2.0 * u - 1.0) * limit);
    }
    return p;
}

/// 1-D taps of the upsampling kernel; entry t samples cubic((t - centre) / scale).
inline std::vector<double> bicubic_taps(int scale) {
    const std::size_t k = deconv_kernel_size(scale);
    const double centre = (static_cast<double>(k) - 1.0) / 2.0;
    std::vector<double> taps(k);
    for (std::size_t t = 0; t < k; ++t) taps[t] = cubic_kernel((static_cast<double>(t) - centre) / scale);
    return taps;
}

/// Deconv layer (in_channels -> 1) whose untrained output is the bicubic upscaling
/// of the channel-averaged input: every input slice holds the separable kernel / in_channels.
template <typename T = float>
LayerParams<T> bicubic_deconv_init(int scale, std::size_t in_channels = 64) {
    const std::size_t k = deconv_kernel_size(scale);
    ConvSpec spec{in_channels, 1, k, k, 1, static_cast<std::size_t>(scale), 0, 0};
    LayerParams<T> p(spec);
    const std::vector<double> taps = bicubic_taps(scale);
    for (std::size_t ci = 0; ci < in_channels; ++ci)
        for (std::size_t y = 0; y < k; ++y)
            for (std::size_t x = 0; x < k; ++x)
                p.weights.at(0, ci, y, x) = static_cast<T>(taps[y] * taps[x] / static_cast<double>(in_channels));
    return p;
}

}  // namespace prn
