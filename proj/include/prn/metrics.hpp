#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "prn/error.hpp"
#include "prn/image.hpp"

namespace prn {

inline constexpr double kPsnrCap = 100.0;

namespace detail {

inline void check_same_dims(const ImagePlane& a, const ImagePlane& b, const char* what) {
    if (a.width != b.width || a.height != b.height) {
        throw DimensionError(std::string(what) + ": image sizes differ (" + std::to_string(a.width) + "x" +
                             std::to_string(a.height) + " vs " + std::to_string(b.width) + "x" +
                             std::to_string(b.height) + ")");
    }
}

}  // namespace detail

/// Drops `border` pixels from every side.
inline ImagePlane shave(const ImagePlane& p, std::size_t border) {
    if (border == 0) return p;
    if (2 * border >= p.width || 2 * border >= p.height) {
        throw DimensionError("shave of " + std::to_string(border) + " leaves nothing of a " + std::to_string(p.width) +
                             "x" + std::to_string(p.height) + " image");
    }
    ImagePlane out(p.width - 2 * border, p.height - 2 * border);
    for (std::size_t r = 0; r < out.height; ++r)
        for (std::size_t c = 0; c < out.width; ++c) out.at(r, c) = p.at(r + border, c + border);
    return out;
}

inline double mse(const ImagePlane& a, const ImagePlane& b) {
    detail::check_same_dims(a, b, "mse");
    if (a.empty()) throw DimensionError("mse of empty images");
    double acc = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double d = static_cast<double>(a.data[i]) - static_cast<double>(b.data[i]);
        acc += d * d;
    }
    return acc / static_cast<double>(a.size());
}

/// 10 log10(1/MSE) for [0,1] data after shaving `border` pixels; capped at 100 dB.
inline double psnr(const ImagePlane& pred, const ImagePlane& ref, std::size_t border = 0) {
    detail::check_same_dims(pred, ref, "psnr");
    const double e = mse(shave(pred, border), shave(ref, border));
    if (e <= 0.0) return kPsnrCap;
    return std::min(kPsnrCap, 10.0 * std::log10(1.0 / e));
}

struct SsimParams {
    std::size_t window = 11;
    double sigma = 1.5;
    double k1 = 0.01;
    double k2 = 0.03;
    double dynamic_range = 1.0;
};

/// Mean SSIM over every fully contained Gaussian window.
inline double ssim(const ImagePlane& a, const ImagePlane& b, const SsimParams& prm = {}) {
    detail::check_same_dims(a, b, "ssim");
    const std::size_t n = prm.window;
    if (a.width < n || a.height < n) {
        throw DimensionError("ssim needs images of at least " + std::to_string(n) + "x" + std::to_string(n));
    }
    std::vector<double> g(n);
    double gs = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double x = static_cast<double>(i) - static_cast<double>(n - 1) / 2.0;
        g[i] = std::exp(-x * x / (2.0 * prm.sigma * prm.sigma));
        gs += g[i];
    }
    for (auto& v : g) v /= gs;

    // separable weighted sums of x, y, x^2, y^2, xy over valid windows
    const std::size_t ow = a.width - n + 1, oh = a.height - n + 1;
    std::vector<std::array<double, 5>> rows(ow * a.height);
    for (std::size_t r = 0; r < a.height; ++r)
        for (std::size_t c = 0; c < ow; ++c) {
            std::array<double, 5> s{};
            for (std::size_t k = 0; k < n; ++k) {
                const double x = a.at(r, c + k), y = b.at(r, c + k);
                s[0] += g[k] * x;
                s[1] += g[k] * y;
                s[2] += g[k] * x * x;
                s[3] += g[k] * y * y;
                s[4] += g[k] * x * y;
            }
            rows[r * ow + c] = s;
        }
    const double c1 = std::pow(prm.k1 * prm.dynamic_range, 2), c2 = std::pow(prm.k2 * prm.dynamic_range, 2);
    double total = 0.0;
    for (std::size_t r = 0; r < oh; ++r)
        for (std::size_t c = 0; c < ow; ++c) {
            std::array<double, 5> s{};
            for (std::size_t k = 0; k < n; ++k)
                for (std::size_t j = 0; j < 5; ++j) s[j] += g[k] * rows[(r + k) * ow + c][j];
            const double mx = s[0], my = s[1];
            const double vx = s[2] - mx * mx, vy = s[3] - my * my, cxy = s[4] - mx * my;
            total += ((2 * mx * my + c1) * (2 * cxy + c2)) / ((mx * mx + my * my + c1) * (vx + vy + c2));
        }
    return total / static_cast<double>(ow * oh);
}

}  // namespace prn
