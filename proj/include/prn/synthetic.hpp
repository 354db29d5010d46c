#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

#include "prn/error.hpp"
#include "prn/image.hpp"

namespace prn {

/// Procedural test images: a gentle colour ramp overlaid with anti-aliased
/// disks, boxes, strokes and sinusoidal gratings. Tiles chosen as "flat" keep
/// only the ramp.
struct SyntheticOptions {
    std::size_t width = 108;
    std::size_t height = 108;
    /// Probability that a tile is left as plain background.
    double flat_fraction = 0.0;
    std::size_t tile = 54;
    std::size_t shapes = 14;
    std::size_t strokes = 6;
    std::size_t gratings = 3;
    /// Total change of the background ramp across the image, in [0,1] units.
    double ramp = 0.05;
};

namespace detail {

struct SynthRng {
    explicit SynthRng(std::uint64_t seed) : eng(seed) {}
    double uni(double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(eng); }
    std::array<double, 3> color() { return {uni(0.05, 0.95), uni(0.05, 0.95), uni(0.05, 0.95)}; }
    std::mt19937_64 eng;
};

inline double coverage(double signed_dist) { return std::clamp(0.5 - signed_dist, 0.0, 1.0); }

inline void blend(ColorImage& img, std::size_t r, std::size_t c, const std::array<double, 3>& col, double a) {
    if (a <= 0.0) return;
    for (std::size_t k = 0; k < 3; ++k) {
        float& v = img.planes[k].at(r, c);
        v = static_cast<float>((1.0 - a) * v + a * col[k]);
    }
}

}  // namespace detail

inline ColorImage synthetic_image(const SyntheticOptions& opt, std::uint64_t seed) {
    if (opt.width == 0 || opt.height == 0) throw ArgumentError("synthetic image needs a positive size");
    if (opt.tile == 0) throw ArgumentError("synthetic tile size must be positive");
    if (!(opt.flat_fraction >= 0.0 && opt.flat_fraction <= 1.0)) throw ArgumentError("flat_fraction must be in [0,1]");
    detail::SynthRng rng(seed);
    const double W = static_cast<double>(opt.width), H = static_cast<double>(opt.height);

    ColorImage bg(opt.width, opt.height);
    const auto base = rng.color();
    const double angle = rng.uni(0.0, 2.0 * M_PI);
    const double dx = std::cos(angle) * opt.ramp / W, dy = std::sin(angle) * opt.ramp / H;
    for (std::size_t r = 0; r < opt.height; ++r)
        for (std::size_t c = 0; c < opt.width; ++c)
            for (std::size_t k = 0; k < 3; ++k)
                bg.planes[k].at(r, c) = static_cast<float>(
                    std::clamp(base[k] + dx * (static_cast<double>(c) - W / 2) + dy * (static_cast<double>(r) - H / 2), 0.0, 1.0));

    ColorImage img = bg;
    const double diag = std::hypot(W, H);
    for (std::size_t i = 0; i < opt.gratings; ++i) {
        const auto col = rng.color();
        const double cx = rng.uni(0, W), cy = rng.uni(0, H), rad = rng.uni(0.15, 0.35) * diag;
        const double th = rng.uni(0, M_PI), period = rng.uni(8.0, 24.0), phase = rng.uni(0, 2 * M_PI);
        const double kx = std::cos(th) * 2 * M_PI / period, ky = std::sin(th) * 2 * M_PI / period;
        for (std::size_t r = 0; r < opt.height; ++r)
            for (std::size_t c = 0; c < opt.width; ++c) {
                const double x = static_cast<double>(c), y = static_cast<double>(r);
                const double inside = detail::coverage(std::hypot(x - cx, y - cy) - rad);
                detail::blend(img, r, c, col, inside * 0.5 * (1.0 + std::sin(kx * x + ky * y + phase)));
            }
    }
    for (std::size_t i = 0; i < opt.shapes; ++i) {
        const auto col = rng.color();
        const double cx = rng.uni(0, W), cy = rng.uni(0, H);
        const double a = rng.uni(3.0, 0.2 * diag), b = rng.uni(3.0, 0.2 * diag), th = rng.uni(0, M_PI);
        const bool disk = rng.uni(0, 1) < 0.5;
        const double ct = std::cos(th), st = std::sin(th);
        for (std::size_t r = 0; r < opt.height; ++r)
            for (std::size_t c = 0; c < opt.width; ++c) {
                const double x = static_cast<double>(c) - cx, y = static_cast<double>(r) - cy;
                double sd;
                if (disk) {
                    sd = std::hypot(x, y) - a;
                } else {
                    const double u = std::fabs(ct * x + st * y) - a, v = std::fabs(-st * x + ct * y) - b;
                    sd = std::max(u, v) > 0 ? std::hypot(std::max(u, 0.0), std::max(v, 0.0)) : std::max(u, v);
                }
                detail::blend(img, r, c, col, detail::coverage(sd));
            }
    }
    for (std::size_t i = 0; i < opt.strokes; ++i) {
        const auto col = rng.color();
        const double x0 = rng.uni(0, W), y0 = rng.uni(0, H), x1 = rng.uni(0, W), y1 = rng.uni(0, H);
        const double half = rng.uni(0.75, 2.5);
        const double len2 = std::max(1e-9, (x1 - x0) * (x1 - x0) + (y1 - y0) * (y1 - y0));
        for (std::size_t r = 0; r < opt.height; ++r)
            for (std::size_t c = 0; c < opt.width; ++c) {
                const double x = static_cast<double>(c), y = static_cast<double>(r);
                const double t = std::clamp(((x - x0) * (x1 - x0) + (y - y0) * (y1 - y0)) / len2, 0.0, 1.0);
                const double d = std::hypot(x - (x0 + t * (x1 - x0)), y - (y0 + t * (y1 - y0)));
                detail::blend(img, r, c, col, detail::coverage(d - half));
            }
    }

    if (opt.flat_fraction > 0.0) {
        for (std::size_t r0 = 0; r0 < opt.height; r0 += opt.tile)
            for (std::size_t c0 = 0; c0 < opt.width; c0 += opt.tile) {
                if (rng.uni(0, 1) >= opt.flat_fraction) continue;
                for (std::size_t r = r0; r < std::min(opt.height, r0 + opt.tile); ++r)
                    for (std::size_t c = c0; c < std::min(opt.width, c0 + opt.tile); ++c)
                        for (std::size_t k = 0; k < 3; ++k) img.planes[k].at(r, c) = bg.planes[k].at(r, c);
            }
    }
    return img;
}

/// `count` images with seeds derived from `seed`.
inline std::vector<ColorImage> synthetic_corpus(std::size_t count, const SyntheticOptions& opt, std::uint64_t seed) {
    std::vector<ColorImage> out;
    out.reserve(count);
    for (std::size_t i = 0; i < count; ++i) out.push_back(synthetic_image(opt, seed * 1000003ULL + i));
    return out;
}

}  // namespace prn
