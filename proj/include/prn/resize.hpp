#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <vector>

#include "prn/error.hpp"
#include "prn/image.hpp"
#include "prn/init.hpp"

namespace prn {

namespace detail {

struct ResampleTaps {
    std::vector<std::size_t> first;  // per output index, offset into index/weight
    std::vector<std::size_t> count;
    std::vector<std::size_t> index;
    std::vector<double> weight;
};

// Pixel-centre aligned cubic weights along one axis. When shrinking, the kernel
// is stretched by 1/ratio (antialiasing); source indices are clamped to the edge.
inline ResampleTaps resample_taps(std::size_t in, std::size_t out) {
    ResampleTaps t;
    const double ratio = static_cast<double>(out) / static_cast<double>(in);
    const double squeeze = std::min(1.0, ratio);
    const double support = 2.0 / squeeze;
    for (std::size_t i = 0; i < out; ++i) {
        const double centre = (static_cast<double>(i) + 0.5) / ratio - 0.5;
        const long lo = static_cast<long>(std::floor(centre - support));
        const long hi = static_cast<long>(std::ceil(centre + support));
        t.first.push_back(t.index.size());
        double sum = 0.0;
        const std::size_t start = t.weight.size();
        for (long j = lo; j <= hi; ++j) {
            const double w = cubic_kernel((centre - static_cast<double>(j)) * squeeze);
            if (w == 0.0) continue;
            t.index.push_back(static_cast<std::size_t>(std::clamp(j, 0L, static_cast<long>(in) - 1)));
            t.weight.push_back(w);
            sum += w;
        }
        for (std::size_t k = start; k < t.weight.size(); ++k) t.weight[k] /= sum;
        t.count.push_back(t.weight.size() - start);
    }
    return t;
}

}  // namespace detail

/// Separable bicubic (a = -0.5) resampling to out_w x out_h.
inline ImagePlane bicubic_resize(const ImagePlane& src, std::size_t out_w, std::size_t out_h) {
    if (out_w == 0 || out_h == 0) throw ArgumentError("bicubic_resize: output dimensions must be >= 1");
    if (src.empty()) throw DimensionError("bicubic_resize: empty source plane");
    const auto tx = detail::resample_taps(src.width, out_w);
    const auto ty = detail::resample_taps(src.height, out_h);

    std::vector<double> rows(src.height * out_w);
    for (std::size_t r = 0; r < src.height; ++r)
        for (std::size_t x = 0; x < out_w; ++x) {
            double acc = 0.0;
            for (std::size_t k = 0; k < tx.count[x]; ++k)
                acc += tx.weight[tx.first[x] + k] * src.data[r * src.width + tx.index[tx.first[x] + k]];
            rows[r * out_w + x] = acc;
        }
    ImagePlane out(out_w, out_h);
    for (std::size_t y = 0; y < out_h; ++y)
        for (std::size_t x = 0; x < out_w; ++x) {
            double acc = 0.0;
            for (std::size_t k = 0; k < ty.count[y]; ++k)
                acc += ty.weight[ty.first[y] + k] * rows[ty.index[ty.first[y] + k] * out_w + x];
            out.at(y, x) = static_cast<float>(acc);
        }
    return out;
}

/// Crops the plane so both sides are multiples of `scale` (top-left anchored).
inline ImagePlane modcrop(const ImagePlane& src, std::size_t scale) {
    const std::size_t w = src.width - src.width % scale, h = src.height - src.height % scale;
    if (w == 0 || h == 0) throw DimensionError("image smaller than the scale factor");
    ImagePlane out(w, h);
    for (std::size_t r = 0; r < h; ++r)
        std::copy_n(src.data.begin() + static_cast<std::ptrdiff_t>(r * src.width), w,
                    out.data.begin() + static_cast<std::ptrdiff_t>(r * w));
    return out;
}

inline ColorImage resize_color(const ColorImage& src, std::size_t out_w, std::size_t out_h) {
    ColorImage out(out_w, out_h, src.space);
    for (std::size_t c = 0; c < 3; ++c) out.planes[c] = bicubic_resize(src.planes[c], out_w, out_h);
    return out;
}

}  // namespace prn
