#pragma once

#include <chrono>
#include <cstdint>
#include <vector>

#include "prn/image.hpp"
#include "prn/instrument.hpp"
#include "prn/model.hpp"
#include "prn/patches.hpp"
#include "prn/prior.hpp"
#include "prn/resize.hpp"

namespace prn {

/// HR patch side for a scale: the base size rounded up to a multiple of the scale
/// (54 for x2/x3, 56 for x4).
inline std::size_t hr_patch_size(int scale, std::size_t base = 54) {
    check_scale(scale);
    const auto s = static_cast<std::size_t>(scale);
    return (base + s - 1) / s * s;
}

inline std::size_t lr_patch_size(int scale, std::size_t base = 54) {
    return hr_patch_size(scale, base) / static_cast<std::size_t>(scale);
}

/// Per-patch record of one routed forward pass.
struct RouteTrace {
    DifficultyTag tag = DifficultyTag::Mild;
    Stage exit = Stage::EarlyDilated;  // last conv stage before theta_up
    double prior = 0.0;
    std::size_t h = 0;  // LR dims actually processed (including any context margin)
    std::size_t w = 0;
    int scale = 0;
    std::uint64_t macs = 0;  // instrumented count
    double seconds = 0.0;
};

inline Stage exit_stage(const ModelConfig& c, DifficultyTag tag) {
    const auto r = route_stages(c, tag);
    return r[r.size() - 2];
}

inline std::uint64_t count_flops(const ModelConfig& c, const RouteTrace& t) {
    return count_flops(c, t.tag, t.h, t.w, t.scale);
}

struct SuperResolveOptions {
    /// false forces every patch down the severe (full) path.
    bool routing = true;
    /// LR context pixels added around each patch and cropped after upscaling.
    std::size_t margin = 0;
    std::size_t base_patch = 54;
};

struct PlaneResult {
    ImagePlane plane;
    std::vector<RouteTrace> traces;
    double reassembly_seconds = 0.0;
    double total_seconds = 0.0;

    std::uint64_t total_macs() const {
        std::uint64_t n = 0;
        for (const auto& t : traces) n += t.macs;
        return n;
    }
    TagCounts tag_counts() const {
        TagCounts c;
        for (const auto& t : traces) ++c[t.tag];
        return c;
    }
};

struct ImageResult {
    ColorImage image;
    std::vector<RouteTrace> traces;
    double reassembly_seconds = 0.0;
    double total_seconds = 0.0;

    std::uint64_t total_macs() const {
        std::uint64_t n = 0;
        for (const auto& t : traces) n += t.macs;
        return n;
    }
    TagCounts tag_counts() const {
        TagCounts c;
        for (const auto& t : traces) ++c[t.tag];
        return c;
    }
};

namespace detail {

inline Tensor<float> crop_with_margin(const ImagePlane& p, std::size_t r0, std::size_t c0, std::size_t size,
                                      std::size_t margin) {
    const std::size_t n = size + 2 * margin;
    Tensor<float> t(Shape{1, 1, n, n});
    for (std::size_t y = 0; y < n; ++y) {
        const std::size_t sy = reflect_index(static_cast<std::ptrdiff_t>(r0 + y) - static_cast<std::ptrdiff_t>(margin),
                                             p.height);
        for (std::size_t x = 0; x < n; ++x) {
            const std::size_t sx = reflect_index(
                static_cast<std::ptrdiff_t>(c0 + x) - static_cast<std::ptrdiff_t>(margin), p.width);
            t.at(0, 0, y, x) = p.at(sy, sx);
        }
    }
    return t;
}

inline Tensor<float> center_crop(const Tensor<float>& t, std::size_t offset, std::size_t size) {
    if (offset == 0 && t.shape().h == size && t.shape().w == size) return t;
    Tensor<float> out(Shape{1, 1, size, size});
    for (std::size_t y = 0; y < size; ++y)
        for (std::size_t x = 0; x < size; ++x) out.at(0, 0, y, x) = t.at(0, 0, offset + y, offset + x);
    return out;
}

}  // namespace detail

/// Super-resolves a luma plane patch by patch: prior -> tag -> routed forward ->
/// reassembly, clamped to [0,1].
inline PlaneResult super_resolve_plane(const ImagePlane& lr, const PrnModel& model, int scale,
                                       const SuperResolveOptions& opt = {}) {
    using clock = std::chrono::steady_clock;
    const auto t0 = clock::now();
    if (!model.config.has_scale(scale)) {
        throw ArgumentError("scale " + std::to_string(scale) + " is not one of the model's scales");
    }
    const std::size_t p = lr_patch_size(scale, opt.base_patch);
    const auto s = static_cast<std::size_t>(scale);
    auto [grid, patches] = crop_patches(lr, p);

    PlaneResult res;
    std::vector<Tensor<float>> outputs;
    outputs.reserve(patches.size());
    for (std::size_t i = 0; i < patches.size(); ++i) {
        RouteTrace tr;
        tr.prior = gradient_prior(patches[i], model.config.prior);
        tr.tag = opt.routing ? classify(tr.prior, model.config.thresholds) : DifficultyTag::Severe;
        tr.exit = exit_stage(model.config, tr.tag);
        tr.scale = scale;
        const Tensor<float> input = opt.margin == 0
                                        ? patches[i]
                                        : detail::crop_with_margin(lr, grid.origins[i].first, grid.origins[i].second,
                                                                   p, opt.margin);
        tr.h = input.shape().h;
        tr.w = input.shape().w;
        const auto ts = clock::now();
        instrument::MacScope macs;
        Tensor<float> y = forward_route(model, input, tr.tag, scale);
        tr.macs = macs.count();
        outputs.push_back(detail::center_crop(y, opt.margin * s, p * s));
        tr.seconds = std::chrono::duration<double>(clock::now() - ts).count();
        res.traces.push_back(tr);
    }
    const auto tr0 = clock::now();
    res.plane = reassemble(grid, outputs, s).clamped();
    const auto t1 = clock::now();
    res.reassembly_seconds = std::chrono::duration<double>(t1 - tr0).count();
    res.total_seconds = std::chrono::duration<double>(t1 - t0).count();
    return res;
}

/// Y through the network, Cb/Cr by bicubic; returns RGB.
inline ImageResult super_resolve_image(const ColorImage& image, const PrnModel& model, int scale,
                                       const SuperResolveOptions& opt = {}) {
    const auto t0 = std::chrono::steady_clock::now();
    const ColorImage ycc = image.space == ColorSpace::YCbCr ? image : rgb_to_ycbcr(image);
    PlaneResult y = super_resolve_plane(ycc.planes[0], model, scale, opt);
    const auto s = static_cast<std::size_t>(scale);
    ColorImage up(image.width * s, image.height * s, ColorSpace::YCbCr);
    up.planes[0] = std::move(y.plane);
    for (std::size_t c = 1; c < 3; ++c) up.planes[c] = bicubic_resize(ycc.planes[c], up.width, up.height);
    ImageResult res;
    res.image = ycbcr_to_rgb(up);
    for (auto& p : res.image.planes) p = p.clamped();
    res.traces = std::move(y.traces);
    res.reassembly_seconds = y.reassembly_seconds;
    res.total_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return res;
}

}  // namespace prn
