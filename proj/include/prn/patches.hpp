#pragma once

#include <cstddef>
#include <string>
#include <utility>
#include <vector>

#include "prn/error.hpp"
#include "prn/image.hpp"
#include "prn/tensor.hpp"

namespace prn {

/// Non-overlapping tiling of a plane that was reflect-padded on the bottom and
/// right up to a multiple of the patch size. Origins are in row-major grid order.
struct PatchGrid {
    std::size_t patch_size = 54;
    std::size_t width = 0;   // unpadded source size
    std::size_t height = 0;
    std::size_t pad_right = 0;
    std::size_t pad_bottom = 0;
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<std::pair<std::size_t, std::size_t>> origins;  // (row, col)

    std::size_t padded_width() const { return width + pad_right; }
    std::size_t padded_height() const { return height + pad_bottom; }
    std::size_t count() const { return origins.size(); }
};

/// Mirror index into [0, n) without repeating the edge sample.
inline std::size_t reflect_index(std::ptrdiff_t i, std::size_t n) {
    if (n == 1) return 0;
    const std::ptrdiff_t period = 2 * (static_cast<std::ptrdiff_t>(n) - 1);
    i %= period;
    if (i < 0) i += period;
    return static_cast<std::size_t>(i < static_cast<std::ptrdiff_t>(n) ? i : period - i);
}

inline PatchGrid make_grid(std::size_t width, std::size_t height, std::size_t patch_size) {
    if (width == 0 || height == 0) throw DimensionError("cannot tile a zero-sized image");
    if (patch_size == 0) throw ArgumentError("patch size must be positive");
    PatchGrid g;
    g.patch_size = patch_size;
    g.width = width;
    g.height = height;
    g.cols = (width + patch_size - 1) / patch_size;
    g.rows = (height + patch_size - 1) / patch_size;
    g.pad_right = g.cols * patch_size - width;
    g.pad_bottom = g.rows * patch_size - height;
    for (std::size_t r = 0; r < g.rows; ++r)
        for (std::size_t c = 0; c < g.cols; ++c) g.origins.emplace_back(r * patch_size, c * patch_size);
    return g;
}

/// Reflect-pads the plane and cuts it into patch_size x patch_size tensors (1x1xPxP).
inline std::pair<PatchGrid, std::vector<Tensor<float>>> crop_patches(const ImagePlane& plane,
                                                                      std::size_t patch_size = 54) {
    PatchGrid g = make_grid(plane.width, plane.height, patch_size);
    std::vector<Tensor<float>> patches;
    patches.reserve(g.count());
    for (const auto& [r0, c0] : g.origins) {
        Tensor<float> t(Shape{1, 1, patch_size, patch_size});
        for (std::size_t y = 0; y < patch_size; ++y) {
            const std::size_t sy = reflect_index(static_cast<std::ptrdiff_t>(r0 + y), plane.height);
            for (std::size_t x = 0; x < patch_size; ++x)
                t.at(0, 0, y, x) = plane.at(sy, reflect_index(static_cast<std::ptrdiff_t>(c0 + x), plane.width));
        }
        patches.push_back(std::move(t));
    }
    return {std::move(g), std::move(patches)};
}

/// Places (scale*P)-sized patches at scale*origin and strips the scaled padding.
inline ImagePlane reassemble(const PatchGrid& grid, const std::vector<Tensor<float>>& patches, std::size_t scale = 1) {
    if (patches.size() != grid.count()) {
        throw DimensionError("reassemble: " + std::to_string(patches.size()) + " patches for a grid of " +
                             std::to_string(grid.count()));
    }
    if (scale == 0) throw ArgumentError("reassemble: scale must be positive");
    const std::size_t ps = grid.patch_size * scale;
    ImagePlane out(grid.width * scale, grid.height * scale);
    for (std::size_t i = 0; i < patches.size(); ++i) {
        if (patches[i].shape() != Shape{1, 1, ps, ps}) {
            throw DimensionError("reassemble: patch " + std::to_string(i) + " has shape " + patches[i].shape().str() +
                                 ", expected 1x1x" + std::to_string(ps) + "x" + std::to_string(ps));
        }
        const std::size_t r0 = grid.origins[i].first * scale, c0 = grid.origins[i].second * scale;
        for (std::size_t y = 0; y < ps && r0 + y < out.height; ++y)
            for (std::size_t x = 0; x < ps && c0 + x < out.width; ++x) out.at(r0 + y, c0 + x) = patches[i].at(0, 0, y, x);
    }
    return out;
}

}  // namespace prn
