#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "prn/error.hpp"

namespace prn {

/// Shape of a dense NCHW tensor.
struct Shape {
    std::size_t n = 0;
    std::size_t c = 0;
    std::size_t h = 0;
    std::size_t w = 0;

    constexpr std::size_t size() const { return n * c * h * w; }
    constexpr std::size_t plane() const { return h * w; }
    constexpr bool operator==(const Shape&) const = default;

    std::string str() const {
        return std::to_string(n) + "x" + std::to_string(c) + "x" + std::to_string(h) + "x" +
               std::to_string(w);
    }
};

/// Dense 4-D array (batch, channel, height, width), row-major.
template <typename T>
class Tensor {
public:
    using value_type = T;

    Tensor() = default;
    explicit Tensor(Shape shape, T fill = T(0)) : shape_(shape), data_(shape.size(), fill) {}
    Tensor(Shape shape, std::vector<T> data) : shape_(shape), data_(std::move(data)) {
        if (data_.size() != shape_.size()) {
            throw DimensionError("tensor data length " + std::to_string(data_.size()) +
                                 " does not match shape " + shape_.str());
        }
    }

    const Shape& shape() const { return shape_; }
    std::size_t size() const { return data_.size(); }
    bool empty() const { return data_.empty(); }

    std::span<T> data() { return data_; }
    std::span<const T> data() const { return data_; }
    const std::vector<T>& vec() const { return data_; }

    T& operator[](std::size_t i) { return data_[i]; }
    const T& operator[](std::size_t i) const { return data_[i]; }

    std::size_t index(std::size_t n, std::size_t c, std::size_t h, std::size_t w) const {
        return ((n * shape_.c + c) * shape_.h + h) * shape_.w + w;
    }
    T& at(std::size_t n, std::size_t c, std::size_t h, std::size_t w) {
        return data_[index(n, c, h, w)];
    }
    const T& at(std::size_t n, std::size_t c, std::size_t h, std::size_t w) const {
        return data_[index(n, c, h, w)];
    }

    /// Contiguous h*w plane of one (sample, channel).
    std::span<T> plane(std::size_t n, std::size_t c) {
        return std::span<T>(data_).subspan(index(n, c, 0, 0), shape_.plane());
    }
    std::span<const T> plane(std::size_t n, std::size_t c) const {
        return std::span<const T>(data_).subspan(index(n, c, 0, 0), shape_.plane());
    }

    /// All channels of sample n.
    std::span<T> sample(std::size_t n) {
        return std::span<T>(data_).subspan(n * shape_.c * shape_.plane(), shape_.c * shape_.plane());
    }
    std::span<const T> sample(std::size_t n) const {
        return std::span<const T>(data_).subspan(n * shape_.c * shape_.plane(),
                                                 shape_.c * shape_.plane());
    }

    void fill(T v) { std::fill(data_.begin(), data_.end(), v); }

    bool all_finite() const {
        return std::all_of(data_.begin(), data_.end(), [](T v) { return std::isfinite(v); });
    }

    bool operator==(const Tensor&) const = default;

private:
    Shape shape_{};
    std::vector<T> data_;
};

/// Element type conversion (used to run float models through double-precision checks).
template <typename To, typename From>
Tensor<To> tensor_cast(const Tensor<From>& src) {
    std::vector<To> out(src.size());
    std::transform(src.data().begin(), src.data().end(), out.begin(),
                   [](From v) { return static_cast<To>(v); });
    return Tensor<To>(src.shape(), std::move(out));
}

template <typename T>
T max_abs_diff(const Tensor<T>& a, const Tensor<T>& b) {
    if (a.shape() != b.shape()) {
        throw DimensionError("max_abs_diff: " + a.shape().str() + " vs " + b.shape().str());
    }
    T m = 0;
    for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
    return m;
}

}  // namespace prn
