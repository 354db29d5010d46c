#pragma once

#include <string>

#include "prn/error.hpp"
#include "prn/tensor.hpp"

namespace prn {

inline void check_slope(double slope) {
    if (!(slope > 0.0 && slope < 1.0)) throw ArgumentError("leaky slope must lie in (0,1), got " + std::to_string(slope));
}

/// y = x for x >= 0, slope * x otherwise.
template <typename T>
Tensor<T> leaky_relu(const Tensor<T>& input, T slope) {
    check_slope(slope);
    Tensor<T> out = input;
    for (auto& v : out.data()) v = v >= T(0) ? v : slope * v;
    return out;
}

/// Gradient w.r.t. the pre-activation; the derivative at exactly 0 is taken as 1.
template <typename T>
Tensor<T> leaky_relu_backward(const Tensor<T>& pre_activation, const Tensor<T>& grad_out, T slope) {
    if (pre_activation.shape() != grad_out.shape()) {
        throw DimensionError("leaky_relu_backward: " + pre_activation.shape().str() + " vs " +
                             grad_out.shape().str());
    }
    Tensor<T> g = grad_out;
    for (std::size_t i = 0; i < g.size(); ++i)
        if (pre_activation[i] < T(0)) g[i] *= slope;
    return g;
}

}  // namespace prn
