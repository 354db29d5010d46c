#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "prn/detail/gemm.hpp"
#include "prn/error.hpp"
#include "prn/instrument.hpp"
#include "prn/tensor.hpp"

namespace prn {

/// Geometry of a 2-D convolution (or, for deconv layers, of the transposed kernel).
struct ConvSpec {
    std::size_t in_channels = 1;
    std::size_t out_channels = 1;
    std::size_t kh = 1;
    std::size_t kw = 1;
    std::size_t dilation = 1;
    std::size_t stride = 1;
    std::size_t pad_h = 0;
    std::size_t pad_w = 0;

    /// Stride-1 convolution whose zero padding keeps the spatial size unchanged.
    static ConvSpec same(std::size_t in, std::size_t out, std::size_t k, std::size_t dilation = 1) {
        if (k % 2 == 0) throw ArgumentError("same-padded conv needs an odd kernel, got " + std::to_string(k));
        if (dilation == 0) throw ArgumentError("dilation must be positive");
        const std::size_t pad = (k - 1) * dilation / 2;
        return ConvSpec{in, out, k, k, dilation, 1, pad, pad};
    }

    std::size_t extent_h() const { return (kh - 1) * dilation + 1; }
    std::size_t extent_w() const { return (kw - 1) * dilation + 1; }
    std::size_t taps() const { return in_channels * kh * kw; }

    bool operator==(const ConvSpec&) const = default;
};

/// Weights (out, in, kh, kw), one bias per output channel, and the geometry they belong to.
template <typename T>
struct LayerParams {
    Tensor<T> weights;
    std::vector<T> bias;
    ConvSpec spec;

    LayerParams() = default;
    explicit LayerParams(const ConvSpec& s)
        : weights(Shape{s.out_channels, s.in_channels, s.kh, s.kw}), bias(s.out_channels, T(0)), spec(s) {}

    void check() const {
        const Shape expect{spec.out_channels, spec.in_channels, spec.kh, spec.kw};
        if (weights.shape() != expect || bias.size() != spec.out_channels) {
            throw DimensionError("layer weights " + weights.shape().str() + " inconsistent with spec " +
                                 expect.str());
        }
    }

    bool operator==(const LayerParams&) const = default;
};

template <typename To, typename From>
LayerParams<To> params_cast(const LayerParams<From>& p) {
    LayerParams<To> out;
    out.weights = tensor_cast<To>(p.weights);
    out.bias.assign(p.bias.begin(), p.bias.end());
    out.spec = p.spec;
    return out;
}

template <typename T>
struct ConvGrads {
    Tensor<T> grad_input;
    Tensor<T> grad_weights;
    std::vector<T> grad_bias;
};

namespace detail {

inline std::size_t conv_out_size(std::size_t in, std::size_t pad, std::size_t extent, std::size_t stride) {
    if (in + 2 * pad < extent) {
        throw DimensionError("kernel extent " + std::to_string(extent) + " exceeds padded input " +
                             std::to_string(in + 2 * pad));
    }
    return (in + 2 * pad - extent) / stride + 1;
}

/// Gathers one sample (c, h, w) into a (c*kh*kw) x (oh*ow) column matrix.
template <typename T>
void im2col(const T* in, std::size_t c, std::size_t h, std::size_t w, const ConvSpec& s, std::size_t oh,
            std::size_t ow, T* col) {
    const std::size_t n_out = oh * ow;
    for (std::size_t ci = 0; ci < c; ++ci) {
        const T* plane = in + ci * h * w;
        for (std::size_t ky = 0; ky < s.kh; ++ky) {
            for (std::size_t kx = 0; kx < s.kw; ++kx) {
                T* row = col + ((ci * s.kh + ky) * s.kw + kx) * n_out;
                const std::ptrdiff_t dy = static_cast<std::ptrdiff_t>(ky * s.dilation) -
                                          static_cast<std::ptrdiff_t>(s.pad_h);
                const std::ptrdiff_t dx = static_cast<std::ptrdiff_t>(kx * s.dilation) -
                                          static_cast<std::ptrdiff_t>(s.pad_w);
                for (std::size_t oy = 0; oy < oh; ++oy) {
                    const std::ptrdiff_t iy = static_cast<std::ptrdiff_t>(oy * s.stride) + dy;
                    T* dst = row + oy * ow;
                    if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(h)) {
                        std::fill(dst, dst + ow, T(0));
                        continue;
                    }
                    const T* src = plane + iy * static_cast<std::ptrdiff_t>(w);
                    for (std::size_t ox = 0; ox < ow; ++ox) {
                        const std::ptrdiff_t ix = static_cast<std::ptrdiff_t>(ox * s.stride) + dx;
                        dst[ox] = (ix < 0 || ix >= static_cast<std::ptrdiff_t>(w)) ? T(0) : src[ix];
                    }
                }
            }
        }
    }
}

/// Scatter-adds a column matrix back onto one sample; adjoint of im2col.
template <typename T>
void col2im(const T* col, std::size_t c, std::size_t h, std::size_t w, const ConvSpec& s, std::size_t oh,
            std::size_t ow, T* out) {
    const std::size_t n_out = oh * ow;
    for (std::size_t ci = 0; ci < c; ++ci) {
        T* plane = out + ci * h * w;
        for (std::size_t ky = 0; ky < s.kh; ++ky) {
            for (std::size_t kx = 0; kx < s.kw; ++kx) {
                const T* row = col + ((ci * s.kh + ky) * s.kw + kx) * n_out;
                const std::ptrdiff_t dy = static_cast<std::ptrdiff_t>(ky * s.dilation) -
                                          static_cast<std::ptrdiff_t>(s.pad_h);
                const std::ptrdiff_t dx = static_cast<std::ptrdiff_t>(kx * s.dilation) -
                                          static_cast<std::ptrdiff_t>(s.pad_w);
                for (std::size_t oy = 0; oy < oh; ++oy) {
                    const std::ptrdiff_t iy = static_cast<std::ptrdiff_t>(oy * s.stride) + dy;
                    if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(h)) continue;
                    const T* src = row + oy * ow;
                    T* dst = plane + iy * static_cast<std::ptrdiff_t>(w);
                    for (std::size_t ox = 0; ox < ow; ++ox) {
                        const std::ptrdiff_t ix = static_cast<std::ptrdiff_t>(ox * s.stride) + dx;
                        if (ix >= 0 && ix < static_cast<std::ptrdiff_t>(w)) dst[ix] += src[ox];
                    }
                }
            }
        }
    }
}

inline void check_conv_input(const Shape& in, const ConvSpec& s) {
    if (in.c != s.in_channels) {
        throw DimensionError("conv input has " + std::to_string(in.c) + " channels, layer expects " +
                             std::to_string(s.in_channels));
    }
    if (s.stride == 0 || s.dilation == 0) throw ArgumentError("stride and dilation must be positive");
}

}  // namespace detail

/// Cross-correlation with optional dilation, zero padding and stride.
template <typename T>
Tensor<T> conv2d_forward(const Tensor<T>& input, const LayerParams<T>& params) {
    params.check();
    const ConvSpec& s = params.spec;
    const Shape& in = input.shape();
    detail::check_conv_input(in, s);
    const std::size_t oh = detail::conv_out_size(in.h, s.pad_h, s.extent_h(), s.stride);
    const std::size_t ow = detail::conv_out_size(in.w, s.pad_w, s.extent_w(), s.stride);
    const std::size_t n_out = oh * ow;
    const std::size_t taps = s.taps();

    Tensor<T> out(Shape{in.n, s.out_channels, oh, ow});
    std::vector<T> col(taps * n_out);
    for (std::size_t n = 0; n < in.n; ++n) {
        detail::im2col(input.sample(n).data(), in.c, in.h, in.w, s, oh, ow, col.data());
        T* dst = out.sample(n).data();
        for (std::size_t co = 0; co < s.out_channels; ++co) std::fill(dst + co * n_out, dst + (co + 1) * n_out, params.bias[co]);
        detail::gemm_nn(s.out_channels, n_out, taps, params.weights.data().data(), col.data(), dst, true);
        instrument::mac_counter() += s.out_channels * n_out * taps;
    }
    return out;
}

template <typename T>
ConvGrads<T> conv2d_backward(const Tensor<T>& input, const LayerParams<T>& params, const Tensor<T>& grad_out) {
    params.check();
    const ConvSpec& s = params.spec;
    const Shape& in = input.shape();
    detail::check_conv_input(in, s);
    const std::size_t oh = detail::conv_out_size(in.h, s.pad_h, s.extent_h(), s.stride);
    const std::size_t ow = detail::conv_out_size(in.w, s.pad_w, s.extent_w(), s.stride);
    if (grad_out.shape() != Shape{in.n, s.out_channels, oh, ow}) {
        throw DimensionError("conv grad_out shape " + grad_out.shape().str() + " does not match output " +
                             Shape{in.n, s.out_channels, oh, ow}.str());
    }
    const std::size_t n_out = oh * ow;
    const std::size_t taps = s.taps();

    ConvGrads<T> g{Tensor<T>(in), Tensor<T>(params.weights.shape()), std::vector<T>(s.out_channels, T(0))};
    std::vector<T> col(taps * n_out);
    std::vector<T> dcol(taps * n_out);
    std::vector<double> bias_acc(s.out_channels, 0.0);
    for (std::size_t n = 0; n < in.n; ++n) {
        const T* go = grad_out.sample(n).data();
        detail::im2col(input.sample(n).data(), in.c, in.h, in.w, s, oh, ow, col.data());
        detail::gemm_nt(s.out_channels, n_out, taps, go, col.data(), g.grad_weights.data().data(), true);
        detail::gemm_tn(s.out_channels, n_out, taps, params.weights.data().data(), go, dcol.data(), false);
        detail::col2im(dcol.data(), in.c, in.h, in.w, s, oh, ow, g.grad_input.sample(n).data());
        for (std::size_t co = 0; co < s.out_channels; ++co) {
            double acc = 0.0;
            for (std::size_t p = 0; p < n_out; ++p) acc += go[co * n_out + p];
            bias_acc[co] += acc;
        }
    }
    for (std::size_t co = 0; co < s.out_channels; ++co) g.grad_bias[co] = static_cast<T>(bias_acc[co]);
    return g;
}

// Transposed convolution. Geometrically this equals inserting (stride - 1) zeros
// between input pixels, convolving with the kernel, and cropping the result to
// exactly stride*h x stride*w starting at offset (K - stride) / 2. The kernels
// below compute it as a GEMM onto per-tap columns followed by a strided scatter.

namespace detail {

inline std::size_t deconv_offset(std::size_t kernel, std::size_t stride) {
    return kernel >= stride ? (kernel - stride) / 2 : 0;
}

inline void check_deconv(const Shape& in, const ConvSpec& s, std::size_t stride) {
    if (stride < 2 || stride > 4) throw ArgumentError("unsupported deconv stride " + std::to_string(stride));
    if (in.c != s.in_channels) {
        throw DimensionError("deconv input has " + std::to_string(in.c) + " channels, layer expects " +
                             std::to_string(s.in_channels));
    }
    if (s.kh != s.kw) throw DimensionError("deconv kernel must be square");
    if (s.kh < stride) throw DimensionError("deconv kernel smaller than stride");
}

/// (co, ci, ky, kx) -> rows (co, ky, kx), columns ci.
template <typename T>
std::vector<T> deconv_weight_rows(const LayerParams<T>& p) {
    const ConvSpec& s = p.spec;
    const std::size_t kk = s.kh * s.kw;
    std::vector<T> r(s.out_channels * kk * s.in_channels);
    for (std::size_t co = 0; co < s.out_channels; ++co)
        for (std::size_t ci = 0; ci < s.in_channels; ++ci)
            for (std::size_t t = 0; t < kk; ++t)
                r[(co * kk + t) * s.in_channels + ci] = p.weights[(co * s.in_channels + ci) * kk + t];
    return r;
}

}  // namespace detail

template <typename T>
Tensor<T> deconv2d_forward(const Tensor<T>& input, const LayerParams<T>& params, std::size_t stride) {
    params.check();
    const ConvSpec& s = params.spec;
    const Shape& in = input.shape();
    detail::check_deconv(in, s, stride);
    const std::size_t K = s.kh;
    const std::size_t off = detail::deconv_offset(K, stride);
    const std::size_t oh = in.h * stride, ow = in.w * stride;
    const std::size_t n_in = in.h * in.w;
    const std::size_t rows = s.out_channels * K * K;

    const std::vector<T> wr = detail::deconv_weight_rows(params);
    Tensor<T> out(Shape{in.n, s.out_channels, oh, ow});
    std::vector<T> col(rows * n_in);
    for (std::size_t n = 0; n < in.n; ++n) {
        detail::gemm_nn(rows, n_in, s.in_channels, wr.data(), input.sample(n).data(), col.data(), false);
        instrument::mac_counter() += rows * n_in * s.in_channels;
        for (std::size_t co = 0; co < s.out_channels; ++co) {
            T* plane = out.plane(n, co).data();
            std::fill(plane, plane + oh * ow, params.bias[co]);
            for (std::size_t ky = 0; ky < K; ++ky) {
                for (std::size_t kx = 0; kx < K; ++kx) {
                    const T* c = col.data() + ((co * K + ky) * K + kx) * n_in;
                    for (std::size_t y = 0; y < in.h; ++y) {
                        const std::ptrdiff_t Y = static_cast<std::ptrdiff_t>(y * stride + ky) -
                                                 static_cast<std::ptrdiff_t>(off);
                        if (Y < 0 || Y >= static_cast<std::ptrdiff_t>(oh)) continue;
                        T* dst = plane + Y * static_cast<std::ptrdiff_t>(ow);
                        for (std::size_t x = 0; x < in.w; ++x) {
                            const std::ptrdiff_t X = static_cast<std::ptrdiff_t>(x * stride + kx) -
                                                     static_cast<std::ptrdiff_t>(off);
                            if (X >= 0 && X < static_cast<std::ptrdiff_t>(ow)) dst[X] += c[y * in.w + x];
                        }
                    }
                }
            }
        }
    }
    return out;
}

template <typename T>
ConvGrads<T> deconv2d_backward(const Tensor<T>& input, const LayerParams<T>& params, std::size_t stride,
                               const Tensor<T>& grad_out) {
    params.check();
    const ConvSpec& s = params.spec;
    const Shape& in = input.shape();
    detail::check_deconv(in, s, stride);
    const std::size_t K = s.kh;
    const std::size_t off = detail::deconv_offset(K, stride);
    const std::size_t oh = in.h * stride, ow = in.w * stride;
    if (grad_out.shape() != Shape{in.n, s.out_channels, oh, ow}) {
        throw DimensionError("deconv grad_out shape " + grad_out.shape().str() + " does not match output " +
                             Shape{in.n, s.out_channels, oh, ow}.str());
    }
    const std::size_t n_in = in.h * in.w;
    const std::size_t rows = s.out_channels * K * K;
    const std::size_t kk = K * K;

    const std::vector<T> wr = detail::deconv_weight_rows(params);
    std::vector<T> grad_wr(rows * s.in_channels, T(0));
    ConvGrads<T> g{Tensor<T>(in), Tensor<T>(params.weights.shape()), std::vector<T>(s.out_channels, T(0))};
    std::vector<T> dcol(rows * n_in);
    std::vector<double> bias_acc(s.out_channels, 0.0);
    for (std::size_t n = 0; n < in.n; ++n) {
        for (std::size_t co = 0; co < s.out_channels; ++co) {
            const T* plane = grad_out.plane(n, co).data();
            double acc = 0.0;
            for (std::size_t i = 0; i < oh * ow; ++i) acc += plane[i];
            bias_acc[co] += acc;
            for (std::size_t ky = 0; ky < K; ++ky) {
                for (std::size_t kx = 0; kx < K; ++kx) {
                    T* c = dcol.data() + ((co * K + ky) * K + kx) * n_in;
                    for (std::size_t y = 0; y < in.h; ++y) {
                        const std::ptrdiff_t Y = static_cast<std::ptrdiff_t>(y * stride + ky) -
                                                 static_cast<std::ptrdiff_t>(off);
                        for (std::size_t x = 0; x < in.w; ++x) {
                            const std::ptrdiff_t X = static_cast<std::ptrdiff_t>(x * stride + kx) -
                                                     static_cast<std::ptrdiff_t>(off);
                            const bool inside = Y >= 0 && Y < static_cast<std::ptrdiff_t>(oh) && X >= 0 &&
                                                X < static_cast<std::ptrdiff_t>(ow);
                            c[y * in.w + x] = inside ? plane[Y * static_cast<std::ptrdiff_t>(ow) + X] : T(0);
                        }
                    }
                }
            }
        }
        detail::gemm_tn(rows, n_in, s.in_channels, wr.data(), dcol.data(), g.grad_input.sample(n).data(), false);
        detail::gemm_nt(rows, n_in, s.in_channels, dcol.data(), input.sample(n).data(), grad_wr.data(), true);
    }
    for (std::size_t co = 0; co < s.out_channels; ++co) {
        g.grad_bias[co] = static_cast<T>(bias_acc[co]);
        for (std::size_t ci = 0; ci < s.in_channels; ++ci)
            for (std::size_t t = 0; t < kk; ++t)
                g.grad_weights[(co * s.in_channels + ci) * kk + t] = grad_wr[(co * kk + t) * s.in_channels + ci];
    }
    return g;
}

}  // namespace prn
