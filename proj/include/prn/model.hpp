#pragma once

#include <algorithm>
#include <cstdint>
#include <functional>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "prn/activation.hpp"
#include "prn/conv.hpp"
#include "prn/error.hpp"
#include "prn/init.hpp"
#include "prn/prior.hpp"
#include "prn/tensor.hpp"

namespace prn {

/// Parameter groups of the network. The *_dilated banks are the rolled-in
/// alternatives of the early and middle stages used for mild/moderate patches.
enum class Stage : int { Early = 0, Middle = 1, Late = 2, EarlyDilated = 3, MiddleDilated = 4, Upsample = 5 };

inline const char* to_string(Stage s) {
    switch (s) {
        case Stage::Early: return "theta_l";
        case Stage::Middle: return "theta_m";
        case Stage::Late: return "theta_s";
        case Stage::EarlyDilated: return "theta_l_D";
        case Stage::MiddleDilated: return "theta_m_D";
        case Stage::Upsample: return "theta_up";
    }
    return "?";
}

struct ModelConfig {
    std::size_t features = 64;
    std::size_t depth_l = 1;  // 5x5 head plus (depth_l - 1) extra 3x3 layers
    std::size_t depth_m = 2;
    std::size_t dilation_rate = 2;
    bool rolling = true;
    float slope = 0.2f;
    std::vector<int> scales{3};
    Thresholds thresholds;
    PriorOptions prior;

    void validate() const {
        if (features == 0) throw ArgumentError("features must be positive");
        if (depth_l == 0 || depth_m == 0) throw ArgumentError("stage depths must be >= 1");
        if (dilation_rate == 0) throw ArgumentError("dilation_rate must be >= 1");
        check_slope(slope);
        if (scales.empty()) throw ArgumentError("model needs at least one scale");
        for (int s : scales) check_scale(s);
        thresholds.validate();
    }

    bool has_scale(int s) const { return std::find(scales.begin(), scales.end(), s) != scales.end(); }

    bool operator==(const ModelConfig&) const = default;
};

template <typename T>
struct StageParams {
    std::vector<LayerParams<T>> theta_l;
    std::vector<LayerParams<T>> theta_m;
    std::vector<LayerParams<T>> theta_s;  // two 3x3 convs, then the 1x1 shrink
    std::vector<LayerParams<T>> theta_l_d;
    std::vector<LayerParams<T>> theta_m_d;
    std::map<int, LayerParams<T>> theta_up;

    std::vector<LayerParams<T>>& convs(Stage s) {
        switch (s) {
            case Stage::Early: return theta_l;
            case Stage::Middle: return theta_m;
            case Stage::Late: return theta_s;
            case Stage::EarlyDilated: return theta_l_d;
            case Stage::MiddleDilated: return theta_m_d;
            default: throw ArgumentError("theta_up is not a conv stage");
        }
    }
    const std::vector<LayerParams<T>>& convs(Stage s) const { return const_cast<StageParams*>(this)->convs(s); }

    /// Visits every layer in checkpoint order: conv stages by enum value, then
    /// theta_up by ascending scale (scale is 0 for conv layers).
    template <typename F>
    void for_each_layer(F&& f) {
        for (Stage s : {Stage::Early, Stage::Middle, Stage::Late, Stage::EarlyDilated, Stage::MiddleDilated})
            for (auto& l : convs(s)) f(s, 0, l);
        for (auto& [scale, l] : theta_up) f(Stage::Upsample, scale, l);
    }
    template <typename F>
    void for_each_layer(F&& f) const {
        const_cast<StageParams*>(this)->for_each_layer(
            [&](Stage s, int scale, LayerParams<T>& l) { f(s, scale, static_cast<const LayerParams<T>&>(l)); });
    }

    bool operator==(const StageParams&) const = default;
};

/// Conv geometry of every layer of a stage, derived from the config alone.
inline std::vector<ConvSpec> stage_specs(const ModelConfig& c, Stage s) {
    const std::size_t F = c.features;
    std::vector<ConvSpec> out;
    switch (s) {
        case Stage::Early:
        case Stage::EarlyDilated: {
            const std::size_t d = s == Stage::EarlyDilated ? c.dilation_rate : 1;
            out.push_back(ConvSpec::same(1, F, 5, d));
            for (std::size_t i = 1; i < c.depth_l; ++i) out.push_back(ConvSpec::same(F, F, 3, d));
            break;
        }
        case Stage::Middle:
        case Stage::MiddleDilated: {
            const std::size_t d = s == Stage::MiddleDilated ? c.dilation_rate : 1;
            for (std::size_t i = 0; i < c.depth_m; ++i) out.push_back(ConvSpec::same(F, F, 3, d));
            break;
        }
        case Stage::Late:
            out.push_back(ConvSpec::same(F, F, 3));
            out.push_back(ConvSpec::same(F, F, 3));
            out.push_back(ConvSpec::same(F, F, 1));
            break;
        case Stage::Upsample:
            throw ArgumentError("theta_up geometry depends on the scale; use upsample_spec");
    }
    return out;
}

inline ConvSpec upsample_spec(const ModelConfig& c, int scale) {
    const std::size_t k = deconv_kernel_size(scale);
    return ConvSpec{c.features, 1, k, k, 1, static_cast<std::size_t>(scale), 0, 0};
}

/// Parameter groups read, in order, by the route for a tag (theta_up last).
inline std::vector<Stage> route_stages(const ModelConfig& c, DifficultyTag tag) {
    const Stage early = c.rolling ? Stage::EarlyDilated : Stage::Early;
    const Stage middle = c.rolling ? Stage::MiddleDilated : Stage::Middle;
    switch (tag) {
        case DifficultyTag::Mild: return {early, Stage::Upsample};
        case DifficultyTag::Moderate: return {early, middle, Stage::Upsample};
        case DifficultyTag::Severe: return {Stage::Early, Stage::Middle, Stage::Late, Stage::Upsample};
    }
    return {};
}

template <typename T>
struct BasicPrnModel {
    ModelConfig config;
    StageParams<T> stages;

    /// Xavier-initialised convs, bicubic-initialised deconvs.
    static BasicPrnModel init(const ModelConfig& cfg, std::uint64_t seed) {
        cfg.validate();
        BasicPrnModel m;
        m.config = cfg;
        std::uint64_t layer_seed = seed * 0x9E3779B97F4A7C15ULL + 1;
        std::vector<Stage> conv_stages{Stage::Early, Stage::Middle, Stage::Late};
        if (cfg.rolling) {
            conv_stages.push_back(Stage::EarlyDilated);
            conv_stages.push_back(Stage::MiddleDilated);
        }
        for (Stage s : conv_stages)
            for (const ConvSpec& spec : stage_specs(cfg, s)) m.stages.convs(s).push_back(xavier_init<T>(spec, layer_seed++));
        for (int scale : cfg.scales) m.stages.theta_up[scale] = bicubic_deconv_init<T>(scale, cfg.features);
        return m;
    }

    std::size_t parameter_count() const {
        std::size_t n = 0;
        stages.for_each_layer([&](Stage, int, const LayerParams<T>& l) { n += l.weights.size() + l.bias.size(); });
        return n;
    }

    bool operator==(const BasicPrnModel&) const = default;
};

using PrnModel = BasicPrnModel<float>;

template <typename To, typename From>
BasicPrnModel<To> model_cast(const BasicPrnModel<From>& m) {
    BasicPrnModel<To> out;
    out.config = m.config;
    for (Stage s : {Stage::Early, Stage::Middle, Stage::Late, Stage::EarlyDilated, Stage::MiddleDilated})
        for (const auto& l : m.stages.convs(s)) out.stages.convs(s).push_back(params_cast<To>(l));
    for (const auto& [scale, l] : m.stages.theta_up) out.stages.theta_up[scale] = params_cast<To>(l);
    return out;
}

/// Record of which parameter groups a forward pass actually read.
struct TouchLog {
    std::vector<Stage> order;
    std::set<int> upsample_scales;

    std::set<Stage> stages() const { return {order.begin(), order.end()}; }
    void clear() {
        order.clear();
        upsample_scales.clear();
    }
};

/// Activations kept for backpropagation through one routed pass.
template <typename T>
struct ForwardCache {
    std::vector<Stage> stages;                  // per conv layer
    std::vector<const LayerParams<T>*> layers;  // per conv layer
    std::vector<Tensor<T>> inputs;              // input of each conv layer
    std::vector<Tensor<T>> pre_activations;     // conv output before leaky ReLU
    Tensor<T> upsample_input;
    const LayerParams<T>* upsample = nullptr;
    int scale = 0;
};

namespace detail {

template <typename T>
const std::vector<LayerParams<T>>& read_convs(const BasicPrnModel<T>& m, Stage s, TouchLog* log) {
    const auto& layers = m.stages.convs(s);
    if (layers.empty()) throw ArgumentError(std::string("model has no ") + to_string(s) + " parameters");
    if (log) log->order.push_back(s);
    return layers;
}

template <typename T>
const LayerParams<T>& read_upsample(const BasicPrnModel<T>& m, int scale, TouchLog* log) {
    const auto it = m.stages.theta_up.find(scale);
    if (!m.config.has_scale(scale) || it == m.stages.theta_up.end()) {
        throw ArgumentError("model has no upsampling layer for scale " + std::to_string(scale));
    }
    if (log) {
        log->order.push_back(Stage::Upsample);
        log->upsample_scales.insert(scale);
    }
    return it->second;
}

}  // namespace detail

/// Runs the route for `tag` on a batch of 1-channel LR patches (n x 1 x h x w).
template <typename T>
Tensor<T> forward_route(const BasicPrnModel<T>& model, const Tensor<T>& lr, DifficultyTag tag, int scale,
                        TouchLog* log = nullptr, ForwardCache<T>* cache = nullptr) {
    if (lr.shape().c != 1) throw DimensionError("PRN input must be single-channel, got " + lr.shape().str());
    if (lr.shape().h == 0 || lr.shape().w == 0 || lr.shape().n == 0) throw DimensionError("empty PRN input");
    if (!model.config.has_scale(scale)) {
        throw ArgumentError("scale " + std::to_string(scale) + " is not one of the model's scales");
    }
    const T slope = static_cast<T>(model.config.slope);
    Tensor<T> x = lr;
    for (Stage s : route_stages(model.config, tag)) {
        if (s == Stage::Upsample) {
            const auto& up = detail::read_upsample(model, scale, log);
            Tensor<T> y = deconv2d_forward(x, up, static_cast<std::size_t>(scale));
            if (cache) {
                cache->upsample_input = std::move(x);
                cache->upsample = &up;
                cache->scale = scale;
            }
            return y;
        }
        for (const auto& layer : detail::read_convs(model, s, log)) {
            Tensor<T> z = conv2d_forward(x, layer);
            Tensor<T> a = leaky_relu(z, slope);
            if (cache) {
                cache->stages.push_back(s);
                cache->layers.push_back(&layer);
                cache->inputs.push_back(std::move(x));
                cache->pre_activations.push_back(std::move(z));
            }
            x = std::move(a);
        }
    }
    throw ArgumentError("route has no upsampling stage");
}

template <typename T>
Tensor<T> forward_mild(const Tensor<T>& lr, const BasicPrnModel<T>& model, int scale, TouchLog* log = nullptr) {
    return forward_route(model, lr, DifficultyTag::Mild, scale, log);
}

template <typename T>
Tensor<T> forward_moderate(const Tensor<T>& lr, const BasicPrnModel<T>& model, int scale, TouchLog* log = nullptr) {
    return forward_route(model, lr, DifficultyTag::Moderate, scale, log);
}

template <typename T>
Tensor<T> forward_severe(const Tensor<T>& lr, const BasicPrnModel<T>& model, int scale, TouchLog* log = nullptr) {
    return forward_route(model, lr, DifficultyTag::Severe, scale, log);
}

/// Closed-form multiply-accumulate count of one route on an h x w LR patch:
/// sum over convs of kh*kw*cin*cout*h*w, plus K*K*features*h*w for the deconv.
inline std::uint64_t count_flops(const ModelConfig& c, DifficultyTag tag, std::size_t h, std::size_t w, int scale) {
    if (h == 0 || w == 0) throw DimensionError("count_flops: zero-sized patch");
    check_scale(scale);
    std::uint64_t macs = 0;
    for (Stage s : route_stages(c, tag)) {
        if (s == Stage::Upsample) {
            const ConvSpec u = upsample_spec(c, scale);
            macs += static_cast<std::uint64_t>(u.kh) * u.kw * u.in_channels * u.out_channels * h * w;
            continue;
        }
        for (const ConvSpec& k : stage_specs(c, s))
            macs += static_cast<std::uint64_t>(k.kh) * k.kw * k.in_channels * k.out_channels * h * w;
    }
    return macs;
}

}  // namespace prn
