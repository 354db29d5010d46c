#pragma once

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <map>
#include <random>
#include <span>
#include <sstream>
#include <string>
#include <tuple>
#include <vector>

#include "prn/inference.hpp"
#include "prn/model.hpp"
#include "prn/resize.hpp"

namespace prn {

enum class OptimizerKind { Adam = 0, Sgd = 1 };

inline const char* to_string(OptimizerKind k) { return k == OptimizerKind::Adam ? "adam" : "sgd"; }

struct TrainConfig {
    std::size_t batch_size = 64;
    double lr = 1e-4;
    std::size_t lr_decay_every = 300;  // epochs; lr is divided by lr_decay_factor each time
    double lr_decay_factor = 10.0;
    std::size_t epochs = 300;
    std::uint64_t seed = 1;
    OptimizerKind optimizer = OptimizerKind::Adam;
    double adam_beta1 = 0.9;
    double adam_beta2 = 0.999;
    double adam_eps = 1e-8;
    /// Loss weight per tag (mild, moderate, severe).
    std::array<double, 3> tag_weights{1.0, 1.0, 1.0};
    bool clip_gradients = false;
    double clip_norm = 1.0;

    void validate() const {
        if (batch_size == 0) throw ArgumentError("batch_size must be >= 1");
        if (!(lr > 0.0)) throw ArgumentError("learning rate must be positive");
        if (lr_decay_every == 0) throw ArgumentError("lr_decay_every must be >= 1");
        if (!(lr_decay_factor >= 1.0)) throw ArgumentError("lr_decay_factor must be >= 1");
        for (double w : tag_weights)
            if (!(w >= 0.0)) throw ArgumentError("tag weights must be non-negative");
        if (clip_gradients && !(clip_norm > 0.0)) throw ArgumentError("clip_norm must be positive");
    }

    double lr_at(std::size_t epoch) const {
        return lr / std::pow(lr_decay_factor, static_cast<double>(epoch / lr_decay_every));
    }
};

struct TrainingPair {
    Tensor<float> lr;  // 1x1xhxw
    Tensor<float> hr;  // 1x1x(s*h)x(s*w)
    DifficultyTag tag = DifficultyTag::Mild;
    int scale = 3;
    double prior = 0.0;
};

struct PairOptions {
    std::vector<int> scales{3};
    Thresholds thresholds;
    PriorOptions prior;
    std::size_t base_patch = 54;
    /// HR crop step; 0 means non-overlapping (step = patch size).
    std::size_t stride = 0;
    std::uint64_t seed = 1;
};

/// Crops full HR patches (no padding), bicubic-downscales each one and tags it by
/// the prior of its LR version. The result is shuffled by `opt.seed`.
inline std::vector<TrainingPair> make_training_pairs(const std::vector<ImagePlane>& hr_images, const PairOptions& opt) {
    if (hr_images.empty()) throw ArgumentError("make_training_pairs needs at least one image");
    if (opt.scales.empty()) throw ArgumentError("make_training_pairs needs at least one scale");
    opt.thresholds.validate();
    std::vector<TrainingPair> pairs;
    for (int scale : opt.scales) {
        const std::size_t P = hr_patch_size(scale, opt.base_patch);
        const std::size_t p = P / static_cast<std::size_t>(scale);
        const std::size_t step = opt.stride == 0 ? P : opt.stride;
        for (std::size_t i = 0; i < hr_images.size(); ++i) {
            const ImagePlane& img = hr_images[i];
            if (img.width < P || img.height < P) {
                throw DimensionError("training image " + std::to_string(i) + " (" + std::to_string(img.width) + "x" +
                                     std::to_string(img.height) + ") is smaller than the " + std::to_string(P) +
                                     "px patch");
            }
            for (std::size_t r0 = 0; r0 + P <= img.height; r0 += step)
                for (std::size_t c0 = 0; c0 + P <= img.width; c0 += step) {
                    ImagePlane hr(P, P);
                    for (std::size_t y = 0; y < P; ++y)
                        for (std::size_t x = 0; x < P; ++x) hr.at(y, x) = img.at(r0 + y, c0 + x);
                    TrainingPair tp;
                    tp.lr = plane_to_tensor(bicubic_resize(hr, p, p));
                    tp.hr = plane_to_tensor(hr);
                    tp.scale = scale;
                    tp.prior = gradient_prior(tp.lr, opt.prior);
                    tp.tag = classify(tp.prior, opt.thresholds);
                    pairs.push_back(std::move(tp));
                }
        }
    }
    std::mt19937_64 rng(opt.seed);
    std::shuffle(pairs.begin(), pairs.end(), rng);
    return pairs;
}

/// Mean squared error and its gradient 2(pred - target)/N.
template <typename T>
std::pair<double, Tensor<T>> l2_loss(const Tensor<T>& pred, const Tensor<T>& target) {
    if (pred.shape() != target.shape()) {
        throw DimensionError("l2_loss shape mismatch: " + pred.shape().str() + " vs " + target.shape().str());
    }
    const auto n = static_cast<double>(pred.size());
    if (pred.size() == 0) throw DimensionError("l2_loss on empty tensors");
    Tensor<T> grad(pred.shape());
    double sum = 0.0;
    for (std::size_t i = 0; i < pred.size(); ++i) {
        const double d = static_cast<double>(pred[i]) - static_cast<double>(target[i]);
        sum += d * d;
        grad[i] = static_cast<T>(2.0 * d / n);
    }
    return {sum / n, std::move(grad)};
}

/// Identifies one layer of a model: conv stage + index, or theta_up + scale.
struct LayerKey {
    Stage stage = Stage::Early;
    std::size_t index = 0;
    int scale = 0;

    auto operator<=>(const LayerKey&) const = default;
};

template <typename T>
LayerParams<T>& layer_at(BasicPrnModel<T>& m, const LayerKey& k) {
    if (k.stage == Stage::Upsample) return m.stages.theta_up.at(k.scale);
    return m.stages.convs(k.stage).at(k.index);
}

template <typename T>
const LayerParams<T>& layer_at(const BasicPrnModel<T>& m, const LayerKey& k) {
    return layer_at(const_cast<BasicPrnModel<T>&>(m), k);
}

template <typename T>
struct LayerGrad {
    LayerKey key;
    Tensor<T> weights;
    std::vector<T> bias;
};

/// Backpropagates grad_out (w.r.t. the route output) through a cached forward pass.
/// Gradients come back in forward order; theta_up last.
template <typename T>
std::vector<LayerGrad<T>> route_backward(const BasicPrnModel<T>& model, const ForwardCache<T>& cache,
                                         const Tensor<T>& grad_out) {
    if (!cache.upsample) throw ArgumentError("route_backward needs a populated forward cache");
    const T slope = static_cast<T>(model.config.slope);
    std::vector<LayerGrad<T>> grads(cache.layers.size() + 1);

    ConvGrads<T> g = deconv2d_backward(cache.upsample_input, *cache.upsample, static_cast<std::size_t>(cache.scale),
                                       grad_out);
    grads.back() = {LayerKey{Stage::Upsample, 0, cache.scale}, std::move(g.grad_weights), std::move(g.grad_bias)};
    Tensor<T> upstream = std::move(g.grad_input);

    // index of each layer within its stage
    std::vector<std::size_t> index(cache.layers.size());
    std::map<Stage, std::size_t> seen;
    for (std::size_t i = 0; i < cache.layers.size(); ++i) index[i] = seen[cache.stages[i]]++;

    for (std::size_t i = cache.layers.size(); i-- > 0;) {
        const Tensor<T> dz = leaky_relu_backward(cache.pre_activations[i], upstream, slope);
        ConvGrads<T> cg = conv2d_backward(cache.inputs[i], *cache.layers[i], dz);
        grads[i] = {LayerKey{cache.stages[i], index[i], 0}, std::move(cg.grad_weights), std::move(cg.grad_bias)};
        upstream = std::move(cg.grad_input);
    }
    return grads;
}

/// L2 loss of the routed prediction and the gradient of every layer on the route.
template <typename T>
std::pair<double, std::vector<LayerGrad<T>>> route_loss_and_grads(const BasicPrnModel<T>& model, const Tensor<T>& lr,
                                                                  const Tensor<T>& hr, DifficultyTag tag, int scale) {
    ForwardCache<T> cache;
    const Tensor<T> pred = forward_route(model, lr, tag, scale, nullptr, &cache);
    auto [loss, grad] = l2_loss(pred, hr);
    return {loss, route_backward(model, cache, grad)};
}

struct AdamSlot {
    std::vector<float> m_w, v_w, m_b, v_b;
    std::uint64_t steps = 0;
};

/// Optimiser moments, kept per layer so that each layer's bias correction
/// follows the number of updates it has actually received.
struct OptimizerState {
    std::map<LayerKey, AdamSlot> slots;
};

namespace detail {

inline std::pair<Tensor<float>, Tensor<float>> stack_batch(const std::vector<const TrainingPair*>& batch) {
    const Shape ls = batch.front()->lr.shape(), hs = batch.front()->hr.shape();
    Tensor<float> lr(Shape{batch.size(), 1, ls.h, ls.w}), hr(Shape{batch.size(), 1, hs.h, hs.w});
    for (std::size_t i = 0; i < batch.size(); ++i) {
        if (batch[i]->lr.shape() != ls || batch[i]->hr.shape() != hs) {
            throw DimensionError("training batch mixes patch sizes");
        }
        std::copy(batch[i]->lr.data().begin(), batch[i]->lr.data().end(), lr.data().begin() + i * ls.size());
        std::copy(batch[i]->hr.data().begin(), batch[i]->hr.data().end(), hr.data().begin() + i * hs.size());
    }
    return {std::move(lr), std::move(hr)};
}

inline void apply_update(std::span<float> param, const float* grad, std::vector<float>& m, std::vector<float>& v,
                         std::uint64_t t, double lr, double scale, const TrainConfig& cfg) {
    if (cfg.optimizer == OptimizerKind::Sgd) {
        for (std::size_t i = 0; i < param.size(); ++i)
            param[i] = static_cast<float>(param[i] - lr * scale * grad[i]);
        return;
    }
    if (m.empty()) {
        m.assign(param.size(), 0.0f);
        v.assign(param.size(), 0.0f);
    }
    const double b1 = cfg.adam_beta1, b2 = cfg.adam_beta2;
    const double step = lr * std::sqrt(1.0 - std::pow(b2, static_cast<double>(t))) /
                        (1.0 - std::pow(b1, static_cast<double>(t)));
    for (std::size_t i = 0; i < param.size(); ++i) {
        const double g = scale * grad[i];
        m[i] = static_cast<float>(b1 * m[i] + (1.0 - b1) * g);
        v[i] = static_cast<float>(b2 * v[i] + (1.0 - b2) * g * g);
        param[i] = static_cast<float>(param[i] - step * m[i] / (std::sqrt(static_cast<double>(v[i])) + cfg.adam_eps));
    }
}

}  // namespace detail

/// One optimisation step on a tag- and scale-homogeneous batch. Only the layers
/// on that tag's route are modified. Returns the (unweighted) batch loss.
inline double train_step(PrnModel& model, const std::vector<const TrainingPair*>& batch, const TrainConfig& cfg,
                         OptimizerState& state, double lr) {
    if (batch.empty()) throw ArgumentError("train_step on an empty batch");
    const DifficultyTag tag = batch.front()->tag;
    const int scale = batch.front()->scale;
    for (const auto* p : batch) {
        if (p->tag != tag) throw ArgumentError("train_step batch mixes difficulty tags");
        if (p->scale != scale) throw ArgumentError("train_step batch mixes scales");
    }
    auto [lr_t, hr_t] = detail::stack_batch(batch);
    auto [loss, grads] = route_loss_and_grads(model, lr_t, hr_t, tag, scale);

    double scale_factor = cfg.tag_weights[static_cast<std::size_t>(tag)];
    if (cfg.clip_gradients) {
        double sq = 0.0;
        for (const auto& g : grads) {
            for (float v : g.weights.data()) sq += static_cast<double>(v) * v;
            for (float v : g.bias) sq += static_cast<double>(v) * v;
        }
        const double norm = std::sqrt(sq) * scale_factor;
        if (norm > cfg.clip_norm) scale_factor *= cfg.clip_norm / norm;
    }
    if (scale_factor == 0.0) return loss;
    for (const auto& g : grads) {
        LayerParams<float>& layer = layer_at(model, g.key);
        AdamSlot& slot = state.slots[g.key];
        ++slot.steps;
        detail::apply_update(layer.weights.data(), g.weights.data().data(), slot.m_w, slot.v_w, slot.steps, lr,
                             scale_factor, cfg);
        detail::apply_update(layer.bias, g.bias.data(), slot.m_b, slot.v_b, slot.steps, lr, scale_factor, cfg);
    }
    return loss;
}

inline double train_step(PrnModel& model, const std::vector<TrainingPair>& batch, const TrainConfig& cfg,
                         OptimizerState& state, double lr) {
    std::vector<const TrainingPair*> ptrs;
    for (const auto& p : batch) ptrs.push_back(&p);
    return train_step(model, ptrs, cfg, state, lr);
}

struct EpochRecord {
    std::size_t epoch = 0;  // 1-based
    double lr = 0.0;
    std::array<double, 3> tag_loss{};  // NaN when the tag had no batches
    std::array<std::size_t, 3> tag_batches{};
    double mean_loss = 0.0;
    double seconds = 0.0;
};

struct LossCurve {
    std::vector<EpochRecord> epochs;

    std::string to_csv() const {
        std::ostringstream os;
        os.precision(9);
        os << "epoch,lr,loss,mild_loss,moderate_loss,severe_loss,seconds\n";
        for (const auto& e : epochs) {
            os << e.epoch << ',' << e.lr << ',' << e.mean_loss;
            for (double l : e.tag_loss) {
                os << ',';
                if (!std::isnan(l)) os << l;
            }
            os << ',' << e.seconds << '\n';
        }
        return os.str();
    }
};

/// Epoch loop: per epoch, the pairs of each (tag, scale) group are shuffled and
/// cut into batches; batches are taken round-robin over the groups (mild,
/// moderate, severe; scales ascending within a tag) until all are used.
/// `on_epoch` may return false to stop early.
inline LossCurve train(PrnModel& model, const std::vector<TrainingPair>& pairs, const TrainConfig& cfg,
                       const std::function<bool(const EpochRecord&)>& on_epoch = {}) {
    cfg.validate();
    if (pairs.empty()) throw ArgumentError("train needs at least one training pair");
    std::map<std::pair<DifficultyTag, int>, std::vector<const TrainingPair*>> groups;
    for (const auto& p : pairs) {
        if (!model.config.has_scale(p.scale)) {
            throw ArgumentError("training pair scale " + std::to_string(p.scale) + " not in the model");
        }
        groups[{p.tag, p.scale}].push_back(&p);
    }

    OptimizerState state;
    std::mt19937_64 rng(cfg.seed);
    LossCurve curve;
    for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        const auto t0 = std::chrono::steady_clock::now();
        const double lr = cfg.lr_at(epoch);
        std::vector<std::vector<std::vector<const TrainingPair*>>> queues;
        std::vector<DifficultyTag> queue_tag;
        for (auto& [key, members] : groups) {
            std::shuffle(members.begin(), members.end(), rng);
            std::vector<std::vector<const TrainingPair*>> batches;
            for (std::size_t i = 0; i < members.size(); i += cfg.batch_size)
                batches.emplace_back(members.begin() + i,
                                     members.begin() + std::min(members.size(), i + cfg.batch_size));
            queues.push_back(std::move(batches));
            queue_tag.push_back(key.first);
        }

        std::array<double, 3> loss_sum{}, weight_sum{};
        std::array<std::size_t, 3> nbatches{};
        for (std::size_t round = 0;; ++round) {
            bool any = false;
            for (std::size_t q = 0; q < queues.size(); ++q) {
                if (round >= queues[q].size()) continue;
                any = true;
                const auto& batch = queues[q][round];
                const double loss = train_step(model, batch, cfg, state, lr);
                const auto t = static_cast<std::size_t>(queue_tag[q]);
                loss_sum[t] += loss * static_cast<double>(batch.size());
                weight_sum[t] += static_cast<double>(batch.size());
                ++nbatches[t];
            }
            if (!any) break;
        }

        EpochRecord rec;
        rec.epoch = epoch + 1;
        rec.lr = lr;
        rec.tag_batches = nbatches;
        double total = 0.0, count = 0.0;
        for (std::size_t t = 0; t < 3; ++t) {
            rec.tag_loss[t] = weight_sum[t] > 0 ? loss_sum[t] / weight_sum[t] : std::numeric_limits<double>::quiet_NaN();
            total += loss_sum[t];
            count += weight_sum[t];
        }
        rec.mean_loss = total / count;
        rec.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        curve.epochs.push_back(rec);
        if (on_epoch && !on_epoch(rec)) break;
    }
    return curve;
}

}  // namespace prn
