// Acceptance checks: one PASS/FAIL line per criterion. Tolerances are pinned
// below. Pass criterion numbers as arguments to run a subset.

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <optional>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "oracles.hpp"
#include "route_fd.hpp"
#include "prn/prn.hpp"

using namespace prn;

namespace {

constexpr double kKernelTol = 1e-5;
constexpr std::size_t kKernelShapes = 200;
constexpr double kKernelSeconds = 60.0;

constexpr double kFdEps = 1e-3;
constexpr double kFdRelTol = 1e-3;
constexpr double kFdFloor = 1e-6;
constexpr std::size_t kFdSamples = 100;
constexpr double kFdSeconds = 120.0;

constexpr double kBicubicTol = 1e-3;

constexpr std::size_t kPriorSamples = 10000;

constexpr std::size_t kTrainImages = 20;
constexpr std::size_t kTestImages = 10;
constexpr std::size_t kMaxEpochs = 300;
constexpr double kTrainSeconds = 20.0 * 60.0;
constexpr double kMinGainDb = 0.3;
constexpr double kMinSevereDrop = 0.5;

constexpr double kMinMildFraction = 0.6;
constexpr double kMaxMacRatio = 0.55;

/// Desk-scale training recipe for criterion 6.
struct DeskRecipe {
    std::size_t epochs = 200;
    std::size_t batch = 16;
    double lr = 1e-3;
    std::size_t decay_every = 120;
    std::size_t stride = 27;
    /// LR context pixels around each inference patch
    std::size_t margin = 6;
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

struct Outcome {
    bool pass = false;
    std::string detail;
};

std::string fmt(const char* f, auto... args) {
    char buf[512];
    std::snprintf(buf, sizeof buf, f, args...);
    return buf;
}

// 1. kernels against brute-force loops
Outcome kernel_oracles() {
    const auto t0 = Clock::now();
    std::mt19937_64 rng(101);
    std::uniform_int_distribution<std::size_t> nd(1, 2), cd(1, 8), hd(4, 16), kd(0, 2), sd(2, 4);
    double worst[3] = {0, 0, 0};
    std::size_t shapes[3] = {0, 0, 0};
    while (shapes[0] < kKernelShapes || shapes[1] < kKernelShapes) {
        const std::size_t dil = shapes[0] < kKernelShapes ? 1 : 2;
        const std::size_t k = 2 * kd(rng) + 1;
        const Shape s{nd(rng), cd(rng), hd(rng), hd(rng)};
        const auto x = oracle::random_tensor<float>(s, rng);
        const auto p = oracle::random_layer<float>(ConvSpec::same(s.c, cd(rng), k, dil), rng);
        const std::size_t i = dil == 1 ? 0 : 1;
        worst[i] = std::max(worst[i], oracle::max_abs_diff(conv2d_forward(x, p), oracle::naive_conv2d(x, p)));
        ++shapes[i];
    }
    while (shapes[2] < kKernelShapes) {
        const std::size_t stride = sd(rng);
        const std::size_t ks[] = {stride, stride + 1, 2 * stride + 1, deconv_kernel_size(static_cast<int>(stride))};
        const std::size_t K = ks[shapes[2] % 4];
        const Shape s{nd(rng), cd(rng), hd(rng), hd(rng)};
        const auto x = oracle::random_tensor<float>(s, rng);
        const auto p = oracle::random_layer<float>(ConvSpec{s.c, cd(rng), K, K, 1, stride, 0, 0}, rng);
        worst[2] = std::max(worst[2], oracle::max_abs_diff(deconv2d_forward(x, p, stride), oracle::zero_stuff_deconv(x, p, stride)));
        ++shapes[2];
    }
    const double secs = seconds_since(t0);
    const double m = std::max({worst[0], worst[1], worst[2]});
    return {m <= kKernelTol && secs < kKernelSeconds,
            fmt("conv %zu / dilated %zu / deconv %zu shapes, max abs diff %.2e / %.2e / %.2e (tol %.0e), %.1f s",
                shapes[0], shapes[1], shapes[2], worst[0], worst[1], worst[2], kKernelTol, secs)};
}

struct FdTally {
    std::size_t samples = 0;
    double worst = 0.0;
    void add(double analytic, double numeric) {
        ++samples;
        worst = std::max(worst, oracle::rel_error(analytic, numeric, kFdFloor));
    }
};

// 2. analytic gradients against central differences
Outcome gradients() {
    const auto t0 = Clock::now();
    std::mt19937_64 rng(202);
    std::string detail;
    bool pass = true;

    // layer types, loss = 0.5 * sum(y^2)
    auto half_sq = [](const Tensor<double>& y) {
        double acc = 0.0;
        for (double v : y.data()) acc += 0.5 * v * v;
        return acc;
    };
    auto check_layer = [&](const std::string& name, Tensor<double>& x, LayerParams<double>& p,
                           const std::function<Tensor<double>()>& fwd,
                           const std::function<ConvGrads<double>(const Tensor<double>&)>& bwd) {
        const auto g = bwd(fwd());
        const auto loss = [&] { return half_sq(fwd()); };
        FdTally t;
        std::uniform_int_distribution<std::size_t> xi(0, x.size() - 1), wi(0, p.weights.size() - 1);
        for (std::size_t i = 0; i < kFdSamples / 2; ++i) {
            const std::size_t a = xi(rng), b = wi(rng);
            t.add(g.grad_input[a], oracle::central_difference<double>(loss, x[a], kFdEps));
            t.add(g.grad_weights[b], oracle::central_difference<double>(loss, p.weights[b], kFdEps));
        }
        for (std::size_t b = 0; b < p.bias.size(); ++b)
            t.add(g.grad_bias[b], oracle::central_difference<double>(loss, p.bias[b], kFdEps));
        pass = pass && t.worst <= kFdRelTol && t.samples >= kFdSamples;
        detail += fmt("%s %zu/%.1e, ", name.c_str(), t.samples, t.worst);
    };
    for (std::size_t dil : {1u, 2u}) {
        auto x = oracle::random_tensor<double>(Shape{2, 3, 7, 6}, rng);
        auto p = oracle::random_layer<double>(ConvSpec::same(3, 4, 3, dil), rng);
        check_layer(dil == 1 ? "conv" : "dilated", x, p, [&] { return conv2d_forward(x, p); },
                    [&](const Tensor<double>& go) { return conv2d_backward(x, p, go); });
    }
    for (std::size_t s : {2u, 3u, 4u}) {
        const std::size_t K = deconv_kernel_size(static_cast<int>(s));
        auto x = oracle::random_tensor<double>(Shape{2, 3, 4, 5}, rng);
        auto p = oracle::random_layer<double>(ConvSpec{3, 2, K, K, 1, s, 0, 0}, rng);
        check_layer("deconv x" + std::to_string(s), x, p, [&] { return deconv2d_forward(x, p, s); },
                    [&](const Tensor<double>& go) { return deconv2d_backward(x, p, s, go); });
    }
    {
        // leaky ReLU away from its kink, and the L2 loss
        auto x = oracle::random_tensor<double>(Shape{1, 2, 8, 8}, rng);
        for (auto& v : x.data())
            if (std::fabs(v) < 10 * kFdEps) v += 0.1;
        const auto target = oracle::random_tensor<double>(x.shape(), rng);
        const auto g = leaky_relu_backward(x, leaky_relu(x, 0.2), 0.2);
        const auto dl = l2_loss(x, target).second;
        FdTally relu, l2;
        for (std::size_t i = 0; i < x.size(); ++i) {
            relu.add(g[i], oracle::central_difference<double>([&] { return half_sq(leaky_relu(x, 0.2)); }, x[i], kFdEps));
            l2.add(dl[i], oracle::central_difference<double>([&] { return l2_loss(x, target).first; }, x[i], kFdEps));
        }
        pass = pass && relu.worst <= kFdRelTol && l2.worst <= kFdRelTol && relu.samples >= kFdSamples;
        detail += fmt("leaky relu %zu/%.1e, l2 %zu/%.1e; routes ", relu.samples, relu.worst, l2.samples, l2.worst);
    }

    // end-to-end routed loss, every layer of every path, kink-free stencils only
    ModelConfig c;
    c.features = 8;
    auto m = model_cast<double>(PrnModel::init(c, 5));
    const auto lr = oracle::random_tensor<double>(Shape{2, 1, 5, 5}, rng, 0.0, 1.0);
    const auto hr = oracle::random_tensor<double>(Shape{2, 1, 15, 15}, rng, 0.0, 1.0);
    for (DifficultyTag tag : kAllTags) {
        const auto grads = route_loss_and_grads(m, lr, hr, tag, 3).second;
        FdTally t;
        std::size_t kinks = 0;
        std::set<LayerKey> covered;
        for (std::size_t round = 0; t.samples < kFdSamples && round < 400; ++round)
            for (const auto& g : grads) {
                auto& layer = layer_at(m, g.key);
                std::uniform_int_distribution<std::size_t> wi(0, layer.weights.size() - 1), bi(0, layer.bias.size() - 1);
                const bool bias = round % 4 == 3;
                const std::size_t i = bias ? bi(rng) : wi(rng);
                double& param = bias ? layer.bias[i] : layer.weights[i];
                const auto fd = fdcheck::central_difference(m, lr, hr, tag, 3, param, kFdEps);
                if (fd.kink) {
                    ++kinks;
                    continue;
                }
                t.add(bias ? g.bias[i] : g.weights[i], fd.value);
                covered.insert(g.key);
            }
        pass = pass && t.samples >= kFdSamples && t.worst <= kFdRelTol && covered.size() == grads.size();
        detail += fmt("%s %zu/%.1e (%zu layers, %zu kinks skipped), ", to_string(tag), t.samples, t.worst,
                      covered.size(), kinks);
    }
    const double secs = seconds_since(t0);
    pass = pass && secs < kFdSeconds;
    return {pass, detail + fmt("samples/max rel err (tol %.0e, eps %.0e), %.1f s", kFdRelTol, kFdEps, secs)};
}

// 3. bicubic-initialised deconv against the direct bicubic resampler
Outcome bicubic_deconv() {
    std::mt19937_64 rng(303);
    const long h = 12, w = 14;
    double worst = 0.0;
    std::string detail;
    for (int s : {2, 3, 4}) {
        ModelConfig c;
        c.scales = {s};
        const auto model = PrnModel::init(c, 1);
        const auto& up = model.stages.theta_up.at(s);
        const auto plane = oracle::random_tensor<float>(Shape{1, 1, h, w}, rng, 0.0, 1.0);
        Tensor<float> x(Shape{1, c.features, h, w});
        for (std::size_t ch = 0; ch < c.features; ++ch)
            for (long i = 0; i < h * w; ++i) x.plane(0, ch)[i] = plane[i];
        const auto y = deconv2d_forward(x, up, static_cast<std::size_t>(s));
        const auto ref = oracle::reference_resize(std::vector<double>(plane.data().begin(), plane.data().end()), h, w,
                                                  h * s, w * s);
        const long margin = 2 * s + 1;
        double m = 0.0;
        for (long Y = margin; Y < h * s - margin; ++Y)
            for (long X = margin; X < w * s - margin; ++X)
                m = std::max(m, std::abs(y.at(0, 0, Y, X) - ref[Y * w * s + X]));
        worst = std::max(worst, m);
        detail += fmt("x%d %.2e, ", s, m);
    }
    return {worst <= kBicubicTol, detail + fmt("interior max abs diff (tol %.0e)", kBicubicTol)};
}

// parameters of the listed stages in layer-visit order
std::vector<float> snapshot(const PrnModel& m, const std::vector<Stage>& stages) {
    std::vector<float> out;
    m.stages.for_each_layer([&](Stage s, int, const LayerParams<float>& l) {
        if (std::find(stages.begin(), stages.end(), s) == stages.end()) return;
        out.insert(out.end(), l.weights.data().begin(), l.weights.data().end());
        out.insert(out.end(), l.bias.begin(), l.bias.end());
    });
    return out;
}

// 4. routing and rolling contracts
Outcome routing() {
    using S = Stage;
    const auto m = PrnModel::init(ModelConfig{}, 7);
    std::mt19937_64 rng(404);
    const auto patch = oracle::random_tensor<float>(Shape{1, 1, 18, 18}, rng, 0.0, 1.0);
    bool traces = true;
    const std::set<S> expect[3] = {{S::EarlyDilated, S::Upsample},
                                   {S::EarlyDilated, S::MiddleDilated, S::Upsample},
                                   {S::Early, S::Middle, S::Late, S::Upsample}};
    for (DifficultyTag tag : kAllTags) {
        TouchLog log;
        forward_route(m, patch, tag, 3, &log);
        traces = traces && log.stages() == expect[static_cast<int>(tag)] && log.upsample_scales == std::set<int>{3};
    }

    // one Adam step per tag on that tag's pairs; off-route banks must be bit-identical
    ModelConfig small;
    small.features = 8;
    auto tagged = [&](DifficultyTag want) {
        std::vector<TrainingPair> out;
        for (std::uint64_t seed = 1; out.size() < 4 && seed < 400; ++seed) {
            ImagePlane img(54, 54);
            std::mt19937_64 r(seed);
            const float amp = want == DifficultyTag::Mild ? 0.002f : want == DifficultyTag::Moderate ? 0.05f : 0.6f;
            std::uniform_real_distribution<float> d(0.5f - amp, 0.5f + amp);
            for (auto& v : img.data) v = d(r);
            for (auto& p : make_training_pairs({img}, PairOptions{}))
                if (p.tag == want) out.push_back(std::move(p));
        }
        return out;
    };
    bool isolation = true;
    std::string counts;
    for (DifficultyTag tag : kAllTags) {
        auto model = PrnModel::init(small, 8);
        const auto pairs = tagged(tag);
        const auto on = expect[static_cast<int>(tag)];
        std::vector<S> off;
        for (S s : {S::Early, S::Middle, S::Late, S::EarlyDilated, S::MiddleDilated})
            if (!on.count(s)) off.push_back(s);
        const auto before_off = snapshot(model, off), before_on = snapshot(model, {on.begin(), on.end()});
        OptimizerState st;
        TrainConfig cfg;
        cfg.lr = 1e-3;
        train_step(model, pairs, cfg, st, cfg.lr);
        const bool off_same = snapshot(model, off) == before_off;
        const bool on_moved = snapshot(model, {on.begin(), on.end()}) != before_on;
        isolation = isolation && !pairs.empty() && off_same && on_moved;
        counts += fmt("%s step on %zu pairs, ", to_string(tag), pairs.size());
    }

    auto support = [](const LayerParams<float>& l) {
        Tensor<float> impulse(Shape{1, 1, 21, 21});
        impulse.at(0, 0, 10, 10) = 1.0f;
        const auto y = conv2d_forward(impulse, l);
        const auto base = conv2d_forward(Tensor<float>(impulse.shape()), l);
        std::size_t lo = 21, hi = 0;
        for (std::size_t c = 0; c < y.shape().c; ++c)
            for (std::size_t r = 0; r < 21; ++r)
                if (y.at(0, c, r, 10) != base.at(0, c, r, 10)) {
                    lo = std::min(lo, r);
                    hi = std::max(hi, r);
                }
        return hi - lo + 1;
    };
    const std::size_t dil = support(m.stages.theta_l_d[0]), reg = support(m.stages.theta_l[0]);
    return {traces && isolation && dil == 9 && reg == 5,
            fmt("touch traces %s; %soff-route banks bit-identical: %s; impulse support dilated %zu vs regular %zu",
                traces ? "exact" : "WRONG", counts.c_str(), isolation ? "yes" : "NO", dil, reg)};
}

// 5. classification partition and monotonicity
Outcome classification() {
    const Thresholds t;
    std::mt19937_64 rng(505);
    std::uniform_real_distribution<double> d(0.0, 60.0);
    std::vector<double> priors(kPriorSamples);
    for (auto& p : priors) p = d(rng);
    priors[0] = 10.0;
    priors[1] = 30.0;
    priors[2] = 0.0;
    const TagCounts c = count_tags(priors, t);
    std::sort(priors.begin(), priors.end());
    bool monotone = true;
    for (std::size_t i = 1; i < priors.size(); ++i)
        monotone = monotone && classify(priors[i - 1], t) <= classify(priors[i], t);
    bool partition = c.total() == priors.size();
    for (double p : priors) {
        const bool mild = p <= t.gamma_upper, severe = p > t.gamma_low;
        const DifficultyTag want = mild ? DifficultyTag::Mild : severe ? DifficultyTag::Severe : DifficultyTag::Moderate;
        partition = partition && classify(p, t) == want;
    }
    const bool defaults = t.gamma_upper == 10.0 && t.gamma_low == 30.0;
    return {partition && monotone && defaults,
            fmt("defaults (%g, %g); %zu priors -> %zu mild + %zu moderate + %zu severe; partition %s, monotone %s",
                t.gamma_upper, t.gamma_low, priors.size(), c[DifficultyTag::Mild], c[DifficultyTag::Moderate],
                c[DifficultyTag::Severe], partition ? "yes" : "NO", monotone ? "yes" : "NO")};
}

std::vector<NamedImage> named(const std::vector<ColorImage>& images, const std::string& prefix) {
    std::vector<NamedImage> out;
    for (std::size_t i = 0; i < images.size(); ++i) out.push_back({fmt("%s%02zu", prefix.c_str(), i), images[i]});
    return out;
}

// 6. desk-scale training beats bicubic
Outcome desk_training(std::optional<PrnModel>& trained) {
    const DeskRecipe r;
    const SyntheticOptions so;
    std::vector<ImagePlane> hr;
    for (const auto& img : synthetic_corpus(kTrainImages, so, 1)) hr.push_back(luma(img));
    const auto test = named(synthetic_corpus(kTestImages, so, 2), "test");

    const auto t0 = Clock::now();
    PairOptions po;
    po.stride = r.stride;
    const auto pairs = make_training_pairs(hr, po);
    TrainConfig tc;
    tc.epochs = r.epochs;
    tc.batch_size = r.batch;
    tc.lr = r.lr;
    tc.lr_decay_every = r.decay_every;
    PrnModel model = PrnModel::init(ModelConfig{}, 1);
    const LossCurve curve = train(model, pairs, tc);
    const double secs = seconds_since(t0);

    SuperResolveOptions opt;
    opt.margin = r.margin;
    const EvalReport rep = evaluate_images(model, test, 3, opt);
    const double gain = rep.mean_psnr() - rep.mean_bicubic_psnr();
    const EvalReport plain = evaluate_images(model, test, 3);
    const auto sev = static_cast<std::size_t>(DifficultyTag::Severe);
    const double first = curve.epochs.front().tag_loss[sev], last = curve.epochs.back().tag_loss[sev];
    const double drop = 1.0 - last / first;
    trained = std::move(model);
    return {gain >= kMinGainDb && drop >= kMinSevereDrop && r.epochs <= kMaxEpochs && secs <= kTrainSeconds,
            fmt("%zu pairs, %zu epochs in %.0f s; margin %zu: PSNR %.3f vs bicubic %.3f dB (gain %+.3f, need %.1f), "
                "margin 0: gain %+.3f; severe loss %.5f -> %.5f (drop %.0f%%, need %.0f%%)",
                pairs.size(), r.epochs, secs, r.margin, rep.mean_psnr(), rep.mean_bicubic_psnr(), gain, kMinGainDb,
                plain.mean_psnr() - plain.mean_bicubic_psnr(), first, last, 100 * drop, 100 * kMinSevereDrop)};
}

// 7. routed MACs on a mostly-flat corpus
Outcome efficiency() {
    SyntheticOptions so;
    so.width = so.height = 216;
    so.flat_fraction = 0.8;
    const auto images = synthetic_corpus(6, so, 7);
    const auto model = PrnModel::init(ModelConfig{}, 1);
    std::uint64_t routed = 0, routed_formula = 0, severe = 0, severe_formula = 0;
    TagCounts tags;
    for (const auto& img : images) {
        const ImagePlane lr = luma(make_case(img, 3).lr);
        SuperResolveOptions on, off;
        off.routing = false;
        const auto a = super_resolve_plane(lr, model, 3, on);
        const auto b = super_resolve_plane(lr, model, 3, off);
        for (const auto& t : a.traces) {
            routed += t.macs;
            routed_formula += count_flops(model.config, t);
            ++tags[t.tag];
        }
        for (const auto& t : b.traces) {
            severe += t.macs;
            severe_formula += count_flops(model.config, t);
        }
    }
    const double mild = static_cast<double>(tags[DifficultyTag::Mild]) / static_cast<double>(tags.total());
    const double ratio = static_cast<double>(routed) / static_cast<double>(severe);
    const bool exact = routed == routed_formula && severe == severe_formula;
    return {mild >= kMinMildFraction && ratio <= kMaxMacRatio && exact,
            fmt("%zu patches, %.0f%% mild (need %.0f%%); routed/all-severe MACs %llu/%llu = %.3f (need <= %.2f); "
                "counter == closed form: %s",
                tags.total(), 100 * mild, 100 * kMinMildFraction, static_cast<unsigned long long>(routed),
                static_cast<unsigned long long>(severe), ratio, kMaxMacRatio, exact ? "yes" : "NO")};
}

// 8. determinism and checkpoint round trip
Outcome determinism(const std::optional<PrnModel>& trained) {
    ModelConfig c;
    c.features = 16;
    SyntheticOptions so;
    std::vector<ImagePlane> hr;
    for (const auto& img : synthetic_corpus(2, so, 3)) hr.push_back(luma(img));
    TrainConfig tc;
    tc.epochs = 3;
    tc.batch_size = 4;
    tc.lr = 1e-3;
    tc.seed = 9;
    auto run = [&] {
        PairOptions po;
        po.seed = 9;
        auto m = PrnModel::init(c, 9);
        train(m, make_training_pairs(hr, po), tc);
        return serialize_checkpoint(m);
    };
    const auto a = run(), b = run();
    const PrnModel subject = trained ? *trained : deserialize_checkpoint(a);
    const auto bytes = serialize_checkpoint(subject);
    const PrnModel back = deserialize_checkpoint(bytes);
    const bool round_trip = back == subject && serialize_checkpoint(back) == bytes;
    return {a == b && round_trip, fmt("two runs %s (%zu bytes); round trip of the %s model %s", a == b ? "identical" : "DIFFER",
                                      a.size(), trained ? "trained" : "small", round_trip ? "bit-exact" : "NOT exact")};
}

// 9. threshold sweep
Outcome threshold_sweep(const std::optional<PrnModel>& trained) {
    const PrnModel model = trained ? *trained : PrnModel::init(ModelConfig{}, 1);
    SyntheticOptions so;
    so.flat_fraction = 0.3;
    const auto images = named(synthetic_corpus(kTestImages, so, 2), "test");
    const auto sweep = ablate_thresholds(model, images, 3);
    std::string macs;
    for (const auto& row : sweep.rows) macs += fmt("%s=%.2f ", row.label.c_str(), static_cast<double>(row.macs) / 1e9);
    return {sweep.rows.size() == 13 && sweep.macs_monotone_in_gamma_low(),
            fmt("%zu grid points, MACs non-increasing in gamma_low: %s; GMACs %s", sweep.rows.size(),
                sweep.macs_monotone_in_gamma_low() ? "yes" : "NO", macs.c_str())};
}

}  // namespace

int main(int argc, char** argv) {
    std::set<int> only;
    for (int i = 1; i < argc; ++i) only.insert(std::atoi(argv[i]));
    auto wanted = [&](int k) { return only.empty() || only.count(k) > 0; };

    std::optional<PrnModel> trained;
    const std::pair<int, std::function<Outcome()>> checks[] = {
        {1, kernel_oracles},
        {2, gradients},
        {3, bicubic_deconv},
        {4, routing},
        {5, classification},
        {6, [&] { return desk_training(trained); }},
        {7, efficiency},
        {8, [&] { return determinism(trained); }},
        {9, [&] { return threshold_sweep(trained); }},
    };
    int failed = 0;
    for (const auto& [k, check] : checks) {
        if (!wanted(k)) continue;
        Outcome o;
        try {
            o = check();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        std::printf("criterion %d %s: %s\n", k, o.pass ? "PASS" : "FAIL", o.detail.c_str());
        std::fflush(stdout);
        failed += !o.pass;
    }
    return failed == 0 ? 0 : 1;
}
