#include <gtest/gtest.h>

#include <random>

#include "oracles.hpp"
#include "route_fd.hpp"
#include "prn/checkpoint.hpp"
#include "prn/training.hpp"

using namespace prn;

namespace {

ImagePlane noise_image(std::size_t w, std::size_t h, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<float> d(0.0f, 1.0f);
    ImagePlane p(w, h);
    for (auto& v : p.data) v = d(rng);
    return p;
}

ImagePlane smooth_image(std::size_t w, std::size_t h) {
    ImagePlane p(w, h);
    for (std::size_t r = 0; r < h; ++r)
        for (std::size_t c = 0; c < w; ++c)
            p.at(r, c) = 0.5f + 0.3f * std::sin(0.05f * static_cast<float>(c)) * std::cos(0.04f * static_cast<float>(r));
    return p;
}

ModelConfig small_config() {
    ModelConfig c;
    c.features = 8;
    return c;
}

// every parameter of the listed stages, flattened
std::vector<float> snapshot(const PrnModel& m, std::initializer_list<Stage> stages) {
    std::vector<float> out;
    for (Stage s : stages) {
        if (s == Stage::Upsample) {
            for (const auto& [k, l] : m.stages.theta_up) {
                out.insert(out.end(), l.weights.data().begin(), l.weights.data().end());
                out.insert(out.end(), l.bias.begin(), l.bias.end());
            }
            continue;
        }
        for (const auto& l : m.stages.convs(s)) {
            out.insert(out.end(), l.weights.data().begin(), l.weights.data().end());
            out.insert(out.end(), l.bias.begin(), l.bias.end());
        }
    }
    return out;
}

std::vector<TrainingPair> tagged_pairs(DifficultyTag want, std::size_t n) {
    PairOptions o;
    const ImagePlane img = want == DifficultyTag::Mild ? ImagePlane(108, 108, 0.4f) : noise_image(108, 108, 3);
    auto pairs = make_training_pairs({img}, o);
    for (const auto& p : pairs) EXPECT_EQ(p.tag, want);
    pairs.resize(std::min(n, pairs.size()));
    return pairs;
}

}  // namespace

TEST(TrainingPairs, GridArithmetic) {
    PairOptions o;
    const auto pairs = make_training_pairs({smooth_image(108, 108)}, o);
    ASSERT_EQ(pairs.size(), 4u);
    for (const auto& p : pairs) {
        EXPECT_EQ(p.lr.shape(), (Shape{1, 1, 18, 18}));
        EXPECT_EQ(p.hr.shape(), (Shape{1, 1, 54, 54}));
        EXPECT_EQ(p.tag, classify(gradient_prior(p.lr), o.thresholds));
    }
    o.scales = {4};
    const auto x4 = make_training_pairs({smooth_image(112, 112)}, o);
    ASSERT_EQ(x4.size(), 4u);
    EXPECT_EQ(x4[0].lr.shape(), (Shape{1, 1, 14, 14}));
    EXPECT_EQ(x4[0].hr.shape(), (Shape{1, 1, 56, 56}));
}

TEST(TrainingPairs, ConstantImageIsMild) {
    for (const auto& p : make_training_pairs({ImagePlane(120, 60, 0.7f)}, PairOptions{}))
        EXPECT_EQ(p.tag, DifficultyTag::Mild);
}

TEST(TrainingPairs, TwoScalesDoubleTheCount) {
    PairOptions o;
    const auto one = make_training_pairs({smooth_image(112, 112)}, o);
    o.scales = {2, 3};
    EXPECT_EQ(make_training_pairs({smooth_image(112, 112)}, o).size(), 2 * one.size());
}

TEST(TrainingPairs, StrideAddsOverlappingCrops) {
    PairOptions o;
    o.stride = 27;
    EXPECT_EQ(make_training_pairs({smooth_image(108, 108)}, o).size(), 9u);
}

TEST(TrainingPairs, ShuffleFollowsSeed) {
    PairOptions o;
    const std::vector<ImagePlane> imgs{noise_image(216, 216, 1)};
    const auto a = make_training_pairs(imgs, o), b = make_training_pairs(imgs, o);
    o.seed = 2;
    const auto c = make_training_pairs(imgs, o);
    bool same_ab = true, same_ac = true;
    for (std::size_t i = 0; i < a.size(); ++i) {
        same_ab &= a[i].lr == b[i].lr;
        same_ac &= a[i].lr == c[i].lr;
    }
    EXPECT_TRUE(same_ab);
    EXPECT_FALSE(same_ac);
}

TEST(TrainingPairs, Errors) {
    EXPECT_THROW(make_training_pairs({}, PairOptions{}), ArgumentError);
    EXPECT_THROW(make_training_pairs({ImagePlane(40, 80)}, PairOptions{}), DimensionError);
}

TEST(L2Loss, TrivialCases) {
    const Tensor<float> a(Shape{1, 1, 4, 5}, 0.3f);
    auto [zero, g0] = l2_loss(a, a);
    EXPECT_EQ(zero, 0.0);
    for (float v : g0.data()) EXPECT_EQ(v, 0.0f);
    const Tensor<float> b(Shape{1, 1, 4, 5}, 1.3f);
    auto [one, g1] = l2_loss(b, a);
    EXPECT_NEAR(one, 1.0, 1e-6);
    for (float v : g1.data()) EXPECT_NEAR(v, 2.0f / 20.0f, 1e-6);
    EXPECT_THROW(l2_loss(a, Tensor<float>(Shape{1, 1, 5, 4})), DimensionError);
}

TEST(L2Loss, FiniteDifference) {
    std::mt19937_64 rng(4);
    auto pred = oracle::random_tensor<double>(Shape{2, 1, 3, 3}, rng);
    const auto target = oracle::random_tensor<double>(Shape{2, 1, 3, 3}, rng);
    const auto grad = l2_loss(pred, target).second;
    for (std::size_t i = 0; i < pred.size(); ++i) {
        const double fd = oracle::central_difference<double>([&] { return l2_loss(pred, target).first; }, pred[i], 1e-3);
        EXPECT_LE(oracle::rel_error(grad[i], fd), 1e-6);
    }
}

TEST(RouteGradients, MatchFiniteDifferencesOnEveryLayer) {
    auto m = model_cast<double>(PrnModel::init(small_config(), 5));
    std::mt19937_64 rng(6);
    const auto lr = oracle::random_tensor<double>(Shape{2, 1, 5, 5}, rng, 0.0, 1.0);
    const auto hr = oracle::random_tensor<double>(Shape{2, 1, 15, 15}, rng, 0.0, 1.0);
    for (DifficultyTag tag : kAllTags) {
        const auto grads = route_loss_and_grads(m, lr, hr, tag, 3).second;
        ASSERT_EQ(grads.size(), tag == DifficultyTag::Mild ? 2u : tag == DifficultyTag::Moderate ? 4u : 7u);
        for (const auto& g : grads) {
            auto& layer = layer_at(m, g.key);
            std::size_t checked = 0;
            for (std::size_t k = 0; checked < 5 && k < 50; ++k) {
                const std::size_t i = (k * 7919 + 13) % layer.weights.size();
                const auto fd = fdcheck::central_difference(m, lr, hr, tag, 3, layer.weights[i], 1e-3);
                if (fd.kink) continue;
                ++checked;
                EXPECT_LE(oracle::rel_error(g.weights[i], fd.value, 1e-6), 1e-3) << to_string(g.key.stage) << " w" << i;
            }
            EXPECT_EQ(checked, 5u);
            for (std::size_t b = 0; b < layer.bias.size(); ++b) {
                const auto fd = fdcheck::central_difference(m, lr, hr, tag, 3, layer.bias[b], 1e-3);
                if (fd.kink) continue;
                EXPECT_LE(oracle::rel_error(g.bias[b], fd.value, 1e-6), 1e-3) << to_string(g.key.stage) << " b" << b;
                break;
            }
        }
    }
}

TEST(RouteGradients, KinkDetectorFlagsBranchFlips) {
    auto m = model_cast<double>(PrnModel::init(small_config(), 5));
    Tensor<double> lr(Shape{1, 1, 3, 3}, 0.0), hr(Shape{1, 1, 9, 9}, 0.0);
    // a zero input with zero bias puts every pre-activation of channel 0 exactly on the kink
    m.stages.theta_l_d[0].bias[0] = 0.0;
    EXPECT_TRUE(fdcheck::central_difference(m, lr, hr, DifficultyTag::Mild, 3, m.stages.theta_l_d[0].bias[0], 1e-3).kink);
    m.stages.theta_l_d[0].bias[0] = 0.5;
    EXPECT_FALSE(fdcheck::central_difference(m, lr, hr, DifficultyTag::Mild, 3, m.stages.theta_l_d[0].bias[0], 1e-3).kink);
}

TEST(TrainStep, MildBatchOnlyTouchesItsRoute) {
    auto m = PrnModel::init(small_config(), 2);
    const auto pairs = tagged_pairs(DifficultyTag::Mild, 4);
    const auto fixed = snapshot(m, {Stage::Early, Stage::Middle, Stage::Late, Stage::MiddleDilated});
    const auto route = snapshot(m, {Stage::EarlyDilated, Stage::Upsample});
    OptimizerState st;
    TrainConfig cfg;
    cfg.lr = 1e-3;
    train_step(m, pairs, cfg, st, cfg.lr);
    EXPECT_EQ(snapshot(m, {Stage::Early, Stage::Middle, Stage::Late, Stage::MiddleDilated}), fixed);
    EXPECT_NE(snapshot(m, {Stage::EarlyDilated, Stage::Upsample}), route);
}

TEST(TrainStep, SevereBatchLeavesDilatedBanks) {
    auto m = PrnModel::init(small_config(), 2);
    const auto pairs = tagged_pairs(DifficultyTag::Severe, 2);
    const auto fixed = snapshot(m, {Stage::EarlyDilated, Stage::MiddleDilated});
    const auto before = snapshot(m, {Stage::Early, Stage::Middle, Stage::Late, Stage::Upsample});
    OptimizerState st;
    TrainConfig cfg;
    train_step(m, pairs, cfg, st, 1e-3);
    EXPECT_EQ(snapshot(m, {Stage::EarlyDilated, Stage::MiddleDilated}), fixed);
    const auto after = snapshot(m, {Stage::Early, Stage::Middle, Stage::Late, Stage::Upsample});
    std::size_t changed = 0;
    for (std::size_t i = 0; i < after.size(); ++i) changed += after[i] != before[i];
    EXPECT_GT(changed, after.size() / 2);
}

TEST(TrainStep, MixedBatchRejected) {
    auto m = PrnModel::init(small_config(), 2);
    auto pairs = tagged_pairs(DifficultyTag::Mild, 2);
    pairs[1].tag = DifficultyTag::Severe;
    OptimizerState st;
    EXPECT_THROW(train_step(m, pairs, TrainConfig{}, st, 1e-3), ArgumentError);
}

TEST(TrainStep, SgdStepReducesLossOnThatPair) {
    auto m = PrnModel::init(small_config(), 9);
    PairOptions o;
    const auto pairs = make_training_pairs({smooth_image(54, 54)}, o);
    ASSERT_EQ(pairs.size(), 1u);
    TrainConfig cfg;
    cfg.optimizer = OptimizerKind::Sgd;
    OptimizerState st;
    const double before = train_step(m, pairs, cfg, st, 1e-2);
    const double after = l2_loss(forward_route(m, pairs[0].lr, pairs[0].tag, 3), pairs[0].hr).first;
    EXPECT_LT(after, before);
}

TEST(TrainStep, ClippingBoundsTheUpdate) {
    auto a = PrnModel::init(small_config(), 9), b = a;
    const auto pairs = tagged_pairs(DifficultyTag::Severe, 2);
    TrainConfig cfg;
    cfg.optimizer = OptimizerKind::Sgd;
    cfg.clip_gradients = true;
    cfg.clip_norm = 1e-6;
    OptimizerState sa, sb;
    train_step(a, pairs, cfg, sa, 1.0);
    const auto before = snapshot(b, {Stage::Early, Stage::Middle, Stage::Late, Stage::Upsample});
    const auto after = snapshot(a, {Stage::Early, Stage::Middle, Stage::Late, Stage::Upsample});
    double sq = 0.0;
    for (std::size_t i = 0; i < after.size(); ++i) sq += (after[i] - before[i]) * double(after[i] - before[i]);
    EXPECT_LE(std::sqrt(sq), 1.01e-6);
    EXPECT_GT(std::sqrt(sq), 0.5e-6);
}

TEST(Train, LearningRateSchedule) {
    TrainConfig cfg;
    EXPECT_DOUBLE_EQ(cfg.lr_at(0), 1e-4);
    EXPECT_DOUBLE_EQ(cfg.lr_at(299), 1e-4);
    EXPECT_DOUBLE_EQ(cfg.lr_at(300), 1e-5);
    EXPECT_DOUBLE_EQ(cfg.lr_at(650), 1e-6);
    EXPECT_EQ(cfg.batch_size, 64u);
    EXPECT_EQ(cfg.optimizer, OptimizerKind::Adam);
    cfg.batch_size = 0;
    EXPECT_THROW(cfg.validate(), ArgumentError);
}

TEST(Train, ZeroEpochsLeaveModelUnchanged) {
    const auto init = PrnModel::init(small_config(), 1);
    auto m = init;
    TrainConfig cfg;
    cfg.epochs = 0;
    EXPECT_TRUE(train(m, tagged_pairs(DifficultyTag::Severe, 4), cfg).epochs.empty());
    EXPECT_EQ(m, init);
}

TEST(Train, SameSeedSameCheckpoint) {
    PairOptions o;
    o.stride = 27;
    const auto pairs = make_training_pairs({smooth_image(108, 108), noise_image(108, 108, 4)}, o);
    TrainConfig cfg;
    cfg.epochs = 3;
    cfg.batch_size = 4;
    cfg.lr = 1e-3;
    auto a = PrnModel::init(small_config(), 1), b = a;
    const auto ca = train(a, pairs, cfg), cb = train(b, pairs, cfg);
    EXPECT_EQ(serialize_checkpoint(a), serialize_checkpoint(b));
    EXPECT_NE(a, PrnModel::init(small_config(), 1));
    ASSERT_EQ(ca.epochs.size(), 3u);
    EXPECT_EQ(ca.epochs[2].mean_loss, cb.epochs[2].mean_loss);
    EXPECT_EQ(ca.to_csv().rfind("epoch,lr,loss,mild_loss,moderate_loss,severe_loss,seconds\n", 0), 0u);
}

TEST(Train, SevereLossFallsOnToyRun) {
    PairOptions o;
    o.stride = 18;
    std::vector<ImagePlane> imgs;
    for (std::uint64_t i = 0; i < 2; ++i) imgs.push_back(noise_image(72, 72, 10 + i));
    const auto pairs = make_training_pairs(imgs, o);
    TrainConfig cfg;
    cfg.epochs = 30;
    cfg.batch_size = 8;
    cfg.lr = 1e-3;
    auto m = PrnModel::init(small_config(), 3);
    const auto curve = train(m, pairs, cfg);
    const double first = curve.epochs.front().tag_loss[2], last = curve.epochs.back().tag_loss[2];
    EXPECT_LT(last, 0.5 * first) << first << " -> " << last;
}
