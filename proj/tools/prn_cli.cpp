#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "prn/prn.hpp"

namespace fs = std::filesystem;
using namespace prn;

namespace {

struct ModelFlags {
    std::size_t features = 64;
    std::size_t depth_l = 1;
    std::size_t depth_m = 2;
    std::size_t dilation = 2;
    bool rolling = true;
    std::vector<int> scales{3};
    double gamma_upper = 10.0;
    double gamma_low = 30.0;
    std::string prior_norm = "l1_mean";
    bool both_axes = false;

    void add(CLI::App* app) {
        app->add_option("--features", features, "feature maps per layer");
        app->add_option("--depth-l", depth_l, "conv layers in theta_l");
        app->add_option("--depth-m", depth_m, "conv layers in theta_m");
        app->add_option("--dilation", dilation, "dilation rate of the rolled banks");
        app->add_flag("--rolling,!--no-rolling", rolling, "swap in dilated early banks for mild/moderate patches");
        app->add_option("--scales", scales, "upscaling factors (2, 3, 4)")->delimiter(',');
        add_thresholds(app);
    }

    void add_thresholds(CLI::App* app) {
        app->add_option("--gamma-upper", gamma_upper, "mild cut: P <= gamma_upper is mild");
        app->add_option("--gamma-low", gamma_low, "severe cut: P > gamma_low is severe");
        app->add_option("--prior-norm", prior_norm, "l1_mean or l2_mean")
            ->check(CLI::IsMember({"l1_mean", "l2_mean"}));
        app->add_flag("--both-axes", both_axes, "add horizontal differences to the prior");
    }

    Thresholds thresholds() const { return {gamma_upper, gamma_low}; }

    PriorOptions prior() const {
        PriorOptions p;
        p.norm = prior_norm == "l2_mean" ? PriorNorm::L2Mean : PriorNorm::L1Mean;
        p.use_both_axes = both_axes;
        return p;
    }

    ModelConfig config() const {
        ModelConfig c;
        c.features = features;
        c.depth_l = depth_l;
        c.depth_m = depth_m;
        c.dilation_rate = dilation;
        c.rolling = rolling;
        c.scales = scales;
        c.thresholds = thresholds();
        c.prior = prior();
        c.validate();
        return c;
    }
};

struct TrainFlags {
    std::vector<std::string> data;
    std::size_t epochs = 300;
    std::size_t batch = 64;
    double lr = 1e-4;
    std::size_t decay_every = 300;
    double decay_factor = 10.0;
    std::uint64_t seed = 1;
    std::string optimizer = "adam";
    std::vector<double> tag_weights{1.0, 1.0, 1.0};
    bool clip = false;
    double clip_norm = 1.0;
    std::size_t stride = 0;

    void add(CLI::App* app) {
        app->add_option("--train-dir", data, "directory of HR training images (repeatable)")->required();
        app->add_option("--epochs", epochs);
        app->add_option("--batch", batch, "pairs per tag-homogeneous batch");
        app->add_option("--lr", lr, "initial learning rate");
        app->add_option("--decay-every", decay_every, "epochs between learning-rate decays");
        app->add_option("--decay-factor", decay_factor);
        app->add_option("--seed", seed, "initialization and shuffling seed");
        app->add_option("--optimizer", optimizer)->check(CLI::IsMember({"adam", "sgd"}));
        app->add_option("--tag-weights", tag_weights, "loss weight for mild,moderate,severe")
            ->delimiter(',')
            ->expected(3);
        app->add_flag("--clip", clip, "clip gradients by global norm");
        app->add_option("--clip-norm", clip_norm);
        app->add_option("--stride", stride, "HR crop step (0 = patch size)");
    }

    TrainConfig config() const {
        TrainConfig c;
        c.epochs = epochs;
        c.batch_size = batch;
        c.lr = lr;
        c.lr_decay_every = decay_every;
        c.lr_decay_factor = decay_factor;
        c.seed = seed;
        c.optimizer = optimizer == "sgd" ? OptimizerKind::Sgd : OptimizerKind::Adam;
        for (std::size_t i = 0; i < 3; ++i) c.tag_weights[i] = tag_weights[i];
        c.clip_gradients = clip;
        c.clip_norm = clip_norm;
        c.validate();
        return c;
    }

    std::vector<ImagePlane> images() const {
        std::vector<ImagePlane> out;
        for (const auto& dir : data)
            for (auto& img : load_dataset(dir)) out.push_back(luma(img.image));
        return out;
    }

    PairOptions pairs(const ModelConfig& m) const {
        PairOptions p;
        p.scales = m.scales;
        p.thresholds = m.thresholds;
        p.prior = m.prior;
        p.stride = stride;
        p.seed = seed;
        return p;
    }
};

struct EvalFlags {
    std::string data;
    int scale = 3;
    std::size_t margin = 0;
    bool routing = true;
    std::string results = "results";

    void add(CLI::App* app) {
        app->add_option("--data", data, "directory of HR test images")->required();
        app->add_option("--scale", scale)->check(CLI::IsMember({2, 3, 4}));
        app->add_option("--margin", margin, "LR context pixels added around each patch");
        app->add_flag("--routing,!--no-routing", routing, "route by tag (off: every patch takes the severe path)");
        app->add_option("--results", results, "output directory");
    }

    SuperResolveOptions options() const {
        SuperResolveOptions o;
        o.margin = margin;
        o.routing = routing;
        return o;
    }
};

void write_text(const fs::path& path, const std::string& text) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    std::ofstream os(path, std::ios::binary);
    if (!os) throw IoError("cannot write " + path.string());
    os << text;
    std::cout << "wrote " << path.string() << '\n';
}

void print_epoch(const EpochRecord& r) {
    std::cout << "epoch " << r.epoch << " lr " << r.lr << " loss " << r.mean_loss << " (" << r.seconds << " s)\n";
}

PrnModel fit(const ModelFlags& mf, const TrainFlags& tf, const std::string& init, const std::string& loss_csv) {
    const TrainConfig tc = tf.config();
    PrnModel model = init.empty() ? PrnModel::init(mf.config(), tf.seed) : load_checkpoint(init);
    const auto pairs = make_training_pairs(tf.images(), tf.pairs(model.config));
    TagCounts tags;
    for (const auto& p : pairs) ++tags[p.tag];
    std::cout << pairs.size() << " pairs: " << tags[DifficultyTag::Mild] << " mild, " << tags[DifficultyTag::Moderate]
              << " moderate, " << tags[DifficultyTag::Severe] << " severe\n";
    const LossCurve curve = train(model, pairs, tc, [](const EpochRecord& r) {
        print_epoch(r);
        return true;
    });
    if (!loss_csv.empty()) write_text(loss_csv, curve.to_csv());
    return model;
}

Recipe make_recipe(const ModelFlags& mf, const TrainFlags& tf) {
    Recipe r;
    r.model = mf.config();
    r.train = tf.config();
    r.pairs = tf.pairs(r.model);
    r.init_seed = tf.seed;
    r.hr_images = tf.images();
    return r;
}

void write_eval(const EvalReport& rep, const fs::path& dir, const std::string& stem) {
    write_text(dir / (stem + ".csv"), rep.to_csv());
    write_text(dir / (stem + "_timing.csv"), rep.timing_csv());
    write_text(dir / (stem + ".md"), rep.to_markdown() + "\n" + timing_report(rep).to_markdown());
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Content-adaptive super-resolution: training, inference and evaluation"};
    app.set_config("--config", "", "INI/TOML file with option values (command-line flags take precedence)");
    app.require_subcommand(1);

    // train
    ModelFlags train_model;
    TrainFlags train_flags;
    std::string train_out = "prn.ckpt", train_init, train_curve;
    auto* train_cmd = app.add_subcommand("train", "train a model and write a checkpoint");
    train_model.add(train_cmd);
    train_flags.add(train_cmd);
    train_cmd->add_option("--out", train_out, "checkpoint path");
    train_cmd->add_option("--init", train_init, "continue from this checkpoint (its architecture wins)");
    train_cmd->add_option("--loss-csv", train_curve, "per-epoch loss curve");
    train_cmd->callback([&] { save_checkpoint(fit(train_model, train_flags, train_init, train_curve), train_out); });

    // eval
    EvalFlags eval_flags;
    std::string eval_ckpt;
    auto* eval_cmd = app.add_subcommand("eval", "PSNR/SSIM, MACs and timing against bicubic");
    eval_cmd->add_option("--checkpoint", eval_ckpt)->required();
    eval_flags.add(eval_cmd);
    eval_cmd->callback([&] {
        const auto rep = evaluate_dataset(load_checkpoint(eval_ckpt), eval_flags.data, eval_flags.scale,
                                          eval_flags.options());
        write_eval(rep, eval_flags.results, "eval_x" + std::to_string(eval_flags.scale));
        std::cout << "mean PSNR " << rep.mean_psnr() << " dB, bicubic " << rep.mean_bicubic_psnr() << " dB\n";
    });

    // ablate-thresholds
    EvalFlags thr_flags;
    std::string thr_ckpt;
    std::vector<double> thr_upper = default_upper_grid(), thr_low = default_low_grid();
    auto* thr_cmd = app.add_subcommand("ablate-thresholds", "sweep (gamma_upper, gamma_low) on a fixed model");
    thr_cmd->add_option("--checkpoint", thr_ckpt)->required();
    thr_flags.add(thr_cmd);
    thr_cmd->add_option("--upper-grid", thr_upper)->delimiter(',');
    thr_cmd->add_option("--low-grid", thr_low)->delimiter(',');
    thr_cmd->callback([&] {
        const auto images = load_dataset(thr_flags.data);
        const auto sweep =
            ablate_thresholds(load_checkpoint(thr_ckpt), images, thr_flags.scale, thr_upper, thr_low, thr_flags.options());
        const fs::path dir = thr_flags.results;
        write_text(dir / "thresholds.csv", sweep.to_csv());
        write_text(dir / "thresholds_timing.csv", sweep.timing_csv());
        std::cout << "MACs monotone in gamma_low: " << (sweep.macs_monotone_in_gamma_low() ? "yes" : "no") << '\n';
    });

    // ablate-rolling
    ModelFlags roll_model;
    TrainFlags roll_train;
    EvalFlags roll_eval;
    auto* roll_cmd = app.add_subcommand("ablate-rolling", "train and evaluate with rolling off and on");
    roll_model.add(roll_cmd);
    roll_train.add(roll_cmd);
    roll_eval.add(roll_cmd);
    roll_cmd->callback([&] {
        const auto rep = ablate_rolling(make_recipe(roll_model, roll_train), load_dataset(roll_eval.data),
                                        roll_eval.scale, roll_eval.options());
        const fs::path dir = roll_eval.results;
        write_text(dir / "rolling.csv", rep.to_csv());
        write_text(dir / "rolling.md", rep.to_markdown());
    });

    // ablate-depth
    ModelFlags depth_model;
    TrainFlags depth_train;
    EvalFlags depth_eval;
    std::vector<std::size_t> l_depths{1, 2, 3}, m_depths{1, 2, 3};
    auto* depth_cmd = app.add_subcommand("ablate-depth", "train and evaluate theta_l / theta_m depth variants");
    depth_model.add(depth_cmd);
    depth_train.add(depth_cmd);
    depth_eval.add(depth_cmd);
    depth_cmd->add_option("--l-depths", l_depths)->delimiter(',');
    depth_cmd->add_option("--m-depths", m_depths)->delimiter(',');
    depth_cmd->callback([&] {
        const auto rep = ablate_stage_depth(make_recipe(depth_model, depth_train), load_dataset(depth_eval.data),
                                            depth_eval.scale, l_depths, m_depths, depth_eval.options());
        const fs::path dir = depth_eval.results;
        write_text(dir / "depth.csv", rep.to_csv());
        write_text(dir / "depth.md", rep.to_markdown());
    });

    // gain-analysis
    EvalFlags gain_flags;
    std::string gain_ckpt;
    double gain_threshold = 1.0;
    auto* gain_cmd = app.add_subcommand("gain-analysis", "per-patch PSNR gain over bicubic against the prior");
    gain_cmd->add_option("--checkpoint", gain_ckpt)->required();
    gain_flags.add(gain_cmd);
    gain_cmd->add_option("--threshold", gain_threshold, "gain in dB that counts as success");
    gain_cmd->callback([&] {
        const auto model = load_checkpoint(gain_ckpt);
        const auto rep = gain_analysis(model_sr(model, gain_flags.options()), load_dataset(gain_flags.data),
                                       gain_flags.scale, gain_threshold, model.config.prior);
        const fs::path dir = gain_flags.results;
        write_text(dir / "gain.csv", rep.to_csv());
        for (bool success : {true, false})
            if (rep.count(success) > 0)
                write_text(dir / (success ? "gain_success_hist.csv" : "gain_failure_hist.csv"),
                           prior_histogram(rep.priors(success)).to_csv());
        std::cout << rep.count(true) << " success patches (mean prior " << rep.mean_prior(true) << "), "
                  << rep.count(false) << " failure patches (mean prior " << rep.mean_prior(false) << ")\n";
    });

    // classify-stats
    ModelFlags cls_model;
    std::string cls_data, cls_results = "results";
    int cls_scale = 3;
    bool cls_lr_input = false;
    double cls_bin = 5.0;
    auto* cls_cmd = app.add_subcommand("classify-stats", "per-image tag counts and the prior histogram");
    cls_cmd->add_option("--data", cls_data, "image directory")->required();
    cls_cmd->add_option("--scale", cls_scale)->check(CLI::IsMember({2, 3, 4}));
    cls_cmd->add_flag("--lr-input", cls_lr_input, "images are already low resolution");
    cls_cmd->add_option("--bin-width", cls_bin);
    cls_cmd->add_option("--results", cls_results);
    cls_model.add_thresholds(cls_cmd);
    cls_cmd->callback([&] {
        const Thresholds t = cls_model.thresholds();
        t.validate();
        const PriorOptions po = cls_model.prior();
        std::ostringstream counts;
        counts << "image,mild,moderate,severe\n";
        std::vector<double> all;
        for (const auto& img : load_dataset(cls_data)) {
            ImagePlane y = luma(img.image);
            if (!cls_lr_input) {
                y = modcrop(y, static_cast<std::size_t>(cls_scale));
                y = bicubic_resize(y, y.width / cls_scale, y.height / cls_scale);
            }
            std::vector<double> priors;
            for (const auto& p : crop_patches(y, lr_patch_size(cls_scale)).second) priors.push_back(gradient_prior(p, po));
            const TagCounts c = count_tags(priors, t);
            counts << img.name << ',' << c[DifficultyTag::Mild] << ',' << c[DifficultyTag::Moderate] << ','
                   << c[DifficultyTag::Severe] << '\n';
            all.insert(all.end(), priors.begin(), priors.end());
        }
        const fs::path dir = cls_results;
        write_text(dir / "tag_counts.csv", counts.str());
        write_text(dir / "prior_hist.csv", prior_histogram(all, cls_bin).to_csv());
    });

    // upscale
    std::string up_ckpt, up_in, up_out;
    int up_scale = 3;
    SuperResolveOptions up_opt;
    auto* up_cmd = app.add_subcommand("upscale", "super-resolve one image");
    up_cmd->add_option("--checkpoint", up_ckpt)->required();
    up_cmd->add_option("input", up_in)->required();
    up_cmd->add_option("output", up_out)->required();
    up_cmd->add_option("--scale", up_scale)->check(CLI::IsMember({2, 3, 4}));
    up_cmd->add_option("--margin", up_opt.margin);
    up_cmd->add_flag("--routing,!--no-routing", up_opt.routing);
    up_cmd->callback([&] {
        const auto res = super_resolve_image(load_image(up_in), load_checkpoint(up_ckpt), up_scale, up_opt);
        save_image(res.image, up_out);
        const TagCounts c = res.tag_counts();
        std::cout << c[DifficultyTag::Mild] << " mild, " << c[DifficultyTag::Moderate] << " moderate, "
                  << c[DifficultyTag::Severe] << " severe patches, " << res.total_macs() << " MACs\n";
    });

    // synth
    SyntheticOptions syn;
    std::size_t syn_count = 20;
    std::uint64_t syn_seed = 1;
    std::string syn_out;
    auto* syn_cmd = app.add_subcommand("synth", "write a procedural image corpus as PNG");
    syn_cmd->add_option("--out", syn_out)->required();
    syn_cmd->add_option("--count", syn_count);
    syn_cmd->add_option("--seed", syn_seed);
    syn_cmd->add_option("--width", syn.width);
    syn_cmd->add_option("--height", syn.height);
    syn_cmd->add_option("--flat-fraction", syn.flat_fraction)->check(CLI::Range(0.0, 1.0));
    syn_cmd->callback([&] {
        fs::create_directories(syn_out);
        const auto images = synthetic_corpus(syn_count, syn, syn_seed);
        for (std::size_t i = 0; i < images.size(); ++i) {
            char name[32];
            std::snprintf(name, sizeof name, "synth_%03zu.png", i);
            save_image(images[i], fs::path(syn_out) / name);
        }
        std::cout << "wrote " << images.size() << " images to " << syn_out << '\n';
    });

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
