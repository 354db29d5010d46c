#pragma once

#include <iomanip>
#include <sstream>
#include <string>
#include <vector>

#include "prn/eval.hpp"
#include "prn/training.hpp"

namespace prn {

/// Everything needed to train a model from scratch.
struct Recipe {
    ModelConfig model;
    TrainConfig train;
    PairOptions pairs;
    std::uint64_t init_seed = 1;
    std::vector<ImagePlane> hr_images;  // luma training images
};

struct TrainedModel {
    PrnModel model;
    LossCurve curve;
};

inline TrainedModel train_recipe(const Recipe& r) {
    PairOptions po = r.pairs;
    po.scales = r.model.scales;
    po.thresholds = r.model.thresholds;
    po.prior = r.model.prior;
    const auto pairs = make_training_pairs(r.hr_images, po);
    TrainedModel out{PrnModel::init(r.model, r.init_seed), {}};
    out.curve = train(out.model, pairs, r.train);
    return out;
}

struct ThresholdRow {
    std::string label;
    Thresholds thresholds;
    double psnr = 0.0;
    double ssim = 0.0;
    std::uint64_t macs = 0;
    double seconds = 0.0;
    TagCounts tags;
    bool is_default = false;
};

struct ThresholdSweep {
    std::vector<ThresholdRow> rows;

    std::string to_csv() const {
        std::ostringstream os;
        os << std::setprecision(10);
        os << "label,gamma_upper,gamma_low,psnr,ssim,macs,mild,moderate,severe,default\n";
        for (const auto& r : rows)
            os << r.label << ',' << r.thresholds.gamma_upper << ',' << r.thresholds.gamma_low << ',' << r.psnr << ','
               << r.ssim << ',' << r.macs << ',' << r.tags[DifficultyTag::Mild] << ','
               << r.tags[DifficultyTag::Moderate] << ',' << r.tags[DifficultyTag::Severe] << ','
               << (r.is_default ? 1 : 0) << '\n';
        return os.str();
    }

    std::string timing_csv() const {
        std::ostringstream os;
        os << std::setprecision(6) << "label,seconds\n";
        for (const auto& r : rows) os << r.label << ',' << r.seconds << '\n';
        return os.str();
    }

    /// For every fixed gamma_upper, MACs never increase as gamma_low grows.
    bool macs_monotone_in_gamma_low() const {
        for (const auto& a : rows)
            for (const auto& b : rows)
                if (a.thresholds.gamma_upper == b.thresholds.gamma_upper &&
                    a.thresholds.gamma_low < b.thresholds.gamma_low && b.macs > a.macs)
                    return false;
        return true;
    }
};

/// The threshold grid of the gradient-threshold ablation: gamma_upper (mild cut)
/// from {10,20,50,70}, gamma_low (severe cut) from {30,50,80,100}.
inline std::vector<double> default_upper_grid() { return {10, 20, 50, 70}; }
inline std::vector<double> default_low_grid() { return {30, 50, 80, 100}; }

/// Evaluates a fixed model under every valid (gamma_upper <= gamma_low) pair of
/// the grid. Rows are labelled U<i>L<j> by 1-based grid index; the model's own
/// thresholds are flagged as the default.
inline ThresholdSweep ablate_thresholds(const PrnModel& model, const std::vector<NamedImage>& images, int scale,
                                        const std::vector<double>& upper = default_upper_grid(),
                                        const std::vector<double>& low = default_low_grid(),
                                        const SuperResolveOptions& opt = {}) {
    if (upper.empty() || low.empty()) throw ArgumentError("threshold grid must not be empty");
    ThresholdSweep sweep;
    for (std::size_t i = 0; i < upper.size(); ++i)
        for (std::size_t j = 0; j < low.size(); ++j) {
            const Thresholds t{upper[i], low[j]};
            if (t.gamma_upper > t.gamma_low) continue;
            t.validate();
            PrnModel m = model;
            m.config.thresholds = t;
            const EvalReport rep = evaluate_images(m, images, scale, opt);
            ThresholdRow row;
            row.label = "U" + std::to_string(i + 1) + "L" + std::to_string(j + 1);
            row.thresholds = t;
            row.psnr = rep.mean_psnr();
            row.ssim = rep.mean_ssim();
            row.macs = rep.total_macs();
            row.seconds = rep.mean_seconds();
            row.tags = rep.total_tags();
            row.is_default = t == model.config.thresholds;
            sweep.rows.push_back(row);
        }
    if (sweep.rows.empty()) throw ArgumentError("threshold grid has no pair with gamma_upper <= gamma_low");
    return sweep;
}

struct VariantRow {
    std::string label;
    ModelConfig config;
    double psnr = 0.0;
    double ssim = 0.0;
    double bicubic_psnr = 0.0;
    std::uint64_t macs = 0;
    double seconds = 0.0;
    double final_loss = 0.0;
    /// Published value for the same setting, kept for trend comparison only.
    double reference_psnr = 0.0;
    double reference_seconds = 0.0;
};

struct VariantReport {
    std::string title;
    std::string note;
    std::vector<VariantRow> rows;

    std::string to_csv() const {
        std::ostringstream os;
        os << std::setprecision(10);
        os << "# " << title << '\n';
        if (!note.empty()) os << "# " << note << '\n';
        os << "label,depth_l,depth_m,rolling,psnr,ssim,bicubic_psnr,macs,final_loss,reference_psnr,reference_seconds\n";
        for (const auto& r : rows)
            os << r.label << ',' << r.config.depth_l << ',' << r.config.depth_m << ',' << r.config.rolling << ','
               << r.psnr << ',' << r.ssim << ',' << r.bicubic_psnr << ',' << r.macs << ',' << r.final_loss << ','
               << r.reference_psnr << ',' << r.reference_seconds << '\n';
        return os.str();
    }

    std::string to_markdown() const {
        std::ostringstream os;
        os << std::fixed;
        os << "### " << title << "\n\n";
        if (!note.empty()) os << note << "\n\n";
        os << "| variant | PSNR | SSIM | bicubic | GMACs | s/image | reference PSNR | reference time |\n";
        os << "|---|---|---|---|---|---|---|---|\n";
        for (const auto& r : rows)
            os << "| " << r.label << " | " << std::setprecision(2) << r.psnr << " | " << std::setprecision(4) << r.ssim
               << " | " << std::setprecision(2) << r.bicubic_psnr << " | " << std::setprecision(3) << r.macs / 1e9
               << " | " << std::setprecision(3) << r.seconds << " | " << std::setprecision(2) << r.reference_psnr
               << " | " << r.reference_seconds << " |\n";
        return os.str();
    }
};

namespace detail {

inline VariantRow run_variant(const std::string& label, const Recipe& recipe, const std::vector<NamedImage>& images,
                              int scale, const SuperResolveOptions& opt) {
    const TrainedModel tm = train_recipe(recipe);
    const EvalReport rep = evaluate_images(tm.model, images, scale, opt);
    VariantRow row;
    row.label = label;
    row.config = recipe.model;
    row.psnr = rep.mean_psnr();
    row.ssim = rep.mean_ssim();
    row.bicubic_psnr = rep.mean_bicubic_psnr();
    row.macs = rep.total_macs();
    row.seconds = rep.mean_seconds();
    row.final_loss = tm.curve.epochs.empty() ? 0.0 : tm.curve.epochs.back().mean_loss;
    return row;
}

}  // namespace detail

/// Trains and evaluates the recipe with rolling off and on.
inline VariantReport ablate_rolling(const Recipe& recipe, const std::vector<NamedImage>& images, int scale,
                                    const SuperResolveOptions& opt = {}) {
    VariantReport rep;
    rep.title = "rolling strategy";
    rep.note = "reference PSNR: BSDS100 x3 full-scale training (27.03 without, 27.12 with); "
               "not reproducible at desk scale";
    for (bool rolling : {false, true}) {
        Recipe r = recipe;
        r.model.rolling = rolling;
        VariantRow row = detail::run_variant(rolling ? "rolling" : "no rolling", r, images, scale, opt);
        row.reference_psnr = rolling ? 27.12 : 27.03;
        rep.rows.push_back(row);
    }
    return rep;
}

/// Varies depth_l over `l_depths` (with depth_m fixed at the recipe value) and
/// depth_m over `m_depths` (with depth_l fixed).
inline VariantReport ablate_stage_depth(const Recipe& recipe, const std::vector<NamedImage>& images, int scale,
                                        const std::vector<std::size_t>& l_depths = {1, 2, 3},
                                        const std::vector<std::size_t>& m_depths = {1, 2, 3},
                                        const SuperResolveOptions& opt = {}) {
    struct Ref {
        double psnr, seconds;
    };
    // BSDS100 x3, full-scale training
    const Ref l_ref[] = {{27.12, 1.81}, {27.13, 1.91}, {27.15, 2.21}};
    const Ref m_ref[] = {{27.05, 1.48}, {27.12, 1.81}, {27.15, 1.99}};
    VariantReport rep;
    rep.title = "stage depth";
    rep.note = "reference columns: published BSDS100 x3 values; trend comparison only";
    for (std::size_t d : l_depths) {
        if (d == 0) throw ArgumentError("stage depth must be >= 1");
        Recipe r = recipe;
        r.model.depth_l = d;
        VariantRow row = detail::run_variant("theta_l x" + std::to_string(d), r, images, scale, opt);
        if (d >= 1 && d <= 3 && recipe.model.depth_m == 2) {
            row.reference_psnr = l_ref[d - 1].psnr;
            row.reference_seconds = l_ref[d - 1].seconds;
        }
        rep.rows.push_back(row);
    }
    for (std::size_t d : m_depths) {
        if (d == 0) throw ArgumentError("stage depth must be >= 1");
        Recipe r = recipe;
        r.model.depth_m = d;
        VariantRow row = detail::run_variant("theta_m x" + std::to_string(d), r, images, scale, opt);
        if (d >= 1 && d <= 3 && recipe.model.depth_l == 1) {
            row.reference_psnr = m_ref[d - 1].psnr;
            row.reference_seconds = m_ref[d - 1].seconds;
        }
        rep.rows.push_back(row);
    }
    return rep;
}

}  // namespace prn
