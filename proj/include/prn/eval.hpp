#pragma once

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <iomanip>
#include <sstream>
#include <string>
#include <vector>

#include "prn/image_io.hpp"
#include "prn/inference.hpp"
#include "prn/metrics.hpp"
#include "prn/patches.hpp"
#include "prn/resize.hpp"

namespace prn {

struct NamedImage {
    std::string name;
    ColorImage image;
};

inline std::vector<NamedImage> load_dataset(const std::filesystem::path& dir) {
    const auto files = list_images(dir);
    if (files.empty()) throw IoError(dir.string() + " contains no PNG/PGM/PPM images");
    std::vector<NamedImage> out;
    for (const auto& f : files) out.push_back({f.filename().string(), load_image(f)});
    return out;
}

/// HR image cropped to a multiple of the scale, and its bicubic LR version.
struct SrCase {
    ColorImage hr;
    ColorImage lr;
};

inline SrCase make_case(const ColorImage& hr_in, int scale) {
    check_scale(scale);
    const auto s = static_cast<std::size_t>(scale);
    SrCase c;
    c.hr = ColorImage(hr_in.width / s * s, hr_in.height / s * s, hr_in.space);
    if (c.hr.width == 0 || c.hr.height == 0) throw DimensionError("image smaller than the scale factor");
    for (std::size_t k = 0; k < 3; ++k) c.hr.planes[k] = modcrop(hr_in.planes[k], s);
    c.lr = resize_color(c.hr, c.hr.width / s, c.hr.height / s);
    return c;
}

struct ImageRow {
    std::string name;
    std::size_t width = 0;  // HR size after modcrop
    std::size_t height = 0;
    double psnr = 0.0;
    double ssim = 0.0;
    double bicubic_psnr = 0.0;
    double bicubic_ssim = 0.0;
    TagCounts tags;
    std::uint64_t macs = 0;
    double seconds = 0.0;
    double reassembly_seconds = 0.0;
};

struct EvalReport {
    int scale = 3;
    Thresholds thresholds;
    bool rolling = true;
    std::size_t margin = 0;
    std::vector<ImageRow> rows;
    std::vector<std::vector<RouteTrace>> traces;  // per image

    double mean(double ImageRow::*field) const {
        if (rows.empty()) return 0.0;
        double s = 0.0;
        for (const auto& r : rows) s += r.*field;
        return s / static_cast<double>(rows.size());
    }
    double mean_psnr() const { return mean(&ImageRow::psnr); }
    double mean_ssim() const { return mean(&ImageRow::ssim); }
    double mean_bicubic_psnr() const { return mean(&ImageRow::bicubic_psnr); }
    double mean_bicubic_ssim() const { return mean(&ImageRow::bicubic_ssim); }
    double mean_seconds() const { return mean(&ImageRow::seconds); }
    std::uint64_t total_macs() const {
        std::uint64_t n = 0;
        for (const auto& r : rows) n += r.macs;
        return n;
    }
    double mean_macs() const { return rows.empty() ? 0.0 : static_cast<double>(total_macs()) / rows.size(); }
    TagCounts total_tags() const {
        TagCounts t;
        for (const auto& r : rows)
            for (DifficultyTag g : kAllTags) t[g] += r.tags[g];
        return t;
    }

    /// Quality and MAC columns only; identical across runs for the same model.
    std::string to_csv() const {
        std::ostringstream os;
        os << std::setprecision(10);
        os << "# scale=" << scale << " gamma_upper=" << thresholds.gamma_upper << " gamma_low=" << thresholds.gamma_low
           << " rolling=" << rolling << " margin=" << margin << '\n';
        os << "image,width,height,psnr,ssim,bicubic_psnr,bicubic_ssim,mild,moderate,severe,macs\n";
        auto row = [&](const std::string& name, std::size_t w, std::size_t h, double p, double s, double bp,
                       double bs, const TagCounts& t, double macs) {
            os << name << ',' << w << ',' << h << ',' << p << ',' << s << ',' << bp << ',' << bs << ','
               << t[DifficultyTag::Mild] << ',' << t[DifficultyTag::Moderate] << ',' << t[DifficultyTag::Severe] << ','
               << macs << '\n';
        };
        for (const auto& r : rows)
            row(r.name, r.width, r.height, r.psnr, r.ssim, r.bicubic_psnr, r.bicubic_ssim, r.tags,
                static_cast<double>(r.macs));
        row("mean", 0, 0, mean_psnr(), mean_ssim(), mean_bicubic_psnr(), mean_bicubic_ssim(), total_tags(),
            mean_macs());
        return os.str();
    }

    std::string timing_csv() const {
        std::ostringstream os;
        os << std::setprecision(6);
        os << "image,seconds,reassembly_seconds\n";
        for (const auto& r : rows) os << r.name << ',' << r.seconds << ',' << r.reassembly_seconds << '\n';
        return os.str();
    }

    std::string to_markdown() const {
        std::ostringstream os;
        os << std::fixed;
        os << "| Image | Bicubic PSNR / SSIM | PRN PSNR / SSIM | mild / moderate / severe | GMACs |\n";
        os << "|---|---|---|---|---|\n";
        auto line = [&](const std::string& name, double bp, double bs, double p, double s, const TagCounts& t,
                        double macs) {
            os << "| " << name << " | " << std::setprecision(2) << bp << " / " << std::setprecision(4) << bs << " | "
               << std::setprecision(2) << p << " / " << std::setprecision(4) << s << " | " << t[DifficultyTag::Mild]
               << " / " << t[DifficultyTag::Moderate] << " / " << t[DifficultyTag::Severe] << " | "
               << std::setprecision(3) << macs / 1e9 << " |\n";
        };
        for (const auto& r : rows)
            line(r.name, r.bicubic_psnr, r.bicubic_ssim, r.psnr, r.ssim, r.tags, static_cast<double>(r.macs));
        line("**mean** (x" + std::to_string(scale) + ")", mean_bicubic_psnr(), mean_bicubic_ssim(), mean_psnr(),
             mean_ssim(), total_tags(), mean_macs());
        return os.str();
    }
};

/// Downscale -> super-resolve -> Y-channel PSNR/SSIM against HR (shave = scale),
/// with the bicubic upscale of the same LR image as baseline.
inline EvalReport evaluate_images(const PrnModel& model, const std::vector<NamedImage>& images, int scale,
                                  const SuperResolveOptions& opt = {}) {
    if (images.empty()) throw ArgumentError("evaluate_images needs at least one image");
    EvalReport rep;
    rep.scale = scale;
    rep.thresholds = model.config.thresholds;
    rep.rolling = model.config.rolling;
    rep.margin = opt.margin;
    const auto s = static_cast<std::size_t>(scale);
    for (const auto& ni : images) {
        const SrCase c = make_case(ni.image, scale);
        const ImageResult sr = super_resolve_image(c.lr, model, scale, opt);
        const ColorImage bic = resize_color(c.lr, c.hr.width, c.hr.height);
        const ImagePlane y_hr = luma(c.hr), y_sr = luma(sr.image), y_bic = luma(bic).clamped();
        ImageRow r;
        r.name = ni.name;
        r.width = c.hr.width;
        r.height = c.hr.height;
        r.psnr = psnr(y_sr, y_hr, s);
        r.bicubic_psnr = psnr(y_bic, y_hr, s);
        const ImagePlane hr_c = shave(y_hr, s);
        r.ssim = ssim(shave(y_sr, s), hr_c);
        r.bicubic_ssim = ssim(shave(y_bic, s), hr_c);
        for (const auto& t : sr.traces) {
            ++r.tags[t.tag];
            r.macs += t.macs;
        }
        r.seconds = sr.total_seconds;
        r.reassembly_seconds = sr.reassembly_seconds;
        rep.rows.push_back(std::move(r));
        rep.traces.push_back(sr.traces);
    }
    return rep;
}

inline EvalReport evaluate_dataset(const PrnModel& model, const std::filesystem::path& hr_dir, int scale,
                                   const SuperResolveOptions& opt = {}) {
    return evaluate_images(model, load_dataset(hr_dir), scale, opt);
}

/// Any luma super-resolver: (LR plane, scale) -> HR plane.
using SrFunction = std::function<ImagePlane(const ImagePlane&, int)>;

inline SrFunction model_sr(const PrnModel& model, const SuperResolveOptions& opt = {}) {
    return [&model, opt](const ImagePlane& lr, int scale) { return super_resolve_plane(lr, model, scale, opt).plane; };
}

struct PatchGain {
    std::string image;
    std::size_t row = 0;  // HR origin
    std::size_t col = 0;
    double prior = 0.0;   // of the LR patch
    double gain = 0.0;    // PSNR(sr) - PSNR(bicubic), dB
    bool success = false;
};

struct GainReport {
    double threshold = 1.0;
    std::vector<PatchGain> patches;

    std::vector<double> priors(bool successful) const {
        std::vector<double> out;
        for (const auto& p : patches)
            if (p.success == successful) out.push_back(p.prior);
        return out;
    }
    std::size_t count(bool successful) const { return priors(successful).size(); }
    double mean_prior(bool successful) const {
        const auto v = priors(successful);
        if (v.empty()) return 0.0;
        double s = 0.0;
        for (double x : v) s += x;
        return s / static_cast<double>(v.size());
    }

    std::string to_csv() const {
        std::ostringstream os;
        os << std::setprecision(10) << "image,row,col,prior,gain_db,success\n";
        for (const auto& p : patches)
            os << p.image << ',' << p.row << ',' << p.col << ',' << p.prior << ',' << p.gain << ',' << p.success << '\n';
        return os.str();
    }
};

/// Splits full HR patches by PSNR gain of `sr` over bicubic (success: gain >
/// threshold) and records the gradient prior of each patch's LR version.
inline GainReport gain_analysis(const SrFunction& sr, const std::vector<NamedImage>& images, int scale,
                                double gain_threshold = 1.0, const PriorOptions& prior = {},
                                std::size_t base_patch = 54) {
    if (images.empty()) throw ArgumentError("gain_analysis needs at least one image");
    GainReport rep;
    rep.threshold = gain_threshold;
    const auto s = static_cast<std::size_t>(scale);
    const std::size_t P = hr_patch_size(scale, base_patch), p = P / s;
    for (const auto& ni : images) {
        const SrCase c = make_case(ni.image, scale);
        const ImagePlane y_hr = luma(c.hr), y_lr = luma(c.lr);
        const ImagePlane y_sr = sr(y_lr, scale);
        const ImagePlane y_bic = bicubic_resize(y_lr, y_hr.width, y_hr.height).clamped();
        if (y_sr.width != y_hr.width || y_sr.height != y_hr.height) {
            throw DimensionError("gain_analysis: super-resolver returned the wrong size");
        }
        auto cut = [](const ImagePlane& src, std::size_t r0, std::size_t c0, std::size_t n) {
            ImagePlane out(n, n);
            for (std::size_t y = 0; y < n; ++y)
                for (std::size_t x = 0; x < n; ++x) out.at(y, x) = src.at(r0 + y, c0 + x);
            return out;
        };
        for (std::size_t r0 = 0; r0 + P <= y_hr.height; r0 += P)
            for (std::size_t c0 = 0; c0 + P <= y_hr.width; c0 += P) {
                const ImagePlane ref = cut(y_hr, r0, c0, P);
                PatchGain g;
                g.image = ni.name;
                g.row = r0;
                g.col = c0;
                g.prior = gradient_prior(plane_to_tensor(cut(y_lr, r0 / s, c0 / s, p)), prior);
                g.gain = psnr(cut(y_sr, r0, c0, P), ref) - psnr(cut(y_bic, r0, c0, P), ref);
                g.success = g.gain > gain_threshold;
                rep.patches.push_back(g);
            }
    }
    return rep;
}

/// Per-image trace set plus the reassembly time measured for that image.
struct ImageTiming {
    std::vector<RouteTrace> traces;
    double reassembly_seconds = 0.0;
};

struct TimingSummary {
    std::size_t images = 0;
    double mean_seconds = 0.0;    // per image, patch passes + reassembly
    double median_seconds = 0.0;
    double mean_macs = 0.0;       // per image
    double reassembly_seconds = 0.0;  // total
    struct TagRow {
        DifficultyTag tag;
        std::size_t patches = 0;
        std::uint64_t macs = 0;
        double seconds = 0.0;
    };
    std::array<TagRow, 3> per_tag{TagRow{DifficultyTag::Mild}, TagRow{DifficultyTag::Moderate},
                                  TagRow{DifficultyTag::Severe}};
    std::uint64_t total_macs = 0;
    double total_seconds = 0.0;

    std::string to_markdown() const {
        std::ostringstream os;
        os << std::setprecision(4);
        os << "| tag | patches | MACs | seconds |\n|---|---|---|---|\n";
        for (const auto& r : per_tag)
            os << "| " << to_string(r.tag) << " | " << r.patches << " | " << r.macs << " | " << r.seconds << " |\n";
        os << "| reassembly | | | " << reassembly_seconds << " |\n";
        os << "| **total** | | " << total_macs << " | " << total_seconds << " |\n\n";
        os << "images: " << images << ", mean s/image: " << mean_seconds << ", median s/image: " << median_seconds
           << ", mean MACs/image: " << mean_macs << "\n";
        return os.str();
    }
};

inline TimingSummary timing_report(const std::vector<ImageTiming>& images) {
    if (images.empty()) throw ArgumentError("timing_report needs at least one image");
    TimingSummary t;
    t.images = images.size();
    std::vector<double> per_image;
    for (const auto& im : images) {
        double secs = im.reassembly_seconds;
        for (const auto& tr : im.traces) {
            auto& row = t.per_tag[static_cast<std::size_t>(tr.tag)];
            ++row.patches;
            row.macs += tr.macs;
            row.seconds += tr.seconds;
            t.total_macs += tr.macs;
            secs += tr.seconds;
        }
        t.reassembly_seconds += im.reassembly_seconds;
        per_image.push_back(secs);
    }
    if (t.per_tag[0].patches + t.per_tag[1].patches + t.per_tag[2].patches == 0) {
        throw ArgumentError("timing_report: no traces");
    }
    for (double s : per_image) t.total_seconds += s;
    t.mean_seconds = t.total_seconds / static_cast<double>(t.images);
    std::sort(per_image.begin(), per_image.end());
    const std::size_t n = per_image.size();
    t.median_seconds = n % 2 ? per_image[n / 2] : 0.5 * (per_image[n / 2 - 1] + per_image[n / 2]);
    t.mean_macs = static_cast<double>(t.total_macs) / static_cast<double>(t.images);
    return t;
}

inline TimingSummary timing_report(const EvalReport& rep) {
    std::vector<ImageTiming> v;
    for (std::size_t i = 0; i < rep.rows.size(); ++i) v.push_back({rep.traces[i], rep.rows[i].reassembly_seconds});
    return timing_report(v);
}

}  // namespace prn
