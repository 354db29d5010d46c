#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include "prn/error.hpp"
#include "prn/tensor.hpp"

namespace prn {

/// Difficulty label; ordered Mild < Moderate < Severe.
enum class DifficultyTag : int { Mild = 0, Moderate = 1, Severe = 2 };

inline constexpr std::array<DifficultyTag, 3> kAllTags{DifficultyTag::Mild, DifficultyTag::Moderate,
                                                       DifficultyTag::Severe};

inline const char* to_string(DifficultyTag t) {
    switch (t) {
        case DifficultyTag::Mild: return "mild";
        case DifficultyTag::Moderate: return "moderate";
        case DifficultyTag::Severe: return "severe";
    }
    return "?";
}

/// Routing thresholds in prior units. gamma_upper is the *smaller* value:
/// P <= gamma_upper is mild, P > gamma_low is severe.
struct Thresholds {
    double gamma_upper = 10.0;
    double gamma_low = 30.0;

    void validate() const {
        if (!(gamma_upper >= 0.0) || !(gamma_low >= gamma_upper)) {
            std::ostringstream os;
            os << "invalid thresholds (gamma_upper=" << gamma_upper << ", gamma_low=" << gamma_low
               << "); need 0 <= gamma_upper <= gamma_low";
            throw ArgumentError(os.str());
        }
    }

    static Thresholds all_mild() {
        return {std::numeric_limits<double>::infinity(), std::numeric_limits<double>::infinity()};
    }
    static Thresholds all_severe() { return {0.0, 0.0}; }

    bool operator==(const Thresholds&) const = default;
};

enum class PriorNorm { L1Mean = 0, L2Mean = 1 };

struct PriorOptions {
    PriorNorm norm = PriorNorm::L1Mean;
    bool use_both_axes = false;
    /// Side of the reference patch the thresholds were calibrated on.
    std::size_t reference_size = 54;

    bool operator==(const PriorOptions&) const = default;
};

/// Gradient prior of a single-channel patch with values in [0,1]: the mean
/// |x[r+1,c] - x[r,c]| (or its RMS) in 8-bit units, multiplied by
/// reference_area / patch_area.
template <typename T>
double gradient_prior(const Tensor<T>& patch, const PriorOptions& opt = {}) {
    const Shape& s = patch.shape();
    if (s.n != 1 || s.c != 1) throw DimensionError("gradient_prior expects a 1x1xHxW patch, got " + s.str());
    if (s.h < 2) throw DimensionError("gradient_prior needs a patch at least 2 rows tall");
    if (opt.use_both_axes && s.w < 2) throw DimensionError("gradient_prior (both axes) needs width >= 2");

    double acc = 0.0;
    std::size_t count = 0;
    auto add = [&](double d) {
        acc += opt.norm == PriorNorm::L1Mean ? std::abs(d) : d * d;
        ++count;
    };
    for (std::size_t r = 0; r + 1 < s.h; ++r)
        for (std::size_t c = 0; c < s.w; ++c)
            add(static_cast<double>(patch.at(0, 0, r + 1, c)) - static_cast<double>(patch.at(0, 0, r, c)));
    if (opt.use_both_axes) {
        for (std::size_t r = 0; r < s.h; ++r)
            for (std::size_t c = 0; c + 1 < s.w; ++c)
                add(static_cast<double>(patch.at(0, 0, r, c + 1)) - static_cast<double>(patch.at(0, 0, r, c)));
    }
    double mean = acc / static_cast<double>(count);
    if (opt.norm == PriorNorm::L2Mean) mean = std::sqrt(mean);
    const double ref_area = static_cast<double>(opt.reference_size * opt.reference_size);
    return mean * 255.0 * ref_area / static_cast<double>(s.h * s.w);
}

/// Left-inclusive partition: (-inf, gu] mild, (gu, gl] moderate, (gl, inf) severe.
inline DifficultyTag classify(double prior, const Thresholds& t) {
    if (prior <= t.gamma_upper) return DifficultyTag::Mild;
    if (prior <= t.gamma_low) return DifficultyTag::Moderate;
    return DifficultyTag::Severe;
}

/// Fixed-width histogram of prior values starting at 0.
struct PriorHistogram {
    double bin_width = 5.0;
    std::vector<std::size_t> counts;

    std::size_t total() const {
        std::size_t n = 0;
        for (auto c : counts) n += c;
        return n;
    }

    std::string to_csv() const {
        std::ostringstream os;
        os << "bin_lo,bin_hi,count\n";
        for (std::size_t i = 0; i < counts.size(); ++i)
            os << bin_width * static_cast<double>(i) << ',' << bin_width * static_cast<double>(i + 1) << ','
               << counts[i] << '\n';
        return os.str();
    }
};

inline PriorHistogram prior_histogram(const std::vector<double>& priors, double bin_width = 5.0) {
    if (priors.empty()) throw ArgumentError("prior_histogram needs at least one value");
    if (!(bin_width > 0.0)) throw ArgumentError("prior_histogram bin width must be positive");
    PriorHistogram h;
    h.bin_width = bin_width;
    const double top = *std::max_element(priors.begin(), priors.end());
    h.counts.assign(static_cast<std::size_t>(std::floor(top / bin_width)) + 1, 0);
    for (double p : priors) {
        if (!(p >= 0.0)) throw ArgumentError("prior values must be non-negative");
        ++h.counts[static_cast<std::size_t>(std::floor(p / bin_width))];
    }
    return h;
}

template <typename T>
PriorHistogram prior_histogram(const std::vector<Tensor<T>>& patches, const PriorOptions& opt = {},
                               double bin_width = 5.0) {
    if (patches.empty()) throw ArgumentError("prior_histogram needs at least one patch");
    std::vector<double> priors;
    priors.reserve(patches.size());
    for (const auto& p : patches) priors.push_back(gradient_prior(p, opt));
    return prior_histogram(priors, bin_width);
}

/// Per-tag counts over a set of priors.
struct TagCounts {
    std::array<std::size_t, 3> n{0, 0, 0};
    std::size_t& operator[](DifficultyTag t) { return n[static_cast<std::size_t>(t)]; }
    std::size_t operator[](DifficultyTag t) const { return n[static_cast<std::size_t>(t)]; }
    std::size_t total() const { return n[0] + n[1] + n[2]; }
};

inline TagCounts count_tags(const std::vector<double>& priors, const Thresholds& t) {
    TagCounts c;
    for (double p : priors) ++c[classify(p, t)];
    return c;
}

}  // namespace prn
