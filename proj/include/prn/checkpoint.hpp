#pragma once

#include <zlib.h>

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <string>
#include <vector>

#include "prn/error.hpp"
#include "prn/image_io.hpp"
#include "prn/model.hpp"

// Layout, all little-endian:
//   "PRN1"
//   payload:
//     u32 version
//     u32 features, depth_l, depth_m, dilation_rate, rolling
//     f64 slope, gamma_upper, gamma_low
//     u32 prior_norm, prior_both_axes, prior_reference_size
//     u32 n_scales, i32 scale[n_scales]
//     u32 n_layers, then per layer: u32 stage, i32 scale, u32 out, in, kh, kw, dilation, stride, pad_h, pad_w
//     per layer: f32 weights[out*in*kh*kw], f32 bias[out]
//   u32 crc32(payload)

namespace prn {

inline constexpr std::uint32_t kCheckpointVersion = 1;

class ChecksumError : public FormatError {
public:
    using FormatError::FormatError;
};

class VersionError : public FormatError {
public:
    using FormatError::FormatError;
};

namespace detail {

class ByteWriter {
public:
    void u32(std::uint32_t v) {
        for (int i = 0; i < 4; ++i) bytes.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
    }
    void i32(std::int32_t v) { u32(static_cast<std::uint32_t>(v)); }
    void u64(std::uint64_t v) {
        for (int i = 0; i < 8; ++i) bytes.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
    }
    void f32(float v) { u32(std::bit_cast<std::uint32_t>(v)); }
    void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }
    void size(std::size_t v) {
        if (v > 0xFFFFFFFFu) throw ArgumentError("checkpoint field exceeds 32 bits");
        u32(static_cast<std::uint32_t>(v));
    }

    std::vector<std::uint8_t> bytes;
};

class ByteReader {
public:
    ByteReader(const std::uint8_t* data, std::size_t n) : data_(data), n_(n) {}

    std::uint32_t u32() {
        need(4);
        std::uint32_t v = 0;
        for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(data_[pos_++]) << (8 * i);
        return v;
    }
    std::int32_t i32() { return static_cast<std::int32_t>(u32()); }
    std::uint64_t u64() {
        need(8);
        std::uint64_t v = 0;
        for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(data_[pos_++]) << (8 * i);
        return v;
    }
    float f32() { return std::bit_cast<float>(u32()); }
    double f64() { return std::bit_cast<double>(u64()); }
    bool at_end() const { return pos_ == n_; }

private:
    void need(std::size_t k) const {
        if (n_ - pos_ < k) throw FormatError("checkpoint truncated");
    }

    const std::uint8_t* data_;
    std::size_t n_;
    std::size_t pos_ = 0;
};

inline std::uint32_t crc32_of(const std::uint8_t* p, std::size_t n) {
    uLong crc = crc32(0L, Z_NULL, 0);
    while (n > 0) {
        const uInt chunk = static_cast<uInt>(std::min<std::size_t>(n, 1u << 30));
        crc = crc32(crc, p, chunk);
        p += chunk;
        n -= chunk;
    }
    return static_cast<std::uint32_t>(crc);
}

}  // namespace detail

inline std::vector<std::uint8_t> serialize_checkpoint(const PrnModel& m) {
    m.config.validate();
    detail::ByteWriter w;
    const ModelConfig& c = m.config;
    w.u32(kCheckpointVersion);
    w.size(c.features);
    w.size(c.depth_l);
    w.size(c.depth_m);
    w.size(c.dilation_rate);
    w.u32(c.rolling ? 1 : 0);
    w.f64(c.slope);
    w.f64(c.thresholds.gamma_upper);
    w.f64(c.thresholds.gamma_low);
    w.u32(static_cast<std::uint32_t>(c.prior.norm));
    w.u32(c.prior.use_both_axes ? 1 : 0);
    w.size(c.prior.reference_size);
    w.size(c.scales.size());
    for (int s : c.scales) w.i32(s);

    std::size_t n_layers = 0;
    m.stages.for_each_layer([&](Stage, int, const LayerParams<float>&) { ++n_layers; });
    w.size(n_layers);
    m.stages.for_each_layer([&](Stage s, int scale, const LayerParams<float>& l) {
        l.check();
        w.u32(static_cast<std::uint32_t>(s));
        w.i32(scale);
        for (std::size_t v : {l.spec.out_channels, l.spec.in_channels, l.spec.kh, l.spec.kw, l.spec.dilation,
                              l.spec.stride, l.spec.pad_h, l.spec.pad_w})
            w.size(v);
    });
    m.stages.for_each_layer([&](Stage, int, const LayerParams<float>& l) {
        for (float v : l.weights.data()) w.f32(v);
        for (float v : l.bias) w.f32(v);
    });

    std::vector<std::uint8_t> out{'P', 'R', 'N', '1'};
    out.insert(out.end(), w.bytes.begin(), w.bytes.end());
    detail::ByteWriter tail;
    tail.u32(detail::crc32_of(w.bytes.data(), w.bytes.size()));
    out.insert(out.end(), tail.bytes.begin(), tail.bytes.end());
    return out;
}

inline PrnModel deserialize_checkpoint(const std::vector<std::uint8_t>& bytes) {
    if (bytes.size() < 4 || std::memcmp(bytes.data(), "PRN1", 4) != 0) {
        throw FormatError("not a PRN checkpoint (bad magic)");
    }
    if (bytes.size() < 12) throw FormatError("checkpoint truncated");
    const std::uint8_t* payload = bytes.data() + 4;
    const std::size_t n = bytes.size() - 8;

    detail::ByteReader r(payload, n);
    const std::uint32_t version = r.u32();
    if (version != kCheckpointVersion) {
        throw VersionError("checkpoint version " + std::to_string(version) + " not supported (expected " +
                           std::to_string(kCheckpointVersion) + ")");
    }
    detail::ByteReader crc_reader(bytes.data() + bytes.size() - 4, 4);
    if (crc_reader.u32() != detail::crc32_of(payload, n)) throw ChecksumError("checkpoint checksum mismatch");

    PrnModel m;
    ModelConfig& c = m.config;
    c.features = r.u32();
    c.depth_l = r.u32();
    c.depth_m = r.u32();
    c.dilation_rate = r.u32();
    c.rolling = r.u32() != 0;
    c.slope = static_cast<float>(r.f64());
    c.thresholds.gamma_upper = r.f64();
    c.thresholds.gamma_low = r.f64();
    const std::uint32_t norm = r.u32();
    if (norm > 1) throw FormatError("checkpoint has unknown prior norm " + std::to_string(norm));
    c.prior.norm = static_cast<PriorNorm>(norm);
    c.prior.use_both_axes = r.u32() != 0;
    c.prior.reference_size = r.u32();
    c.scales.resize(r.u32());
    if (c.scales.size() > 3) throw FormatError("checkpoint lists too many scales");
    for (auto& s : c.scales) s = r.i32();
    try {
        c.validate();
    } catch (const ArgumentError& e) {
        throw FormatError(std::string("checkpoint config invalid: ") + e.what());
    }

    struct Entry {
        std::uint32_t stage;
        int scale;
        ConvSpec spec;
    };
    const std::uint32_t n_layers = r.u32();
    if (n_layers > 4096) throw FormatError("checkpoint layer table too large");
    std::vector<Entry> table(n_layers);
    for (auto& e : table) {
        e.stage = r.u32();
        if (e.stage > static_cast<std::uint32_t>(Stage::Upsample)) throw FormatError("checkpoint has unknown stage");
        e.scale = r.i32();
        ConvSpec& s = e.spec;
        for (std::size_t* v : {&s.out_channels, &s.in_channels, &s.kh, &s.kw, &s.dilation, &s.stride, &s.pad_h, &s.pad_w})
            *v = r.u32();
    }
    for (const auto& e : table) {
        LayerParams<float> l(e.spec);
        for (auto& v : l.weights.data()) v = r.f32();
        for (auto& v : l.bias) v = r.f32();
        const auto stage = static_cast<Stage>(e.stage);
        if (stage == Stage::Upsample) {
            if (!c.has_scale(e.scale) || e.spec != upsample_spec(c, e.scale)) {
                throw FormatError("checkpoint deconv layer does not match its scale");
            }
            m.stages.theta_up[e.scale] = std::move(l);
        } else {
            m.stages.convs(stage).push_back(std::move(l));
        }
    }
    if (!r.at_end()) throw FormatError("checkpoint has trailing bytes");

    for (Stage s : {Stage::Early, Stage::Middle, Stage::Late, Stage::EarlyDilated, Stage::MiddleDilated}) {
        const auto& have = m.stages.convs(s);
        if (have.empty() && !c.rolling && (s == Stage::EarlyDilated || s == Stage::MiddleDilated)) continue;
        const auto want = stage_specs(c, s);
        bool ok = have.size() == want.size();
        for (std::size_t i = 0; ok && i < want.size(); ++i) ok = have[i].spec == want[i];
        if (!ok) throw FormatError(std::string("checkpoint layers for ") + to_string(s) + " do not match the config");
    }
    for (int s : c.scales)
        if (!m.stages.theta_up.count(s)) throw FormatError("checkpoint is missing the deconv for scale " + std::to_string(s));
    return m;
}

inline void save_checkpoint(const PrnModel& m, const std::filesystem::path& path) {
    detail::write_file(path, serialize_checkpoint(m));
}

inline PrnModel load_checkpoint(const std::filesystem::path& path) {
    return deserialize_checkpoint(detail::read_file(path));
}

}  // namespace prn
