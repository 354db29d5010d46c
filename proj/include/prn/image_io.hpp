#pragma once

#include <png.h>

#include <algorithm>
#include <cctype>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <string>
#include <vector>

#include "prn/error.hpp"
#include "prn/image.hpp"

namespace prn {

namespace detail {

inline std::string lower_extension(const std::filesystem::path& p) {
    std::string ext = p.extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
    return ext;
}

inline std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path.string());
    return std::vector<std::uint8_t>(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

inline void write_file(const std::filesystem::path& path, const std::vector<std::uint8_t>& bytes) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write " + path.string());
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw IoError("short write to " + path.string());
}

class PnmCursor {
public:
    PnmCursor(const std::vector<std::uint8_t>& b, const std::string& name) : bytes_(b), name_(name) {}

    std::size_t number() {
        skip_space_and_comments();
        std::size_t v = 0;
        bool any = false;
        while (pos_ < bytes_.size() && std::isdigit(bytes_[pos_])) {
            v = v * 10 + (bytes_[pos_++] - '0');
            any = true;
            if (v > (1u << 24)) throw FormatError(name_ + ": PNM header value too large");
        }
        if (!any) throw FormatError(name_ + ": malformed PNM header");
        return v;
    }

    void single_whitespace() {
        if (pos_ >= bytes_.size() || !std::isspace(bytes_[pos_])) throw FormatError(name_ + ": malformed PNM header");
        ++pos_;
    }

    std::size_t pos() const { return pos_; }

private:
    void skip_space_and_comments() {
        while (pos_ < bytes_.size()) {
            if (std::isspace(bytes_[pos_])) {
                ++pos_;
            } else if (bytes_[pos_] == '#') {
                while (pos_ < bytes_.size() && bytes_[pos_] != '\n') ++pos_;
            } else {
                break;
            }
        }
    }

    const std::vector<std::uint8_t>& bytes_;
    std::string name_;
    std::size_t pos_ = 2;
};

inline ColorImage decode_pnm(const std::vector<std::uint8_t>& bytes, const std::string& name) {
    const bool gray = bytes[1] == '5';
    PnmCursor cur(bytes, name);
    const std::size_t w = cur.number(), h = cur.number(), maxval = cur.number();
    cur.single_whitespace();
    if (maxval == 0 || maxval > 65535) throw FormatError(name + ": invalid PNM maxval");
    if (maxval > 255) throw FormatError(name + ": unsupported bit depth (16-bit PNM)");
    if (w == 0 || h == 0) throw FormatError(name + ": zero-sized image");
    const std::size_t channels = gray ? 1 : 3;
    const std::size_t need = w * h * channels;
    if (bytes.size() - cur.pos() < need) throw IoError(name + ": truncated PNM pixel data");
    const std::uint8_t* px = bytes.data() + cur.pos();
    ColorImage img(w, h);
    for (std::size_t i = 0; i < w * h; ++i)
        for (std::size_t c = 0; c < 3; ++c) {
            const std::size_t v = px[i * channels + (gray ? 0 : c)];
            if (v > maxval) throw FormatError(name + ": sample exceeds maxval");
            img.planes[c].data[i] = static_cast<float>(v) / static_cast<float>(maxval);
        }
    return img;
}

inline ColorImage decode_png(const std::vector<std::uint8_t>& bytes, const std::string& name) {
    png_image image;
    std::memset(&image, 0, sizeof image);
    image.version = PNG_IMAGE_VERSION;
    if (!png_image_begin_read_from_memory(&image, bytes.data(), bytes.size())) {
        throw FormatError(name + ": " + image.message);
    }
    if (image.format & PNG_FORMAT_FLAG_LINEAR) {
        png_image_free(&image);
        throw FormatError(name + ": unsupported bit depth (16-bit PNG)");
    }
    image.format = PNG_FORMAT_RGB;
    std::vector<std::uint8_t> px(PNG_IMAGE_SIZE(image));
    png_color background{0, 0, 0};
    if (!png_image_finish_read(&image, &background, px.data(), 0, nullptr)) {
        const std::string msg = image.message;
        png_image_free(&image);
        throw IoError(name + ": " + msg);
    }
    return ColorImage::from_bytes(image.width, image.height, px.data());
}

inline bool is_gray(const ColorImage& img) {
    return img.planes[0] == img.planes[1] && img.planes[0] == img.planes[2];
}

}  // namespace detail

/// Reads an 8-bit PNG or binary PGM/PPM (P5/P6) as an RGB image.
inline ColorImage load_image(const std::filesystem::path& path) {
    const auto bytes = detail::read_file(path);
    const std::string name = path.string();
    if (bytes.size() >= 8 && png_sig_cmp(bytes.data(), 0, 8) == 0) return detail::decode_png(bytes, name);
    if (bytes.size() >= 2 && bytes[0] == 'P' && (bytes[1] == '5' || bytes[1] == '6')) {
        return detail::decode_pnm(bytes, name);
    }
    if (bytes.empty()) throw IoError(name + ": empty file");
    throw FormatError(name + ": not a PNG or binary PGM/PPM file");
}

/// Writes by extension: .png (RGB), .ppm (P6) or .pgm (P5, grey images only).
/// YCbCr images are converted to RGB first.
inline void save_image(const ColorImage& image, const std::filesystem::path& path) {
    const ColorImage rgb = image.space == ColorSpace::RGB ? image : ycbcr_to_rgb(image);
    const std::string ext = detail::lower_extension(path);
    const auto px = rgb.to_bytes();
    if (ext == ".png") {
        png_image img;
        std::memset(&img, 0, sizeof img);
        img.version = PNG_IMAGE_VERSION;
        img.width = static_cast<png_uint_32>(rgb.width);
        img.height = static_cast<png_uint_32>(rgb.height);
        img.format = PNG_FORMAT_RGB;
        if (!png_image_write_to_file(&img, path.string().c_str(), 0, px.data(), 0, nullptr)) {
            throw IoError(path.string() + ": " + img.message);
        }
        return;
    }
    std::vector<std::uint8_t> out;
    if (ext == ".ppm") {
        const std::string header = "P6\n" + std::to_string(rgb.width) + " " + std::to_string(rgb.height) + "\n255\n";
        out.assign(header.begin(), header.end());
        out.insert(out.end(), px.begin(), px.end());
    } else if (ext == ".pgm") {
        if (!detail::is_gray(rgb)) throw ArgumentError(path.string() + ": PGM output requires a grey image");
        const std::string header = "P5\n" + std::to_string(rgb.width) + " " + std::to_string(rgb.height) + "\n255\n";
        out.assign(header.begin(), header.end());
        for (std::size_t i = 0; i < rgb.width * rgb.height; ++i) out.push_back(px[i * 3]);
    } else {
        throw ArgumentError(path.string() + ": unsupported output extension '" + ext + "'");
    }
    detail::write_file(path, out);
}

/// Sorted list of readable image files (.png/.pgm/.ppm) in a directory.
inline std::vector<std::filesystem::path> list_images(const std::filesystem::path& dir) {
    if (!std::filesystem::is_directory(dir)) throw IoError(dir.string() + " is not a directory");
    std::vector<std::filesystem::path> files;
    for (const auto& e : std::filesystem::directory_iterator(dir)) {
        if (!e.is_regular_file()) continue;
        const std::string ext = detail::lower_extension(e.path());
        if (ext == ".png" || ext == ".pgm" || ext == ".ppm") files.push_back(e.path());
    }
    std::sort(files.begin(), files.end());
    return files;
}

}  // namespace prn
