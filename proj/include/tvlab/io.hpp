#pragma once

#include <algorithm>
#include <cctype>
#include <cmath>
#include <csetjmp>
#include <cstdio>
#include <fstream>
#include <memory>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <png.h>

#include "tvlab/image.hpp"
#include "tvlab/metrics.hpp"
#include "tvlab/rng.hpp"

namespace tvlab {

// Image file I/O. Supported formats: PNG (8-bit gray or RGB) and PGM
// (P5 binary or P2 ASCII, maxval <= 255). Images are stored on the
// [0, 255] double scale; saving clamps and rounds to 8 bits, so the
// round-trip of an 8-bit image is lossless.

namespace detail {

inline bool ends_with_ci(const std::string& s, const std::string& suffix) {
    if (s.size() < suffix.size()) return false;
    for (size_t i = 0; i < suffix.size(); ++i)
        if (std::tolower(static_cast<unsigned char>(s[s.size() - suffix.size() + i])) !=
            std::tolower(static_cast<unsigned char>(suffix[i])))
            return false;
    return true;
}

inline int next_pnm_token(std::istream& is) {
    // Skips whitespace and '#' comment lines, then reads one integer.
    for (;;) {
        int c = is.peek();
        if (c == EOF) throw std::runtime_error("PGM: truncated header");
        if (std::isspace(c)) {
            is.get();
        } else if (c == '#') {
            std::string line;
            std::getline(is, line);
        } else {
            break;
        }
    }
    int value;
    if (!(is >> value)) throw std::runtime_error("PGM: malformed header");
    return value;
}

inline Image load_pgm(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("load_image: cannot open " + path);
    std::string magic(2, '\0');
    if (!is.read(magic.data(), 2) || (magic != "P5" && magic != "P2"))
        throw std::runtime_error("PGM: unsupported magic in " + path);
    const int w = next_pnm_token(is);
    const int h = next_pnm_token(is);
    const int maxval = next_pnm_token(is);
    if (w < 1 || h < 1 || maxval < 1 || maxval > 255)
        throw std::runtime_error("PGM: unsupported dimensions or maxval in " + path);
    Image img(h, w, 1);
    if (magic == "P5") {
        is.get(); // single whitespace after maxval
        std::vector<unsigned char> buf(static_cast<size_t>(w) * h);
        if (!is.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(buf.size())))
            throw std::runtime_error("PGM: truncated pixel data in " + path);
        for (size_t i = 0; i < buf.size(); ++i) img.values()[i] = buf[i];
    } else {
        for (size_t i = 0; i < img.size(); ++i) img.values()[i] = next_pnm_token(is);
    }
    return img;
}

inline unsigned char to_byte(double v) {
    return static_cast<unsigned char>(std::clamp(std::lround(v), 0L, 255L));
}

inline void save_pgm(const Image& img, const std::string& path) {
    if (img.channels() != 1)
        throw std::runtime_error("save_image: PGM supports single-channel images only");
    std::ofstream os(path, std::ios::binary);
    if (!os) throw std::runtime_error("save_image: cannot open " + path);
    os << "P5\n" << img.width() << " " << img.height() << "\n255\n";
    std::vector<unsigned char> buf(img.size());
    for (size_t i = 0; i < buf.size(); ++i) buf[i] = to_byte(img.values()[i]);
    os.write(reinterpret_cast<const char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
    if (!os) throw std::runtime_error("save_image: write failure on " + path);
}

struct PngFileCloser {
    void operator()(std::FILE* f) const {
        if (f) std::fclose(f);
    }
};

inline Image load_png(const std::string& path) {
    std::unique_ptr<std::FILE, PngFileCloser> fp(std::fopen(path.c_str(), "rb"));
    if (!fp) throw std::runtime_error("load_image: cannot open " + path);
    png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    png_infop info = png ? png_create_info_struct(png) : nullptr;
    if (!png || !info) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw std::runtime_error("load_image: libpng initialization failed");
    }
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw std::runtime_error("load_image: malformed PNG " + path);
    }
    png_init_io(png, fp.get());
    png_read_info(png, info);

    png_set_strip_16(png);
    png_set_strip_alpha(png);
    png_set_packing(png);
    if (png_get_color_type(png, info) == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
    if (png_get_color_type(png, info) == PNG_COLOR_TYPE_GRAY && png_get_bit_depth(png, info) < 8)
        png_set_expand_gray_1_2_4_to_8(png);
    png_read_update_info(png, info);

    const int h = static_cast<int>(png_get_image_height(png, info));
    const int w = static_cast<int>(png_get_image_width(png, info));
    const int ch = static_cast<int>(png_get_channels(png, info));
    if (ch != 1 && ch != 3) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw std::runtime_error("load_image: unsupported PNG channel count in " + path);
    }
    std::vector<unsigned char> data(static_cast<size_t>(h) * w * ch);
    std::vector<png_bytep> rows(h);
    for (int r = 0; r < h; ++r)
        rows[r] = data.data() + static_cast<size_t>(r) * w * ch;
    png_read_image(png, rows.data());
    png_read_end(png, nullptr);
    png_destroy_read_struct(&png, &info, nullptr);

    Image img(h, w, ch);
    for (int r = 0; r < h; ++r)
        for (int c = 0; c < w; ++c)
            for (int k = 0; k < ch; ++k)
                img.at(k, r, c) = data[(static_cast<size_t>(r) * w + c) * ch + k];
    return img;
}

inline void save_png(const Image& img, const std::string& path) {
    if (img.channels() != 1 && img.channels() != 3)
        throw std::runtime_error("save_image: PNG supports 1 or 3 channels");
    std::unique_ptr<std::FILE, PngFileCloser> fp(std::fopen(path.c_str(), "wb"));
    if (!fp) throw std::runtime_error("save_image: cannot open " + path);
    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    png_infop info = png ? png_create_info_struct(png) : nullptr;
    if (!png || !info) {
        png_destroy_write_struct(&png, &info);
        throw std::runtime_error("save_image: libpng initialization failed");
    }
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_write_struct(&png, &info);
        throw std::runtime_error("save_image: PNG write failure on " + path);
    }
    png_init_io(png, fp.get());
    const int ch = img.channels();
    png_set_IHDR(png, info, img.width(), img.height(), 8,
                 ch == 1 ? PNG_COLOR_TYPE_GRAY : PNG_COLOR_TYPE_RGB, PNG_INTERLACE_NONE,
                 PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);
    std::vector<unsigned char> row(static_cast<size_t>(img.width()) * ch);
    for (int r = 0; r < img.height(); ++r) {
        for (int c = 0; c < img.width(); ++c)
            for (int k = 0; k < ch; ++k)
                row[static_cast<size_t>(c) * ch + k] = to_byte(img.at(k, r, c));
        png_write_row(png, row.data());
    }
    png_write_end(png, nullptr);
    png_destroy_write_struct(&png, &info);
}

} // namespace detail

inline Image load_image(const std::string& path) {
    if (detail::ends_with_ci(path, ".png")) return detail::load_png(path);
    if (detail::ends_with_ci(path, ".pgm")) return detail::load_pgm(path);
    throw std::runtime_error("load_image: unsupported format for " + path);
}

inline void save_image(const Image& img, const std::string& path) {
    if (detail::ends_with_ci(path, ".png")) {
        detail::save_png(img, path);
    } else if (detail::ends_with_ci(path, ".pgm")) {
        detail::save_pgm(img, path);
    } else {
        throw std::runtime_error("save_image: unsupported format for " + path);
    }
}

/// Luminance conversion (0.299, 0.587, 0.114) for 3-channel images;
/// single-channel images pass through unchanged.
inline Image to_grayscale(const Image& img) {
    if (img.channels() == 1) return img;
    if (img.channels() != 3)
        throw std::invalid_argument("to_grayscale: expects 1 or 3 channels");
    Image out(img.height(), img.width(), 1);
    for (int r = 0; r < img.height(); ++r)
        for (int c = 0; c < img.width(); ++c)
            out.at(r, c) =
                0.299 * img.at(0, r, c) + 0.587 * img.at(1, r, c) + 0.114 * img.at(2, r, c);
    return out;
}

/// Additive Gaussian noise on the [0,255] scale; no clamping (clamping
/// happens only at save time).
inline Image add_gaussian_noise(const Image& img, double sigma, uint64_t seed) {
    if (sigma < 0.0) throw std::invalid_argument("add_gaussian_noise: sigma must be >= 0");
    Image out = img;
    if (sigma == 0.0) return out;
    Rng rng(seed);
    for (double& v : out.values()) v += sigma * rng.normal();
    return out;
}

struct PatchSet {
    std::vector<Image> train;      // first 80% of the sampled crops
    std::vector<Image> validation; // remaining 20%
};

/// Seed-deterministic uniform random crops from a pool of images, with a
/// deterministic 80/20 train/validation split in sampling order.
inline PatchSet crop_patches(const std::vector<Image>& images, int patch_size, int count,
                             uint64_t seed) {
    if (images.empty()) throw std::invalid_argument("crop_patches: no source images");
    if (patch_size < 1 || count < 1)
        throw std::invalid_argument("crop_patches: patch_size and count must be >= 1");
    for (const Image& img : images)
        if (img.height() < patch_size || img.width() < patch_size)
            throw std::invalid_argument("crop_patches: source image smaller than the patch");

    Rng rng(seed);
    std::vector<Image> all;
    all.reserve(count);
    for (int i = 0; i < count; ++i) {
        const Image& src = images[rng.uniform_index(images.size())];
        const int r0 = static_cast<int>(rng.uniform_index(src.height() - patch_size + 1));
        const int c0 = static_cast<int>(rng.uniform_index(src.width() - patch_size + 1));
        all.push_back(crop(src, r0, c0, patch_size, patch_size));
    }
    PatchSet out;
    const int train_count = (count * 4) / 5;
    out.train.assign(all.begin(), all.begin() + train_count);
    out.validation.assign(all.begin() + train_count, all.end());
    return out;
}

} // namespace tvlab
