#pragma once

#include <cstdint>
#include <cstdio>
#include <fstream>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

#include <png.h>

#include <Eigen/Dense>

#include "fvg/grid.hpp"

namespace fvg {

/// Intensity matrix normalized to [0, 1] as loaded from disk; pair it with
/// a grid via as_spherical_image once the dimensions are known to match.
struct LoadedImage {
    Eigen::MatrixXd values;

    SphericalImage on_grid(const EquirectGrid& grid) const { return SphericalImage(grid, values); }
};

namespace detail {

inline int pgm_next_token(std::istream& in, std::string& tok) {
    tok.clear();
    char c;
    while (in.get(c)) {
        if (c == '#') { // comment to end of line
            while (in.get(c) && c != '\n') {}
            continue;
        }
        if (std::isspace(static_cast<unsigned char>(c))) {
            if (!tok.empty()) return 1;
            continue;
        }
        tok.push_back(c);
    }
    return tok.empty() ? 0 : 1;
}

} // namespace detail

/// Binary portable graymap (P5), 8- or 16-bit, intensities scaled to [0, 1].
inline LoadedImage read_pgm(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("read_pgm: cannot open " + path);
    std::string tok;
    if (!detail::pgm_next_token(in, tok) || tok != "P5")
        throw std::runtime_error("read_pgm: " + path + " is not a binary PGM (P5)");
    long w = 0, h = 0, maxval = 0;
    if (!detail::pgm_next_token(in, tok)) throw std::runtime_error("read_pgm: truncated header");
    w = std::stol(tok);
    if (!detail::pgm_next_token(in, tok)) throw std::runtime_error("read_pgm: truncated header");
    h = std::stol(tok);
    if (!detail::pgm_next_token(in, tok)) throw std::runtime_error("read_pgm: truncated header");
    maxval = std::stol(tok);
    if (w <= 0 || h <= 0 || maxval <= 0 || maxval > 65535)
        throw std::runtime_error("read_pgm: bad dimensions or maxval in " + path);

    const bool wide = maxval > 255;
    const std::size_t n = static_cast<std::size_t>(w) * h;
    std::vector<std::uint8_t> buf(n * (wide ? 2 : 1));
    in.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
    if (!in) throw std::runtime_error("read_pgm: truncated pixel data in " + path);

    LoadedImage img;
    img.values.resize(h, w);
    for (long r = 0; r < h; ++r)
        for (long c = 0; c < w; ++c) {
            const std::size_t i = static_cast<std::size_t>(r) * w + c;
            const unsigned v = wide ? (buf[2 * i] << 8) | buf[2 * i + 1] : buf[i]; // big-endian
            img.values(r, c) = static_cast<double>(v) / static_cast<double>(maxval);
        }
    return img;
}

/// 16-bit binary PGM, values clamped to [0, 1] before quantization.
inline void write_pgm16(const std::string& path, const Eigen::MatrixXd& values) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("write_pgm16: cannot open " + path + " for writing");
    out << "P5\n" << values.cols() << " " << values.rows() << "\n65535\n";
    std::vector<std::uint8_t> buf(static_cast<std::size_t>(values.size()) * 2);
    std::size_t i = 0;
    for (Eigen::Index r = 0; r < values.rows(); ++r)
        for (Eigen::Index c = 0; c < values.cols(); ++c) {
            const double x = std::clamp(values(r, c), 0.0, 1.0);
            const unsigned v = static_cast<unsigned>(std::lround(x * 65535.0));
            buf[i++] = static_cast<std::uint8_t>(v >> 8);
            buf[i++] = static_cast<std::uint8_t>(v & 0xff);
        }
    out.write(reinterpret_cast<const char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
    if (!out) throw std::runtime_error("write_pgm16: write failed for " + path);
}

/// Grayscale PNG (8- or 16-bit; color inputs are converted to gray),
/// intensities scaled to [0, 1].
inline LoadedImage read_png(const std::string& path) {
    std::unique_ptr<std::FILE, int (*)(std::FILE*)> fp(std::fopen(path.c_str(), "rb"), &std::fclose);
    if (!fp) throw std::runtime_error("read_png: cannot open " + path);

    png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    png_infop info = png ? png_create_info_struct(png) : nullptr;
    if (!png || !info) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw std::runtime_error("read_png: libpng initialization failed");
    }
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw std::runtime_error("read_png: failed to decode " + path);
    }
    png_init_io(png, fp.get());
    png_read_info(png, info);

    const png_uint_32 w = png_get_image_width(png, info);
    const png_uint_32 h = png_get_image_height(png, info);
    const int color = png_get_color_type(png, info);
    int depth = png_get_bit_depth(png, info);

    if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
    if (color & PNG_COLOR_MASK_COLOR || color == PNG_COLOR_TYPE_PALETTE)
        png_set_rgb_to_gray_fixed(png, 1, -1, -1);
    if (color & PNG_COLOR_MASK_ALPHA) png_set_strip_alpha(png);
    if (depth < 8) png_set_expand_gray_1_2_4_to_8(png);
    png_read_update_info(png, info);
    depth = png_get_bit_depth(png, info);
    const double scale = depth == 16 ? 65535.0 : 255.0;

    std::vector<std::uint8_t> row(png_get_rowbytes(png, info));
    LoadedImage img;
    img.values.resize(h, w);
    for (png_uint_32 r = 0; r < h; ++r) {
        png_read_row(png, row.data(), nullptr);
        for (png_uint_32 c = 0; c < w; ++c) {
            const unsigned v = depth == 16 ? (row[2 * c] << 8) | row[2 * c + 1] : row[c];
            img.values(r, c) = static_cast<double>(v) / scale;
        }
    }
    png_destroy_read_struct(&png, &info, nullptr);
    return img;
}

/// Dispatch on extension (.pgm or .png).
inline LoadedImage read_image(const std::string& path) {
    if (path.size() >= 4) {
        const std::string ext = path.substr(path.size() - 4);
        if (ext == ".pgm") return read_pgm(path);
        if (ext == ".png") return read_png(path);
    }
    throw std::runtime_error("read_image: unsupported file type for " + path + " (expect .pgm or .png)");
}

} // namespace fvg
