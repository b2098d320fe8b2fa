// SPDX-License-Identifier: Apache-2.0

#include "strdp/image_io.hpp"

#include <png.h>

#include <cerrno>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <memory>
#include <vector>

#include "strdp/errors.hpp"

namespace strdp {

namespace {

struct FileCloser {
    void operator()(std::FILE* f) const {
        if (f) {
            std::fclose(f);
        }
    }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

[[noreturn]] void png_error_fn(png_structp png, png_const_charp msg) {
    (void)png;
    throw FormatError(std::string("png: ") + msg);
}

void png_warn_fn(png_structp, png_const_charp) {}

struct ReadState {
    png_structp png = nullptr;
    png_infop info = nullptr;
    ~ReadState() { png_destroy_read_struct(&png, &info, nullptr); }
};

struct WriteState {
    png_structp png = nullptr;
    png_infop info = nullptr;
    ~WriteState() { png_destroy_write_struct(&png, &info); }
};

} // namespace

Tensor3<double> read_image(const std::string& path) {
    FilePtr f(std::fopen(path.c_str(), "rb"));
    if (!f) {
        throw IoError("cannot open " + path + ": " + std::strerror(errno));
    }
    unsigned char sig[8];
    if (std::fread(sig, 1, 8, f.get()) != 8 || png_sig_cmp(sig, 0, 8) != 0) {
        throw FormatError(path + ": not a PNG file");
    }

    ReadState st;
    st.png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, png_error_fn, png_warn_fn);
    if (!st.png) {
        throw IoError("libpng initialization failed");
    }
    st.info = png_create_info_struct(st.png);
    if (!st.info) {
        throw IoError("libpng initialization failed");
    }

    png_init_io(st.png, f.get());
    png_set_sig_bytes(st.png, 8);
    png_read_info(st.png, st.info);

    const png_byte depth = png_get_bit_depth(st.png, st.info);
    if (depth == 16) {
        throw FormatError(path + ": 16-bit PNG not supported, re-encode as 8-bit");
    }
    const png_byte color = png_get_color_type(st.png, st.info);
    if (color == PNG_COLOR_TYPE_PALETTE) {
        png_set_palette_to_rgb(st.png);
    }
    if (color == PNG_COLOR_TYPE_GRAY || color == PNG_COLOR_TYPE_GRAY_ALPHA) {
        if (depth < 8) {
            png_set_expand_gray_1_2_4_to_8(st.png);
        }
        png_set_gray_to_rgb(st.png);
    }
    if (png_get_valid(st.png, st.info, PNG_INFO_tRNS)) {
        png_set_tRNS_to_alpha(st.png);
    }
    png_set_strip_alpha(st.png);
    png_read_update_info(st.png, st.info);

    const png_uint_32 h = png_get_image_height(st.png, st.info);
    const png_uint_32 w = png_get_image_width(st.png, st.info);
    if (png_get_channels(st.png, st.info) != 3) {
        throw FormatError(path + ": unsupported PNG layout");
    }

    std::vector<unsigned char> data(static_cast<std::size_t>(h) * w * 3);
    std::vector<png_bytep> rows(h);
    for (png_uint_32 y = 0; y < h; ++y) {
        rows[y] = data.data() + static_cast<std::size_t>(y) * w * 3;
    }
    png_read_image(st.png, rows.data());
    png_read_end(st.png, nullptr);

    Tensor3<double> img(3, static_cast<Eigen::Index>(h), static_cast<Eigen::Index>(w));
    for (png_uint_32 y = 0; y < h; ++y) {
        const unsigned char* row = rows[y];
        for (png_uint_32 x = 0; x < w; ++x) {
            for (int c = 0; c < 3; ++c) {
                img(c, static_cast<Eigen::Index>(y), static_cast<Eigen::Index>(x)) =
                    row[x * 3 + c] / 255.0;
            }
        }
    }
    return img;
}

void write_image(const std::string& path, const Tensor3<double>& image) {
    if (image.channels() != 3 || image.pixels() < 1) {
        throw ShapeError("write_image: expected a non-empty 3xHxW image");
    }
    FilePtr f(std::fopen(path.c_str(), "wb"));
    if (!f) {
        throw IoError("cannot open " + path + " for writing: " + std::strerror(errno));
    }

    WriteState st;
    st.png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, png_error_fn, png_warn_fn);
    if (!st.png) {
        throw IoError("libpng initialization failed");
    }
    st.info = png_create_info_struct(st.png);
    if (!st.info) {
        throw IoError("libpng initialization failed");
    }

    png_init_io(st.png, f.get());
    png_set_compression_level(st.png, 6);
    png_set_filter(st.png, 0, PNG_ALL_FILTERS);
    png_set_IHDR(st.png, st.info, static_cast<png_uint_32>(image.width()),
                 static_cast<png_uint_32>(image.height()), 8, PNG_COLOR_TYPE_RGB,
                 PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_write_info(st.png, st.info);

    std::vector<unsigned char> row(static_cast<std::size_t>(image.width()) * 3);
    for (Eigen::Index y = 0; y < image.height(); ++y) {
        for (Eigen::Index x = 0; x < image.width(); ++x) {
            for (int c = 0; c < 3; ++c) {
                const double v = std::clamp(image(c, y, x), 0.0, 1.0);
                row[static_cast<std::size_t>(x) * 3 + static_cast<std::size_t>(c)] =
                    static_cast<unsigned char>(std::lround(v * 255.0));
            }
        }
        png_write_row(st.png, row.data());
    }
    png_write_end(st.png, st.info);
    if (std::fflush(f.get()) != 0) {
        throw IoError("flush failed for " + path + ": " + std::strerror(errno));
    }
}

} // namespace strdp
