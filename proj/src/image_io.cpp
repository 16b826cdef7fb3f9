#include "semsplat/image_io.hpp"

#include <png.h>

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <memory>
#include <sstream>
#include <vector>

namespace semsplat {

namespace {

struct FileCloser {
    void operator()(std::FILE* f) const noexcept { std::fclose(f); }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

FilePtr open_file(const std::filesystem::path& path, const char* mode) {
    FilePtr f(std::fopen(path.c_str(), mode));
    if (!f) throw LoadError(path.string(), "cannot open file");
    return f;
}

[[noreturn]] void png_error_handler(png_structp png, png_const_charp msg) {
    auto* what = static_cast<std::string*>(png_get_error_ptr(png));
    *what = msg;
    png_longjmp(png, 1);
}

void png_warning_handler(png_structp, png_const_charp) {}

// Row buffers are filled by the caller; bit_depth 8 or 16, color_type RGB or GRAY.
void write_png(const std::filesystem::path& path, int width, int height, int bit_depth, int color_type,
               std::vector<std::vector<png_byte>>& rows) {
    auto file = open_file(path, "wb");
    std::string error;
    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, &error, png_error_handler, png_warning_handler);
    png_infop info = png ? png_create_info_struct(png) : nullptr;
    if (!png || !info) {
        png_destroy_write_struct(&png, nullptr);
        throw LoadError(path.string(), "libpng initialisation failed");
    }
    std::vector<png_bytep> pointers(rows.size());
    for (std::size_t i = 0; i < rows.size(); ++i) pointers[i] = rows[i].data();
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_write_struct(&png, &info);
        throw LoadError(path.string(), "png write failed: " + error);
    }
    png_init_io(png, file.get());
    png_set_IHDR(png, info, width, height, bit_depth, color_type, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
                 PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);
    png_write_image(png, pointers.data());
    png_write_end(png, nullptr);
    png_destroy_write_struct(&png, &info);
}

struct PngData {
    int width = 0;
    int height = 0;
    int channels = 0;
    int bit_depth = 0;
    std::vector<std::vector<png_byte>> rows;
};

PngData read_png(const std::filesystem::path& path) {
    auto file = open_file(path, "rb");
    png_byte header[8];
    if (std::fread(header, 1, 8, file.get()) != 8 || png_sig_cmp(header, 0, 8) != 0) {
        throw LoadError(path.string(), "not a PNG file");
    }
    std::string error;
    png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, &error, png_error_handler, png_warning_handler);
    png_infop info = png ? png_create_info_struct(png) : nullptr;
    if (!png || !info) {
        png_destroy_read_struct(&png, nullptr, nullptr);
        throw LoadError(path.string(), "libpng initialisation failed");
    }
    PngData out;
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw LoadError(path.string(), "png decode failed: " + error);
    }
    png_init_io(png, file.get());
    png_set_sig_bytes(png, 8);
    png_read_info(png, info);
    const int color_type = png_get_color_type(png, info);
    if (color_type == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
    if (color_type == PNG_COLOR_TYPE_GRAY && png_get_bit_depth(png, info) < 8) png_set_expand_gray_1_2_4_to_8(png);
    if (png_get_bit_depth(png, info) == 16 && std::endian::native == std::endian::little) png_set_swap(png);
    png_read_update_info(png, info);

    out.width = static_cast<int>(png_get_image_width(png, info));
    out.height = static_cast<int>(png_get_image_height(png, info));
    out.channels = png_get_channels(png, info);
    out.bit_depth = png_get_bit_depth(png, info);
    const std::size_t rowbytes = png_get_rowbytes(png, info);
    out.rows.assign(out.height, std::vector<png_byte>(rowbytes));
    std::vector<png_bytep> pointers(out.height);
    for (int i = 0; i < out.height; ++i) pointers[i] = out.rows[i].data();
    png_read_image(png, pointers.data());
    png_read_end(png, nullptr);
    png_destroy_read_struct(&png, &info, nullptr);
    return out;
}

}  // namespace

void write_png_rgb8(const std::filesystem::path& path, const ImageF& rgb) {
    if (rgb.channels() != 3) throw InvalidArgument("write_png_rgb8 expects 3 channels");
    std::vector<std::vector<png_byte>> rows(rgb.height(), std::vector<png_byte>(rgb.width() * 3));
    for (int v = 0; v < rgb.height(); ++v) {
        for (int u = 0; u < rgb.width(); ++u) {
            for (int c = 0; c < 3; ++c) {
                const double x = std::clamp(rgb(u, v, c), 0.0, 1.0);
                rows[v][u * 3 + c] = static_cast<png_byte>(std::lround(x * 255.0));
            }
        }
    }
    write_png(path, rgb.width(), rgb.height(), 8, PNG_COLOR_TYPE_RGB, rows);
}

ImageF read_png_rgb8(const std::filesystem::path& path) {
    PngData png = read_png(path);
    if (png.bit_depth != 8) throw LoadError(path.string(), "expected an 8-bit PNG");
    ImageF img(png.width, png.height, 3);
    for (int v = 0; v < png.height; ++v) {
        for (int u = 0; u < png.width; ++u) {
            for (int c = 0; c < 3; ++c) {
                const int src = png.channels >= 3 ? c : 0;
                img(u, v, c) = png.rows[v][u * png.channels + src] / 255.0;
            }
        }
    }
    return img;
}

void write_png_gray16(const std::filesystem::path& path, const Image<std::uint16_t>& img) {
    if (img.channels() != 1) throw InvalidArgument("write_png_gray16 expects 1 channel");
    std::vector<std::vector<png_byte>> rows(img.height(), std::vector<png_byte>(img.width() * 2));
    for (int v = 0; v < img.height(); ++v) {
        for (int u = 0; u < img.width(); ++u) {
            rows[v][u * 2] = static_cast<png_byte>(img(u, v) >> 8);  // PNG is big-endian
            rows[v][u * 2 + 1] = static_cast<png_byte>(img(u, v) & 0xff);
        }
    }
    write_png(path, img.width(), img.height(), 16, PNG_COLOR_TYPE_GRAY, rows);
}

Image<std::uint16_t> read_png_gray16(const std::filesystem::path& path) {
    PngData png = read_png(path);
    if (png.bit_depth != 16 || png.channels != 1) throw LoadError(path.string(), "expected a 16-bit single-channel PNG");
    Image<std::uint16_t> img(png.width, png.height, 1);
    for (int v = 0; v < png.height; ++v) {
        for (int u = 0; u < png.width; ++u) {
            std::uint16_t x;
            std::memcpy(&x, png.rows[v].data() + u * 2, 2);
            img(u, v) = x;
        }
    }
    return img;
}

// PFM rows run bottom to top; a negative scale marks little-endian data.
void write_pfm(const std::filesystem::path& path, const ImageF& img) {
    if (img.channels() != 1 && img.channels() != 3) throw InvalidArgument("PFM supports 1 or 3 channels");
    std::ofstream out(path, std::ios::binary);
    if (!out) throw LoadError(path.string(), "cannot open file for writing");
    out << (img.channels() == 3 ? "PF" : "Pf") << "\n" << img.width() << " " << img.height() << "\n-1.0\n";
    std::vector<float> row(static_cast<std::size_t>(img.width()) * img.channels());
    for (int v = img.height() - 1; v >= 0; --v) {
        for (int u = 0; u < img.width(); ++u) {
            for (int c = 0; c < img.channels(); ++c) row[u * img.channels() + c] = static_cast<float>(img(u, v, c));
        }
        out.write(reinterpret_cast<const char*>(row.data()), static_cast<std::streamsize>(row.size() * sizeof(float)));
    }
}

ImageF read_pfm(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw LoadError(path.string(), "cannot open file");
    std::string magic;
    int width = 0, height = 0;
    double scale = 0.0;
    in >> magic >> width >> height >> scale;
    in.get();
    if (!in || (magic != "PF" && magic != "Pf") || width <= 0 || height <= 0 || scale == 0.0) {
        throw LoadError(path.string(), "malformed PFM header");
    }
    const int channels = magic == "PF" ? 3 : 1;
    const bool little = scale < 0.0;
    ImageF img(width, height, channels);
    std::vector<float> row(static_cast<std::size_t>(width) * channels);
    for (int v = height - 1; v >= 0; --v) {
        if (!in.read(reinterpret_cast<char*>(row.data()), static_cast<std::streamsize>(row.size() * sizeof(float)))) {
            throw LoadError(path.string(), "truncated PFM data");
        }
        for (std::size_t i = 0; i < row.size(); ++i) {
            if (little != (std::endian::native == std::endian::little)) {
                std::uint32_t bits;
                std::memcpy(&bits, &row[i], 4);
                bits = __builtin_bswap32(bits);
                std::memcpy(&row[i], &bits, 4);
            }
        }
        for (int u = 0; u < width; ++u) {
            for (int c = 0; c < channels; ++c) img(u, v, c) = row[u * channels + c];
        }
    }
    return img;
}

}  // namespace semsplat
