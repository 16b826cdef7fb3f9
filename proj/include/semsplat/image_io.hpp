#pragma once

#include <filesystem>

#include "semsplat/image.hpp"

namespace semsplat {

/// 8-bit RGB PNG from a 3-channel [0,1] image (values rounded to the nearest level).
void write_png_rgb8(const std::filesystem::path& path, const ImageF& rgb);
/// Reads an 8-bit PNG into a 3-channel [0,1] image (gray is replicated, alpha dropped).
ImageF read_png_rgb8(const std::filesystem::path& path);

/// 16-bit single-channel PNG.
void write_png_gray16(const std::filesystem::path& path, const Image<std::uint16_t>& img);
Image<std::uint16_t> read_png_gray16(const std::filesystem::path& path);

/// Portable float map, 1 ("Pf") or 3 ("PF") channels, written little-endian.
void write_pfm(const std::filesystem::path& path, const ImageF& img);
ImageF read_pfm(const std::filesystem::path& path);

}  // namespace semsplat
