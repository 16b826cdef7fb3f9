#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "semsplat/errors.hpp"

namespace semsplat {

/// Dense row-major multi-channel image. Pixel (u, v) is column u, row v.
template <typename T>
class Image {
public:
    Image() = default;
    Image(int width, int height, int channels = 1, T fill = T{})
        : width_(width), height_(height), channels_(channels) {
        if (width < 0 || height < 0 || channels < 1) {
            throw InvalidArgument("image dimensions must be non-negative with >= 1 channel");
        }
        data_.assign(static_cast<std::size_t>(width) * height * channels, fill);
    }

    int width() const noexcept { return width_; }
    int height() const noexcept { return height_; }
    int channels() const noexcept { return channels_; }
    std::size_t pixel_count() const noexcept { return static_cast<std::size_t>(width_) * height_; }
    bool empty() const noexcept { return data_.empty(); }

    bool same_shape(const Image& other) const noexcept {
        return width_ == other.width_ && height_ == other.height_ && channels_ == other.channels_;
    }
    template <typename U>
    bool same_extent(const Image<U>& other) const noexcept {
        return width_ == other.width() && height_ == other.height();
    }

    T& operator()(int u, int v, int c = 0) noexcept { return data_[index(u, v, c)]; }
    const T& operator()(int u, int v, int c = 0) const noexcept { return data_[index(u, v, c)]; }

    std::span<T> pixel(int u, int v) noexcept {
        return {data_.data() + index(u, v, 0), static_cast<std::size_t>(channels_)};
    }
    std::span<const T> pixel(int u, int v) const noexcept {
        return {data_.data() + index(u, v, 0), static_cast<std::size_t>(channels_)};
    }

    std::vector<T>& data() noexcept { return data_; }
    const std::vector<T>& data() const noexcept { return data_; }

    bool operator==(const Image&) const = default;

private:
    std::size_t index(int u, int v, int c) const noexcept {
        return (static_cast<std::size_t>(v) * width_ + u) * channels_ + c;
    }

    int width_ = 0;
    int height_ = 0;
    int channels_ = 1;
    std::vector<T> data_;
};

using ImageF = Image<double>;
using LabelImage = Image<std::uint16_t>;

}  // namespace semsplat
