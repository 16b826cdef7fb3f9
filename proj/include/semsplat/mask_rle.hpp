#pragma once

#include <cstdint>
#include <vector>

#include "semsplat/image.hpp"

namespace semsplat {

/// Binary H x W mask as alternating run lengths in row-major order. The first run
/// counts zeros (and may be 0), the second ones, and so on.
struct RleMask {
    int width = 0;
    int height = 0;
    std::vector<std::uint32_t> runs;

    static RleMask encode(const Image<std::uint8_t>& mask);
    /// Throws InvalidArgument when the runs do not tile exactly width * height pixels.
    Image<std::uint8_t> decode() const;
    void validate() const;

    std::size_t pixel_count() const;
    /// Calls fn(u, v) for every set pixel in row-major order.
    template <typename Fn>
    void for_each_pixel(Fn&& fn) const {
        std::size_t pos = 0;
        for (std::size_t r = 0; r < runs.size(); ++r) {
            if (r % 2 == 1) {
                for (std::size_t k = pos; k < pos + runs[r]; ++k) {
                    fn(static_cast<int>(k % width), static_cast<int>(k / width));
                }
            }
            pos += runs[r];
        }
    }

    bool operator==(const RleMask&) const = default;
};

}  // namespace semsplat
