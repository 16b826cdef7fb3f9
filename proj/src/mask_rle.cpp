#include "semsplat/mask_rle.hpp"

#include <numeric>
#include <string>

namespace semsplat {

RleMask RleMask::encode(const Image<std::uint8_t>& mask) {
    RleMask out{mask.width(), mask.height(), {}};
    bool current = false;
    std::uint32_t run = 0;
    for (std::uint8_t px : mask.data()) {
        const bool set = px != 0;
        if (set != current) {
            out.runs.push_back(run);
            run = 0;
            current = set;
        }
        ++run;
    }
    out.runs.push_back(run);
    return out;
}

void RleMask::validate() const {
    if (width <= 0 || height <= 0) throw InvalidArgument("RLE mask has a non-positive size");
    const std::uint64_t total = std::accumulate(runs.begin(), runs.end(), std::uint64_t{0});
    if (total != static_cast<std::uint64_t>(width) * height) {
        throw InvalidArgument("RLE runs cover " + std::to_string(total) + " pixels, expected " +
                              std::to_string(static_cast<std::uint64_t>(width) * height));
    }
}

Image<std::uint8_t> RleMask::decode() const {
    validate();
    Image<std::uint8_t> mask(width, height, 1);
    for_each_pixel([&](int u, int v) { mask(u, v) = 1; });
    return mask;
}

std::size_t RleMask::pixel_count() const {
    std::size_t n = 0;
    for (std::size_t r = 1; r < runs.size(); r += 2) n += runs[r];
    return n;
}

}  // namespace semsplat
