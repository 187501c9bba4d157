#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "pillarmetry/errors.hpp"

namespace pillarmetry {

/// Row-major grayscale raster, 8- or 16-bit. Samples are stored widened to
/// uint16 regardless of depth; the file layer narrows on write.
struct GrayImage {
    int width = 0;
    int height = 0;
    int bit_depth = 8;  // 8 or 16
    std::vector<std::uint16_t> pixels;

    static GrayImage zeros(int w, int h, int depth = 8) {
        GrayImage img;
        img.width = w;
        img.height = h;
        img.bit_depth = depth;
        img.pixels.assign(static_cast<std::size_t>(w) * static_cast<std::size_t>(h), 0);
        img.validate();
        return img;
    }

    int maxval() const noexcept { return bit_depth == 8 ? 255 : 65535; }

    std::size_t index(int x, int y) const noexcept {
        return static_cast<std::size_t>(y) * static_cast<std::size_t>(width) + static_cast<std::size_t>(x);
    }

    std::uint16_t at(int x, int y) const noexcept { return pixels[index(x, y)]; }
    std::uint16_t& at(int x, int y) noexcept { return pixels[index(x, y)]; }

    void validate() const {
        if (width < 1 || height < 1)
            throw InvalidArgumentError("image dimensions must be >= 1");
        if (bit_depth != 8 && bit_depth != 16)
            throw InvalidArgumentError("image bit depth must be 8 or 16");
        if (pixels.size() != static_cast<std::size_t>(width) * static_cast<std::size_t>(height))
            throw InvalidArgumentError("pixel buffer size does not match dimensions");
        const int mv = maxval();
        for (std::uint16_t p : pixels)
            if (p > mv) throw InvalidArgumentError("pixel value exceeds maxval for bit depth");
    }
};

/// Physical pixel scale of an image, nm per pixel (isotropic).
struct Calibration {
    double pixel_scale_nm = 1.0;
    std::string source;

    void validate() const {
        if (!(pixel_scale_nm > 0.0))
            throw InvalidArgumentError("pixel_scale_nm must be > 0");
    }
};

}  // namespace pillarmetry
