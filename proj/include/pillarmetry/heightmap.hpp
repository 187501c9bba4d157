#pragma once

#include <cmath>
#include <vector>

#include "pillarmetry/errors.hpp"

namespace pillarmetry {

/// 2-D physical height raster in nm, row-major, with an isotropic lateral
/// point spacing.
struct HeightMap {
    int rows = 0;
    int cols = 0;
    double pixel_scale_nm = 1.0;  // lateral nm per point
    std::vector<double> heights;

    static HeightMap zeros(int rows, int cols, double pixel_scale_nm) {
        HeightMap m;
        m.rows = rows;
        m.cols = cols;
        m.pixel_scale_nm = pixel_scale_nm;
        m.heights.assign(static_cast<std::size_t>(rows) * static_cast<std::size_t>(cols), 0.0);
        m.validate();
        return m;
    }

    std::size_t index(int r, int c) const noexcept {
        return static_cast<std::size_t>(r) * static_cast<std::size_t>(cols) + static_cast<std::size_t>(c);
    }

    double at(int r, int c) const noexcept { return heights[index(r, c)]; }
    double& at(int r, int c) noexcept { return heights[index(r, c)]; }

    std::size_t size() const noexcept { return heights.size(); }

    void validate() const {
        if (rows < 1 || cols < 1)
            throw InvalidArgumentError("height map dimensions must be >= 1");
        if (!(pixel_scale_nm > 0.0))
            throw InvalidArgumentError("pixel_scale_nm must be > 0");
        if (heights.size() != static_cast<std::size_t>(rows) * static_cast<std::size_t>(cols))
            throw InvalidArgumentError("height buffer size does not match dimensions");
        for (double h : heights)
            if (!std::isfinite(h)) throw InvalidArgumentError("height map contains non-finite value");
    }
};

}  // namespace pillarmetry
