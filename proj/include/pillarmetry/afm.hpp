#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "pillarmetry/errors.hpp"
#include "pillarmetry/heightmap.hpp"
#include "pillarmetry/segment.hpp"
#include "pillarmetry/stats.hpp"

namespace pillarmetry {

/// z = a*x + b*y + c over nm coordinates (point centers).
struct PlaneFit {
    double a = 0.0;
    double b = 0.0;
    double c = 0.0;

    double at(double x_nm, double y_nm) const noexcept { return a * x_nm + b * y_nm + c; }
};

/// Height map with the substrate plane removed and the base region pinned so
/// its median height is exactly zero.
struct LeveledMap {
    HeightMap map;
    PlaneFit plane;
    BinaryMask base_mask;  // same grid as the map (width = cols, height = rows)
};

struct BaseFlatness {
    double peak_to_peak_nm = 0.0;
    double p1_p99_nm = 0.0;  // robust spread, 1st to 99th percentile
};

/// Per-structure height summary. `height_nm` is the median over the eroded
/// inner core of the footprint; `center_height_nm` is the single most
/// interior point, the closest analogue of a line profile through the
/// structure center. Both are reported so they can be compared.
struct HeightMeasurement {
    int component_id = 0;
    std::optional<int> grid_i;
    std::optional<int> grid_j;
    double height_nm = 0.0;
    double center_height_nm = 0.0;
    double top_flatness_pp_nm = 0.0;
    long long point_count = 0;
    double apparent_area_nm2 = 0.0;  // footprint points x point_scale^2; tip shape not modeled
    double centroid_x_nm = 0.0;
    double centroid_y_nm = 0.0;
    bool grid_conflict = false;
};

/// Least-squares plane over the masked points. Centered normal equations;
/// degenerate support (all points collinear) is a FitError.
inline PlaneFit fit_plane(const HeightMap& map, const BinaryMask& mask) {
    map.validate();
    if (mask.width != map.cols || mask.height != map.rows)
        throw InvalidArgumentError("mask dimensions do not match the height map");

    const double s = map.pixel_scale_nm;
    double n = 0.0, mx = 0.0, my = 0.0, mz = 0.0;
    for (int r = 0; r < map.rows; ++r) {
        for (int c = 0; c < map.cols; ++c) {
            if (!mask.at(c, r)) continue;
            n += 1.0;
            mx += (c + 0.5) * s;
            my += (r + 0.5) * s;
            mz += map.at(r, c);
        }
    }
    if (n < 3.0) throw FitError("plane fit needs at least 3 supporting points");
    mx /= n;
    my /= n;
    mz /= n;

    double sxx = 0.0, syy = 0.0, sxy = 0.0, sxz = 0.0, syz = 0.0;
    for (int r = 0; r < map.rows; ++r) {
        for (int c = 0; c < map.cols; ++c) {
            if (!mask.at(c, r)) continue;
            const double dx = (c + 0.5) * s - mx;
            const double dy = (r + 0.5) * s - my;
            const double dz = map.at(r, c) - mz;
            sxx += dx * dx;
            syy += dy * dy;
            sxy += dx * dy;
            sxz += dx * dz;
            syz += dy * dz;
        }
    }
    const double det = sxx * syy - sxy * sxy;
    const double scale = std::max(sxx, syy);
    if (!(det > 1e-12 * std::max(1.0, scale * scale)))
        throw FitError("plane fit support is degenerate (collinear points)");

    PlaneFit p;
    p.a = (syy * sxz - sxy * syz) / det;
    p.b = (sxx * syz - sxy * sxz) / det;
    p.c = mz - p.a * mx - p.b * my;
    return p;
}

/// Base mask heuristic: after a provisional all-points plane fit, keep the
/// points in the bottom quarter of the residual range; refit on those and
/// threshold once more.
inline BinaryMask auto_base_mask(const HeightMap& map) {
    map.validate();
    BinaryMask mask = BinaryMask::zeros(map.cols, map.rows);
    std::fill(mask.data.begin(), mask.data.end(), std::uint8_t{1});

    for (int pass = 0; pass < 2; ++pass) {
        const PlaneFit p = fit_plane(map, mask);
        double lo = std::numeric_limits<double>::infinity();
        double hi = -std::numeric_limits<double>::infinity();
        const double s = map.pixel_scale_nm;
        for (int r = 0; r < map.rows; ++r) {
            for (int c = 0; c < map.cols; ++c) {
                const double res = map.at(r, c) - p.at((c + 0.5) * s, (r + 0.5) * s);
                lo = std::min(lo, res);
                hi = std::max(hi, res);
            }
        }
        const double cut = lo + 0.25 * (hi - lo);
        for (int r = 0; r < map.rows; ++r) {
            for (int c = 0; c < map.cols; ++c) {
                const double res = map.at(r, c) - p.at((c + 0.5) * s, (r + 0.5) * s);
                mask.set(c, r, res <= cut);
            }
        }
    }
    return mask;
}

/// Subtracts the fitted plane, then shifts so the base median is exactly 0.
inline LeveledMap level_plane(const HeightMap& map, const BinaryMask& base_mask) {
    map.validate();
    if (base_mask.width != map.cols || base_mask.height != map.rows)
        throw InvalidArgumentError("base mask dimensions do not match the height map");
    std::size_t base_points = 0;
    for (auto v : base_mask.data) base_points += v ? 1 : 0;
    if (base_points * 10 < base_mask.data.size())
        throw InvalidArgumentError("base mask must cover at least 10% of the map");

    PlaneFit p = fit_plane(map, base_mask);

    LeveledMap out;
    out.map = map;
    out.base_mask = base_mask;
    const double s = map.pixel_scale_nm;
    std::vector<double> base_res;
    base_res.reserve(base_points);
    for (int r = 0; r < map.rows; ++r) {
        for (int c = 0; c < map.cols; ++c) {
            const double res = map.at(r, c) - p.at((c + 0.5) * s, (r + 0.5) * s);
            out.map.at(r, c) = res;
            if (base_mask.at(c, r)) base_res.push_back(res);
        }
    }
    const double shift = median_of(base_res);
    for (auto& v : out.map.heights) v -= shift;
    p.c += shift;
    out.plane = p;
    return out;
}

inline BaseFlatness base_flatness(const LeveledMap& leveled) {
    std::vector<double> base;
    for (int r = 0; r < leveled.map.rows; ++r)
        for (int c = 0; c < leveled.map.cols; ++c)
            if (leveled.base_mask.at(c, r)) base.push_back(leveled.map.at(r, c));
    if (base.empty()) throw InvalidArgumentError("base mask is empty");

    BaseFlatness f;
    const auto [lo, hi] = std::minmax_element(base.begin(), base.end());
    f.peak_to_peak_nm = *hi - *lo;
    f.p1_p99_nm = percentile_of(base, 99.0) - percentile_of(base, 1.0);
    return f;
}

inline constexpr double kDetectHeightFraction = 0.5;
inline constexpr double kDetectPercentile = 99.9;

/// Detection threshold for structure footprints: half of the (p99.9)
/// leveled height, robust against isolated spikes.
inline double default_detect_z(const LeveledMap& leveled) {
    return kDetectHeightFraction * percentile_of(leveled.map.heights, kDetectPercentile);
}

/// Labels points above `z_nm` into structure footprints (8-connected),
/// dropping specks smaller than min_points.
inline std::vector<std::int32_t> detect_structures(const LeveledMap& leveled, double z_nm,
                                                   int* count, long long min_points = 5) {
    BinaryMask fg = BinaryMask::zeros(leveled.map.cols, leveled.map.rows);
    for (int r = 0; r < leveled.map.rows; ++r)
        for (int c = 0; c < leveled.map.cols; ++c)
            fg.set(c, r, leveled.map.at(r, c) > z_nm);

    int raw_count = 0;
    std::vector<std::int32_t> labels = label_components(fg, 8, &raw_count);
    // drop tiny components, then renumber in raster order of first pixel
    std::vector<long long> sizes(static_cast<std::size_t>(raw_count) + 1, 0);
    for (auto l : labels) ++sizes[static_cast<std::size_t>(l)];
    std::vector<std::int32_t> remap(static_cast<std::size_t>(raw_count) + 1, 0);
    std::int32_t next = 0;
    for (std::int32_t l = 1; l <= raw_count; ++l)
        if (sizes[static_cast<std::size_t>(l)] >= min_points) remap[static_cast<std::size_t>(l)] = ++next;
    for (auto& l : labels) l = remap[static_cast<std::size_t>(l)];
    *count = next;
    return labels;
}

/// Median height over the eroded core of each footprint: a point belongs to
/// the core when its distance-to-edge exceeds half the footprint's maximum
/// depth (the "inner 50%"), which keeps the statistic away from the
/// anti-aliased rim.
inline std::vector<HeightMeasurement> extract_heights(const LeveledMap& leveled,
                                                      const std::vector<std::int32_t>& labels,
                                                      int count) {
    const int w = leveled.map.cols, h = leveled.map.rows;
    if (labels.size() != static_cast<std::size_t>(w) * h)
        throw InvalidArgumentError("label grid does not match the map");
    const double s = leveled.map.pixel_scale_nm;

    // multi-source BFS distance-to-edge per component (4-neighbor steps)
    std::vector<std::int32_t> dist(labels.size(), 0);
    std::vector<std::size_t> queue;
    auto idx = [&](int x, int y) { return static_cast<std::size_t>(y) * w + x; };
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            const std::int32_t l = labels[idx(x, y)];
            if (l == 0) continue;
            bool edge = x == 0 || y == 0 || x == w - 1 || y == h - 1;
            if (!edge)
                edge = labels[idx(x - 1, y)] != l || labels[idx(x + 1, y)] != l ||
                       labels[idx(x, y - 1)] != l || labels[idx(x, y + 1)] != l;
            if (edge) {
                dist[idx(x, y)] = 1;
                queue.push_back(idx(x, y));
            }
        }
    }
    const int dx4[] = {1, -1, 0, 0};
    const int dy4[] = {0, 0, 1, -1};
    for (std::size_t qi = 0; qi < queue.size(); ++qi) {
        const std::size_t p = queue[qi];
        const int x = static_cast<int>(p % w), y = static_cast<int>(p / w);
        for (int d = 0; d < 4; ++d) {
            const int nx = x + dx4[d], ny = y + dy4[d];
            if (nx < 0 || ny < 0 || nx >= w || ny >= h) continue;
            const std::size_t np = idx(nx, ny);
            if (labels[np] == labels[p] && dist[np] == 0) {
                dist[np] = dist[p] + 1;
                queue.push_back(np);
            }
        }
    }

    struct Agg {
        std::int32_t max_depth = 0;
        long long points = 0;
        double sum_x = 0.0, sum_y = 0.0;
    };
    std::vector<Agg> agg(static_cast<std::size_t>(count));
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            const std::int32_t l = labels[idx(x, y)];
            if (l == 0) continue;
            Agg& a = agg[static_cast<std::size_t>(l - 1)];
            a.max_depth = std::max(a.max_depth, dist[idx(x, y)]);
            ++a.points;
            a.sum_x += x;
            a.sum_y += y;
        }
    }

    std::vector<std::vector<double>> core(static_cast<std::size_t>(count));
    std::vector<std::pair<std::int32_t, double>> center(static_cast<std::size_t>(count),
                                                        {0, 0.0});
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            const std::int32_t l = labels[idx(x, y)];
            if (l == 0) continue;
            const std::size_t k = static_cast<std::size_t>(l - 1);
            const std::int32_t d = dist[idx(x, y)];
            if (2 * d > agg[k].max_depth) core[k].push_back(leveled.map.at(y, x));
            if (d > center[k].first) center[k] = {d, leveled.map.at(y, x)};
        }
    }

    std::vector<HeightMeasurement> out;
    out.reserve(static_cast<std::size_t>(count));
    for (int l = 1; l <= count; ++l) {
        const std::size_t k = static_cast<std::size_t>(l - 1);
        if (agg[k].points == 0 || core[k].empty()) continue;  // skipped: nothing to measure
        HeightMeasurement m;
        m.component_id = l;
        m.height_nm = median_of(core[k]);
        m.center_height_nm = center[k].second;
        const auto [lo, hi] = std::minmax_element(core[k].begin(), core[k].end());
        m.top_flatness_pp_nm = *hi - *lo;
        m.point_count = agg[k].points;
        m.apparent_area_nm2 = static_cast<double>(agg[k].points) * s * s;
        m.centroid_x_nm = (agg[k].sum_x / static_cast<double>(agg[k].points) + 0.5) * s;
        m.centroid_y_nm = (agg[k].sum_y / static_cast<double>(agg[k].points) + 0.5) * s;
        out.push_back(m);
    }
    return out;
}

inline void associate_grid_heights(std::vector<HeightMeasurement>& measurements, double pitch_nm,
                                   double origin_x_nm, double origin_y_nm, int rows, int cols) {
    if (!(pitch_nm > 0.0)) throw InvalidArgumentError("pitch must be > 0");
    if (rows < 1 || cols < 1) throw InvalidArgumentError("grid must be at least 1x1");
    std::vector<int> hits(static_cast<std::size_t>(rows) * cols, 0);
    for (auto& m : measurements) {
        m.grid_i.reset();
        m.grid_j.reset();
        m.grid_conflict = false;
        const long long j = std::llround((m.centroid_x_nm - origin_x_nm) / pitch_nm);
        const long long i = std::llround((m.centroid_y_nm - origin_y_nm) / pitch_nm);
        if (i < 0 || j < 0 || i >= rows || j >= cols) continue;
        m.grid_i = static_cast<int>(i);
        m.grid_j = static_cast<int>(j);
        ++hits[static_cast<std::size_t>(i) * cols + static_cast<std::size_t>(j)];
    }
    for (auto& m : measurements)
        if (m.grid_i && hits[static_cast<std::size_t>(*m.grid_i) * cols +
                             static_cast<std::size_t>(*m.grid_j)] > 1)
            m.grid_conflict = true;
}

/// Rectangular window in nm, [x0, x1) x [y0, y1).
struct WindowNm {
    double x0 = 0.0, y0 = 0.0, x1 = 0.0, y1 = 0.0;
};

/// Counts points above z in each window; a point belongs to a window when
/// its center falls inside. z above every structure simply yields zeros.
inline std::vector<double> area_above_threshold(const LeveledMap& leveled, double z_nm,
                                                const std::vector<WindowNm>& windows) {
    if (!(z_nm > 0.0) || !std::isfinite(z_nm))
        throw InvalidArgumentError("height threshold must be finite and > 0");
    const double s = leveled.map.pixel_scale_nm;
    std::vector<double> areas(windows.size(), 0.0);
    for (std::size_t wi = 0; wi < windows.size(); ++wi) {
        const WindowNm& win = windows[wi];
        if (!(win.x1 > win.x0) || !(win.y1 > win.y0))
            throw InvalidArgumentError("window must have positive extent");
        const int c0 = std::max(0, static_cast<int>(std::floor(win.x0 / s - 0.5)));
        const int r0 = std::max(0, static_cast<int>(std::floor(win.y0 / s - 0.5)));
        const int c1 = std::min(leveled.map.cols - 1, static_cast<int>(std::ceil(win.x1 / s)));
        const int r1 = std::min(leveled.map.rows - 1, static_cast<int>(std::ceil(win.y1 / s)));
        long long count = 0;
        for (int r = r0; r <= r1; ++r) {
            for (int c = c0; c <= c1; ++c) {
                const double x = (c + 0.5) * s, y = (r + 0.5) * s;
                if (x < win.x0 || x >= win.x1 || y < win.y0 || y >= win.y1) continue;
                if (leveled.map.at(r, c) > z_nm) ++count;
            }
        }
        areas[wi] = static_cast<double>(count) * s * s;
    }
    return areas;
}

}  // namespace pillarmetry
