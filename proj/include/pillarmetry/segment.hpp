#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "pillarmetry/errors.hpp"
#include "pillarmetry/image.hpp"

namespace pillarmetry {

/// Boolean raster with the same layout as GrayImage.
struct BinaryMask {
    int width = 0;
    int height = 0;
    std::vector<std::uint8_t> data;

    static BinaryMask zeros(int w, int h) {
        if (w < 1 || h < 1) throw InvalidArgumentError("mask dimensions must be >= 1");
        BinaryMask m;
        m.width = w;
        m.height = h;
        m.data.assign(static_cast<std::size_t>(w) * static_cast<std::size_t>(h), 0);
        return m;
    }

    std::size_t index(int x, int y) const noexcept {
        return static_cast<std::size_t>(y) * static_cast<std::size_t>(width) + static_cast<std::size_t>(x);
    }
    bool at(int x, int y) const noexcept { return data[index(x, y)] != 0; }
    void set(int x, int y, bool v) noexcept { data[index(x, y)] = v ? 1 : 0; }
};

struct SegmentationConfig {
    enum class ThresholdMode { Fixed, Otsu, TiledOtsu };
    enum class BorderPolicy { ExcludeTouching, Include };

    ThresholdMode threshold_mode = ThresholdMode::Otsu;
    int fixed_level = 128;  // used by Fixed mode
    int tile_px = 64;       // used by TiledOtsu mode
    int connectivity = 8;
    double min_area_nm2 = 0.0;
    double max_area_nm2 = std::numeric_limits<double>::infinity();
    BorderPolicy border_policy = BorderPolicy::ExcludeTouching;
    bool fill_holes = true;

    void validate() const {
        if (connectivity != 4 && connectivity != 8)
            throw InvalidArgumentError("connectivity must be 4 or 8");
        if (!(min_area_nm2 < max_area_nm2))
            throw InvalidArgumentError("min_area must be < max_area");
        if (min_area_nm2 < 0.0) throw InvalidArgumentError("min_area must be >= 0");
        if (tile_px < 16) throw InvalidArgumentError("tile_px must be >= 16");
        if (fixed_level < 0) throw InvalidArgumentError("fixed threshold level must be >= 0");
    }
};

/// One segmented structure, in physical units.
struct StructureMeasurement {
    int component_id = 0;
    long long pixel_count = 0;
    double area_nm2 = 0.0;
    double centroid_x_nm = 0.0;
    double centroid_y_nm = 0.0;
    int bbox_min_x = 0, bbox_min_y = 0, bbox_max_x = 0, bbox_max_y = 0;  // pixel coords, inclusive
    std::optional<int> grid_i;
    std::optional<int> grid_j;
    std::optional<int> tile_id;
    bool grid_conflict = false;
};

inline std::vector<std::uint32_t> build_histogram(const GrayImage& img) {
    img.validate();
    std::vector<std::uint32_t> hist(static_cast<std::size_t>(img.maxval()) + 1, 0);
    for (std::uint16_t p : img.pixels) ++hist[p];
    return hist;
}

/// Otsu's method over an intensity histogram. Returns the binarization level
/// L such that pixels >= L are foreground: the between-class variance is
/// maximized over split points t (background = bins <= t) and L = t + 1.
/// Ties in the variance go to the lower split.
inline int otsu_threshold(const std::vector<std::uint32_t>& hist) {
    if (hist.size() < 2) throw InvalidArgumentError("histogram needs at least 2 bins");
    double total = 0.0;
    double total_mean = 0.0;
    int populated = 0;
    for (std::size_t i = 0; i < hist.size(); ++i) {
        if (hist[i] > 0) ++populated;
        total += hist[i];
        total_mean += static_cast<double>(i) * hist[i];
    }
    if (populated < 2)
        throw DegenerateHistogramError("histogram has fewer than two populated bins");
    total_mean /= total;

    double w0 = 0.0;     // background mass
    double sum0 = 0.0;   // background intensity sum
    double best = -1.0;
    std::size_t best_t = 0;
    for (std::size_t t = 0; t + 1 < hist.size(); ++t) {
        w0 += hist[t];
        sum0 += static_cast<double>(t) * hist[t];
        const double w1 = total - w0;
        if (w0 == 0.0 || w1 == 0.0) continue;
        const double mu0 = sum0 / w0;
        const double mu1 = (total_mean * total - sum0) / w1;
        const double between = w0 * w1 * (mu0 - mu1) * (mu0 - mu1);
        if (between > best) {  // strict: ties keep the lower split
            best = between;
            best_t = t;
        }
    }
    return static_cast<int>(best_t) + 1;
}

inline BinaryMask binarize(const GrayImage& img, int level) {
    img.validate();
    BinaryMask mask = BinaryMask::zeros(img.width, img.height);
    for (std::size_t i = 0; i < img.pixels.size(); ++i)
        mask.data[i] = img.pixels[i] >= level ? 1 : 0;
    return mask;
}

/// Per-tile Otsu levels for TiledOtsu mode; degenerate tiles (single-valued)
/// fall back to the whole-image level. Tiles are tile_px square, the last
/// row/column may be smaller. Returned row-major by tile.
struct TiledLevels {
    int tile_px = 0;
    int tiles_x = 0;
    int tiles_y = 0;
    std::vector<int> levels;  // tiles_x * tiles_y

    int tile_of_pixel(int x, int y) const noexcept {
        return (y / tile_px) * tiles_x + (x / tile_px);
    }
};

inline TiledLevels tiled_otsu_levels(const GrayImage& img, int tile_px) {
    img.validate();
    if (tile_px < 16) throw InvalidArgumentError("tile_px must be >= 16");
    const int global_level = otsu_threshold(build_histogram(img));

    TiledLevels tl;
    tl.tile_px = tile_px;
    tl.tiles_x = (img.width + tile_px - 1) / tile_px;
    tl.tiles_y = (img.height + tile_px - 1) / tile_px;
    tl.levels.resize(static_cast<std::size_t>(tl.tiles_x) * tl.tiles_y);

    std::vector<std::uint32_t> hist(static_cast<std::size_t>(img.maxval()) + 1);
    for (int ty = 0; ty < tl.tiles_y; ++ty) {
        for (int tx = 0; tx < tl.tiles_x; ++tx) {
            std::fill(hist.begin(), hist.end(), 0u);
            const int x1 = std::min((tx + 1) * tile_px, img.width);
            const int y1 = std::min((ty + 1) * tile_px, img.height);
            for (int y = ty * tile_px; y < y1; ++y)
                for (int x = tx * tile_px; x < x1; ++x) ++hist[img.at(x, y)];
            int level = global_level;
            try {
                level = otsu_threshold(hist);
            } catch (const DegenerateHistogramError&) {
                // single-valued tile: keep the global level
            }
            tl.levels[static_cast<std::size_t>(ty) * tl.tiles_x + tx] = level;
        }
    }
    return tl;
}

inline BinaryMask binarize_tiled(const GrayImage& img, const TiledLevels& tl) {
    img.validate();
    BinaryMask mask = BinaryMask::zeros(img.width, img.height);
    for (int y = 0; y < img.height; ++y)
        for (int x = 0; x < img.width; ++x)
            mask.data[mask.index(x, y)] = img.at(x, y) >= tl.levels[tl.tile_of_pixel(x, y)] ? 1 : 0;
    return mask;
}

/// Connected-component labels: 0 = background, components numbered 1..K in
/// raster order of their first pixel. BFS flood fill, no recursion.
inline std::vector<std::int32_t> label_components(const BinaryMask& mask, int connectivity,
                                                  int* component_count = nullptr) {
    if (connectivity != 4 && connectivity != 8)
        throw InvalidArgumentError("connectivity must be 4 or 8");
    const int w = mask.width, h = mask.height;
    std::vector<std::int32_t> labels(mask.data.size(), 0);
    std::vector<std::size_t> queue;
    std::int32_t next = 0;

    const int dx8[] = {1, -1, 0, 0, 1, 1, -1, -1};
    const int dy8[] = {0, 0, 1, -1, 1, -1, 1, -1};
    const int ndirs = connectivity == 4 ? 4 : 8;

    for (std::size_t start = 0; start < mask.data.size(); ++start) {
        if (!mask.data[start] || labels[start] != 0) continue;
        ++next;
        labels[start] = next;
        queue.clear();
        queue.push_back(start);
        for (std::size_t qi = 0; qi < queue.size(); ++qi) {
            const std::size_t idx = queue[qi];
            const int x = static_cast<int>(idx % w);
            const int y = static_cast<int>(idx / w);
            for (int d = 0; d < ndirs; ++d) {
                const int nx = x + dx8[d];
                const int ny = y + dy8[d];
                if (nx < 0 || ny < 0 || nx >= w || ny >= h) continue;
                const std::size_t nidx = mask.index(nx, ny);
                if (mask.data[nidx] && labels[nidx] == 0) {
                    labels[nidx] = next;
                    queue.push_back(nidx);
                }
            }
        }
    }
    if (component_count) *component_count = next;
    return labels;
}

namespace detail {

struct ComponentStats {
    std::int32_t label = 0;
    long long pixel_count = 0;
    double sum_x = 0.0, sum_y = 0.0;
    int min_x = 0, min_y = 0, max_x = 0, max_y = 0;
    bool touches_border = false;
};

inline std::vector<ComponentStats> collect_components(const std::vector<std::int32_t>& labels,
                                                      int w, int h, int count) {
    std::vector<ComponentStats> comps(static_cast<std::size_t>(count));
    std::vector<bool> seen(static_cast<std::size_t>(count), false);
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            const std::int32_t lbl = labels[static_cast<std::size_t>(y) * w + x];
            if (lbl == 0) continue;
            ComponentStats& c = comps[static_cast<std::size_t>(lbl - 1)];
            if (!seen[static_cast<std::size_t>(lbl - 1)]) {
                seen[static_cast<std::size_t>(lbl - 1)] = true;
                c.label = lbl;
                c.min_x = c.max_x = x;
                c.min_y = c.max_y = y;
            } else {
                c.min_x = std::min(c.min_x, x);
                c.max_x = std::max(c.max_x, x);
                c.min_y = std::min(c.min_y, y);
                c.max_y = std::max(c.max_y, y);
            }
            ++c.pixel_count;
            c.sum_x += x;
            c.sum_y += y;
            if (x == 0 || y == 0 || x == w - 1 || y == h - 1) c.touches_border = true;
        }
    }
    return comps;
}

/// Fills enclosed background inside one component's bounding box: background
/// cells unreachable from the box boundary (treating only this component's
/// pixels as walls) become part of the component. Background connectivity is
/// the topological dual of the foreground connectivity.
inline void fill_component_holes(std::vector<std::int32_t>& labels, int w, int h,
                                 ComponentStats& c, int connectivity) {
    const int bw = c.max_x - c.min_x + 1;
    const int bh = c.max_y - c.min_y + 1;
    if (bw < 3 || bh < 3) return;  // too thin to enclose anything

    // 0 = unknown, 1 = reachable from the box boundary
    std::vector<std::uint8_t> reach(static_cast<std::size_t>(bw) * bh, 0);
    std::vector<int> queue;
    auto lidx = [&](int x, int y) { return static_cast<std::size_t>(y) * w + x; };
    auto bidx = [&](int bx, int by) { return static_cast<std::size_t>(by) * bw + bx; };
    auto is_wall = [&](int bx, int by) {
        return labels[lidx(c.min_x + bx, c.min_y + by)] == c.label;
    };

    for (int bx = 0; bx < bw; ++bx) {
        for (int by : {0, bh - 1}) {
            if (!is_wall(bx, by) && !reach[bidx(bx, by)]) {
                reach[bidx(bx, by)] = 1;
                queue.push_back(by * bw + bx);
            }
        }
    }
    for (int by = 0; by < bh; ++by) {
        for (int bx : {0, bw - 1}) {
            if (!is_wall(bx, by) && !reach[bidx(bx, by)]) {
                reach[bidx(bx, by)] = 1;
                queue.push_back(by * bw + bx);
            }
        }
    }

    const int dx8[] = {1, -1, 0, 0, 1, 1, -1, -1};
    const int dy8[] = {0, 0, 1, -1, 1, -1, 1, -1};
    const int ndirs = connectivity == 8 ? 4 : 8;  // dual connectivity for background
    for (std::size_t qi = 0; qi < queue.size(); ++qi) {
        const int bx = queue[qi] % bw;
        const int by = queue[qi] / bw;
        for (int d = 0; d < ndirs; ++d) {
            const int nx = bx + dx8[d];
            const int ny = by + dy8[d];
            if (nx < 0 || ny < 0 || nx >= bw || ny >= bh) continue;
            if (is_wall(nx, ny) || reach[bidx(nx, ny)]) continue;
            reach[bidx(nx, ny)] = 1;
            queue.push_back(ny * bw + nx);
        }
    }

    for (int by = 0; by < bh; ++by) {
        for (int bx = 0; bx < bw; ++bx) {
            if (reach[bidx(bx, by)] || is_wall(bx, by)) continue;
            const std::size_t li = lidx(c.min_x + bx, c.min_y + by);
            if (labels[li] != 0) continue;  // hole occupied by another component: leave it
            labels[li] = c.label;
            ++c.pixel_count;
            c.sum_x += c.min_x + bx;
            c.sum_y += c.min_y + by;
        }
    }
}

}  // namespace detail

/// Standalone hole filling over a whole mask: labels it, fills each
/// component's enclosed background, returns the filled mask.
inline BinaryMask fill_holes(const BinaryMask& mask, int connectivity = 8) {
    int count = 0;
    std::vector<std::int32_t> labels = label_components(mask, connectivity, &count);
    auto comps = detail::collect_components(labels, mask.width, mask.height, count);
    for (auto& c : comps) detail::fill_component_holes(labels, mask.width, mask.height, c, connectivity);
    BinaryMask out = BinaryMask::zeros(mask.width, mask.height);
    for (std::size_t i = 0; i < labels.size(); ++i) out.data[i] = labels[i] != 0 ? 1 : 0;
    return out;
}

/// Full measurement result for one image, including the thresholds actually
/// applied (needed for sensitivity sweeps).
struct MeasureResult {
    int level = 0;                 // Fixed/Otsu level; TiledOtsu: global fallback level
    std::optional<TiledLevels> tiled_levels;
    std::vector<StructureMeasurement> measurements;
};

/// threshold -> binarize -> label -> fill -> filter, in physical units.
/// level_offset shifts the chosen level(s) for sensitivity sweeps; shifted
/// levels are clamped to the representable range [0, maxval + 1].
inline MeasureResult measure(const GrayImage& img, const Calibration& cal,
                             const SegmentationConfig& cfg, int level_offset = 0) {
    img.validate();
    cal.validate();
    cfg.validate();
    if (level_offset > img.maxval() || level_offset < -img.maxval())
        throw InvalidArgumentError("level offset exceeds the intensity range");
    const auto shift = [&](int level) {
        return std::clamp(level + level_offset, 0, img.maxval() + 1);
    };

    MeasureResult result;
    BinaryMask mask;
    switch (cfg.threshold_mode) {
        case SegmentationConfig::ThresholdMode::Fixed:
            result.level = shift(cfg.fixed_level);
            mask = binarize(img, result.level);
            break;
        case SegmentationConfig::ThresholdMode::Otsu:
            result.level = shift(otsu_threshold(build_histogram(img)));
            mask = binarize(img, result.level);
            break;
        case SegmentationConfig::ThresholdMode::TiledOtsu: {
            result.level = shift(otsu_threshold(build_histogram(img)));
            result.tiled_levels = tiled_otsu_levels(img, cfg.tile_px);
            for (int& lv : result.tiled_levels->levels) lv = shift(lv);
            mask = binarize_tiled(img, *result.tiled_levels);
            break;
        }
    }

    int count = 0;
    std::vector<std::int32_t> labels = label_components(mask, cfg.connectivity, &count);
    auto comps = detail::collect_components(labels, img.width, img.height, count);
    if (cfg.fill_holes)
        for (auto& c : comps)
            detail::fill_component_holes(labels, img.width, img.height, c, cfg.connectivity);

    const double px_area = cal.pixel_scale_nm * cal.pixel_scale_nm;
    for (const auto& c : comps) {
        if (c.pixel_count == 0) continue;
        if (cfg.border_policy == SegmentationConfig::BorderPolicy::ExcludeTouching &&
            c.touches_border)
            continue;
        const double area = static_cast<double>(c.pixel_count) * px_area;
        if (area < cfg.min_area_nm2 || area > cfg.max_area_nm2) continue;

        StructureMeasurement m;
        m.component_id = c.label;
        m.pixel_count = c.pixel_count;
        m.area_nm2 = area;
        // pixel (x, y) covers [x, x+1) x [y, y+1); its center is x + 0.5
        m.centroid_x_nm = (c.sum_x / static_cast<double>(c.pixel_count) + 0.5) * cal.pixel_scale_nm;
        m.centroid_y_nm = (c.sum_y / static_cast<double>(c.pixel_count) + 0.5) * cal.pixel_scale_nm;
        m.bbox_min_x = c.min_x;
        m.bbox_min_y = c.min_y;
        m.bbox_max_x = c.max_x;
        m.bbox_max_y = c.max_y;
        if (result.tiled_levels) {
            const int px = std::clamp(static_cast<int>(m.centroid_x_nm / cal.pixel_scale_nm), 0,
                                      img.width - 1);
            const int py = std::clamp(static_cast<int>(m.centroid_y_nm / cal.pixel_scale_nm), 0,
                                      img.height - 1);
            m.tile_id = result.tiled_levels->tile_of_pixel(px, py);
        }
        result.measurements.push_back(m);
    }
    return result;
}

/// Maps each centroid onto the nearest lattice point of a rows x cols grid
/// whose (0, 0) site sits at (origin_x, origin_y) nm. Centroids outside the
/// grid stay unassigned; two structures landing on one site are both flagged.
inline void associate_grid(std::vector<StructureMeasurement>& measurements, double pitch_nm,
                           double origin_x_nm, double origin_y_nm, int rows, int cols) {
    if (!(pitch_nm > 0.0)) throw InvalidArgumentError("pitch must be > 0");
    if (rows < 1 || cols < 1) throw InvalidArgumentError("grid must be at least 1x1");

    std::unordered_map<long long, int> site_hits;
    for (auto& m : measurements) {
        m.grid_i.reset();
        m.grid_j.reset();
        m.grid_conflict = false;
        const long long j = std::llround((m.centroid_x_nm - origin_x_nm) / pitch_nm);
        const long long i = std::llround((m.centroid_y_nm - origin_y_nm) / pitch_nm);
        if (i < 0 || j < 0 || i >= rows || j >= cols) continue;
        m.grid_i = static_cast<int>(i);
        m.grid_j = static_cast<int>(j);
        ++site_hits[i * static_cast<long long>(cols) + j];
    }
    for (auto& m : measurements) {
        if (!m.grid_i) continue;
        const long long key = *m.grid_i * static_cast<long long>(cols) + *m.grid_j;
        if (site_hits[key] > 1) m.grid_conflict = true;
    }
}

}  // namespace pillarmetry
