#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <string>
#include <vector>

#include "pillarmetry/coverage.hpp"
#include "pillarmetry/errors.hpp"
#include "pillarmetry/heightmap.hpp"
#include "pillarmetry/image.hpp"
#include "pillarmetry/io.hpp"
#include "pillarmetry/manifest.hpp"
#include "pillarmetry/rng.hpp"

namespace pillarmetry {

/// Lateral footprint: axis-aligned rectangle or disc, nominal size in nm.
struct ShapeSpec {
    ShapeKind kind = ShapeKind::Rect;
    double length_nm = 0.0;  // rect: extent along x
    double width_nm = 0.0;   // rect: extent along y
    double diameter_nm = 0.0;

    void validate() const {
        if (kind == ShapeKind::Rect) {
            if (!(length_nm > 0.0) || !(width_nm > 0.0))
                throw InvalidArgumentError("rect shape needs positive length and width");
        } else {
            if (!(diameter_nm > 0.0)) throw InvalidArgumentError("disc shape needs positive diameter");
        }
    }

    double max_extent_nm() const {
        return kind == ShapeKind::Rect ? std::max(length_nm, width_nm) : diameter_nm;
    }

    double nominal_area_nm2() const {
        if (kind == ShapeKind::Rect) return length_nm * width_nm;
        return M_PI * diameter_nm * diameter_nm / 4.0;
    }
};

/// Dark background with an optional linear shading gradient, in gray levels.
struct BackgroundSpec {
    double base_level = 30.0;
    double gradient_x = 0.0;  // gray levels per pixel along x
    double gradient_y = 0.0;

    double at(int x, int y) const noexcept { return base_level + gradient_x * x + gradient_y * y; }
};

/// Gray level of structure interiors; edges render at interior * ring_gain
/// to mimic the bright metal-coated rims seen in SEM.
inline constexpr double kInteriorLevel = 128.0;

/// Area scale factors are clamped here so an extreme jitter draw can never
/// produce a non-positive footprint.
inline constexpr double kMinAreaFactor = 0.05;

// Stream salts: sub-generators derived from the scene seed.
inline constexpr std::uint64_t kSaltOutlierPick = 1;
inline constexpr std::uint64_t kSaltNoise = 2;
inline constexpr std::uint64_t kSaltRoughness = 3;

struct SceneSpec {
    int rows = 1;
    int cols = 1;
    double pitch_nm = 0.0;
    ShapeSpec shape;
    double structure_height_nm = 80.0;  // recorded in the manifest as true_height
    double edge_ring_width_nm = 5.0;
    double ring_gain = 1.72;
    BackgroundSpec background;
    double noise_sigma = 4.0;  // gray levels
    double area_jitter_rsd = 0.0;
    double outlier_fraction = 0.0;
    double outlier_scale = 1.3;
    double position_jitter_nm = 0.0;
    std::uint64_t seed = 0;

    void validate() const {
        if (rows < 1 || cols < 1) throw InvalidArgumentError("lattice must be at least 1x1");
        shape.validate();
        if (!(pitch_nm > shape.max_extent_nm()))
            throw InvalidArgumentError("pitch must exceed the largest lateral extent of the shape");
        if (!(structure_height_nm > 0.0)) throw InvalidArgumentError("structure height must be > 0");
        if (edge_ring_width_nm < 0.0) throw InvalidArgumentError("ring width must be >= 0");
        if (!(ring_gain > 0.0)) throw InvalidArgumentError("ring gain must be > 0");
        if (noise_sigma < 0.0) throw InvalidArgumentError("noise sigma must be >= 0");
        if (!(area_jitter_rsd >= 0.0 && area_jitter_rsd < 1.0))
            throw InvalidArgumentError("area_jitter_rsd must be in [0, 1)");
        if (!(outlier_fraction >= 0.0 && outlier_fraction < 1.0))
            throw InvalidArgumentError("outlier_fraction must be in [0, 1)");
        if (!(outlier_scale > 0.0)) throw InvalidArgumentError("outlier_scale must be > 0");
        if (position_jitter_nm < 0.0) throw InvalidArgumentError("position jitter must be >= 0");
    }
};

struct AfmSceneSpec {
    int rows = 1;
    int cols = 1;
    double pitch_nm = 0.0;
    ShapeSpec shape;
    double mean_height_nm = 68.2;
    double height_sd_nm = 0.5;
    double base_roughness_pp_nm = 0.0;  // peak-to-peak
    double tilt_x_nm_per_um = 0.0;
    double tilt_y_nm_per_um = 0.0;
    double area_jitter_rsd = 0.0;
    double position_jitter_nm = 0.0;
    std::uint64_t seed = 0;

    void validate() const {
        if (rows < 1 || cols < 1) throw InvalidArgumentError("lattice must be at least 1x1");
        shape.validate();
        if (!(pitch_nm > shape.max_extent_nm()))
            throw InvalidArgumentError("pitch must exceed the largest lateral extent of the shape");
        if (!(mean_height_nm > 0.0)) throw InvalidArgumentError("mean height must be > 0");
        if (height_sd_nm < 0.0) throw InvalidArgumentError("height sd must be >= 0");
        if (base_roughness_pp_nm < 0.0) throw InvalidArgumentError("roughness must be >= 0");
        if (!(area_jitter_rsd >= 0.0 && area_jitter_rsd < 1.0))
            throw InvalidArgumentError("area_jitter_rsd must be in [0, 1)");
        if (position_jitter_nm < 0.0) throw InvalidArgumentError("position jitter must be >= 0");
    }
};

namespace detail {

/// Deterministically picks round(fraction * n) outliers via a seeded partial
/// shuffle, so the label set is independent of render order.
inline std::vector<bool> pick_outliers(std::uint64_t scene_seed, int n, double fraction) {
    std::vector<bool> flags(static_cast<std::size_t>(n), false);
    const int k = static_cast<int>(std::llround(fraction * n));
    if (k <= 0) return flags;
    std::vector<int> idx(static_cast<std::size_t>(n));
    std::iota(idx.begin(), idx.end(), 0);
    Rng rng(derive_stream_seed(scene_seed, kSaltOutlierPick));
    for (int i = 0; i < k; ++i) {
        const int j = i + static_cast<int>(rng.next_u64() % static_cast<std::uint64_t>(n - i));
        std::swap(idx[static_cast<std::size_t>(i)], idx[static_cast<std::size_t>(j)]);
        flags[static_cast<std::size_t>(idx[static_cast<std::size_t>(i)])] = true;
    }
    return flags;
}

/// Per-structure draws come from one generator in a fixed order so a
/// structure's geometry depends only on (seed, i, j), never on its neighbors.
struct StructureDraw {
    double area_z = 0.0;
    double pos_x_z = 0.0;
    double pos_y_z = 0.0;
    double height_z = 0.0;
};

inline StructureDraw draw_structure(std::uint64_t scene_seed, int i, int j) {
    Rng rng(derive_structure_seed(scene_seed, i, j));
    StructureDraw d;
    d.area_z = rng.normal();
    d.pos_x_z = rng.normal();
    d.pos_y_z = rng.normal();
    d.height_z = rng.normal();
    return d;
}

}  // namespace detail

/// Instantiates the lattice: jittered positions, per-structure area factors,
/// outlier labels, and the exact analytic footprint areas that make the
/// manifest a ground-truth oracle.
inline SceneManifest realize_scene(const SceneSpec& spec, const Calibration& cal) {
    spec.validate();
    cal.validate();

    SceneManifest manifest;
    manifest.pixel_scale_nm = cal.pixel_scale_nm;
    manifest.pitch_nm = spec.pitch_nm;
    manifest.seed = spec.seed;

    const int n = spec.rows * spec.cols;
    const std::vector<bool> outlier = detail::pick_outliers(spec.seed, n, spec.outlier_fraction);

    for (int i = 0; i < spec.rows; ++i) {
        for (int j = 0; j < spec.cols; ++j) {
            const auto d = detail::draw_structure(spec.seed, i, j);
            const bool is_outlier = outlier[static_cast<std::size_t>(i * spec.cols + j)];
            const double area_factor =
                std::max(kMinAreaFactor, 1.0 + spec.area_jitter_rsd * d.area_z);
            double lateral = std::sqrt(area_factor);
            if (is_outlier) lateral *= spec.outlier_scale;

            StructureRecord rec;
            rec.grid_i = i;
            rec.grid_j = j;
            rec.centroid_x_nm = (j + 0.5) * spec.pitch_nm + spec.position_jitter_nm * d.pos_x_z;
            rec.centroid_y_nm = (i + 0.5) * spec.pitch_nm + spec.position_jitter_nm * d.pos_y_z;
            if (spec.shape.kind == ShapeKind::Rect) {
                rec.true_area_nm2 =
                    (spec.shape.length_nm * lateral) * (spec.shape.width_nm * lateral);
            } else {
                const double dia = spec.shape.diameter_nm * lateral;
                rec.true_area_nm2 = M_PI * dia * dia / 4.0;
            }
            rec.true_height_nm = spec.structure_height_nm;
            rec.shape = spec.shape.kind;
            rec.is_outlier = is_outlier;
            manifest.structures.push_back(rec);
        }
    }
    manifest.validate();
    return manifest;
}

inline void scene_image_size(const SceneSpec& spec, const Calibration& cal, int* width,
                             int* height) {
    *width = static_cast<int>(std::ceil(spec.cols * spec.pitch_nm / cal.pixel_scale_nm));
    *height = static_cast<int>(std::ceil(spec.rows * spec.pitch_nm / cal.pixel_scale_nm));
}

namespace detail {

/// Coverage fraction of one pixel square by the structure's outer footprint
/// and by its interior (outer shrunk by the ring width).
struct FootprintCoverage {
    double outer = 0.0;
    double inner = 0.0;
};

struct FootprintGeometry {
    ShapeKind kind;
    double cx_nm, cy_nm;
    double half_len_nm = 0.0, half_wid_nm = 0.0;  // rect
    double radius_nm = 0.0;                       // disc
    double inner_half_len_nm = 0.0, inner_half_wid_nm = 0.0;
    double inner_radius_nm = 0.0;

    static FootprintGeometry from(const StructureRecord& rec, const ShapeSpec& shape,
                                  double ring_width_nm) {
        FootprintGeometry g;
        g.kind = rec.shape;
        g.cx_nm = rec.centroid_x_nm;
        g.cy_nm = rec.centroid_y_nm;
        if (rec.shape == ShapeKind::Rect) {
            // recover the jittered lateral scale from the recorded true area
            const double lateral = std::sqrt(rec.true_area_nm2 / shape.nominal_area_nm2());
            g.half_len_nm = shape.length_nm * lateral / 2.0;
            g.half_wid_nm = shape.width_nm * lateral / 2.0;
            g.inner_half_len_nm = std::max(0.0, g.half_len_nm - ring_width_nm);
            g.inner_half_wid_nm = std::max(0.0, g.half_wid_nm - ring_width_nm);
        } else {
            g.radius_nm = std::sqrt(rec.true_area_nm2 / M_PI);
            g.inner_radius_nm = std::max(0.0, g.radius_nm - ring_width_nm);
        }
        return g;
    }

    FootprintCoverage pixel_coverage(double x0, double y0, double x1, double y1) const {
        FootprintCoverage c;
        const double px_area = (x1 - x0) * (y1 - y0);
        if (kind == ShapeKind::Rect) {
            c.outer = rect_rect_overlap(cx_nm - half_len_nm, cy_nm - half_wid_nm,
                                        cx_nm + half_len_nm, cy_nm + half_wid_nm, x0, y0, x1, y1) /
                      px_area;
            c.inner = rect_rect_overlap(cx_nm - inner_half_len_nm, cy_nm - inner_half_wid_nm,
                                        cx_nm + inner_half_len_nm, cy_nm + inner_half_wid_nm, x0,
                                        y0, x1, y1) /
                      px_area;
        } else {
            c.outer = disc_rect_overlap(cx_nm, cy_nm, radius_nm, x0, y0, x1, y1) / px_area;
            c.inner = disc_rect_overlap(cx_nm, cy_nm, inner_radius_nm, x0, y0, x1, y1) / px_area;
        }
        return c;
    }

    /// Pixel bounding box of the outer footprint, inclusive, with 1 px slack.
    void pixel_bbox(double scale_nm, int* x0, int* y0, int* x1, int* y1) const {
        const double ex = kind == ShapeKind::Rect ? half_len_nm : radius_nm;
        const double ey = kind == ShapeKind::Rect ? half_wid_nm : radius_nm;
        *x0 = static_cast<int>(std::floor((cx_nm - ex) / scale_nm)) - 1;
        *y0 = static_cast<int>(std::floor((cy_nm - ey) / scale_nm)) - 1;
        *x1 = static_cast<int>(std::ceil((cx_nm + ex) / scale_nm)) + 1;
        *y1 = static_cast<int>(std::ceil((cy_nm + ey) / scale_nm)) + 1;
    }
};

}  // namespace detail

/// Renders the manifest onto a dark gradient background: interiors at
/// kInteriorLevel, rims at kInteriorLevel * ring_gain, exact-coverage
/// anti-aliasing at the edges, then a seeded Gaussian read-noise pass.
/// Compositing is a per-pixel max, so the result does not depend on the
/// order structures are drawn.
inline GrayImage render_sem(const SceneSpec& spec, const SceneManifest& manifest,
                            const Calibration& cal) {
    spec.validate();
    cal.validate();
    int w = 0, h = 0;
    scene_image_size(spec, cal, &w, &h);
    const double s = cal.pixel_scale_nm;

    std::vector<float> buf(static_cast<std::size_t>(w) * h);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x)
            buf[static_cast<std::size_t>(y) * w + x] = static_cast<float>(spec.background.at(x, y));

    const double ring_level = kInteriorLevel * spec.ring_gain;
    for (const auto& rec : manifest.structures) {
        const auto g = detail::FootprintGeometry::from(rec, spec.shape, spec.edge_ring_width_nm);
        int bx0, by0, bx1, by1;
        g.pixel_bbox(s, &bx0, &by0, &bx1, &by1);
        if (bx0 < 0 || by0 < 0 || bx1 >= w || by1 >= h)
            throw SceneTooLargeError("structure (" + std::to_string(rec.grid_i) + ", " +
                                     std::to_string(rec.grid_j) +
                                     ") extends outside the rendered raster");
        for (int y = by0; y <= by1; ++y) {
            for (int x = bx0; x <= bx1; ++x) {
                const auto cov = g.pixel_coverage(x * s, y * s, (x + 1) * s, (y + 1) * s);
                if (cov.outer <= 0.0) continue;
                const double ring_cov = std::max(0.0, cov.outer - cov.inner);
                const double val = kInteriorLevel * cov.inner + ring_level * ring_cov +
                                   spec.background.at(x, y) * (1.0 - cov.outer);
                float& px = buf[static_cast<std::size_t>(y) * w + x];
                px = std::max(px, static_cast<float>(val));
            }
        }
    }

    GrayImage img = GrayImage::zeros(w, h, 8);
    if (spec.noise_sigma > 0.0) {
        Rng noise(derive_stream_seed(spec.seed, kSaltNoise));
        for (std::size_t i = 0; i < buf.size(); ++i) {
            const double v = buf[i] + spec.noise_sigma * noise.normal();
            img.pixels[i] = static_cast<std::uint16_t>(std::clamp<long>(std::lround(v), 0, 255));
        }
    } else {
        for (std::size_t i = 0; i < buf.size(); ++i)
            img.pixels[i] = static_cast<std::uint16_t>(std::clamp<long>(std::lround(buf[i]), 0, 255));
    }
    return img;
}

inline void generate_sem(const SceneSpec& spec, const Calibration& cal, GrayImage* image,
                         SceneManifest* manifest) {
    *manifest = realize_scene(spec, cal);
    *image = render_sem(spec, *manifest, cal);
}

/// Instantiates an AFM lattice: per-structure heights ~ N(mean, sd) plus the
/// same area/position jitter machinery as the SEM path.
inline SceneManifest realize_afm_scene(const AfmSceneSpec& spec, const Calibration& cal) {
    spec.validate();
    cal.validate();

    SceneManifest manifest;
    manifest.pixel_scale_nm = cal.pixel_scale_nm;
    manifest.pitch_nm = spec.pitch_nm;
    manifest.seed = spec.seed;

    for (int i = 0; i < spec.rows; ++i) {
        for (int j = 0; j < spec.cols; ++j) {
            const auto d = detail::draw_structure(spec.seed, i, j);
            const double area_factor =
                std::max(kMinAreaFactor, 1.0 + spec.area_jitter_rsd * d.area_z);

            StructureRecord rec;
            rec.grid_i = i;
            rec.grid_j = j;
            rec.centroid_x_nm = (j + 0.5) * spec.pitch_nm + spec.position_jitter_nm * d.pos_x_z;
            rec.centroid_y_nm = (i + 0.5) * spec.pitch_nm + spec.position_jitter_nm * d.pos_y_z;
            rec.true_area_nm2 = spec.shape.nominal_area_nm2() * area_factor;
            rec.true_height_nm =
                std::max(0.1, spec.mean_height_nm + spec.height_sd_nm * d.height_z);
            rec.shape = spec.shape.kind;
            rec.is_outlier = false;
            manifest.structures.push_back(rec);
        }
    }
    manifest.validate();
    return manifest;
}

/// Renders a height map for a manifest: tilted plane plus uniform roughness
/// on the exposed base, structure tops at base plane + true_height, exact
/// coverage blending the rims. Roughness is drawn for every point in raster
/// order so the stream does not depend on structure placement.
inline HeightMap render_afm(const AfmSceneSpec& spec, const SceneManifest& manifest,
                            const Calibration& cal) {
    spec.validate();
    cal.validate();
    const double s = cal.pixel_scale_nm;
    const int w = static_cast<int>(std::ceil(spec.cols * spec.pitch_nm / s));
    const int h = static_cast<int>(std::ceil(spec.rows * spec.pitch_nm / s));

    HeightMap map = HeightMap::zeros(h, w, s);
    std::vector<double> rough(map.heights.size(), 0.0);
    if (spec.base_roughness_pp_nm > 0.0) {
        Rng rrng(derive_stream_seed(spec.seed, kSaltRoughness));
        for (auto& r : rough)
            r = rrng.uniform(-spec.base_roughness_pp_nm / 2.0, spec.base_roughness_pp_nm / 2.0);
    }

    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            const double cx = (x + 0.5) * s, cy = (y + 0.5) * s;
            const double plane =
                spec.tilt_x_nm_per_um * cx / 1000.0 + spec.tilt_y_nm_per_um * cy / 1000.0;
            map.at(y, x) = plane + rough[static_cast<std::size_t>(y) * w + x];
        }
    }

    for (const auto& rec : manifest.structures) {
        const auto g = detail::FootprintGeometry::from(rec, spec.shape, 0.0);
        int bx0, by0, bx1, by1;
        g.pixel_bbox(s, &bx0, &by0, &bx1, &by1);
        if (bx0 < 0 || by0 < 0 || bx1 >= w || by1 >= h)
            throw SceneTooLargeError("structure (" + std::to_string(rec.grid_i) + ", " +
                                     std::to_string(rec.grid_j) +
                                     ") extends outside the rendered map");
        for (int y = by0; y <= by1; ++y) {
            for (int x = bx0; x <= bx1; ++x) {
                const auto cov = g.pixel_coverage(x * s, y * s, (x + 1) * s, (y + 1) * s);
                if (cov.outer <= 0.0) continue;
                const double cx = (x + 0.5) * s, cy = (y + 0.5) * s;
                const double plane =
                    spec.tilt_x_nm_per_um * cx / 1000.0 + spec.tilt_y_nm_per_um * cy / 1000.0;
                const double r = rough[static_cast<std::size_t>(y) * w + x];
                map.at(y, x) = plane + r * (1.0 - cov.outer) + rec.true_height_nm * cov.outer;
            }
        }
    }
    return map;
}

inline void generate_afm(const AfmSceneSpec& spec, const Calibration& cal, HeightMap* map,
                         SceneManifest* manifest) {
    *manifest = realize_afm_scene(spec, cal);
    *map = render_afm(spec, *manifest, cal);
}

/// Renders an AFM map over footprints taken from an existing manifest (the
/// paired-modality workflow: one ground truth, two instruments). Heights are
/// drawn fresh from this spec's seed; lateral geometry is inherited.
inline void generate_afm_from_manifest(const AfmSceneSpec& spec, const SceneManifest& source,
                                       const Calibration& cal, HeightMap* map,
                                       SceneManifest* manifest) {
    spec.validate();
    cal.validate();
    source.validate();

    SceneManifest out = source;
    out.pixel_scale_nm = cal.pixel_scale_nm;
    out.seed = spec.seed;
    for (auto& rec : out.structures) {
        Rng rng(derive_structure_seed(spec.seed, rec.grid_i, rec.grid_j));
        rec.true_height_nm = std::max(0.1, spec.mean_height_nm + spec.height_sd_nm * rng.normal());
        rec.is_outlier = false;
    }
    *map = render_afm(spec, out, cal);
    *manifest = std::move(out);
}

// ---------------------------------------------------------------------------
// JSON (de)serialization of scene specs. Unknown keys are rejected; optional
// keys fall back to the documented defaults.
// ---------------------------------------------------------------------------

namespace detail {

inline void require_known_keys(const nlohmann::json& j,
                               std::initializer_list<const char*> allowed, const char* what) {
    if (!j.is_object())
        throw ParseError(ParseError::Kind::BadSchema, std::string(what) + ": expected an object");
    for (const auto& item : j.items()) {
        bool ok = false;
        for (const char* k : allowed)
            if (item.key() == k) {
                ok = true;
                break;
            }
        if (!ok)
            throw ParseError(ParseError::Kind::BadSchema,
                             std::string(what) + ": unknown key '" + item.key() + "'");
    }
}

inline double json_number_or(const nlohmann::json& j, const char* key, double fallback,
                             const char* what) {
    if (!j.contains(key)) return fallback;
    const auto& v = j.at(key);
    if (!v.is_number())
        throw ParseError(ParseError::Kind::BadSchema,
                         std::string(what) + ": key '" + key + "' must be a number");
    return v.get<double>();
}

inline int json_int_required(const nlohmann::json& j, const char* key, const char* what) {
    if (!j.contains(key))
        throw ParseError(ParseError::Kind::BadSchema,
                         std::string(what) + ": missing key '" + key + "'");
    const auto& v = j.at(key);
    if (!v.is_number_integer())
        throw ParseError(ParseError::Kind::BadSchema,
                         std::string(what) + ": key '" + key + "' must be an integer");
    return v.get<int>();
}

inline double json_number_required(const nlohmann::json& j, const char* key, const char* what) {
    if (!j.contains(key))
        throw ParseError(ParseError::Kind::BadSchema,
                         std::string(what) + ": missing key '" + key + "'");
    const auto& v = j.at(key);
    if (!v.is_number())
        throw ParseError(ParseError::Kind::BadSchema,
                         std::string(what) + ": key '" + key + "' must be a number");
    return v.get<double>();
}

inline std::uint64_t json_seed_or(const nlohmann::json& j, const char* key, std::uint64_t fallback,
                                  const char* what) {
    if (!j.contains(key)) return fallback;
    const auto& v = j.at(key);
    if (!v.is_number_unsigned())
        throw ParseError(ParseError::Kind::BadSchema,
                         std::string(what) + ": key '" + key + "' must be a non-negative integer");
    return v.get<std::uint64_t>();
}

inline ShapeSpec shape_spec_from_json(const nlohmann::json& j) {
    if (!j.is_object() || !j.contains("kind") || !j.at("kind").is_string())
        throw ParseError(ParseError::Kind::BadSchema, "shape: missing or non-string 'kind'");
    ShapeSpec shape;
    shape.kind = shape_kind_from_string(j.at("kind").get<std::string>());
    if (shape.kind == ShapeKind::Rect) {
        require_known_keys(j, {"kind", "length_nm", "width_nm"}, "shape");
        shape.length_nm = json_number_required(j, "length_nm", "shape");
        shape.width_nm = json_number_required(j, "width_nm", "shape");
    } else {
        require_known_keys(j, {"kind", "diameter_nm"}, "shape");
        shape.diameter_nm = json_number_required(j, "diameter_nm", "shape");
    }
    return shape;
}

inline nlohmann::json shape_spec_to_json(const ShapeSpec& shape) {
    nlohmann::json j;
    j["kind"] = to_string(shape.kind);
    if (shape.kind == ShapeKind::Rect) {
        j["length_nm"] = shape.length_nm;
        j["width_nm"] = shape.width_nm;
    } else {
        j["diameter_nm"] = shape.diameter_nm;
    }
    return j;
}

}  // namespace detail

inline SceneSpec scene_spec_from_json(const nlohmann::json& j) {
    detail::require_known_keys(j,
                               {"rows", "cols", "pitch_nm", "shape", "structure_height_nm",
                                "edge_ring_width_nm", "ring_gain", "background", "noise_sigma",
                                "area_jitter_rsd", "outlier_fraction", "outlier_scale",
                                "position_jitter_nm", "seed"},
                               "scene spec");
    SceneSpec spec;
    spec.rows = detail::json_int_required(j, "rows", "scene spec");
    spec.cols = detail::json_int_required(j, "cols", "scene spec");
    spec.pitch_nm = detail::json_number_required(j, "pitch_nm", "scene spec");
    if (!j.contains("shape"))
        throw ParseError(ParseError::Kind::BadSchema, "scene spec: missing key 'shape'");
    spec.shape = detail::shape_spec_from_json(j.at("shape"));
    spec.structure_height_nm =
        detail::json_number_or(j, "structure_height_nm", spec.structure_height_nm, "scene spec");
    spec.edge_ring_width_nm =
        detail::json_number_or(j, "edge_ring_width_nm", spec.edge_ring_width_nm, "scene spec");
    spec.ring_gain = detail::json_number_or(j, "ring_gain", spec.ring_gain, "scene spec");
    if (j.contains("background")) {
        const auto& b = j.at("background");
        detail::require_known_keys(b, {"base_level", "gradient_x", "gradient_y"}, "background");
        spec.background.base_level =
            detail::json_number_or(b, "base_level", spec.background.base_level, "background");
        spec.background.gradient_x =
            detail::json_number_or(b, "gradient_x", spec.background.gradient_x, "background");
        spec.background.gradient_y =
            detail::json_number_or(b, "gradient_y", spec.background.gradient_y, "background");
    }
    spec.noise_sigma = detail::json_number_or(j, "noise_sigma", spec.noise_sigma, "scene spec");
    spec.area_jitter_rsd =
        detail::json_number_or(j, "area_jitter_rsd", spec.area_jitter_rsd, "scene spec");
    spec.outlier_fraction =
        detail::json_number_or(j, "outlier_fraction", spec.outlier_fraction, "scene spec");
    spec.outlier_scale =
        detail::json_number_or(j, "outlier_scale", spec.outlier_scale, "scene spec");
    spec.position_jitter_nm =
        detail::json_number_or(j, "position_jitter_nm", spec.position_jitter_nm, "scene spec");
    spec.seed = detail::json_seed_or(j, "seed", spec.seed, "scene spec");
    spec.validate();
    return spec;
}

inline nlohmann::json scene_spec_to_json(const SceneSpec& spec) {
    nlohmann::json j;
    j["rows"] = spec.rows;
    j["cols"] = spec.cols;
    j["pitch_nm"] = spec.pitch_nm;
    j["shape"] = detail::shape_spec_to_json(spec.shape);
    j["structure_height_nm"] = spec.structure_height_nm;
    j["edge_ring_width_nm"] = spec.edge_ring_width_nm;
    j["ring_gain"] = spec.ring_gain;
    j["background"] = {{"base_level", spec.background.base_level},
                       {"gradient_x", spec.background.gradient_x},
                       {"gradient_y", spec.background.gradient_y}};
    j["noise_sigma"] = spec.noise_sigma;
    j["area_jitter_rsd"] = spec.area_jitter_rsd;
    j["outlier_fraction"] = spec.outlier_fraction;
    j["outlier_scale"] = spec.outlier_scale;
    j["position_jitter_nm"] = spec.position_jitter_nm;
    j["seed"] = spec.seed;
    return j;
}

inline AfmSceneSpec afm_scene_spec_from_json(const nlohmann::json& j) {
    detail::require_known_keys(j,
                               {"rows", "cols", "pitch_nm", "shape", "mean_height_nm",
                                "height_sd_nm", "base_roughness_pp_nm", "tilt_x_nm_per_um",
                                "tilt_y_nm_per_um", "area_jitter_rsd", "position_jitter_nm",
                                "seed"},
                               "afm scene spec");
    AfmSceneSpec spec;
    spec.rows = detail::json_int_required(j, "rows", "afm scene spec");
    spec.cols = detail::json_int_required(j, "cols", "afm scene spec");
    spec.pitch_nm = detail::json_number_required(j, "pitch_nm", "afm scene spec");
    if (!j.contains("shape"))
        throw ParseError(ParseError::Kind::BadSchema, "afm scene spec: missing key 'shape'");
    spec.shape = detail::shape_spec_from_json(j.at("shape"));
    spec.mean_height_nm = detail::json_number_required(j, "mean_height_nm", "afm scene spec");
    spec.height_sd_nm =
        detail::json_number_or(j, "height_sd_nm", spec.height_sd_nm, "afm scene spec");
    spec.base_roughness_pp_nm =
        detail::json_number_or(j, "base_roughness_pp_nm", spec.base_roughness_pp_nm, "afm scene spec");
    spec.tilt_x_nm_per_um =
        detail::json_number_or(j, "tilt_x_nm_per_um", spec.tilt_x_nm_per_um, "afm scene spec");
    spec.tilt_y_nm_per_um =
        detail::json_number_or(j, "tilt_y_nm_per_um", spec.tilt_y_nm_per_um, "afm scene spec");
    spec.area_jitter_rsd =
        detail::json_number_or(j, "area_jitter_rsd", spec.area_jitter_rsd, "afm scene spec");
    spec.position_jitter_nm =
        detail::json_number_or(j, "position_jitter_nm", spec.position_jitter_nm, "afm scene spec");
    spec.seed = detail::json_seed_or(j, "seed", spec.seed, "afm scene spec");
    spec.validate();
    return spec;
}

inline nlohmann::json afm_scene_spec_to_json(const AfmSceneSpec& spec) {
    nlohmann::json j;
    j["rows"] = spec.rows;
    j["cols"] = spec.cols;
    j["pitch_nm"] = spec.pitch_nm;
    j["shape"] = detail::shape_spec_to_json(spec.shape);
    j["mean_height_nm"] = spec.mean_height_nm;
    j["height_sd_nm"] = spec.height_sd_nm;
    j["base_roughness_pp_nm"] = spec.base_roughness_pp_nm;
    j["tilt_x_nm_per_um"] = spec.tilt_x_nm_per_um;
    j["tilt_y_nm_per_um"] = spec.tilt_y_nm_per_um;
    j["area_jitter_rsd"] = spec.area_jitter_rsd;
    j["position_jitter_nm"] = spec.position_jitter_nm;
    j["seed"] = spec.seed;
    return j;
}

}  // namespace pillarmetry
