#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "pillarmetry/afm.hpp"
#include "pillarmetry/io.hpp"
#include "pillarmetry/parallel.hpp"
#include "pillarmetry/segment.hpp"
#include "pillarmetry/stats.hpp"
#include "pillarmetry/synth.hpp"
#include "pillarmetry/version.hpp"

namespace pillarmetry {

/// FNV-1a, 64-bit: fast, dependency-free fingerprint for embedding raster
/// checksums in reports instead of the rasters themselves.
inline std::uint64_t fnv1a64(std::string_view bytes) noexcept {
    std::uint64_t h = 1469598103934665603ULL;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    return h;
}

inline std::string hex64(std::uint64_t v) {
    static const char* digits = "0123456789abcdef";
    std::string out(16, '0');
    for (int i = 15; i >= 0; --i) {
        out[static_cast<std::size_t>(i)] = digits[v & 0xF];
        v >>= 4;
    }
    return out;
}

/// A ready-to-run generator -> analyzer round trip. The scene carries the
/// "total" (as-fabricated) jitter; the floor phase re-runs the identical
/// pipeline with the fabrication jitter zeroed so only the measurement chain
/// (rendering, noise, thresholding, pixelation) contributes spread.
struct ValidatePreset {
    enum class Kind { Sem, Afm };

    std::string name;
    Kind kind = Kind::Sem;
    int image_count = 1;
    Calibration cal{1.0, "synthetic"};
    SceneSpec scene;          // Kind::Sem
    SegmentationConfig seg;   // Kind::Sem
    AfmSceneSpec afm_scene;   // Kind::Afm
    bool rejection = false;   // additionally report MAD rejection vs labels
};

inline ValidatePreset validate_preset(const std::string& name) {
    ValidatePreset p;
    p.name = name;
    if (name == "nd1") {
        // Small pillars at SEM resolution: the <5% uniformity regime.
        p.kind = ValidatePreset::Kind::Sem;
        p.image_count = 44;
        p.cal = {0.505, "preset:nd1"};
        p.scene.rows = 2;
        p.scene.cols = 5;
        p.scene.pitch_nm = 300.0;
        p.scene.shape.kind = ShapeKind::Rect;
        p.scene.shape.length_nm = 40.0;
        p.scene.shape.width_nm = 65.0;
        p.scene.noise_sigma = 4.0;
        p.scene.area_jitter_rsd = 0.04;
        p.scene.position_jitter_nm = 5.0;
        p.seg.min_area_nm2 = 500.0;
    } else if (name == "large-pillars") {
        p.kind = ValidatePreset::Kind::Sem;
        p.image_count = 4;
        p.cal = {2.0, "preset:large-pillars"};
        p.scene.rows = 3;
        p.scene.cols = 5;
        p.scene.pitch_nm = 1000.0;
        p.scene.shape.kind = ShapeKind::Rect;
        p.scene.shape.length_nm = 250.0;
        p.scene.shape.width_nm = 400.0;
        p.scene.noise_sigma = 4.0;
        p.scene.area_jitter_rsd = 0.01;
        p.scene.position_jitter_nm = 10.0;
        p.seg.min_area_nm2 = 20000.0;
    } else if (name == "master-target") {
        // Reference array with one oversized disc per image, labeled in the
        // manifest, for exercising the rejection workflow end to end.
        p.kind = ValidatePreset::Kind::Sem;
        p.image_count = 33;
        p.cal = {1.0, "preset:master-target"};
        p.scene.rows = 2;
        p.scene.cols = 3;
        p.scene.pitch_nm = 500.0;
        p.scene.shape.kind = ShapeKind::Disc;
        p.scene.shape.diameter_nm = 60.0;
        p.scene.noise_sigma = 4.0;
        p.scene.area_jitter_rsd = 0.02;
        p.scene.position_jitter_nm = 3.0;
        p.scene.outlier_fraction = 0.15;  // 6 sites -> exactly one per image
        p.scene.outlier_scale = 1.3;
        p.seg.min_area_nm2 = 700.0;
        p.rejection = true;
    } else if (name == "afm") {
        p.kind = ValidatePreset::Kind::Afm;
        p.image_count = 4;
        p.cal = {5.0, "preset:afm"};
        p.afm_scene.rows = 5;
        p.afm_scene.cols = 5;
        p.afm_scene.pitch_nm = 250.0;
        p.afm_scene.shape.kind = ShapeKind::Rect;
        p.afm_scene.shape.length_nm = 40.0;
        p.afm_scene.shape.width_nm = 65.0;
        p.afm_scene.mean_height_nm = 68.2;
        p.afm_scene.height_sd_nm = 0.5;
        p.afm_scene.base_roughness_pp_nm = 1.5;
        p.afm_scene.tilt_x_nm_per_um = 5.0;
        p.afm_scene.tilt_y_nm_per_um = -3.0;
        p.afm_scene.area_jitter_rsd = 0.03;
        p.afm_scene.position_jitter_nm = 4.0;
    } else {
        throw InvalidArgumentError("unknown preset '" + name +
                                   "' (expected nd1, large-pillars, master-target, or afm)");
    }
    return p;
}

namespace detail {

struct SemImageOutcome {
    std::vector<double> areas;            // component order
    std::vector<AreaProvenance> origin;   // parallel to areas
    std::vector<char> outlier_label;      // parallel to areas, from the manifest
    std::uint64_t checksum = 0;
    std::uint64_t seed = 0;
    int level = 0;
    int unmatched = 0;
};

struct AfmMapOutcome {
    std::vector<double> heights;  // component order
    std::uint64_t checksum = 0;
    std::uint64_t seed = 0;
    double base_pp_nm = 0.0;
    double base_p1_p99_nm = 0.0;
    int structures = 0;
};

struct SemPhase {
    double rsd_percent = 0.0;
    double saa_nm2 = 0.0;
    double mean_nm2 = 0.0;
    std::size_t n = 0;
    std::size_t unmatched = 0;
    std::vector<double> pooled_norm;
    std::vector<char> pooled_label;
    std::vector<AreaProvenance> pooled_origin;
    nlohmann::json images = nlohmann::json::array();
};

inline SemPhase run_sem_phase(const SceneSpec& base, const Calibration& cal,
                              const SegmentationConfig& seg, int image_count,
                              std::uint64_t run_seed, int workers) {
    std::vector<SemImageOutcome> per_image(static_cast<std::size_t>(image_count));
    parallel_for_index(static_cast<std::size_t>(image_count), workers, [&](std::size_t k) {
        SceneSpec spec = base;
        spec.seed = derive_stream_seed(run_seed, 1000 + static_cast<std::uint64_t>(k));

        GrayImage img;
        SceneManifest manifest;
        generate_sem(spec, cal, &img, &manifest);

        MeasureResult res = measure(img, cal, seg);
        associate_grid(res.measurements, spec.pitch_nm, spec.pitch_nm / 2.0, spec.pitch_nm / 2.0,
                       spec.rows, spec.cols);

        SemImageOutcome& out = per_image[k];
        out.seed = spec.seed;
        out.level = res.level;
        out.checksum = fnv1a64(encode_gray_image(img));
        for (const auto& m : res.measurements) {
            out.areas.push_back(m.area_nm2);
            out.origin.push_back({static_cast<int>(k), m.component_id});
            const StructureRecord* rec =
                (m.grid_i && m.grid_j && !m.grid_conflict) ? manifest.find(*m.grid_i, *m.grid_j)
                                                           : nullptr;
            if (rec == nullptr) ++out.unmatched;
            out.outlier_label.push_back(rec != nullptr && rec->is_outlier ? 1 : 0);
        }
    });

    SemPhase phase;
    std::vector<std::vector<double>> S;
    std::vector<std::vector<AreaProvenance>> origin;
    for (const auto& out : per_image) {
        S.push_back(out.areas);
        origin.push_back(out.origin);
        phase.pooled_label.insert(phase.pooled_label.end(), out.outlier_label.begin(),
                                  out.outlier_label.end());
        phase.unmatched += static_cast<std::size_t>(out.unmatched);

        nlohmann::json ji;
        ji["index"] = phase.images.size();
        ji["seed"] = out.seed;
        ji["image_checksum"] = "fnv1a64:" + hex64(out.checksum);
        ji["threshold_level"] = out.level;
        ji["structures"] = out.areas.size();
        phase.images.push_back(std::move(ji));
    }

    const AreaDataset ds = normalize_dataset(S, origin);
    phase.pooled_norm = ds.pooled_normalized();
    phase.pooled_origin = ds.pooled_provenance();
    phase.saa_nm2 = ds.SAA;
    phase.mean_nm2 = mean_of(ds.pooled_raw());
    phase.rsd_percent = rsd(phase.pooled_norm);
    phase.n = phase.pooled_norm.size();
    return phase;
}

struct AfmPhase {
    double rsd_percent = 0.0;
    double mean_nm = 0.0;
    double sd_nm = 0.0;
    std::size_t n = 0;
    double base_pp_nm_max = 0.0;
    double base_p1_p99_nm_max = 0.0;
    nlohmann::json images = nlohmann::json::array();
};

inline AfmPhase run_afm_phase(const AfmSceneSpec& base, const Calibration& cal, int map_count,
                              std::uint64_t run_seed, int workers) {
    std::vector<AfmMapOutcome> per_map(static_cast<std::size_t>(map_count));
    parallel_for_index(static_cast<std::size_t>(map_count), workers, [&](std::size_t k) {
        AfmSceneSpec spec = base;
        spec.seed = derive_stream_seed(run_seed, 1000 + static_cast<std::uint64_t>(k));

        HeightMap map;
        SceneManifest manifest;
        generate_afm(spec, cal, &map, &manifest);

        const LeveledMap leveled = level_plane(map, auto_base_mask(map));
        const BaseFlatness flat = base_flatness(leveled);
        int count = 0;
        const auto labels = detect_structures(leveled, default_detect_z(leveled), &count);
        const auto ms = extract_heights(leveled, labels, count);

        AfmMapOutcome& out = per_map[k];
        out.seed = spec.seed;
        out.checksum = fnv1a64(encode_heightmap(map));
        out.base_pp_nm = flat.peak_to_peak_nm;
        out.base_p1_p99_nm = flat.p1_p99_nm;
        out.structures = count;
        for (const auto& m : ms) out.heights.push_back(m.height_nm);
    });

    AfmPhase phase;
    std::vector<double> pooled;
    for (const auto& out : per_map) {
        pooled.insert(pooled.end(), out.heights.begin(), out.heights.end());
        phase.base_pp_nm_max = std::max(phase.base_pp_nm_max, out.base_pp_nm);
        phase.base_p1_p99_nm_max = std::max(phase.base_p1_p99_nm_max, out.base_p1_p99_nm);

        nlohmann::json ji;
        ji["index"] = phase.images.size();
        ji["seed"] = out.seed;
        ji["map_checksum"] = "fnv1a64:" + hex64(out.checksum);
        ji["structures"] = out.structures;
        ji["base_flatness_pp_nm"] = out.base_pp_nm;
        phase.images.push_back(std::move(ji));
    }
    phase.mean_nm = mean_of(pooled);
    phase.sd_nm = sample_sd(pooled);
    phase.rsd_percent = rsd(pooled);
    phase.n = pooled.size();
    return phase;
}

inline nlohmann::json segmentation_to_json(const SegmentationConfig& seg) {
    nlohmann::json j;
    switch (seg.threshold_mode) {
        case SegmentationConfig::ThresholdMode::Fixed: j["threshold_mode"] = "fixed"; break;
        case SegmentationConfig::ThresholdMode::Otsu: j["threshold_mode"] = "otsu"; break;
        case SegmentationConfig::ThresholdMode::TiledOtsu: j["threshold_mode"] = "tiled-otsu"; break;
    }
    j["fixed_level"] = seg.fixed_level;
    j["tile_px"] = seg.tile_px;
    j["connectivity"] = seg.connectivity;
    j["min_area_nm2"] = seg.min_area_nm2;
    j["max_area_nm2"] =
        std::isfinite(seg.max_area_nm2) ? nlohmann::json(seg.max_area_nm2) : nlohmann::json();
    j["border_policy"] = seg.border_policy == SegmentationConfig::BorderPolicy::ExcludeTouching
                             ? "exclude_touching"
                             : "include";
    j["fill_holes"] = seg.fill_holes;
    return j;
}

}  // namespace detail

/// Generator -> analyzer round trip with a method-floor phase (fabrication
/// jitter zeroed) and a total phase (as configured). The fabrication
/// component is recovered in quadrature: true = sqrt(total^2 - floor^2).
inline nlohmann::json run_validation(const ValidatePreset& preset, std::uint64_t seed,
                                     int workers) {
    if (preset.image_count < 2) throw InvalidArgumentError("validation needs at least 2 images");

    nlohmann::json report;
    report["preset"] = preset.name;
    report["seed"] = seed;
    report["tool_version"] = kVersion;

    const auto phase_json_sem = [](const detail::SemPhase& ph) {
        nlohmann::json j;
        j["rsd_percent"] = ph.rsd_percent;
        j["saa_nm2"] = ph.saa_nm2;
        j["mean_area_nm2"] = ph.mean_nm2;
        j["n"] = ph.n;
        j["unassociated_structures"] = ph.unmatched;
        j["images"] = ph.images;
        return j;
    };
    const auto phase_json_afm = [](const detail::AfmPhase& ph) {
        nlohmann::json j;
        j["rsd_percent"] = ph.rsd_percent;
        j["mean_height_nm"] = ph.mean_nm;
        j["sd_height_nm"] = ph.sd_nm;
        j["n"] = ph.n;
        j["base_flatness_pp_nm_max"] = ph.base_pp_nm_max;
        j["base_p1_p99_nm_max"] = ph.base_p1_p99_nm_max;
        j["maps"] = ph.images;
        return j;
    };

    if (preset.kind == ValidatePreset::Kind::Sem) {
        SceneSpec floor_scene = preset.scene;
        floor_scene.area_jitter_rsd = 0.0;
        floor_scene.outlier_fraction = 0.0;

        const auto floor_phase = detail::run_sem_phase(floor_scene, preset.cal, preset.seg,
                                                       preset.image_count, seed, workers);
        const auto total_phase = detail::run_sem_phase(preset.scene, preset.cal, preset.seg,
                                                       preset.image_count, seed, workers);

        report["kind"] = "sem";
        report["config"] = {{"images", preset.image_count},
                            {"calibration",
                             {{"pixel_scale_nm", preset.cal.pixel_scale_nm},
                              {"source", preset.cal.source}}},
                            {"scene", scene_spec_to_json(preset.scene)},
                            {"segmentation", detail::segmentation_to_json(preset.seg)}};
        report["floor"] = phase_json_sem(floor_phase);
        report["total"] = phase_json_sem(total_phase);
        report["configured_area_jitter_percent"] = 100.0 * preset.scene.area_jitter_rsd;

        const double t = total_phase.rsd_percent, f = floor_phase.rsd_percent;
        report["true_rsd_percent"] = std::sqrt(std::max(0.0, t * t - f * f));

        if (preset.rejection) {
            const auto rej = reject_outliers_mad(total_phase.pooled_norm);
            std::size_t tp = 0, fp = 0, fn = 0;
            std::vector<char> rejected(total_phase.pooled_norm.size(), 0);
            for (std::size_t idx : rej.rejected) rejected[idx] = 1;
            for (std::size_t i = 0; i < rejected.size(); ++i) {
                if (rejected[i] && total_phase.pooled_label[i]) ++tp;
                if (rejected[i] && !total_phase.pooled_label[i]) ++fp;
                if (!rejected[i] && total_phase.pooled_label[i]) ++fn;
            }
            const std::size_t labeled =
                static_cast<std::size_t>(std::count(total_phase.pooled_label.begin(),
                                                    total_phase.pooled_label.end(), char(1)));

            nlohmann::json jr;
            jr["method"] = rej.method;
            jr["pre_rsd_percent"] = total_phase.rsd_percent;
            jr["post_rsd_percent"] = rsd(rej.kept_values(total_phase.pooled_norm));
            jr["rejected_count"] = rej.rejected.size();
            jr["labeled_outliers"] = labeled;
            jr["precision"] = rej.rejected.empty()
                                  ? 0.0
                                  : static_cast<double>(tp) / static_cast<double>(tp + fp);
            jr["recall"] =
                labeled == 0 ? 0.0 : static_cast<double>(tp) / static_cast<double>(tp + fn);
            report["rejection"] = std::move(jr);
        }
    } else {
        AfmSceneSpec floor_scene = preset.afm_scene;
        floor_scene.height_sd_nm = 0.0;

        const auto floor_phase =
            detail::run_afm_phase(floor_scene, preset.cal, preset.image_count, seed, workers);
        const auto total_phase =
            detail::run_afm_phase(preset.afm_scene, preset.cal, preset.image_count, seed, workers);

        report["kind"] = "afm";
        report["config"] = {{"maps", preset.image_count},
                            {"calibration",
                             {{"pixel_scale_nm", preset.cal.pixel_scale_nm},
                              {"source", preset.cal.source}}},
                            {"scene", afm_scene_spec_to_json(preset.afm_scene)}};
        report["floor"] = phase_json_afm(floor_phase);
        report["total"] = phase_json_afm(total_phase);
        report["configured_height_rsd_percent"] =
            100.0 * preset.afm_scene.height_sd_nm / preset.afm_scene.mean_height_nm;

        const double t = total_phase.rsd_percent, f = floor_phase.rsd_percent;
        report["true_rsd_percent"] = std::sqrt(std::max(0.0, t * t - f * f));
    }
    return report;
}

}  // namespace pillarmetry
