// Command-line front end: reproducible batch workflows over the library.
// One binary, subcommand style; every run writes run.json (resolved config +
// tool version) into the output directory so artifacts are replayable.

#include <cstdint>
#include <filesystem>
#include <iostream>
#include <map>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "pillarmetry/afm.hpp"
#include "pillarmetry/csv.hpp"
#include "pillarmetry/design.hpp"
#include "pillarmetry/io.hpp"
#include "pillarmetry/parallel.hpp"
#include "pillarmetry/segment.hpp"
#include "pillarmetry/stats.hpp"
#include "pillarmetry/sweep.hpp"
#include "pillarmetry/synth.hpp"
#include "pillarmetry/validate.hpp"
#include "pillarmetry/version.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace pillarmetry;

namespace {

// ---------------------------------------------------------------------------
// shared plumbing

void write_json_file(const fs::path& path, const json& j) {
    write_file_atomic(path, j.dump(2) + "\n");
}

fs::path ensure_outdir(const std::string& outdir) {
    fs::path dir(outdir);
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw IoError("cannot create output directory " + dir.string() + ": " + ec.message());
    return dir;
}

/// The reproducibility record. Deliberately excludes the output directory and
/// worker count: neither influences artifact bytes, and including them would
/// make byte-identical runs look different.
void write_run_json(const fs::path& outdir, const std::string& subcommand, const json& config) {
    json j;
    j["tool"] = kToolName;
    j["version"] = kVersion;
    j["subcommand"] = subcommand;
    j["config"] = config;
    write_json_file(outdir / "run.json", j);
}

/// --seed omitted -> draw one, tell the user, and persist it in run.json.
std::uint64_t resolve_seed(const CLI::Option* seed_opt, std::uint64_t flag_value) {
    if (seed_opt->count() > 0) return flag_value;
    std::random_device rd;
    const std::uint64_t seed =
        (static_cast<std::uint64_t>(rd()) << 32) ^ static_cast<std::uint64_t>(rd());
    std::cerr << "seed: " << seed << " (generated; pass --seed to reproduce)\n";
    return seed;
}

std::string series_key(int image_count, int image_id, const StructureMeasurement& m) {
    std::string key;
    if (image_count > 1) key += std::to_string(image_id) + "_";
    key += std::to_string(*m.grid_i) + "_" + std::to_string(*m.grid_j);
    return key;
}

// ---------------------------------------------------------------------------
// design / plan-etch

struct DesignArgs {
    double length_nm = 0.0, width_nm = 0.0, height_nm = 0.0;
    double density = 3515.0;
    double atomic_mass_u = 12.011;
    double nv_threshold_nm = 20.0;
    std::string outdir = ".";
};

void run_design(const DesignArgs& a) {
    const fs::path outdir = ensure_outdir(a.outdir);

    PillarSpec spec{a.length_nm, a.width_nm, a.height_nm, ""};
    MaterialConstants mat{a.density, a.atomic_mass_u * kAtomicMassUnitKg};
    const DesignReport r = check_design(spec, mat, a.nv_threshold_nm);

    json j;
    j["mass_kg"] = r.mass_kg;
    j["atom_count"] = r.atom_count;
    j["nv_margin_nm"] = r.nv_margin_nm;
    j["pass_20nm"] = r.pass_at_20nm;
    j["pass_30nm"] = r.pass_at_30nm;
    j["distinct_dims"] = r.distinct_dims;
    j["height_is_largest"] = r.height_is_largest;
    j["gravity_test_eligible"] = r.gravity_test_eligible;

    json config;
    config["length_nm"] = a.length_nm;
    config["width_nm"] = a.width_nm;
    config["height_nm"] = a.height_nm;
    config["density_kg_m3"] = a.density;
    config["atomic_mass_u"] = a.atomic_mass_u;
    config["nv_threshold_nm"] = a.nv_threshold_nm;
    write_run_json(outdir, "design", config);
    write_json_file(outdir / "design.json", j);
    std::cout << j.dump(2) << "\n";
}

struct PlanEtchArgs {
    double depth_nm = 0.0;
    EtchSelectivities sel;
    std::string outdir = ".";
};

void run_plan_etch(const PlanEtchArgs& a) {
    const fs::path outdir = ensure_outdir(a.outdir);
    const EtchStackPlan plan = plan_etch_stack(a.depth_nm, a.sel);

    json j;
    j["etch_depth_nm"] = plan.etch_depth_nm;
    j["mask_thickness_nm"] = plan.mask_thickness_nm;
    j["resist_thickness_man_nm"] = plan.resist_thickness_man_nm;
    j["resist_thickness_sx_nm"] = plan.resist_thickness_sx_nm;
    j["feasible_with_man"] = plan.feasible_with_man;
    j["man_max_thickness_nm"] = kMaNMaxThicknessNm;
    j["selectivities"] = {{"diamond_to_mask", a.sel.diamond_to_mask},
                          {"mask_to_resist_man", a.sel.mask_to_resist_man},
                          {"mask_to_resist_sx", a.sel.mask_to_resist_sx}};

    json config;
    config["etch_depth_nm"] = a.depth_nm;
    config["selectivities"] = j["selectivities"];
    write_run_json(outdir, "plan-etch", config);
    write_json_file(outdir / "plan-etch.json", j);
    std::cout << j.dump(2) << "\n";
}

// ---------------------------------------------------------------------------
// generate-sem / generate-afm

/// Flags win over the scene file: every explicitly-passed option overwrites
/// the corresponding field of the loaded (or default) spec.
struct SceneFlagSet {
    int rows = 0, cols = 0;
    double pitch = 0.0;
    std::string shape;
    double length = 0.0, width = 0.0, diameter = 0.0;
    std::uint64_t seed = 0;
    double area_jitter = 0.0, position_jitter = 0.0;

    CLI::Option *rows_o = nullptr, *cols_o = nullptr, *pitch_o = nullptr, *shape_o = nullptr,
                *length_o = nullptr, *width_o = nullptr, *diameter_o = nullptr, *seed_o = nullptr,
                *area_jitter_o = nullptr, *position_jitter_o = nullptr;

    void add_to(CLI::App* cmd) {
        rows_o = cmd->add_option("--rows", rows, "Lattice rows");
        cols_o = cmd->add_option("--cols", cols, "Lattice columns");
        pitch_o = cmd->add_option("--pitch", pitch, "Lattice pitch in nm");
        shape_o = cmd->add_option("--shape", shape, "Structure footprint: rect or disc");
        length_o = cmd->add_option("--length", length, "Rect extent along x in nm");
        width_o = cmd->add_option("--width", width, "Rect extent along y in nm");
        diameter_o = cmd->add_option("--diameter", diameter, "Disc diameter in nm");
        seed_o = cmd->add_option("--seed", seed, "Deterministic seed (omit to generate one)");
        area_jitter_o = cmd->add_option("--area-jitter", area_jitter,
                                        "Relative sd of per-structure area factors, e.g. 0.04");
        position_jitter_o = cmd->add_option("--position-jitter", position_jitter,
                                            "Gaussian centroid jitter sd in nm");
    }

    template <typename Spec>
    void apply_common(Spec& spec) const {
        if (rows_o->count()) spec.rows = rows;
        if (cols_o->count()) spec.cols = cols;
        if (pitch_o->count()) spec.pitch_nm = pitch;
        if (shape_o->count()) spec.shape.kind = shape_kind_from_string(shape);
        if (length_o->count()) spec.shape.length_nm = length;
        if (width_o->count()) spec.shape.width_nm = width;
        if (diameter_o->count()) spec.shape.diameter_nm = diameter;
        if (area_jitter_o->count()) spec.area_jitter_rsd = area_jitter;
        if (position_jitter_o->count()) spec.position_jitter_nm = position_jitter;
        spec.seed = resolve_seed(seed_o, seed);
    }
};

struct GenerateSemArgs {
    std::string scene_path;
    double pixel_scale = 0.505;
    double height = 0.0, ring_width = 0.0, ring_gain = 0.0;
    double bg_level = 0.0, bg_gradient_x = 0.0, bg_gradient_y = 0.0, noise_sigma = 0.0;
    double outlier_fraction = 0.0, outlier_scale = 0.0;
    std::string outdir = ".";

    SceneFlagSet common;
    CLI::Option *scene_o = nullptr, *height_o = nullptr, *ring_width_o = nullptr,
                *ring_gain_o = nullptr, *bg_level_o = nullptr, *bg_gx_o = nullptr,
                *bg_gy_o = nullptr, *noise_o = nullptr, *outlier_fraction_o = nullptr,
                *outlier_scale_o = nullptr;
};

void run_generate_sem(const GenerateSemArgs& a) {
    const fs::path outdir = ensure_outdir(a.outdir);

    SceneSpec spec;
    if (a.scene_o->count()) {
        spec = scene_spec_from_json(parse_json_text(read_file_bytes(a.scene_path), "scene spec"));
    }
    a.common.apply_common(spec);
    if (a.height_o->count()) spec.structure_height_nm = a.height;
    if (a.ring_width_o->count()) spec.edge_ring_width_nm = a.ring_width;
    if (a.ring_gain_o->count()) spec.ring_gain = a.ring_gain;
    if (a.bg_level_o->count()) spec.background.base_level = a.bg_level;
    if (a.bg_gx_o->count()) spec.background.gradient_x = a.bg_gradient_x;
    if (a.bg_gy_o->count()) spec.background.gradient_y = a.bg_gradient_y;
    if (a.noise_o->count()) spec.noise_sigma = a.noise_sigma;
    if (a.outlier_fraction_o->count()) spec.outlier_fraction = a.outlier_fraction;
    if (a.outlier_scale_o->count()) spec.outlier_scale = a.outlier_scale;

    const Calibration cal{a.pixel_scale, "generate-sem"};

    GrayImage image;
    SceneManifest manifest;
    generate_sem(spec, cal, &image, &manifest);

    json config;
    config["scene"] = scene_spec_to_json(spec);
    config["pixel_scale_nm"] = a.pixel_scale;
    if (a.scene_o->count()) config["scene_file"] = a.scene_path;
    write_run_json(outdir, "generate-sem", config);

    write_json_file(outdir / "scene.json", scene_spec_to_json(spec));
    write_gray_image(image, outdir / "image.pgm");
    write_manifest(manifest, outdir / "manifest.json");
    write_calibration(cal, outdir / "calibration.json");

    std::cout << "wrote " << image.width << "x" << image.height << " image with "
              << manifest.structures.size() << " structures to " << (outdir / "image.pgm").string()
              << "\n";
}

struct GenerateAfmArgs {
    std::string scene_path;
    std::string from_manifest;
    double pixel_scale = 5.0;
    double mean_height = 0.0, height_sd = 0.0, roughness = 0.0, tilt_x = 0.0, tilt_y = 0.0;
    std::string outdir = ".";

    SceneFlagSet common;
    CLI::Option *scene_o = nullptr, *from_manifest_o = nullptr, *mean_height_o = nullptr,
                *height_sd_o = nullptr, *roughness_o = nullptr, *tilt_x_o = nullptr,
                *tilt_y_o = nullptr;
};

void run_generate_afm(const GenerateAfmArgs& a) {
    const fs::path outdir = ensure_outdir(a.outdir);

    AfmSceneSpec spec;
    if (a.scene_o->count()) {
        spec = afm_scene_spec_from_json(
            parse_json_text(read_file_bytes(a.scene_path), "scene spec"));
    }
    a.common.apply_common(spec);
    if (a.mean_height_o->count()) spec.mean_height_nm = a.mean_height;
    if (a.height_sd_o->count()) spec.height_sd_nm = a.height_sd;
    if (a.roughness_o->count()) spec.base_roughness_pp_nm = a.roughness;
    if (a.tilt_x_o->count()) spec.tilt_x_nm_per_um = a.tilt_x;
    if (a.tilt_y_o->count()) spec.tilt_y_nm_per_um = a.tilt_y;

    const Calibration cal{a.pixel_scale, "generate-afm"};

    HeightMap map;
    SceneManifest manifest;
    if (a.from_manifest_o->count()) {
        const SceneManifest source = read_manifest(a.from_manifest);
        generate_afm_from_manifest(spec, source, cal, &map, &manifest);
    } else {
        generate_afm(spec, cal, &map, &manifest);
    }

    json config;
    config["scene"] = afm_scene_spec_to_json(spec);
    config["pixel_scale_nm"] = a.pixel_scale;
    if (a.scene_o->count()) config["scene_file"] = a.scene_path;
    if (a.from_manifest_o->count()) config["from_manifest"] = a.from_manifest;
    write_run_json(outdir, "generate-afm", config);

    write_json_file(outdir / "scene.json", afm_scene_spec_to_json(spec));
    write_heightmap(map, outdir / "heightmap.csv");
    write_manifest(manifest, outdir / "manifest.json");
    write_calibration(cal, outdir / "calibration.json");

    std::cout << "wrote " << map.cols << "x" << map.rows << " height map with "
              << manifest.structures.size() << " structures to "
              << (outdir / "heightmap.csv").string() << "\n";
}

// ---------------------------------------------------------------------------
// segment

struct SegmentArgs {
    std::vector<std::string> images;
    std::string calibration_path;
    double pixel_scale = 0.0;
    std::string threshold = "otsu";
    int level = 128;
    int tile_px = 64;
    int connectivity = 8;
    double min_area = 0.0;
    double max_area = 0.0;
    bool include_border = false;
    bool no_fill_holes = false;
    double pitch = 0.0;
    int grid_rows = 0, grid_cols = 0;
    double grid_offset_x = 0.0, grid_offset_y = 0.0;
    std::vector<int> sweep_offsets;
    int workers = 0;
    std::string outdir = ".";

    CLI::Option *calibration_o = nullptr, *pixel_scale_o = nullptr, *max_area_o = nullptr,
                *pitch_o = nullptr, *grid_rows_o = nullptr, *grid_cols_o = nullptr,
                *grid_offset_x_o = nullptr, *grid_offset_y_o = nullptr, *sweep_o = nullptr;
};

SegmentationConfig segmentation_from_args(const SegmentArgs& a) {
    SegmentationConfig cfg;
    if (a.threshold == "fixed")
        cfg.threshold_mode = SegmentationConfig::ThresholdMode::Fixed;
    else if (a.threshold == "otsu")
        cfg.threshold_mode = SegmentationConfig::ThresholdMode::Otsu;
    else if (a.threshold == "tiled-otsu")
        cfg.threshold_mode = SegmentationConfig::ThresholdMode::TiledOtsu;
    else
        throw CLI::ValidationError("--threshold must be fixed, otsu, or tiled-otsu");
    cfg.fixed_level = a.level;
    cfg.tile_px = a.tile_px;
    cfg.connectivity = a.connectivity;
    cfg.min_area_nm2 = a.min_area;
    if (a.max_area_o->count()) cfg.max_area_nm2 = a.max_area;
    cfg.border_policy = a.include_border ? SegmentationConfig::BorderPolicy::Include
                                         : SegmentationConfig::BorderPolicy::ExcludeTouching;
    cfg.fill_holes = !a.no_fill_holes;
    cfg.validate();
    return cfg;
}

Calibration calibration_from_args(const CLI::Option* cal_opt, const std::string& cal_path,
                                  const CLI::Option* scale_opt, double scale) {
    if (scale_opt->count())  // flags win over the calibration file
        return Calibration{scale, "cli"};
    if (cal_opt->count()) return read_calibration(cal_path);
    throw CLI::ValidationError("either --pixel-scale or --calibration is required");
}

void run_segment(const SegmentArgs& a) {
    const fs::path outdir = ensure_outdir(a.outdir);
    const SegmentationConfig cfg = segmentation_from_args(a);
    const Calibration cal =
        calibration_from_args(a.calibration_o, a.calibration_path, a.pixel_scale_o, a.pixel_scale);

    const bool with_grid = a.pitch_o->count() > 0;
    if (with_grid && (a.grid_rows < 1 || a.grid_cols < 1))
        throw CLI::ValidationError("--pitch needs --grid-rows and --grid-cols");

    json config;
    config["images"] = a.images;
    config["pixel_scale_nm"] = cal.pixel_scale_nm;
    config["segmentation"] = detail::segmentation_to_json(cfg);
    if (with_grid) {
        config["grid"] = {{"pitch_nm", a.pitch},
                          {"rows", a.grid_rows},
                          {"cols", a.grid_cols},
                          {"offset_x_nm", a.grid_offset_x_o->count() ? a.grid_offset_x : a.pitch / 2},
                          {"offset_y_nm", a.grid_offset_y_o->count() ? a.grid_offset_y : a.pitch / 2}};
    }
    if (a.sweep_o->count()) config["sweep_offsets"] = a.sweep_offsets;
    write_run_json(outdir, "segment", config);

    // Per-image analysis is independent; results are joined by index so the
    // artifact bytes cannot depend on the worker count.
    std::vector<GrayImage> images(a.images.size());
    std::vector<MeasureResult> results(a.images.size());
    parallel_for_index(a.images.size(), a.workers, [&](std::size_t k) {
        images[k] = read_gray_image(a.images[k]);
        results[k] = measure(images[k], cal, cfg);
        if (with_grid) {
            const double ox = a.grid_offset_x_o->count() ? a.grid_offset_x : a.pitch / 2;
            const double oy = a.grid_offset_y_o->count() ? a.grid_offset_y : a.pitch / 2;
            associate_grid(results[k].measurements, a.pitch, ox, oy, a.grid_rows, a.grid_cols);
        }
    });

    std::vector<MeasurementRow> rows;
    Series areas;
    areas.has_keys = true;
    json per_image = json::array();
    for (std::size_t k = 0; k < results.size(); ++k) {
        const int image_id = static_cast<int>(k);
        for (const auto& m : results[k].measurements) {
            rows.push_back(measurement_row_from(m, image_id));
            if (with_grid && m.grid_i && m.grid_j && !m.grid_conflict)
                areas.entries.push_back(
                    {series_key(static_cast<int>(results.size()), image_id, m), m.area_nm2});
        }
        json ji;
        ji["image"] = a.images[k];
        ji["image_id"] = image_id;
        ji["threshold_level"] = results[k].level;
        ji["structures"] = results[k].measurements.size();
        if (results[k].tiled_levels) ji["tiles"] = results[k].tiled_levels->levels.size();
        per_image.push_back(std::move(ji));
    }

    write_file_atomic(outdir / "measurements.csv", encode_measurement_csv(rows));
    json seg_report;
    seg_report["images"] = per_image;
    seg_report["total_structures"] = rows.size();
    write_json_file(outdir / "segmentation.json", seg_report);
    if (with_grid) write_file_atomic(outdir / "areas.csv", encode_series_csv(areas));

    if (a.sweep_o->count()) {
        const SweepTable table = threshold_sweep(images, cal, cfg, a.sweep_offsets);
        std::string csv = "offset,saa_nm2,mean_area_nm2,rsd_percent,structure_count\n";
        for (const auto& row : table.rows) {
            csv += std::to_string(row.offset) + "," + format_double(row.saa_nm2) + "," +
                   format_double(row.mean_area_nm2) + "," + format_double(row.rsd_percent) + "," +
                   std::to_string(row.structure_count) + "\n";
        }
        write_file_atomic(outdir / "sweep.csv", csv);
        json js;
        js["offsets"] = a.sweep_offsets;
        js["drsd_dlevel"] = table.drsd_dlevel;
        write_json_file(outdir / "sweep.json", js);
    }

    std::cout << "measured " << rows.size() << " structures in " << a.images.size()
              << " image(s) -> " << (outdir / "measurements.csv").string() << "\n";
}

// ---------------------------------------------------------------------------
// heights

struct HeightsArgs {
    std::string map_path;
    double detect_z = 0.0;
    int min_points = 5;
    double pitch = 0.0;
    int grid_rows = 0, grid_cols = 0;
    double grid_offset_x = 0.0, grid_offset_y = 0.0;
    std::string outdir = ".";

    CLI::Option *detect_z_o = nullptr, *pitch_o = nullptr, *grid_offset_x_o = nullptr,
                *grid_offset_y_o = nullptr;
};

void run_heights(const HeightsArgs& a) {
    const fs::path outdir = ensure_outdir(a.outdir);
    const HeightMap map = read_heightmap(a.map_path);

    const bool with_grid = a.pitch_o->count() > 0;
    if (with_grid && (a.grid_rows < 1 || a.grid_cols < 1))
        throw CLI::ValidationError("--pitch needs --grid-rows and --grid-cols");

    json config;
    config["map"] = a.map_path;
    config["min_points"] = a.min_points;
    if (a.detect_z_o->count()) config["detect_z_nm"] = a.detect_z;
    if (with_grid) {
        config["grid"] = {{"pitch_nm", a.pitch},
                          {"rows", a.grid_rows},
                          {"cols", a.grid_cols},
                          {"offset_x_nm", a.grid_offset_x_o->count() ? a.grid_offset_x : a.pitch / 2},
                          {"offset_y_nm", a.grid_offset_y_o->count() ? a.grid_offset_y : a.pitch / 2}};
    }
    write_run_json(outdir, "heights", config);

    const LeveledMap leveled = level_plane(map, auto_base_mask(map));
    const BaseFlatness flat = base_flatness(leveled);
    const double detect_z = a.detect_z_o->count() ? a.detect_z : default_detect_z(leveled);
    int count = 0;
    const auto labels = detect_structures(leveled, detect_z, &count, a.min_points);
    auto ms = extract_heights(leveled, labels, count);
    if (with_grid) {
        const double ox = a.grid_offset_x_o->count() ? a.grid_offset_x : a.pitch / 2;
        const double oy = a.grid_offset_y_o->count() ? a.grid_offset_y : a.pitch / 2;
        associate_grid_heights(ms, a.pitch, ox, oy, a.grid_rows, a.grid_cols);
    }

    std::string csv = "grid_i,grid_j,height_nm,center_height_nm,top_flatness_pp_nm,apparent_area_nm2\n";
    Series height_series, area_series;
    height_series.has_keys = area_series.has_keys = true;
    std::vector<double> heights;
    for (const auto& m : ms) {
        csv += (m.grid_i ? std::to_string(*m.grid_i) : "") + ",";
        csv += (m.grid_j ? std::to_string(*m.grid_j) : "") + ",";
        csv += format_double(m.height_nm) + "," + format_double(m.center_height_nm) + "," +
               format_double(m.top_flatness_pp_nm) + "," + format_double(m.apparent_area_nm2) +
               "\n";
        heights.push_back(m.height_nm);
        if (m.grid_i && m.grid_j && !m.grid_conflict) {
            const std::string key = std::to_string(*m.grid_i) + "_" + std::to_string(*m.grid_j);
            height_series.entries.push_back({key, m.height_nm});
            area_series.entries.push_back({key, m.apparent_area_nm2});
        }
    }
    write_file_atomic(outdir / "heights.csv", csv);
    if (with_grid) {
        write_file_atomic(outdir / "heights_series.csv", encode_series_csv(height_series));
        write_file_atomic(outdir / "areas.csv", encode_series_csv(area_series));
    }

    json summary;
    summary["n"] = heights.size();
    summary["mean"] = heights.empty() ? 0.0 : mean_of(heights);
    summary["sd"] = heights.size() >= 2 ? sample_sd(heights) : 0.0;
    summary["rsd"] = heights.size() >= 2 ? rsd(heights) : 0.0;
    summary["base_flatness_pp"] = flat.peak_to_peak_nm;
    summary["base_p1_p99"] = flat.p1_p99_nm;
    summary["detect_z_nm"] = detect_z;
    write_json_file(outdir / "heights.json", summary);

    std::cout << "measured " << heights.size() << " structures -> "
              << (outdir / "heights.csv").string() << "\n";
}

// ---------------------------------------------------------------------------
// stats

struct StatsArgs {
    std::vector<std::string> inputs;
    std::string group_by = "image";
    std::string reject = "mad";
    double mad_threshold = 3.5;
    std::string outdir = ".";
};

void run_stats(const StatsArgs& a) {
    const fs::path outdir = ensure_outdir(a.outdir);
    if (a.group_by != "image" && a.group_by != "tile")
        throw CLI::ValidationError("--group-by must be image or tile");
    if (a.reject != "mad" && a.reject != "none")
        throw CLI::ValidationError("--reject must be mad or none");

    json config;
    config["inputs"] = a.inputs;
    config["group_by"] = a.group_by;
    config["reject"] = a.reject;
    config["mad_threshold"] = a.mad_threshold;
    write_run_json(outdir, "stats", config);

    // Group measurements into dataset rows: one row per image, or per
    // (image, tile) pseudo-image when tiled thresholding was used upstream.
    std::map<std::tuple<int, int, int>, std::vector<MeasurementRow>> groups;
    int file_index = 0;
    for (const auto& path : a.inputs) {
        const auto rows = decode_measurement_csv(read_file_bytes(path));
        for (const auto& row : rows) {
            int tile = 0;
            if (a.group_by == "tile") {
                if (!row.tile_id)
                    throw InvalidDatasetError(
                        "tile grouping needs tile ids; re-run segment with --threshold tiled-otsu");
                tile = *row.tile_id;
            }
            groups[{file_index, row.image_id, tile}].push_back(row);
        }
        ++file_index;
    }
    if (groups.empty()) throw InvalidDatasetError("no measurements in input");

    std::vector<std::vector<double>> S;
    std::vector<std::vector<AreaProvenance>> origin;
    for (const auto& [key, rows] : groups) {
        std::vector<double> areas;
        std::vector<AreaProvenance> prov;
        for (const auto& row : rows) {
            areas.push_back(row.area_nm2);
            prov.push_back({row.image_id, row.component_id});
        }
        S.push_back(std::move(areas));
        origin.push_back(std::move(prov));
    }

    const AreaDataset ds = normalize_dataset(S, origin);
    const auto pooled = ds.pooled_normalized();
    const auto pooled_origin = ds.pooled_provenance();

    const RejectionResult rej = a.reject == "mad"
                                    ? reject_outliers_mad(pooled, a.mad_threshold)
                                    : reject_outliers_none(pooled);
    const UniformityReport rep = summarize_uniformity(pooled, rej);

    json j;
    j["n"] = rep.n;
    j["mean"] = rep.mean;
    j["sd"] = rep.sd;
    j["rsd"] = rep.rsd;
    j["rejected_count"] = rep.rejected_count;
    j["rejection_method"] = rep.rejection_method;
    j["saa_nm2"] = ds.SAA;
    j["groups"] = S.size();
    write_json_file(outdir / "uniformity.json", j);

    Series normalized;
    normalized.has_keys = true;
    for (std::size_t i = 0; i < pooled.size(); ++i) {
        normalized.entries.push_back({std::to_string(pooled_origin[i].image_id) + ":" +
                                          std::to_string(pooled_origin[i].component_id),
                                      pooled[i]});
    }
    write_file_atomic(outdir / "normalized.csv", encode_series_csv(normalized));

    std::cout << "n = " << rep.n << ", mean = " << format_double(rep.mean)
              << " nm^2, rsd = " << format_double(rep.rsd) << " % (rejected "
              << rep.rejected_count << " via " << rep.rejection_method << ")\n";
}

// ---------------------------------------------------------------------------
// compare

struct CompareArgs {
    std::string a_path, b_path;
    std::string outdir = ".";
};

void run_compare(const CompareArgs& a) {
    const fs::path outdir = ensure_outdir(a.outdir);
    const Series sa = decode_series_csv(read_file_bytes(a.a_path));
    const Series sb = decode_series_csv(read_file_bytes(a.b_path));

    json config;
    config["a"] = a.a_path;
    config["b"] = a.b_path;
    write_run_json(outdir, "compare", config);

    std::vector<double> x, y;
    if (sa.has_keys != sb.has_keys)
        throw InvalidDatasetError("cannot align a keyed series with a bare one");
    if (sa.has_keys) {
        std::map<std::string, double> bm;
        for (const auto& e : sb.entries) {
            if (!bm.emplace(e.key, e.value).second)
                throw InvalidDatasetError("duplicate key '" + e.key + "' in " + a.b_path);
        }
        std::map<std::string, double> am;
        for (const auto& e : sa.entries) {
            if (!am.emplace(e.key, e.value).second)
                throw InvalidDatasetError("duplicate key '" + e.key + "' in " + a.a_path);
        }
        for (const auto& [key, va] : am) {
            auto it = bm.find(key);
            if (it == bm.end()) continue;
            x.push_back(va);
            y.push_back(it->second);
        }
        if (x.size() < 2)
            throw InvalidDatasetError("fewer than 2 shared keys between the two series");
    } else {
        if (sa.entries.size() != sb.entries.size())
            throw InvalidDatasetError("bare series differ in length (" +
                                      std::to_string(sa.entries.size()) + " vs " +
                                      std::to_string(sb.entries.size()) + ")");
        for (const auto& e : sa.entries) x.push_back(e.value);
        for (const auto& e : sb.entries) y.push_back(e.value);
    }

    const double r = pearson(x, y);
    json j;
    j["r"] = r;
    j["n"] = x.size();
    write_json_file(outdir / "compare.json", j);
    std::cout << "r = " << format_double(r) << " (n = " << x.size() << ")\n";
}

// ---------------------------------------------------------------------------
// validate

struct ValidateArgs {
    std::string preset;
    std::uint64_t seed = 0;
    int images = 0;
    int workers = 0;
    std::string outdir = ".";

    CLI::Option *seed_o = nullptr, *images_o = nullptr;
};

void run_validate(const ValidateArgs& a) {
    const fs::path outdir = ensure_outdir(a.outdir);

    ValidatePreset preset = validate_preset(a.preset);
    if (a.images_o->count()) preset.image_count = a.images;
    const std::uint64_t seed = resolve_seed(a.seed_o, a.seed);

    const json report = run_validation(preset, seed, a.workers);

    json config;
    config["preset"] = a.preset;
    config["images"] = preset.image_count;
    config["seed"] = seed;
    write_run_json(outdir, "validate", config);
    write_json_file(outdir / "validation.json", report);

    std::cout << "preset " << a.preset << ": floor " << format_double(report["floor"]["rsd_percent"].get<double>())
              << " %, total " << format_double(report["total"]["rsd_percent"].get<double>())
              << " %, fabrication " << format_double(report["true_rsd_percent"].get<double>())
              << " %\n";
    if (report.contains("rejection")) {
        const auto& jr = report["rejection"];
        std::cout << "rejection: pre " << format_double(jr["pre_rsd_percent"].get<double>())
                  << " % -> post " << format_double(jr["post_rsd_percent"].get<double>())
                  << " %, precision " << format_double(jr["precision"].get<double>())
                  << ", recall " << format_double(jr["recall"].get<double>()) << "\n";
    }
}

// ---------------------------------------------------------------------------
// report

struct ReportArgs {
    std::string input;
    std::string outdir = ".";
};

std::string render_report(const json& j) {
    std::string out;
    const auto line = [&out](const std::string& s) { out += s + "\n"; };
    const auto num = [&j](const char* key) { return format_double(j.at(key).get<double>()); };

    if (j.contains("mass_kg")) {
        line("pillar design check");
        line("  mass:              " + num("mass_kg") + " kg");
        line("  atoms:             " + num("atom_count"));
        line("  center margin:     " + num("nv_margin_nm") + " nm (>=20 nm: " +
             (j.at("pass_20nm").get<bool>() ? "yes" : "no") + ", >=30 nm: " +
             (j.at("pass_30nm").get<bool>() ? "yes" : "no") + ")");
        line(std::string("  distinct dims:     ") + (j.at("distinct_dims").get<bool>() ? "yes" : "no"));
        line(std::string("  height largest:    ") +
             (j.at("height_is_largest").get<bool>() ? "yes" : "no"));
        line(std::string("  gravity-test mass: ") +
             (j.at("gravity_test_eligible").get<bool>() ? "yes (>= 1e-15 kg)" : "no (< 1e-15 kg)"));
    } else if (j.contains("mask_thickness_nm")) {
        line("etch stack plan for " + num("etch_depth_nm") + " nm of diamond");
        line("  nitride mask:      " + num("mask_thickness_nm") + " nm");
        line("  ma-N resist:       " + num("resist_thickness_man_nm") + " nm" +
             (j.at("feasible_with_man").get<bool>() ? "" : "  [exceeds the ~1 um film limit]"));
        line("  SX AR-N resist:    " + num("resist_thickness_sx_nm") + " nm");
    } else if (j.contains("floor") && j.contains("total")) {
        line("round-trip validation, preset " + j.at("preset").get<std::string>());
        line("  method floor RSD:  " + format_double(j.at("floor").at("rsd_percent").get<double>()) + " %");
        line("  total RSD:         " + format_double(j.at("total").at("rsd_percent").get<double>()) + " %");
        line("  fabrication RSD:   " + num("true_rsd_percent") + " % (quadrature)");
        if (j.contains("rejection")) {
            const auto& jr = j.at("rejection");
            line("  outlier rejection: pre " + format_double(jr.at("pre_rsd_percent").get<double>()) +
                 " % -> post " + format_double(jr.at("post_rsd_percent").get<double>()) +
                 " %, precision " + format_double(jr.at("precision").get<double>()) + ", recall " +
                 format_double(jr.at("recall").get<double>()));
        }
    } else if (j.contains("base_flatness_pp")) {
        line("height analysis");
        line("  n:                 " + std::to_string(j.at("n").get<std::size_t>()));
        line("  mean height:       " + num("mean") + " nm");
        line("  sd:                " + num("sd") + " nm");
        line("  RSD:               " + num("rsd") + " %");
        line("  base flatness:     " + num("base_flatness_pp") + " nm peak-to-peak");
    } else if (j.contains("rejection_method")) {
        line("uniformity report");
        line("  n:                 " + std::to_string(j.at("n").get<std::size_t>()));
        line("  mean area:         " + num("mean") + " nm^2");
        line("  RSD:               " + num("rsd") + " %");
        line("  rejected:          " + std::to_string(j.at("rejected_count").get<std::size_t>()) +
             " (" + j.at("rejection_method").get<std::string>() + ")");
    } else if (j.contains("r") && j.contains("n")) {
        line("correlation");
        line("  r = " + num("r") + " over n = " + std::to_string(j.at("n").get<std::size_t>()));
    } else {
        throw InvalidDatasetError("unrecognized report document (no known keys)");
    }
    return out;
}

void run_report(const ReportArgs& a) {
    const fs::path outdir = ensure_outdir(a.outdir);
    const json j = parse_json_text(read_file_bytes(a.input), "report input");

    json config;
    config["input"] = a.input;
    write_run_json(outdir, "report", config);

    const std::string text = render_report(j);
    write_file_atomic(outdir / "report.txt", text);
    std::cout << text;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{std::string(kToolName) + " " + kVersion +
                 " - dimensional-uniformity metrology for nanostructure arrays"};
    app.require_subcommand(1);
    app.set_version_flag("--version", std::string(kVersion));

    // --- design ---
    DesignArgs design_args;
    auto* design = app.add_subcommand("design", "Mass, atom count, and geometry checks for a pillar");
    design->add_option("--length", design_args.length_nm, "Pillar length in nm")->required();
    design->add_option("--width", design_args.width_nm, "Pillar width in nm")->required();
    design->add_option("--height", design_args.height_nm, "Pillar height in nm")->required();
    design->add_option("--density", design_args.density, "Material density in kg/m^3");
    design->add_option("--atomic-mass-u", design_args.atomic_mass_u, "Atomic mass in u");
    design->add_option("--nv-threshold", design_args.nv_threshold_nm,
                       "Required center-to-face margin in nm");
    design->add_option("-o,--outdir", design_args.outdir, "Output directory");
    design->callback([&] { run_design(design_args); });

    // --- plan-etch ---
    PlanEtchArgs plan_args;
    auto* plan = app.add_subcommand("plan-etch", "Mask and resist thickness budget for an etch depth");
    plan->add_option("--depth", plan_args.depth_nm, "Target etch depth in nm")->required();
    plan->add_option("--sel-diamond-mask", plan_args.sel.diamond_to_mask,
                     "Diamond:mask etch selectivity");
    plan->add_option("--sel-mask-man", plan_args.sel.mask_to_resist_man,
                     "Mask:resist selectivity for ma-N 2400");
    plan->add_option("--sel-mask-sx", plan_args.sel.mask_to_resist_sx,
                     "Mask:resist selectivity for SX AR-N");
    plan->add_option("-o,--outdir", plan_args.outdir, "Output directory");
    plan->callback([&] { run_plan_etch(plan_args); });

    // --- generate-sem ---
    GenerateSemArgs sem_args;
    auto* gsem = app.add_subcommand("generate-sem", "Render a synthetic SEM image with ground truth");
    sem_args.scene_o = gsem->add_option("--scene", sem_args.scene_path, "Scene spec JSON (flags win)");
    sem_args.common.add_to(gsem);
    gsem->add_option("--pixel-scale", sem_args.pixel_scale, "nm per pixel");
    sem_args.height_o = gsem->add_option("--height", sem_args.height, "Structure height in nm (manifest only)");
    sem_args.ring_width_o = gsem->add_option("--ring-width", sem_args.ring_width, "Bright edge ring width in nm");
    sem_args.ring_gain_o = gsem->add_option("--ring-gain", sem_args.ring_gain, "Ring brightness over interior");
    sem_args.bg_level_o = gsem->add_option("--bg-level", sem_args.bg_level, "Background gray level");
    sem_args.bg_gx_o = gsem->add_option("--bg-gradient-x", sem_args.bg_gradient_x, "Background gradient, levels/px");
    sem_args.bg_gy_o = gsem->add_option("--bg-gradient-y", sem_args.bg_gradient_y, "Background gradient, levels/px");
    sem_args.noise_o = gsem->add_option("--noise-sigma", sem_args.noise_sigma, "Gaussian noise sd in gray levels");
    sem_args.outlier_fraction_o = gsem->add_option("--outlier-fraction", sem_args.outlier_fraction,
                                                   "Fraction of structures rendered oversized");
    sem_args.outlier_scale_o = gsem->add_option("--outlier-scale", sem_args.outlier_scale,
                                                "Lateral scale factor of outliers");
    gsem->add_option("-o,--outdir", sem_args.outdir, "Output directory");
    gsem->callback([&] { run_generate_sem(sem_args); });

    // --- generate-afm ---
    GenerateAfmArgs afm_args;
    auto* gafm = app.add_subcommand("generate-afm", "Render a synthetic AFM height map with ground truth");
    afm_args.scene_o = gafm->add_option("--scene", afm_args.scene_path, "Scene spec JSON (flags win)");
    afm_args.from_manifest_o = gafm->add_option("--from-manifest", afm_args.from_manifest,
                                                "Reuse footprints/positions from an existing manifest");
    afm_args.common.add_to(gafm);
    gafm->add_option("--pixel-scale", afm_args.pixel_scale, "nm per sample point");
    afm_args.mean_height_o = gafm->add_option("--mean-height", afm_args.mean_height, "Mean pillar height in nm");
    afm_args.height_sd_o = gafm->add_option("--height-sd", afm_args.height_sd, "Height sd in nm");
    afm_args.roughness_o = gafm->add_option("--roughness", afm_args.roughness,
                                            "Base roughness, peak-to-peak nm");
    afm_args.tilt_x_o = gafm->add_option("--tilt-x", afm_args.tilt_x, "Sample tilt along x in nm/um");
    afm_args.tilt_y_o = gafm->add_option("--tilt-y", afm_args.tilt_y, "Sample tilt along y in nm/um");
    gafm->add_option("-o,--outdir", afm_args.outdir, "Output directory");
    gafm->callback([&] { run_generate_afm(afm_args); });

    // --- segment ---
    SegmentArgs seg_args;
    auto* seg = app.add_subcommand("segment", "Threshold, label, and measure structures in images");
    seg->add_option("--image", seg_args.images, "Input image (repeatable)")->required();
    seg_args.calibration_o = seg->add_option("--calibration", seg_args.calibration_path,
                                             "Calibration JSON with nm per pixel");
    seg_args.pixel_scale_o = seg->add_option("--pixel-scale", seg_args.pixel_scale,
                                             "nm per pixel (wins over --calibration)");
    seg->add_option("--threshold", seg_args.threshold, "fixed, otsu, or tiled-otsu");
    seg->add_option("--level", seg_args.level, "Threshold level for --threshold fixed");
    seg->add_option("--tile-px", seg_args.tile_px, "Tile size for --threshold tiled-otsu");
    seg->add_option("--connectivity", seg_args.connectivity, "Pixel connectivity, 4 or 8");
    seg->add_option("--min-area", seg_args.min_area, "Reject components below this area in nm^2");
    seg_args.max_area_o = seg->add_option("--max-area", seg_args.max_area,
                                          "Reject components above this area in nm^2");
    seg->add_flag("--include-border-touching", seg_args.include_border,
                  "Keep components touching the image border");
    seg->add_flag("--no-fill-holes", seg_args.no_fill_holes, "Skip interior hole filling");
    seg_args.pitch_o = seg->add_option("--pitch", seg_args.pitch, "Lattice pitch in nm for grid association");
    seg_args.grid_rows_o = seg->add_option("--grid-rows", seg_args.grid_rows, "Lattice rows");
    seg_args.grid_cols_o = seg->add_option("--grid-cols", seg_args.grid_cols, "Lattice columns");
    seg_args.grid_offset_x_o = seg->add_option("--grid-offset-x", seg_args.grid_offset_x,
                                               "x of site (0,0) in nm (default pitch/2)");
    seg_args.grid_offset_y_o = seg->add_option("--grid-offset-y", seg_args.grid_offset_y,
                                               "y of site (0,0) in nm (default pitch/2)");
    seg_args.sweep_o = seg->add_option("--sweep-offsets", seg_args.sweep_offsets,
                                       "Threshold offsets for a sensitivity sweep (repeatable)");
    seg->add_option("--workers", seg_args.workers, "Worker threads (0 = auto)");
    seg->add_option("-o,--outdir", seg_args.outdir, "Output directory");
    seg->callback([&] { run_segment(seg_args); });

    // --- heights ---
    HeightsArgs h_args;
    auto* hts = app.add_subcommand("heights", "Level an AFM map and measure per-pillar heights");
    hts->add_option("--map", h_args.map_path, "Input height map")->required();
    h_args.detect_z_o = hts->add_option("--detect-z", h_args.detect_z,
                                        "Detection threshold in nm (default: half of p99.9)");
    hts->add_option("--min-points", h_args.min_points, "Minimum points per structure");
    h_args.pitch_o = hts->add_option("--pitch", h_args.pitch, "Lattice pitch in nm for grid association");
    hts->add_option("--grid-rows", h_args.grid_rows, "Lattice rows");
    hts->add_option("--grid-cols", h_args.grid_cols, "Lattice columns");
    h_args.grid_offset_x_o = hts->add_option("--grid-offset-x", h_args.grid_offset_x,
                                             "x of site (0,0) in nm (default pitch/2)");
    h_args.grid_offset_y_o = hts->add_option("--grid-offset-y", h_args.grid_offset_y,
                                             "y of site (0,0) in nm (default pitch/2)");
    hts->add_option("-o,--outdir", h_args.outdir, "Output directory");
    hts->callback([&] { run_heights(h_args); });

    // --- stats ---
    StatsArgs stats_args;
    auto* stats = app.add_subcommand("stats", "Normalize measured areas and report uniformity");
    stats->add_option("--input", stats_args.inputs, "measurements.csv from segment (repeatable)")
        ->required();
    stats->add_option("--group-by", stats_args.group_by,
                      "Normalization rows: image, or tile for tiled pseudo-images");
    stats->add_option("--reject", stats_args.reject, "Outlier rejection: mad or none");
    stats->add_option("--mad-threshold", stats_args.mad_threshold, "Modified z-score cutoff");
    stats->add_option("-o,--outdir", stats_args.outdir, "Output directory");
    stats->callback([&] { run_stats(stats_args); });

    // --- compare ---
    CompareArgs cmp_args;
    auto* cmp = app.add_subcommand("compare", "Pearson correlation of two measurement series");
    cmp->add_option("--a", cmp_args.a_path, "First series CSV")->required();
    cmp->add_option("--b", cmp_args.b_path, "Second series CSV")->required();
    cmp->add_option("-o,--outdir", cmp_args.outdir, "Output directory");
    cmp->callback([&] { run_compare(cmp_args); });

    // --- validate ---
    ValidateArgs val_args;
    auto* val = app.add_subcommand("validate",
                                   "Generator -> analyzer round trip with method-floor decomposition");
    val->add_option("--preset", val_args.preset, "Validation scenario")
        ->required()
        ->check(CLI::IsMember({"nd1", "large-pillars", "master-target", "afm"}));
    val_args.seed_o = val->add_option("--seed", val_args.seed, "Deterministic seed (omit to generate one)");
    val_args.images_o = val->add_option("--images", val_args.images, "Override the preset image/map count");
    val->add_option("--workers", val_args.workers, "Worker threads (0 = auto)");
    val->add_option("-o,--outdir", val_args.outdir, "Output directory");
    val->callback([&] { run_validate(val_args); });

    // --- report ---
    ReportArgs rep_args;
    auto* rep = app.add_subcommand("report", "Render a toolkit JSON artifact as readable text");
    rep->add_option("--input", rep_args.input, "JSON artifact to render")->required();
    rep->add_option("-o,--outdir", rep_args.outdir, "Output directory");
    rep->callback([&] { run_report(rep_args); });

    if (argc <= 1) {
        std::cerr << app.help() << std::flush;
        return 2;
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);  // prints help or the usage error
        return code == 0 ? 0 : 2;
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
