#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <vector>

#include "pillarmetry/io.hpp"
#include "pillarmetry/segment.hpp"
#include "pillarmetry/stats.hpp"
#include "pillarmetry/synth.hpp"

using namespace pillarmetry;

namespace {

SceneSpec small_rect_scene() {
    SceneSpec spec;
    spec.rows = 1;
    spec.cols = 1;
    spec.pitch_nm = 300.0;
    spec.shape.kind = ShapeKind::Rect;
    spec.shape.length_nm = 40.0;
    spec.shape.width_nm = 65.0;
    spec.noise_sigma = 0.0;
    spec.seed = 99;
    return spec;
}

}  // namespace

TEST_CASE("single jitter-free rectangle records its analytic footprint") {
    const SceneSpec spec = small_rect_scene();
    const Calibration cal{0.505, "synthetic"};
    const SceneManifest manifest = realize_scene(spec, cal);
    REQUIRE(manifest.structures.size() == 1);
    CHECK(manifest.structures[0].true_area_nm2 == Catch::Approx(2600.0).epsilon(1e-12));
    CHECK_FALSE(manifest.structures[0].is_outlier);
    CHECK(manifest.structures[0].shape == ShapeKind::Rect);
}

TEST_CASE("six-disc scene marks exactly one outlier") {
    SceneSpec spec;
    spec.rows = 2;
    spec.cols = 3;
    spec.pitch_nm = 500.0;
    spec.shape.kind = ShapeKind::Disc;
    spec.shape.diameter_nm = 60.0;
    spec.outlier_fraction = 1.0 / 6.0;
    spec.outlier_scale = 1.3;
    spec.seed = 7;
    const Calibration cal{0.505, "synthetic"};
    const SceneManifest manifest = realize_scene(spec, cal);

    int outliers = 0;
    double outlier_area = 0.0, regular_area = 0.0;
    for (const auto& s : manifest.structures) {
        if (s.is_outlier) {
            ++outliers;
            outlier_area = s.true_area_nm2;
        } else {
            regular_area = s.true_area_nm2;
        }
    }
    CHECK(outliers == 1);
    CHECK(outlier_area / regular_area == Catch::Approx(1.69).epsilon(1e-12));
}

TEST_CASE("manifest area spread matches the configured jitter") {
    SceneSpec spec;
    spec.rows = 20;
    spec.cols = 22;  // 440 structures
    spec.pitch_nm = 300.0;
    spec.shape.kind = ShapeKind::Rect;
    spec.shape.length_nm = 40.0;
    spec.shape.width_nm = 65.0;
    spec.area_jitter_rsd = 0.05;
    spec.seed = 20240615;
    const Calibration cal{0.505, "synthetic"};
    const SceneManifest manifest = realize_scene(spec, cal);

    std::vector<double> areas;
    for (const auto& s : manifest.structures) areas.push_back(s.true_area_nm2);
    const double spread = rsd(areas);
    CHECK(spread > 4.0);
    CHECK(spread < 6.0);
}

TEST_CASE("generation is deterministic") {
    SceneSpec spec = small_rect_scene();
    spec.rows = 2;
    spec.cols = 2;
    spec.noise_sigma = 4.0;
    spec.area_jitter_rsd = 0.03;
    spec.position_jitter_nm = 5.0;
    const Calibration cal{1.0, "synthetic"};

    GrayImage img1, img2;
    SceneManifest m1, m2;
    generate_sem(spec, cal, &img1, &m1);
    generate_sem(spec, cal, &img2, &m2);
    CHECK(encode_gray_image(img1) == encode_gray_image(img2));
    CHECK(manifest_to_json(m1) == manifest_to_json(m2));

    spec.seed += 1;
    GrayImage img3;
    SceneManifest m3;
    generate_sem(spec, cal, &img3, &m3);
    CHECK(encode_gray_image(img1) != encode_gray_image(img3));
    CHECK(m1.structures[0].true_area_nm2 != m3.structures[0].true_area_nm2);
}

TEST_CASE("noise-free rectangles measure within the anti-aliasing bound") {
    SceneSpec spec = small_rect_scene();
    spec.rows = 2;
    spec.cols = 3;
    spec.position_jitter_nm = 10.0;  // sub-pixel phases vary per structure
    spec.seed = 4242;
    const Calibration cal{0.505, "synthetic"};

    GrayImage img;
    SceneManifest manifest;
    generate_sem(spec, cal, &img, &manifest);

    SegmentationConfig cfg;
    const auto res = measure(img, cal, cfg);
    REQUIRE(res.measurements.size() == manifest.structures.size());

    auto ms = res.measurements;
    associate_grid(ms, spec.pitch_nm, spec.pitch_nm / 2, spec.pitch_nm / 2, spec.rows, spec.cols);
    const double perim_px = 2.0 * (spec.shape.length_nm + spec.shape.width_nm) / cal.pixel_scale_nm;
    const double bound = perim_px * cal.pixel_scale_nm * cal.pixel_scale_nm;
    for (const auto& m : ms) {
        REQUIRE(m.grid_i.has_value());
        const auto* rec = manifest.find(*m.grid_i, *m.grid_j);
        REQUIRE(rec != nullptr);
        CHECK(std::abs(m.area_nm2 - rec->true_area_nm2) <= bound);
    }
}

TEST_CASE("noise-free discs measure within the anti-aliasing bound") {
    SceneSpec spec;
    spec.rows = 1;
    spec.cols = 3;
    spec.pitch_nm = 200.0;
    spec.shape.kind = ShapeKind::Disc;
    spec.shape.diameter_nm = 60.0;
    spec.noise_sigma = 0.0;
    spec.position_jitter_nm = 3.0;
    spec.seed = 31;
    const Calibration cal{0.505, "synthetic"};

    GrayImage img;
    SceneManifest manifest;
    generate_sem(spec, cal, &img, &manifest);

    SegmentationConfig cfg;
    auto ms = measure(img, cal, cfg).measurements;
    REQUIRE(ms.size() == 3);
    associate_grid(ms, spec.pitch_nm, spec.pitch_nm / 2, spec.pitch_nm / 2, spec.rows, spec.cols);
    for (const auto& m : ms) {
        const auto* rec = manifest.find(*m.grid_i, *m.grid_j);
        REQUIRE(rec != nullptr);
        const double radius = std::sqrt(rec->true_area_nm2 / M_PI);
        const double bound = 2.0 * M_PI * radius * cal.pixel_scale_nm;
        CHECK(std::abs(m.area_nm2 - rec->true_area_nm2) <= bound);
    }
}

TEST_CASE("otsu recovers ring scenes near the documented defaults") {
    SceneSpec spec;
    spec.rows = 2;
    spec.cols = 2;
    spec.pitch_nm = 250.0;
    spec.shape.kind = ShapeKind::Rect;
    spec.shape.length_nm = 40.0;
    spec.shape.width_nm = 65.0;
    spec.noise_sigma = 4.0;
    spec.background.base_level = 30.0;
    spec.seed = 5150;
    const Calibration cal{0.505, "synthetic"};

    GrayImage img;
    SceneManifest manifest;
    generate_sem(spec, cal, &img, &manifest);

    SegmentationConfig cfg;
    const auto res = measure(img, cal, cfg);
    REQUIRE(res.measurements.size() == 4);
    CHECK(res.level > 30);
    CHECK(res.level < 128);
    const double perim_px = 2.0 * (40.0 + 65.0) / cal.pixel_scale_nm;
    const double bound = perim_px * cal.pixel_scale_nm * cal.pixel_scale_nm;
    for (const auto& m : res.measurements)
        CHECK(std::abs(m.area_nm2 - 2600.0) <= 2.0 * bound);  // noise widens the tolerance
}

TEST_CASE("structures outside the raster raise a scene error") {
    const SceneSpec spec = small_rect_scene();
    const Calibration cal{0.505, "synthetic"};
    SceneManifest manifest = realize_scene(spec, cal);
    manifest.structures[0].centroid_x_nm = -10.0;
    CHECK_THROWS_AS(render_sem(spec, manifest, cal), SceneTooLargeError);
}

TEST_CASE("scene spec validation") {
    SceneSpec spec = small_rect_scene();
    spec.pitch_nm = 50.0;  // smaller than the 65 nm extent
    CHECK_THROWS_AS(spec.validate(), InvalidArgumentError);
    spec = small_rect_scene();
    spec.area_jitter_rsd = 1.0;
    CHECK_THROWS_AS(spec.validate(), InvalidArgumentError);
    spec = small_rect_scene();
    spec.outlier_fraction = -0.1;
    CHECK_THROWS_AS(spec.validate(), InvalidArgumentError);
    spec = small_rect_scene();
    spec.rows = 0;
    CHECK_THROWS_AS(spec.validate(), InvalidArgumentError);
}

TEST_CASE("afm map of one pillar spans exactly its height") {
    AfmSceneSpec spec;
    spec.rows = 1;
    spec.cols = 1;
    spec.pitch_nm = 300.0;
    spec.shape.kind = ShapeKind::Rect;
    spec.shape.length_nm = 40.0;
    spec.shape.width_nm = 65.0;
    spec.mean_height_nm = 68.2;
    spec.height_sd_nm = 0.0;
    spec.seed = 11;
    const Calibration cal{2.0, "synthetic"};

    HeightMap map;
    SceneManifest manifest;
    generate_afm(spec, cal, &map, &manifest);
    const auto [lo, hi] = std::minmax_element(map.heights.begin(), map.heights.end());
    CHECK(*lo == 0.0);
    CHECK(*hi == 68.2);
    CHECK(manifest.structures[0].true_height_nm == 68.2);
}

TEST_CASE("afm heights follow the configured distribution") {
    AfmSceneSpec spec;
    spec.rows = 5;
    spec.cols = 5;
    spec.pitch_nm = 250.0;
    spec.shape.kind = ShapeKind::Rect;
    spec.shape.length_nm = 40.0;
    spec.shape.width_nm = 65.0;
    spec.mean_height_nm = 68.2;
    spec.height_sd_nm = 0.5;
    spec.seed = 3003;
    const Calibration cal{5.0, "synthetic"};

    const SceneManifest manifest = realize_afm_scene(spec, cal);
    std::vector<double> heights;
    for (const auto& s : manifest.structures) heights.push_back(s.true_height_nm);
    CHECK(mean_of(heights) == Catch::Approx(68.2).margin(0.3));
    CHECK(sample_sd(heights) > 0.3);
    CHECK(sample_sd(heights) < 0.7);
}

TEST_CASE("afm tilt produces the analytic cross-field drop") {
    AfmSceneSpec spec;
    spec.rows = 1;
    spec.cols = 1;
    spec.pitch_nm = 1400.0;
    spec.shape.kind = ShapeKind::Disc;
    spec.shape.diameter_nm = 60.0;
    spec.mean_height_nm = 68.2;
    spec.height_sd_nm = 0.0;
    spec.tilt_x_nm_per_um = 5.0;
    spec.seed = 1;
    const Calibration cal{2.0, "synthetic"};

    HeightMap map;
    SceneManifest manifest;
    generate_afm(spec, cal, &map, &manifest);
    // first to last point center spans (cols-1) * scale = 1398 nm
    const double drop = map.at(0, map.cols - 1) - map.at(0, 0);
    CHECK(drop == Catch::Approx(5.0 * 1398.0 / 1000.0).epsilon(1e-9));
    CHECK(drop == Catch::Approx(7.0).margin(0.02));
}

TEST_CASE("afm generation from a shared manifest keeps lateral geometry") {
    SceneSpec sem = small_rect_scene();
    sem.rows = 2;
    sem.cols = 3;
    sem.area_jitter_rsd = 0.05;
    sem.seed = 600;
    const Calibration sem_cal{0.505, "synthetic"};
    const SceneManifest source = realize_scene(sem, sem_cal);

    AfmSceneSpec afm;
    afm.rows = sem.rows;
    afm.cols = sem.cols;
    afm.pitch_nm = sem.pitch_nm;
    afm.shape = sem.shape;
    afm.mean_height_nm = 68.2;
    afm.height_sd_nm = 0.5;
    afm.seed = 601;
    const Calibration afm_cal{2.0, "synthetic"};

    HeightMap map;
    SceneManifest paired;
    generate_afm_from_manifest(afm, source, afm_cal, &map, &paired);
    REQUIRE(paired.structures.size() == source.structures.size());
    for (std::size_t k = 0; k < paired.structures.size(); ++k) {
        CHECK(paired.structures[k].true_area_nm2 == source.structures[k].true_area_nm2);
        CHECK(paired.structures[k].centroid_x_nm == source.structures[k].centroid_x_nm);
        CHECK(paired.structures[k].true_height_nm != source.structures[k].true_height_nm);
    }
    CHECK(paired.pixel_scale_nm == 2.0);
}

TEST_CASE("scene spec JSON round-trip") {
    SceneSpec spec = small_rect_scene();
    spec.area_jitter_rsd = 0.04;
    spec.outlier_fraction = 0.15;
    spec.seed = 12345;
    const SceneSpec back = scene_spec_from_json(scene_spec_to_json(spec));
    CHECK(back.rows == spec.rows);
    CHECK(back.pitch_nm == spec.pitch_nm);
    CHECK(back.shape.length_nm == spec.shape.length_nm);
    CHECK(back.area_jitter_rsd == spec.area_jitter_rsd);
    CHECK(back.seed == spec.seed);

    AfmSceneSpec afm;
    afm.rows = 5;
    afm.cols = 5;
    afm.pitch_nm = 250.0;
    afm.shape.kind = ShapeKind::Disc;
    afm.shape.diameter_nm = 80.0;
    afm.seed = 77;
    const AfmSceneSpec aback = afm_scene_spec_from_json(afm_scene_spec_to_json(afm));
    CHECK(aback.mean_height_nm == afm.mean_height_nm);
    CHECK(aback.shape.diameter_nm == 80.0);
}

TEST_CASE("scene spec JSON rejects unknown and missing keys") {
    SceneSpec spec = small_rect_scene();
    auto j = scene_spec_to_json(spec);
    j["typo_key"] = 3;
    CHECK_THROWS_AS(scene_spec_from_json(j), ParseError);

    j = scene_spec_to_json(spec);
    j.erase("pitch_nm");
    CHECK_THROWS_AS(scene_spec_from_json(j), ParseError);

    j = scene_spec_to_json(spec);
    j["seed"] = -4;
    CHECK_THROWS_AS(scene_spec_from_json(j), ParseError);

    j = scene_spec_to_json(spec);
    j["shape"] = {{"kind", "rect"}, {"length_nm", 10.0}};
    CHECK_THROWS_AS(scene_spec_from_json(j), ParseError);
}

TEST_CASE("structure seeds are stable across realizations") {
    SceneSpec spec = small_rect_scene();
    spec.rows = 3;
    spec.cols = 3;
    spec.area_jitter_rsd = 0.05;
    spec.seed = 404;
    const Calibration cal{1.0, "synthetic"};
    const SceneManifest a = realize_scene(spec, cal);

    // widening the lattice must not change the structures both share
    spec.cols = 4;
    spec.rows = 4;
    const SceneManifest b = realize_scene(spec, cal);
    for (const auto& rec : a.structures) {
        const auto* match = b.find(rec.grid_i, rec.grid_j);
        REQUIRE(match != nullptr);
        CHECK(match->true_area_nm2 == rec.true_area_nm2);
    }
}
