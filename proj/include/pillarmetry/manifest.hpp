#pragma once

#include <cstdint>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "pillarmetry/errors.hpp"

namespace pillarmetry {

enum class ShapeKind { Rect, Disc };

inline const char* to_string(ShapeKind k) noexcept {
    return k == ShapeKind::Rect ? "rect" : "disc";
}

inline ShapeKind shape_kind_from_string(const std::string& s) {
    if (s == "rect") return ShapeKind::Rect;
    if (s == "disc") return ShapeKind::Disc;
    throw ParseError(ParseError::Kind::BadSchema, "unknown shape kind: " + s);
}

/// Ground-truth record for one generated structure.
struct StructureRecord {
    int grid_i = 0;
    int grid_j = 0;
    double centroid_x_nm = 0.0;
    double centroid_y_nm = 0.0;
    double true_area_nm2 = 0.0;
    double true_height_nm = 0.0;
    ShapeKind shape = ShapeKind::Rect;
    bool is_outlier = false;
};

/// Ground truth emitted by the synthetic generators; the oracle every
/// round-trip test measures against.
struct SceneManifest {
    double pixel_scale_nm = 1.0;
    double pitch_nm = 0.0;
    std::uint64_t seed = 0;
    std::vector<StructureRecord> structures;

    const StructureRecord* find(int grid_i, int grid_j) const noexcept {
        for (const auto& s : structures)
            if (s.grid_i == grid_i && s.grid_j == grid_j) return &s;
        return nullptr;
    }

    void validate() const {
        if (!(pixel_scale_nm > 0.0))
            throw InvalidArgumentError("manifest pixel_scale_nm must be > 0");
        if (!(pitch_nm > 0.0))
            throw InvalidArgumentError("manifest pitch_nm must be > 0");
        std::set<std::pair<int, int>> seen;
        for (const auto& s : structures) {
            if (!seen.insert({s.grid_i, s.grid_j}).second)
                throw InvalidArgumentError("duplicate grid index in manifest");
            if (!(s.true_area_nm2 > 0.0))
                throw InvalidArgumentError("manifest true_area_nm2 must be > 0");
            if (!(s.true_height_nm > 0.0))
                throw InvalidArgumentError("manifest true_height_nm must be > 0");
        }
    }
};

}  // namespace pillarmetry
