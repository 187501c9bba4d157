#pragma once

#include <algorithm>
#include <cmath>
#include <string>

#include "pillarmetry/errors.hpp"

namespace pillarmetry {

inline constexpr double kAtomicMassUnitKg = 1.66053906660e-27;

/// Nominal cuboid pillar dimensions in nm.
struct PillarSpec {
    double length_nm = 0.0;
    double width_nm = 0.0;
    double height_nm = 0.0;
    std::string label;

    void validate() const {
        for (double d : {length_nm, width_nm, height_nm}) {
            if (!std::isfinite(d))
                throw InvalidArgumentError("pillar dimension must be finite");
            if (!(d > 0.0))
                throw InvalidArgumentError("pillar dimensions must be strictly positive");
        }
    }

    double volume_nm3() const { return length_nm * width_nm * height_nm; }
};

/// Bulk constants used for mass and atom-count arithmetic. Defaults are
/// single-crystal diamond (3515 kg/m^3) and the standard atomic weight of
/// carbon (12.011 u); both are configurable.
struct MaterialConstants {
    double density_kg_m3 = 3515.0;
    double atomic_mass_kg = 12.011 * kAtomicMassUnitKg;

    void validate() const {
        if (!(density_kg_m3 > 0.0))
            throw InvalidArgumentError("density must be strictly positive");
        if (!(atomic_mass_kg > 0.0))
            throw InvalidArgumentError("atomic mass must be strictly positive");
    }
};

struct DesignReport {
    double mass_kg = 0.0;
    double atom_count = 0.0;
    double nv_margin_nm = 0.0;  // min distance from pillar center to any face
    double threshold_nm = 20.0;
    bool pass_at_threshold = false;
    bool pass_at_20nm = false;
    bool pass_at_30nm = false;
    bool distinct_dims = false;
    bool height_is_largest = false;
    bool gravity_test_eligible = false;  // mass >= 1e-15 kg
    double mass_rsd_goal = 0.02;
};

inline constexpr double kGravityTestMassKg = 1e-15;
inline constexpr double kMassRsdGoal = 0.02;

struct EtchSelectivities {
    double diamond_to_mask = 1.43;     // diamond etched per unit of nitride mask consumed
    double mask_to_resist_man = 0.32;  // nitride etched per unit of ma-N 2400 resist consumed
    double mask_to_resist_sx = 2.7;    // nitride etched per unit of SX AR-N resist consumed

    void validate() const {
        if (!(diamond_to_mask > 0.0) || !(mask_to_resist_man > 0.0) || !(mask_to_resist_sx > 0.0))
            throw InvalidArgumentError("selectivities must be strictly positive");
    }
};

/// Mask/resist thickness budget for a target etch depth.
struct EtchStackPlan {
    double etch_depth_nm = 0.0;
    double mask_thickness_nm = 0.0;
    double resist_thickness_man_nm = 0.0;  // ma-N 2400 path
    double resist_thickness_sx_nm = 0.0;   // SX AR-N path
    EtchSelectivities selectivities;
    bool feasible_with_man = false;  // ma-N films top out near 1 um
};

inline constexpr double kMaNMaxThicknessNm = 1000.0;

/// mass = density * volume, with nm^3 -> m^3 conversion.
inline double compute_mass_kg(const PillarSpec& spec, const MaterialConstants& mat = {}) {
    spec.validate();
    mat.validate();
    const double volume_m3 = spec.volume_nm3() * 1e-27;
    return mat.density_kg_m3 * volume_m3;
}

inline double compute_atom_count(double mass_kg, const MaterialConstants& mat = {}) {
    mat.validate();
    if (!(mass_kg >= 0.0) || !std::isfinite(mass_kg))
        throw InvalidArgumentError("mass must be non-negative and finite");
    return mass_kg / mat.atomic_mass_kg;
}

inline DesignReport check_design(const PillarSpec& spec, const MaterialConstants& mat = {},
                                 double nv_depth_threshold_nm = 20.0) {
    spec.validate();
    if (!(nv_depth_threshold_nm >= 0.0) || !std::isfinite(nv_depth_threshold_nm))
        throw InvalidArgumentError("NV depth threshold must be in [0, inf)");

    DesignReport r;
    r.mass_kg = compute_mass_kg(spec, mat);
    r.atom_count = compute_atom_count(r.mass_kg, mat);
    r.nv_margin_nm = std::min({spec.length_nm, spec.width_nm, spec.height_nm}) / 2.0;
    r.threshold_nm = nv_depth_threshold_nm;
    r.pass_at_threshold = r.nv_margin_nm >= nv_depth_threshold_nm;
    r.pass_at_20nm = r.nv_margin_nm >= 20.0;
    r.pass_at_30nm = r.nv_margin_nm >= 30.0;
    r.distinct_dims = spec.length_nm != spec.width_nm && spec.length_nm != spec.height_nm &&
                      spec.width_nm != spec.height_nm;
    r.height_is_largest = spec.height_nm > spec.length_nm && spec.height_nm > spec.width_nm;
    r.gravity_test_eligible = r.mass_kg >= kGravityTestMassKg;
    r.mass_rsd_goal = kMassRsdGoal;
    return r;
}

inline EtchStackPlan plan_etch_stack(double etch_depth_nm, const EtchSelectivities& sel = {}) {
    sel.validate();
    if (!(etch_depth_nm > 0.0) || !std::isfinite(etch_depth_nm))
        throw InvalidArgumentError("etch depth must be strictly positive");

    EtchStackPlan plan;
    plan.etch_depth_nm = etch_depth_nm;
    plan.selectivities = sel;
    plan.mask_thickness_nm = etch_depth_nm / sel.diamond_to_mask;
    plan.resist_thickness_man_nm = plan.mask_thickness_nm / sel.mask_to_resist_man;
    plan.resist_thickness_sx_nm = plan.mask_thickness_nm / sel.mask_to_resist_sx;
    plan.feasible_with_man = plan.resist_thickness_man_nm <= kMaNMaxThicknessNm;
    return plan;
}

}  // namespace pillarmetry
