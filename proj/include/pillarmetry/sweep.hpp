#pragma once

#include <vector>

#include "pillarmetry/segment.hpp"
#include "pillarmetry/stats.hpp"

namespace pillarmetry {

/// One sensitivity-sweep entry: the whole measurement pipeline re-run with
/// the binarization level(s) shifted by `offset` gray levels.
struct SweepRow {
    int offset = 0;
    double saa_nm2 = 0.0;        // global average area at this offset
    double mean_area_nm2 = 0.0;  // raw pooled mean
    double rsd_percent = 0.0;    // RSD of pooled normalized areas
    long long structure_count = 0;
};

struct SweepTable {
    std::vector<SweepRow> rows;    // one per requested offset, input order
    double drsd_dlevel = 0.0;      // least-squares slope of RSD vs offset
};

/// Quantifies how sensitive the uniformity figure is to the choice of
/// threshold: re-measures every image at each offset around the automatic
/// (or fixed) level and summarizes areas with the usual normalization.
inline SweepTable threshold_sweep(const std::vector<GrayImage>& images, const Calibration& cal,
                                  const SegmentationConfig& cfg, const std::vector<int>& offsets) {
    if (images.empty()) throw InvalidArgumentError("threshold sweep needs at least one image");
    if (offsets.empty()) throw InvalidArgumentError("threshold sweep needs at least one offset");

    SweepTable table;
    for (int offset : offsets) {
        std::vector<std::vector<double>> S;
        long long count = 0;
        for (const auto& img : images) {
            const MeasureResult res = measure(img, cal, cfg, offset);
            std::vector<double> row;
            row.reserve(res.measurements.size());
            for (const auto& m : res.measurements) row.push_back(m.area_nm2);
            count += static_cast<long long>(row.size());
            S.push_back(std::move(row));
        }
        const AreaDataset ds = normalize_dataset(S);  // throws if an image lost everything

        SweepRow row;
        row.offset = offset;
        row.saa_nm2 = ds.SAA;
        row.mean_area_nm2 = mean_of(ds.pooled_raw());
        row.rsd_percent = rsd(ds.pooled_normalized());
        row.structure_count = count;
        table.rows.push_back(row);
    }

    // dRSD/dlevel as the least-squares slope over the sampled offsets; zero
    // when only one offset was requested.
    const std::size_t n = table.rows.size();
    if (n >= 2) {
        double sx = 0.0, sy = 0.0;
        for (const auto& r : table.rows) {
            sx += r.offset;
            sy += r.rsd_percent;
        }
        const double mx = sx / static_cast<double>(n);
        const double my = sy / static_cast<double>(n);
        double sxx = 0.0, sxy = 0.0;
        for (const auto& r : table.rows) {
            sxx += (r.offset - mx) * (r.offset - mx);
            sxy += (r.offset - mx) * (r.rsd_percent - my);
        }
        if (sxx > 0.0) table.drsd_dlevel = sxy / sxx;
    }
    return table;
}

}  // namespace pillarmetry
