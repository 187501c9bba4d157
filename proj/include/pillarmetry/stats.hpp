#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <string>
#include <vector>

#include "pillarmetry/errors.hpp"

namespace pillarmetry {

/// Where a raw area came from, so pooled statistics can be traced back to a
/// specific component in a specific image.
struct AreaProvenance {
    int image_id = 0;
    int component_id = 0;
};

/// Raw areas S_nm (one row per image, rows may be ragged), per-image local
/// averages SA_n, the global average SAA, and the normalized areas
/// S_norm = (SAA / SA_n) * S_nm. By construction the mean of every
/// normalized row equals SAA, which removes per-image scale (magnification
/// drift, threshold bias) from the pooled spread.
struct AreaDataset {
    std::vector<std::vector<double>> S;
    std::vector<double> SA;
    double SAA = 0.0;
    std::vector<std::vector<double>> S_norm;
    std::vector<std::vector<AreaProvenance>> provenance;  // parallel to S; may be empty

    std::vector<double> pooled_raw() const {
        std::vector<double> out;
        for (const auto& row : S) out.insert(out.end(), row.begin(), row.end());
        return out;
    }

    std::vector<double> pooled_normalized() const {
        std::vector<double> out;
        for (const auto& row : S_norm) out.insert(out.end(), row.begin(), row.end());
        return out;
    }

    std::vector<AreaProvenance> pooled_provenance() const {
        std::vector<AreaProvenance> out;
        for (const auto& row : provenance) out.insert(out.end(), row.begin(), row.end());
        return out;
    }
};

/// Uniformity summary of one series: sample statistics plus what (if any)
/// outlier rejection produced them.
struct UniformityReport {
    std::size_t n = 0;
    double mean = 0.0;
    double sd = 0.0;   // sample standard deviation (n-1)
    double rsd = 0.0;  // percent, 100 * sd / mean
    std::size_t rejected_count = 0;
    std::string rejection_method = "none";
};

inline double mean_of(const std::vector<double>& v) {
    if (v.empty()) throw InvalidArgumentError("mean of empty series");
    return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

inline double sample_sd(const std::vector<double>& v) {
    if (v.size() < 2) throw InvalidArgumentError("sample sd needs n >= 2");
    const double m = mean_of(v);
    double ss = 0.0;
    for (double x : v) ss += (x - m) * (x - m);
    return std::sqrt(ss / static_cast<double>(v.size() - 1));
}

inline double median_of(std::vector<double> v) {
    if (v.empty()) throw InvalidArgumentError("median of empty series");
    const std::size_t mid = v.size() / 2;
    std::nth_element(v.begin(), v.begin() + mid, v.end());
    double hi = v[mid];
    if (v.size() % 2 == 1) return hi;
    std::nth_element(v.begin(), v.begin() + mid - 1, v.end());
    return 0.5 * (v[mid - 1] + hi);
}

inline double percentile_of(std::vector<double> v, double p) {
    if (v.empty()) throw InvalidArgumentError("percentile of empty series");
    if (!(p >= 0.0 && p <= 100.0)) throw InvalidArgumentError("percentile must be in [0, 100]");
    std::sort(v.begin(), v.end());
    const double rank = p / 100.0 * static_cast<double>(v.size() - 1);
    const std::size_t lo = static_cast<std::size_t>(std::floor(rank));
    const std::size_t hi = static_cast<std::size_t>(std::ceil(rank));
    const double frac = rank - static_cast<double>(lo);
    return v[lo] + frac * (v[hi] - v[lo]);
}

/// Relative standard deviation as a percentage: 100 * sample_sd / mean.
inline double rsd(const std::vector<double>& values) {
    if (values.size() < 2) throw InvalidArgumentError("rsd needs n >= 2");
    const double m = mean_of(values);
    if (!(m > 0.0)) throw InvalidArgumentError("rsd needs a strictly positive mean");
    return 100.0 * sample_sd(values) / m;
}

/// Applies the per-image normalization: each raw area is rescaled by
/// SAA / SA_n so every image contributes the same local average.
inline AreaDataset normalize_dataset(const std::vector<std::vector<double>>& S,
                                     std::vector<std::vector<AreaProvenance>> provenance = {}) {
    if (S.empty()) throw InvalidDatasetError("dataset has no images");
    if (!provenance.empty() && provenance.size() != S.size())
        throw InvalidDatasetError("provenance shape does not match dataset");

    AreaDataset ds;
    ds.S = S;
    ds.provenance = std::move(provenance);
    ds.SA.reserve(S.size());
    for (std::size_t n = 0; n < S.size(); ++n) {
        const auto& row = S[n];
        if (row.empty())
            throw InvalidDatasetError("image " + std::to_string(n) + " contributed no areas");
        if (!ds.provenance.empty() && ds.provenance[n].size() != row.size())
            throw InvalidDatasetError("provenance shape does not match dataset");
        for (double a : row)
            if (!(a > 0.0) || !std::isfinite(a))
                throw InvalidDatasetError("areas must be finite and strictly positive");
        ds.SA.push_back(mean_of(row));
    }
    ds.SAA = mean_of(ds.SA);

    ds.S_norm.resize(S.size());
    for (std::size_t n = 0; n < S.size(); ++n) {
        const double scale = ds.SAA / ds.SA[n];
        ds.S_norm[n].reserve(S[n].size());
        for (double a : S[n]) ds.S_norm[n].push_back(scale * a);
    }
    return ds;
}

/// Outcome of MAD-based rejection; indices refer to the input series.
struct RejectionResult {
    std::vector<std::size_t> kept;
    std::vector<std::size_t> rejected;
    std::string method = "none";

    std::vector<double> kept_values(const std::vector<double>& v) const {
        std::vector<double> out;
        out.reserve(kept.size());
        for (std::size_t i : kept) out.push_back(v[i]);
        return out;
    }
};

inline constexpr double kMadNormalConsistency = 0.6745;
inline constexpr double kMeanAdNormalConsistency = 1.253314;

/// Modified z-score rejection: a point is discarded when
/// 0.6745 * |x - median| / MAD exceeds `threshold`. When the MAD collapses to
/// zero on non-constant data (more than half the points identical), the
/// mean absolute deviation takes its place with the matching consistency
/// constant, and the method string records the fallback so reports can flag
/// it. Constant series reject nothing.
inline RejectionResult reject_outliers_mad(const std::vector<double>& values,
                                           double threshold = 3.5) {
    if (values.size() < 3) throw InvalidArgumentError("mad_z rejection needs n >= 3");
    if (!(threshold > 0.0)) throw InvalidArgumentError("rejection threshold must be > 0");

    const double med = median_of(values);
    std::vector<double> absdev;
    absdev.reserve(values.size());
    for (double x : values) absdev.push_back(std::abs(x - med));
    const double mad = median_of(absdev);

    RejectionResult res;
    double scale = 0.0;
    if (mad > 0.0) {
        scale = mad / kMadNormalConsistency;
        res.method = "mad_z";
    } else {
        const double meanad = mean_of(absdev);
        if (meanad > 0.0) {
            scale = meanad * kMeanAdNormalConsistency;
            res.method = "mad_z(meanad-fallback)";
        } else {
            // genuinely constant: nothing can be an outlier
            res.method = "mad_z(degenerate)";
            res.kept.resize(values.size());
            std::iota(res.kept.begin(), res.kept.end(), std::size_t{0});
            return res;
        }
    }

    for (std::size_t i = 0; i < values.size(); ++i) {
        const double z = std::abs(values[i] - med) / scale;
        if (z > threshold)
            res.rejected.push_back(i);
        else
            res.kept.push_back(i);
    }
    return res;
}

/// No-op rejection with the same result shape, for the `none` method.
inline RejectionResult reject_outliers_none(const std::vector<double>& values) {
    RejectionResult res;
    res.kept.resize(values.size());
    std::iota(res.kept.begin(), res.kept.end(), std::size_t{0});
    res.method = "none";
    return res;
}

inline UniformityReport summarize_uniformity(const std::vector<double>& values,
                                             const RejectionResult& rejection) {
    const std::vector<double> kept = rejection.kept_values(values);
    if (kept.size() < 2) throw InvalidArgumentError("uniformity summary needs n >= 2 after rejection");
    UniformityReport rep;
    rep.n = kept.size();
    rep.mean = mean_of(kept);
    rep.sd = sample_sd(kept);
    if (!(rep.mean > 0.0)) throw InvalidArgumentError("uniformity summary needs a positive mean");
    rep.rsd = 100.0 * rep.sd / rep.mean;
    rep.rejected_count = rejection.rejected.size();
    rep.rejection_method = rejection.method;
    return rep;
}

/// Product-moment correlation coefficient.
inline double pearson(const std::vector<double>& x, const std::vector<double>& y) {
    if (x.size() != y.size()) throw InvalidArgumentError("pearson needs equal-length series");
    if (x.size() < 2) throw InvalidArgumentError("pearson needs n >= 2");
    const double mx = mean_of(x);
    const double my = mean_of(y);
    double sxx = 0.0, syy = 0.0, sxy = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double dx = x[i] - mx;
        const double dy = y[i] - my;
        sxx += dx * dx;
        syy += dy * dy;
        sxy += dx * dy;
    }
    if (sxx == 0.0 || syy == 0.0)
        throw UndefinedCorrelationError("correlation undefined for a constant series");
    return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

}  // namespace pillarmetry
