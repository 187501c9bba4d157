#pragma once

#include <algorithm>
#include <cmath>

namespace pillarmetry {

// Exact geometric overlap between footprints and axis-aligned pixel squares.
// Rendering with true coverage keeps sub-pixel jitter smooth and makes the
// anti-aliasing error bound of the synthetic oracle provable: a thresholded
// area can differ from the analytic footprint only on partially covered
// pixels, of which there are at most ~perimeter/pixel.

/// Overlap area of [ax0,ax1]x[ay0,ay1] with [bx0,bx1]x[by0,by1].
inline double rect_rect_overlap(double ax0, double ay0, double ax1, double ay1,
                                double bx0, double by0, double bx1, double by1) noexcept {
    const double dx = std::min(ax1, bx1) - std::max(ax0, bx0);
    const double dy = std::min(ay1, by1) - std::max(ay0, by0);
    return (dx > 0.0 && dy > 0.0) ? dx * dy : 0.0;
}

namespace detail {

/// Antiderivative of sqrt(r^2 - x^2).
inline double circ_antideriv(double x, double r) noexcept {
    x = std::clamp(x, -r, r);
    const double s = std::max(0.0, r * r - x * x);
    return 0.5 * (x * std::sqrt(s) + r * r * std::asin(std::clamp(x / r, -1.0, 1.0)));
}

/// Integral over [a,b] of min(c, sqrt(r^2 - x^2)); [a,b] within [-r,r].
inline double integral_min_chord(double a, double b, double c, double r) noexcept {
    if (b <= a) return 0.0;
    if (c <= 0.0) return c * (b - a);
    if (c >= r) return circ_antideriv(b, r) - circ_antideriv(a, r);
    const double xc = std::sqrt(r * r - c * c);
    double area = 0.0;
    double lo = std::max(a, -r), hi = std::min(b, -xc);
    if (hi > lo) area += circ_antideriv(hi, r) - circ_antideriv(lo, r);
    lo = std::max(a, -xc), hi = std::min(b, xc);
    if (hi > lo) area += c * (hi - lo);
    lo = std::max(a, xc), hi = std::min(b, r);
    if (hi > lo) area += circ_antideriv(hi, r) - circ_antideriv(lo, r);
    return area;
}

}  // namespace detail

/// Overlap area of the disc centered at (cx,cy) with radius r and the
/// rectangle [x0,x1]x[y0,y1]. Exact up to floating-point round-off.
inline double disc_rect_overlap(double cx, double cy, double r,
                                double x0, double y0, double x1, double y1) noexcept {
    if (!(r > 0.0)) return 0.0;
    x0 -= cx;
    x1 -= cx;
    y0 -= cy;
    y1 -= cy;
    if (x0 >= r || x1 <= -r || y0 >= r || y1 <= -r) return 0.0;

    // x-range where the vertical slice of disc and rectangle intersect
    double xa = std::max(x0, -r);
    double xb = std::min(x1, r);
    if (y0 > 0.0) {
        const double xs = std::sqrt(std::max(0.0, r * r - y0 * y0));
        xa = std::max(xa, -xs);
        xb = std::min(xb, xs);
    }
    if (y1 < 0.0) {
        const double xs = std::sqrt(std::max(0.0, r * r - y1 * y1));
        xa = std::max(xa, -xs);
        xb = std::min(xb, xs);
    }
    if (xb <= xa) return 0.0;

    // integrand: min(y1, Y(x)) - max(y0, -Y(x)) = min(y1, Y) + min(-y0, Y)
    return detail::integral_min_chord(xa, xb, y1, r) + detail::integral_min_chord(xa, xb, -y0, r);
}

}  // namespace pillarmetry
