#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "pillarmetry/coverage.hpp"
#include "pillarmetry/rng.hpp"

using namespace pillarmetry;

namespace {

// Brute-force overlap oracle: subdivide the rectangle and count cell centers
// inside the disc. Independent of the analytic path being checked.
double disc_rect_overlap_brute(double cx, double cy, double r, double x0, double y0, double x1,
                               double y1, int n = 600) {
    const double dx = (x1 - x0) / n;
    const double dy = (y1 - y0) / n;
    long long inside = 0;
    for (int i = 0; i < n; ++i) {
        const double x = x0 + (i + 0.5) * dx;
        for (int j = 0; j < n; ++j) {
            const double y = y0 + (j + 0.5) * dy;
            if ((x - cx) * (x - cx) + (y - cy) * (y - cy) <= r * r) ++inside;
        }
    }
    return static_cast<double>(inside) * dx * dy;
}

}  // namespace

TEST_CASE("disc fully inside rectangle gives the disc area") {
    const double r = 3.5;
    CHECK(disc_rect_overlap(0, 0, r, -10, -10, 10, 10) ==
          Catch::Approx(M_PI * r * r).epsilon(1e-12));
}

TEST_CASE("disc outside rectangle gives zero") {
    CHECK(disc_rect_overlap(100, 100, 2, 0, 0, 10, 10) == 0.0);
    CHECK(disc_rect_overlap(0, 0, 2, 2.0, -1, 5, 1) == 0.0);  // tangent from the right
}

TEST_CASE("half-plane cut gives half the disc") {
    const double r = 2.0;
    CHECK(disc_rect_overlap(0, 0, r, 0, -10, 10, 10) == Catch::Approx(M_PI * r * r / 2).epsilon(1e-12));
    CHECK(disc_rect_overlap(0, 0, r, -10, 0, 10, 10) == Catch::Approx(M_PI * r * r / 2).epsilon(1e-12));
}

TEST_CASE("quarter cut gives a quarter disc") {
    const double r = 1.25;
    CHECK(disc_rect_overlap(0, 0, r, 0, 0, 10, 10) == Catch::Approx(M_PI * r * r / 4).epsilon(1e-12));
}

TEST_CASE("disc overlap matches the brute-force oracle on random boxes") {
    Rng rng(404);
    for (int k = 0; k < 60; ++k) {
        const double r = rng.uniform(0.2, 4.0);
        const double cx = rng.uniform(-2, 2);
        const double cy = rng.uniform(-2, 2);
        double x0 = rng.uniform(-5, 5), x1 = rng.uniform(-5, 5);
        double y0 = rng.uniform(-5, 5), y1 = rng.uniform(-5, 5);
        if (x1 < x0) std::swap(x0, x1);
        if (y1 < y0) std::swap(y0, y1);
        const double exact = disc_rect_overlap(cx, cy, r, x0, y0, x1, y1);
        const double brute = disc_rect_overlap_brute(cx, cy, r, x0, y0, x1, y1);
        // brute-force resolution limits the agreement, not the analytic path
        CHECK(exact == Catch::Approx(brute).margin(0.01 * r));
    }
}

TEST_CASE("pixel-grid coverage of a disc sums to the disc area") {
    Rng rng(405);
    for (int k = 0; k < 20; ++k) {
        const double r = rng.uniform(1.0, 9.0);
        const double cx = rng.uniform(10, 20);
        const double cy = rng.uniform(10, 20);
        double sum = 0.0;
        for (int y = 0; y < 32; ++y)
            for (int x = 0; x < 32; ++x)
                sum += disc_rect_overlap(cx, cy, r, x, y, x + 1, y + 1);
        CHECK(sum == Catch::Approx(M_PI * r * r).epsilon(1e-9));
    }
}

TEST_CASE("pixel-grid coverage of a rectangle sums to its area") {
    Rng rng(406);
    for (int k = 0; k < 20; ++k) {
        const double w = rng.uniform(0.5, 12.0);
        const double h = rng.uniform(0.5, 12.0);
        const double x0 = rng.uniform(5, 15);
        const double y0 = rng.uniform(5, 15);
        double sum = 0.0;
        for (int y = 0; y < 32; ++y)
            for (int x = 0; x < 32; ++x)
                sum += rect_rect_overlap(x0, y0, x0 + w, y0 + h, x, y, x + 1, y + 1);
        CHECK(sum == Catch::Approx(w * h).epsilon(1e-12));
    }
}

TEST_CASE("rect overlap basics") {
    CHECK(rect_rect_overlap(0, 0, 2, 2, 1, 1, 3, 3) == Catch::Approx(1.0));
    CHECK(rect_rect_overlap(0, 0, 2, 2, 2, 0, 4, 2) == 0.0);  // shared edge only
    CHECK(rect_rect_overlap(0, 0, 4, 4, 1, 1, 2, 3) == Catch::Approx(2.0));
}
