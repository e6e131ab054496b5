#include <doctest.h>

#include <cmath>
#include <limits>
#include <random>
#include <vector>

#include "carbongmam/geometry.hpp"

using namespace carbongmam;

namespace {

std::vector<State> ellipse(std::size_t n, double a, double b, bool closed) {
    std::vector<State> pts;
    for (std::size_t i = 0; i < n; ++i) {
        const double t = 2.0 * M_PI * static_cast<double>(i) / static_cast<double>(n);
        pts.push_back({10.0 + a * std::cos(t), -3.0 + b * std::sin(t)});
    }
    if (closed) pts.push_back(pts.front());
    return pts;
}

double brute_distance(const std::vector<State>& pts, const State& p) {
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < pts.size(); ++i) {
        const State a = pts[i], b = pts[(i + 1) % pts.size()];
        const State d = b - a;
        const double len2 = dot(d, d);
        const double t = len2 > 0 ? std::clamp(dot(p - a, d) / len2, 0.0, 1.0) : 0.0;
        best = std::min(best, distance(p, a + t * d));
    }
    return best;
}

bool brute_contains(const std::vector<State>& pts, const State& p) {
    bool inside = false;
    for (std::size_t i = 0, j = pts.size() - 1; i < pts.size(); j = i++) {
        if ((pts[i].w > p.w) != (pts[j].w > p.w) &&
            p.c < (pts[j].c - pts[i].c) * (p.w - pts[i].w) / (pts[j].w - pts[i].w) + pts[i].c) {
            inside = !inside;
        }
    }
    return inside;
}

}  // namespace

TEST_CASE("polyline lengths") {
    const std::vector<State> two{{0, 0}, {3, 4}};
    CHECK(polyline_length(two) == 5.0);
    const std::vector<State> line{{0, 0}, {1, 0}, {1, 2}, {4, 6}};
    const auto cum = cumulative_length(line);
    REQUIRE(cum.size() == 4);
    CHECK(cum[0] == 0.0);
    CHECK(cum[3] == doctest::Approx(8.0));
    const State mid = point_at_fraction(line, cum, 0.25);
    CHECK(mid.c == doctest::Approx(1.0));
    CHECK(mid.w == doctest::Approx(1.0));
    CHECK(point_at_fraction(line, cum, 1.0).c == 4.0);
    CHECK(point_at_fraction(line, cum, 0.0).w == 0.0);
}

TEST_CASE("closed curve containment agrees with a brute-force crossing test") {
    for (bool closed : {false, true}) {
        const auto pts = ellipse(500, 7.0, 2.0, closed);
        const ClosedCurve curve(pts);
        std::vector<State> open(pts.begin(), pts.begin() + 500);
        std::mt19937_64 rng(1);
        std::uniform_real_distribution<double> x(0.0, 20.0), y(-7.0, 1.0);
        for (int i = 0; i < 2000; ++i) {
            const State p{x(rng), y(rng)};
            CHECK(curve.contains(p) == brute_contains(open, p));
        }
        CHECK(curve.contains({10.0, -3.0}));
        CHECK_FALSE(curve.contains({30.0, -3.0}));
    }
}

TEST_CASE("closed curve distance is exact within reach") {
    const auto pts = ellipse(400, 5.0, 3.0, true);
    std::vector<State> open(pts.begin(), pts.end() - 1);
    const double reach = 0.8;
    const ClosedCurve curve(pts, reach);
    const ClosedCurve unbounded(pts);
    std::mt19937_64 rng(2);
    std::uniform_real_distribution<double> x(3.0, 17.0), y(-8.0, 2.0);
    for (int i = 0; i < 2000; ++i) {
        const State p{x(rng), y(rng)};
        const double exact = brute_distance(open, p);
        CHECK(unbounded.distance(p) == doctest::Approx(exact).epsilon(1e-12));
        if (exact <= reach) {
            CHECK(curve.distance(p) == doctest::Approx(exact).epsilon(1e-12));
            CHECK(curve.within(p, reach));
        } else {
            CHECK(curve.distance(p) > reach);
        }
    }
    CHECK(curve.bbox_diagonal() == doctest::Approx(std::hypot(10.0, 6.0)).epsilon(1e-3));
    CHECK(curve.size() == 400);
}
