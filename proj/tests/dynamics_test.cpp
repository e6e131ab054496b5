#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <vector>

#include "carbongmam/dynamics.hpp"
#include "carbongmam/error.hpp"
#include "carbongmam/geometry.hpp"
#include "support.hpp"

using namespace carbongmam;
using testing::PolarCycles;

namespace {

double max_radius_error(const LimitCycle& cycle, double radius) {
    double worst = 0.0;
    for (const auto& p : cycle.points) worst = std::max(worst, std::fabs(norm(p) - radius));
    return worst;
}

}  // namespace

TEST_CASE("integrate stays at an equilibrium") {
    const auto p = testing::reference_params(62.0);
    const ModelParams params = p ? *p : testing::generic_params();
    const CarbonSystem sys(params);
    const State fp = find_fixed_point(sys, equilibrium_guess(params));
    const Trajectory traj = integrate(sys, fp, 5.0, 1e-3);
    CHECK(traj.times.size() == traj.states.size());
    for (const auto& s : traj.states) CHECK(distance(s, fp) < 1e-8);
}

TEST_CASE("trajectory times increase and end at t_end") {
    const PolarCycles sys;
    const Trajectory traj = integrate(sys, {0.5, 0.0}, 1.0005, 1e-3);
    REQUIRE(traj.times.size() >= 2);
    for (std::size_t i = 1; i < traj.times.size(); ++i) CHECK(traj.times[i] > traj.times[i - 1]);
    CHECK(traj.times.back() == doctest::Approx(1.0005).epsilon(1e-14));
    CHECK_THROWS(integrate(sys, {0.5, 0.0}, 1.0, 0.0));
}

TEST_CASE("RK4 shows fourth-order Richardson ratios on the carbonate flow") {
    const ModelParams params = testing::generic_params();
    const CarbonSystem sys(params);
    const State start{95.0, 2150.0};
    const double t = 0.5;
    const State a = flow_map(sys, start, t, 0.02);
    const State b = flow_map(sys, start, t, 0.01);
    const State c = flow_map(sys, start, t, 0.005);
    const double ratio = distance(a, b) / distance(b, c);
    CHECK(ratio > 12.0);
    CHECK(ratio < 20.0);
}

TEST_CASE("backward integration undoes forward integration") {
    const PolarCycles sys;
    const State start{0.7, 0.1};
    const State there = flow_map(sys, start, 2.0, 1e-3);
    const State back = flow_map(sys, there, 2.0, 1e-3, Direction::backward);
    CHECK(distance(back, start) < 1e-9);
}

TEST_CASE("integrate reports leaving the domain") {
    const ModelParams params = testing::generic_params();
    const CarbonSystem sys(params);
    CHECK_THROWS_AS(integrate(sys, {1.0, 50000.0}, 40.0, 0.01, Direction::backward), DomainError);
}

TEST_CASE("fixed point solves the drift and does not depend on the guess") {
    const ModelParams params = testing::generic_params();
    const CarbonSystem sys(params);
    const State guess = equilibrium_guess(params);
    const State a = find_fixed_point(sys, guess);
    const State b = find_fixed_point(sys, guess + State{5.0, -40.0});
    CHECK(max_norm(sys.drift(a)) < 1e-10);
    CHECK(distance(a, b) < 1e-8);
}

TEST_CASE("fixed point of the linear system is the origin") {
    const LinearSystem sys(Mat2{-1.0, 2.0, -2.0, -1.0});
    const State fp = find_fixed_point(sys, {0.3, -0.4});
    CHECK(norm(fp) < 1e-12);
    CHECK(is_stable(sys.jacobian(fp)));
    CHECK_FALSE(is_stable(Mat2{0.1, 1.0, -1.0, 0.1}));
}

TEST_CASE("polar oracle: stable and unstable cycles at the analytic radii") {
    const PolarCycles sys(0.1, 1.0);
    const State origin{0.0, 0.0};
    const LimitCycle stable = find_limit_cycle(sys, origin, {1.5, 0.0}, CycleStability::stable);
    const LimitCycle unstable = find_limit_cycle(sys, origin, {0.0, 0.5}, CycleStability::unstable);
    CHECK(max_radius_error(stable, sys.stable_radius()) < 1e-5);
    CHECK(max_radius_error(unstable, sys.unstable_radius()) < 1e-5);
    CHECK(stable.period == doctest::Approx(sys.period()).epsilon(1e-6));
    CHECK(unstable.period == doctest::Approx(sys.period()).epsilon(1e-6));
    CHECK(stable.stability == CycleStability::stable);
    CHECK(unstable.stability == CycleStability::unstable);
    CHECK(stable.points.size() >= 256);
    CHECK(distance(stable.points.front(), stable.points.back()) < 1e-5);
    // Forward-time order: the orbit turns counterclockwise.
    const State d = stable.points[1] - stable.points[0];
    CHECK(stable.points[0].c * d.w - stable.points[0].w * d.c > 0.0);
    const State du = unstable.points[1] - unstable.points[0];
    CHECK(unstable.points[0].c * du.w - unstable.points[0].w * du.c > 0.0);
}

TEST_CASE("polar oracle: seeds inside the unstable cycle find no stable cycle") {
    const PolarCycles sys(0.1, 1.0);
    CHECK_THROWS_AS(find_limit_cycle(sys, {0, 0}, {0.0, 0.2}, CycleStability::stable), NoCycleError);
}

TEST_CASE("carbonate cycles at c_x = 57") {
    const auto params = testing::reference_params(57.0);
    if (!params) {
        MESSAGE("reference parameter file absent; skipped");
        return;
    }
    const CarbonSystem sys(*params);
    const DynamicsOptions opts;
    const State fp = find_fixed_point(sys, equilibrium_guess(*params));
    const LimitCycle stable = find_limit_cycle(*params, CycleStability::stable);
    const LimitCycle unstable = find_limit_cycle(*params, CycleStability::unstable);

    SUBCASE("periodicity") {
        for (const LimitCycle* cyc : {&stable, &unstable}) {
            const Direction dir = cyc->stability == CycleStability::stable ? Direction::forward : Direction::backward;
            const State start = cyc->points.front();
            const State end = flow_map(sys, start, cyc->period, opts.dt, dir);
            CHECK(distance(start, end) < 10 * opts.cycle_tol);
        }
    }
    SUBCASE("nesting: fixed point inside unstable inside stable") {
        const ClosedCurve outer(stable.points);
        const ClosedCurve inner(unstable.points);
        CHECK(inner.contains(fp));
        CHECK(outer.contains(fp));
        for (const auto& p : unstable.points) CHECK(outer.contains(p));
        for (const auto& p : stable.points) CHECK_FALSE(inner.contains(p));
    }
    SUBCASE("time reversal reproduces the unstable cycle") {
        double chord = 0.0;
        for (std::size_t i = 0; i + 1 < unstable.points.size(); ++i) {
            chord = std::max(chord, distance(unstable.points[i], unstable.points[i + 1]));
        }
        // The polygon sags by much less than a chord.
        const ClosedCurve curve(unstable.points, chord);
        const State p = unstable.points[unstable.points.size() / 3];
        const Trajectory back = integrate(sys, p, 0.7 * unstable.period, opts.dt, Direction::backward);
        for (std::size_t i = 0; i < back.states.size(); i += 50) CHECK(curve.distance(back.states[i]) < 0.1 * chord);
    }
    SUBCASE("start inside the unstable cycle returns to the fixed point") {
        const State start = 0.5 * (fp + unstable.points.front());
        const State end = flow_map(sys, start, 150.0, opts.dt);
        CHECK(distance(end, fp) < 1e-3);
    }
}

TEST_CASE("carbonate fixed point at c_x = 62 is a stable focus") {
    const auto params = testing::reference_params(62.0);
    if (!params) {
        MESSAGE("reference parameter file absent; skipped");
        return;
    }
    const CarbonSystem sys(*params);
    const State fp = find_fixed_point(sys, equilibrium_guess(*params));
    for (const auto& ev : eigenvalues(sys.jacobian(fp))) {
        CHECK(ev.real() < 0.0);
        CHECK(ev.imag() != 0.0);
    }
}

TEST_CASE("no stable cycle below the lower threshold") {
    const auto params = testing::reference_params(50.0);
    if (!params) {
        MESSAGE("reference parameter file absent; skipped");
        return;
    }
    CHECK_THROWS_AS(find_limit_cycle(*params, CycleStability::stable), NoCycleError);
    const RegimeReport r = classify_regime(*params);
    CHECK(r.regime == Regime::single_stable_point);
    CHECK(r.fixed_point_stable);
}

TEST_CASE("regime scan orders regimes and brackets the thresholds") {
    const auto params = testing::reference_params();
    if (!params) {
        MESSAGE("reference parameter file absent; skipped");
        return;
    }
    std::vector<double> grid;
    for (double c = 50.0; c <= 68.0; c += 3.0) grid.push_back(c);
    ScanOptions opts;
    opts.bisection_tol = 0.05;
    const ScanResult res = scan_regimes(grid, *params, opts);
    REQUIRE(res.reports.size() == grid.size());
    int stage = 0;
    for (const auto& r : res.reports) {
        CHECK(r.error.empty());
        const int s = static_cast<int>(r.regime);
        CHECK(s >= stage);
        stage = s;
    }
    REQUIRE(res.thresholds.size() == 2);
    CHECK(res.thresholds[0].c_x == doctest::Approx(55.89).epsilon(0.5 / 55.89));
    CHECK(res.thresholds[1].c_x == doctest::Approx(62.61).epsilon(0.5 / 62.61));
    CHECK(res.thresholds[0].upper - res.thresholds[0].lower <= opts.bisection_tol);

    const ScanResult again = scan_regimes(grid, *params, opts);
    for (std::size_t i = 0; i < grid.size(); ++i) {
        CHECK(again.reports[i].regime == res.reports[i].regime);
        CHECK(again.reports[i].fixed_point.c == res.reports[i].fixed_point.c);
    }
    CHECK(again.thresholds[1].c_x == res.thresholds[1].c_x);

    const std::vector<double> outside{30.0};
    CHECK_THROWS_AS(scan_regimes(outside, *params), ConfigError);
}
