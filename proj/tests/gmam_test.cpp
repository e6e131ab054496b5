#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

#include "carbongmam/dynamics.hpp"
#include "carbongmam/error.hpp"
#include "carbongmam/geometry.hpp"
#include "carbongmam/gmam.hpp"
#include "support.hpp"

using namespace carbongmam;
using testing::relative_error;

namespace {

std::vector<State> sample_curve(std::size_t n, const std::vector<double>& params) {
    // A smooth arc climbing out of the left double-well minimum.
    std::vector<State> pts;
    for (std::size_t i = 0; i < n; ++i) {
        const double s = params[i];
        pts.push_back({-1.0 + 1.6 * s, 0.4 * std::sin(M_PI * s)});
    }
    return pts;
}

std::vector<double> uniform_grid(std::size_t n) {
    std::vector<double> g(n);
    for (std::size_t i = 0; i < n; ++i) g[i] = static_cast<double>(i) / static_cast<double>(n - 1);
    return g;
}

std::vector<double> warped_grid(std::size_t n, unsigned seed) {
    // Smooth, strictly monotone reparameterization with random coefficients.
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> amp(-0.12, 0.12);
    const double a1 = amp(rng), a2 = amp(rng);
    std::vector<double> g = uniform_grid(n);
    for (double& s : g) s = s + a1 * std::sin(M_PI * s) + a2 * std::sin(2 * M_PI * s) / 2;
    return g;
}

double max_chord_spread(const std::vector<State>& pts) {
    double lo = 1e300, hi = 0.0;
    for (std::size_t i = 0; i + 1 < pts.size(); ++i) {
        const double d = distance(pts[i], pts[i + 1]);
        lo = std::min(lo, d);
        hi = std::max(hi, d);
    }
    return (hi - lo) / hi;
}

GmamConfig small_config(std::size_t n) {
    GmamConfig cfg;
    cfg.n_points = n;
    cfg.step_tau = 1e-2;
    cfg.max_outer_iters = 20000;
    return cfg;
}

}  // namespace

TEST_CASE("geometric action vanishes along forward flow lines") {
    const DoubleWellSystem dw;
    const Trajectory traj = integrate(dw, {0.3, 0.8}, 2.0, 1e-3);
    const auto path = resample(traj.states, 1000);
    CHECK(geometric_action(path, dw) < 1e-6);
    CHECK(geometric_action(path, dw, Quadrature::trapezoid) < 1e-6);

    const auto params = testing::reference_params(62.0);
    const ModelParams p = params ? *params : testing::generic_params();
    const CarbonSystem sys(p);
    const Trajectory carbon = integrate(sys, {60.0, 2600.0}, 1.0, 1e-4);
    CHECK(geometric_action(resample(carbon.states, 1000), sys) < 1e-6);
}

TEST_CASE("geometric action is nonnegative") {
    const DoubleWellSystem dw;
    std::mt19937_64 rng(21);
    std::normal_distribution<double> step(0.0, 0.2);
    for (int trial = 0; trial < 20; ++trial) {
        std::vector<State> pts{{0.0, 0.0}};
        for (int i = 0; i < 50; ++i) pts.push_back(pts.back() + State{step(rng), step(rng)});
        CHECK(geometric_action(pts, dw) >= 0.0);
        CHECK(geometric_action(pts, dw, Quadrature::trapezoid) >= 0.0);
    }
}

TEST_CASE("time-reversed gradient flow costs twice the potential rise") {
    const DoubleWellSystem dw;
    std::vector<State> pts;
    for (std::size_t i = 0; i < 300; ++i) pts.push_back({-1.0 + static_cast<double>(i) / 299.0, 0.0});
    const double expected = 2.0 * (DoubleWellSystem::potential({0, 0}) - DoubleWellSystem::potential({-1, 0}));
    CHECK(relative_error(geometric_action(pts, dw), expected) < 0.01);
}

TEST_CASE("metric length of a straight segment with identity noise") {
    const DoubleWellSystem dw;
    const std::vector<State> pts{{0, 0}, {1.5, 0}, {3, 4}};
    CHECK(metric_length(pts, dw) == doctest::Approx(1.5 + std::hypot(1.5, 4.0)));
}

TEST_CASE("reparameterize equalizes chords and pins endpoints") {
    const auto warped = sample_curve(300, warped_grid(300, 4));
    const DiscretePath out = reparameterize({warped, std::nullopt});
    CHECK(out.points.front().c == warped.front().c);
    CHECK(out.points.front().w == warped.front().w);
    CHECK(out.points.back().c == warped.back().c);
    CHECK(out.points.back().w == warped.back().w);
    CHECK(out.points.size() == warped.size());
    // Chords of an equal-arc-length polyline inscribed in the polyline.
    CHECK(max_chord_spread(out.points) < 1e-3);

    const DiscretePath again = reparameterize(out);
    CHECK(max_chord_spread(again.points) < 1e-6);

    std::vector<State> arc;
    for (int i = 0; i < 200; ++i) arc.push_back({3.0 * std::cos(0.01 * i), 3.0 * std::sin(0.01 * i)});
    const DiscretePath fixed = reparameterize({arc, std::nullopt});
    for (std::size_t i = 0; i < arc.size(); ++i) CHECK(distance(fixed.points[i], arc[i]) < 1e-12);

    std::vector<State> line;
    for (int i = 0; i < 10; ++i) line.push_back({0.5 * i, -0.25 * i});
    const DiscretePath same = reparameterize({line, std::nullopt});
    for (std::size_t i = 0; i < line.size(); ++i) CHECK(distance(same.points[i], line[i]) < 1e-12);

    const std::vector<State> degenerate(5, State{1.0, 1.0});
    CHECK_THROWS_AS(reparameterize({degenerate, std::nullopt}), DegeneratePathError);
    CHECK_THROWS_AS(reparameterize({{{0, 0}, {1, 1}}, std::nullopt}), DegeneratePathError);
}

TEST_CASE("geometric action is invariant under reparameterization") {
    const DoubleWellSystem dw;
    auto mismatch = [&](std::size_t n) {
        const double even = geometric_action(sample_curve(n, uniform_grid(n)), dw);
        const double warped = geometric_action(sample_curve(n, warped_grid(n, 9)), dw);
        return relative_error(warped, even);
    };
    const double coarse = mismatch(300);
    const double fine = mismatch(3000);
    CHECK(fine < 1e-4);
    // Second-order quadrature: a tenfold refinement shrinks the gap ~100x.
    CHECK(fine < coarse / 50.0);

    const auto resampled = reparameterize({sample_curve(3000, warped_grid(3000, 9)), std::nullopt});
    CHECK(relative_error(geometric_action(resampled.points, dw),
                         geometric_action(sample_curve(3000, uniform_grid(3000)), dw)) < 1e-4);
}

TEST_CASE("double-well oracle: straight start over the saddle") {
    const DoubleWellSystem dw;
    const GmamConfig cfg = small_config(300);
    const TransitionResult r = solve({-1.0, 0.0}, {1.0, 0.0}, cfg, dw);
    CHECK(r.converged);
    CHECK(r.iterations <= cfg.max_outer_iters);
    CHECK(relative_error(r.action, 2.0) < 0.01);
    CHECK(r.path.points.front().c == -1.0);
    CHECK(r.path.points.back().c == 1.0);
    CHECK(r.path.action.has_value());
    CHECK(std::fabs(r.action - geometric_action(r.path.points, dw)) < 1e-10);
}

TEST_CASE("double-well oracle: bent start relaxes onto the axis") {
    const DoubleWellSystem dw;
    GmamConfig cfg = small_config(300);
    std::vector<State> bent;
    for (std::size_t i = 0; i < 300; ++i) {
        const double s = static_cast<double>(i) / 299.0;
        bent.push_back({-1.0 + s, 0.6 * std::sin(M_PI * s)});
    }
    const DiscretePath warm{bent, std::nullopt};
    const TransitionResult r = solve({-1.0, 0.0}, {0.0, 0.0}, cfg, dw, &warm);
    CHECK(r.converged);
    CHECK(relative_error(r.action, 2.0) < 0.01);

    SUBCASE("descent over every accepted step") {
        REQUIRE(r.action_history.size() >= 2);
        for (std::size_t i = 1; i < r.action_history.size(); ++i) {
            CHECK(r.action_history[i] <= r.action_history[i - 1] * (1.0 + 1e-8) + 1e-14);
        }
        CHECK(r.action_history.back() < r.action_history.front());
    }
    SUBCASE("the minimizer is stationary") {
        const DiscretePath next = relax_step(r.path, cfg, dw);
        double moved = 0.0;
        for (std::size_t i = 0; i < next.points.size(); ++i) {
            moved = std::max(moved, max_norm(next.points[i] - r.path.points[i]));
        }
        CHECK(moved < 10 * cfg.conv_tol);
    }
}

TEST_CASE("linear oracle: quasi-potential is the squared norm") {
    const LinearSystem lin;
    std::mt19937_64 rng(42);
    std::uniform_real_distribution<double> angle(0.0, 2 * M_PI), radius(0.3, 1.5);
    const GmamConfig cfg = small_config(300);
    for (int k = 0; k < 5; ++k) {
        const double a = angle(rng), r = radius(rng);
        const State target{r * std::cos(a), r * std::sin(a)};
        const TransitionResult res = solve({0.0, 0.0}, target, cfg, lin);
        CHECK(res.converged);
        CHECK(relative_error(res.action, dot(target, target)) < 0.01);
    }
}

TEST_CASE("rotational linear oracle: curved minimizer") {
    // M = -k I + omega R is normal, so V(x) = k |x|^2 with identity noise.
    const double k = 0.5;
    const LinearSystem lin(Mat2{-k, 3.0, -3.0, -k});
    const TransitionResult res = solve({0.0, 0.0}, {1.0, 0.0}, small_config(750), lin);
    CHECK(res.converged);
    CHECK(relative_error(res.action, k) < 0.01);
    CHECK(polyline_length(res.path.points) > 2.0);
}

TEST_CASE("downstream endpoints cost nothing") {
    const DoubleWellSystem dw;
    const State start{0.4, 0.9};
    const State end = flow_map(dw, start, 0.3, 1e-4);
    const TransitionResult r = solve(start, end, small_config(200), dw);
    CHECK(r.action < 1e-6);
}

TEST_CASE("warm and cold starts agree") {
    const LinearSystem lin(Mat2{-1.0, 1.0, -1.0, -1.0});
    const GmamConfig cfg = small_config(300);
    const TransitionResult nearby = solve({0.0, 0.0}, {1.1, 0.4}, cfg, lin);
    const TransitionResult cold = solve({0.0, 0.0}, {1.0, 0.5}, cfg, lin);
    const TransitionResult warm = solve({0.0, 0.0}, {1.0, 0.5}, cfg, lin, &nearby.path);
    CHECK(cold.converged);
    CHECK(warm.converged);
    CHECK(relative_error(warm.action, cold.action) < 1e-3);
    CHECK(warm.path.points.back().c == 1.0);
    CHECK(warm.path.points.back().w == 0.5);
}

TEST_CASE("solve rejects bad input") {
    const LinearSystem lin;
    CHECK_THROWS_AS(solve({1.0, 1.0}, {1.0, 1.0}, small_config(50), lin), DegeneratePathError);
    GmamConfig bad = small_config(2);
    CHECK_THROWS_AS(solve({0, 0}, {1, 0}, bad, lin), ConfigError);
    bad = small_config(50);
    bad.step_tau = 0.0;
    CHECK_THROWS_AS(bad.validate(), ConfigError);
    bad = small_config(50);
    bad.conv_tol = -1.0;
    CHECK_THROWS_AS(bad.validate(), ConfigError);
    const CarbonSystem sys(testing::generic_params());
    CHECK_THROWS_AS(solve({0.0, 2000.0}, {50.0, 2000.0}, small_config(50), sys), SingularityError);
}

TEST_CASE("non-convergence is reported, not hidden") {
    const DoubleWellSystem dw;
    GmamConfig cfg = small_config(300);
    cfg.max_outer_iters = 3;
    const TransitionResult r = solve({-1.0, 0.0}, {0.0, 0.5}, cfg, dw);
    CHECK_FALSE(r.converged);
    CHECK(r.iterations == 3);
}

TEST_CASE("quasi-potential to a cycle") {
    const testing::PolarCycles sys(0.1, 1.0);
    const LimitCycle stable = find_limit_cycle(sys, {0, 0}, {1.5, 0.0}, CycleStability::stable);
    GmamConfig cfg = small_config(100);
    cfg.n_candidates = 12;

    SUBCASE("start on the cycle") {
        const CycleTransition t = quasipotential_to_cycle(stable.points.front(), stable, cfg, sys);
        CHECK(t.best.action < 1e-6);
    }
    SUBCASE("minimum over candidates, from inside the unstable cycle") {
        const CycleTransition t = quasipotential_to_cycle({0.0, 0.0}, stable, cfg, sys);
        CHECK(t.candidates.size() == cfg.n_candidates + 2);
        for (const auto& c : t.candidates) {
            REQUIRE(c.action.has_value());
            CHECK(t.best.action <= *c.action);
        }
        CHECK(t.best.endpoint_index < 2 * cfg.n_candidates);
        CHECK(std::fabs(norm(t.best.path.points.back()) - sys.stable_radius()) < 1e-4);
        CHECK(t.best.action > 0.0);
    }
    SUBCASE("parallel candidates give the same answer") {
        GmamConfig par = cfg;
        par.threads = 3;
        const CycleTransition a = quasipotential_to_cycle({0.0, 0.0}, stable, cfg, sys);
        const CycleTransition b = quasipotential_to_cycle({0.0, 0.0}, stable, par, sys);
        CHECK(a.best.action == b.best.action);
        CHECK(a.best.endpoint_index == b.best.endpoint_index);
    }
}
