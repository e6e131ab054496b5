#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "carbongmam/carbon_model.hpp"
#include "carbongmam/state.hpp"
#include "carbongmam/system.hpp"

namespace carbongmam {

enum class Direction { forward, backward };
enum class Integrator { rk4, euler };
enum class CycleStability { stable, unstable };
enum class Regime { single_stable_point, bistable, cycle_only };

const char* to_string(CycleStability s);
const char* to_string(Regime r);

struct Trajectory {
    std::vector<double> times;
    std::vector<State> states;
    double dt = 0.0;
};

struct DynamicsOptions {
    double dt = 1e-3;
    Integrator integrator = Integrator::rk4;
    std::size_t max_steps = 10'000'000;

    std::size_t max_newton_iters = 100;
    double newton_tol = 1e-10;

    /// Distance between successive Poincare returns that counts as converged.
    double cycle_tol = 1e-6;
    double closure_tol = 1e-5;
    /// Resampled cycle size (at least 256).
    std::size_t cycle_points = 1024;
    /// Give up when the section is not crossed for this long.
    double max_time_between_crossings = 200.0;
};

/// One step of the flow (sign = -1 integrates the reversed drift).
State flow_step(const StochasticSystem& system, const State& x, double h, Integrator method, double sign = 1.0);

/// Fixed-step trajectory. Throws DomainError if the state leaves the
/// admissible domain.
Trajectory integrate(const StochasticSystem& system, const State& start, double t_end, double dt,
                     Direction direction = Direction::forward, Integrator method = Integrator::rk4);

/// Newton iteration on drift = 0 with step halving on residual growth.
State find_fixed_point(const StochasticSystem& system, const State& guess, const DynamicsOptions& options = {});

/// Both eigenvalues in the open left half-plane.
bool is_stable(const Mat2& jacobian);

struct LimitCycle {
    /// Closed orbit in forward-time order; points.front() == points.back().
    std::vector<State> points;
    double period = 0.0;
    CycleStability stability = CycleStability::stable;
};

/// Locate a limit cycle around `fixed_point` by iterating the Poincare
/// return map on the half-line {c = c*, w > w*}, starting at `seed`.
/// Unstable cycles are found as attractors of the time-reversed flow.
/// Throws NoCycleError if the map runs into the fixed point or escapes.
LimitCycle find_limit_cycle(const StochasticSystem& system, const State& fixed_point, const State& seed,
                            CycleStability stability, const DynamicsOptions& options = {});

/// Carbonate-model convenience: seeds far outside for the stable cycle and
/// next to the fixed point for the unstable one.
LimitCycle find_limit_cycle(const ModelParams& params, CycleStability stability,
                            const DynamicsOptions& options = {});

/// Integrate from `start` for `duration` and return the end point.
State flow_map(const StochasticSystem& system, const State& start, double duration, double dt,
               Direction direction = Direction::forward, Integrator method = Integrator::rk4);

struct RegimeReport {
    double c_x = 0.0;
    Regime regime = Regime::single_stable_point;
    State fixed_point{};
    bool fixed_point_stable = false;
    bool has_stable_cycle = false;
    /// Empty when the classification succeeded.
    std::string error;
};

struct RegimeThreshold {
    double c_x = 0.0;
    /// Bracket that produced the estimate.
    double lower = 0.0;
    double upper = 0.0;
    Regime below = Regime::single_stable_point;
    Regime above = Regime::single_stable_point;
};

struct ScanOptions {
    DynamicsOptions dynamics{};
    double bisection_tol = 0.01;
    double window_min = 40.0;
    double window_max = 80.0;
    unsigned threads = 1;
};

struct ScanResult {
    std::vector<RegimeReport> reports;
    std::vector<RegimeThreshold> thresholds;
};

RegimeReport classify_regime(const ModelParams& params, const DynamicsOptions& options = {});

/// Classify each c_x and bisect every regime change down to bisection_tol.
/// Per-point solver failures are recorded in the report, not thrown.
ScanResult scan_regimes(std::span<const double> c_x_values, const ModelParams& params,
                        const ScanOptions& options = {});

}  // namespace carbongmam
