#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "carbongmam/dynamics.hpp"
#include "carbongmam/geometry.hpp"
#include "carbongmam/state.hpp"
#include "carbongmam/system.hpp"

namespace carbongmam {

/// Philox4x32-10 counter-based generator (Salmon et al.).
struct Philox4x32 {
    using Counter = std::array<std::uint32_t, 4>;
    using Key = std::array<std::uint32_t, 2>;
    static Counter generate(Counter counter, Key key);
};

/// Two independent standard normals for (seed, path, step), via Box-Muller.
std::array<double, 2> normal_pair(std::uint64_t seed, std::uint64_t path, std::uint64_t step);

struct SimConfig {
    double epsilon = 0.01;
    double dt = 1e-4;
    double t_max = 20.0;
    std::uint64_t seed = 0;
    std::size_t n_paths = 1;
    /// Keep every k-th sample of stored trajectories (the last one is always kept).
    std::size_t record_every = 1;
    unsigned threads = 1;

    void validate() const;
    std::size_t n_steps() const;
};

struct SimTrajectory {
    Trajectory trajectory;
    std::uint64_t path_id = 0;
    std::size_t clamp_count = 0;
    /// Set when a step produced a non-finite state; the path stops there.
    bool non_finite = false;
};

/// Observer for streamed paths: (step index, time, state). Return false to stop.
using PathObserver = std::function<bool(std::size_t, double, const State&)>;

struct PathSummary {
    std::size_t steps = 0;
    std::size_t clamp_count = 0;
    bool non_finite = false;
    State last{};
};

/// X_{n+1} = X_n + b(X_n) dt + eps eta(X_n) sqrt(dt) xi_n, with xi_n drawn
/// from the (seed, path_id, n) stream. The first coordinate is clamped at
/// the system's floor. The observer sees the start (step 0) and every step.
PathSummary simulate_path(const StochasticSystem& system, const State& start, const SimConfig& config,
                          std::uint64_t path_id, const PathObserver& observer);

SimTrajectory euler_maruyama(const StochasticSystem& system, const State& start, const SimConfig& config,
                             std::uint64_t path_id = 0);

/// Fixed point, both cycles and the detection radii derived from them.
struct TransitionGeometry {
    State fixed_point{};
    LimitCycle stable;
    LimitCycle unstable;
    /// Half-width of the tube around the stable cycle.
    double tube_width = 0.0;
    /// Radius of the ball around the fixed point.
    double ball_radius = 0.0;

    TransitionGeometry(State fixed_point, LimitCycle stable, LimitCycle unstable, double relative_size = 0.02);

    const ClosedCurve& stable_curve() const { return stable_curve_; }
    const ClosedCurve& unstable_curve() const { return unstable_curve_; }

private:
    ClosedCurve stable_curve_;
    ClosedCurve unstable_curve_;
};

struct TransitionRecord {
    bool transitioned = false;
    /// Last exit from the unstable cycle before arrival (0 if the path never was inside).
    double exit_time = 0.0;
    /// Entry into the tube that was followed by a full period of dwell.
    double arrival_time = 0.0;
    std::size_t exit_index = 0;
    std::size_t arrival_index = 0;
};

/// Streaming classifier; feed samples in time order.
class TransitionDetector {
public:
    explicit TransitionDetector(const TransitionGeometry& geometry, bool keep_segment = false);

    /// Returns true once the transition is confirmed.
    bool observe(std::size_t index, double t, const State& x);

    const TransitionRecord& record() const { return record_; }
    /// Samples from the last exit of the fixed-point ball up to the arrival.
    const std::vector<State>& segment() const { return segment_; }

private:
    const TransitionGeometry* geometry_;
    bool keep_segment_;
    TransitionRecord record_;

    bool started_ = false;
    bool inside_unstable_ = false;
    double last_exit_time_ = 0.0;
    std::size_t last_exit_index_ = 0;

    bool in_tube_ = false;
    double tube_entry_time_ = 0.0;
    std::size_t tube_entry_index_ = 0;
    double exit_at_entry_time_ = 0.0;
    std::size_t exit_at_entry_index_ = 0;
    std::size_t segment_at_entry_ = 0;

    std::vector<State> segment_;
};

TransitionRecord detect_transition(const Trajectory& trajectory, const TransitionGeometry& geometry);
TransitionRecord detect_transition(const Trajectory& trajectory, const State& fixed_point, const LimitCycle& cycle,
                                   const LimitCycle& unstable_cycle);

/// Regular grid over a rectangle of the phase plane.
struct HistogramGrid {
    double c_min = 0.0;
    double c_max = 1.0;
    double w_min = 0.0;
    double w_max = 1.0;
    std::size_t n_c = 50;
    std::size_t n_w = 50;

    /// Bounding box of the points, widened by `margin` of its size on each side.
    static HistogramGrid around(std::span<const State> points, double margin = 0.1, std::size_t n_c = 50,
                                std::size_t n_w = 50);

    double bin_c() const { return (c_max - c_min) / static_cast<double>(n_c); }
    double bin_w() const { return (w_max - w_min) / static_cast<double>(n_w); }
    std::size_t size() const { return n_c * n_w; }
    /// Row-major cell index (w rows, c columns); size() when outside.
    std::size_t cell(const State& x) const;
    void validate() const;
};

struct BundleResult {
    HistogramGrid grid;
    /// Number of transition paths that visited each cell.
    std::vector<std::uint64_t> counts;
    /// counts normalized to unit mass (all zero without transitions).
    std::vector<double> density;
    std::vector<TransitionRecord> records;
    std::size_t n_paths = 0;
    std::size_t n_transitions = 0;
    std::size_t clamp_count = 0;
    std::size_t non_finite_paths = 0;
    std::uint64_t seed = 0;
    double epsilon = 0.0;
    std::vector<std::string> warnings;
};

inline constexpr std::size_t kMinBundleTransitions = 20;

/// Simulate n_paths paths from `start`, detect transitions and accumulate
/// the ball-exit-to-tube-arrival segments of the transitioning ones.
BundleResult transition_bundle(const StochasticSystem& system, const State& start, const TransitionGeometry& geometry,
                               const SimConfig& config, const HistogramGrid& grid);

/// Fraction of `nodes` (inside the grid) that fall in cells whose count
/// exceeds the median count over occupied cells.
double concordance(const BundleResult& bundle, std::span<const State> nodes);

}  // namespace carbongmam
