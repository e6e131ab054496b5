#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "carbongmam/dynamics.hpp"
#include "carbongmam/state.hpp"
#include "carbongmam/system.hpp"

namespace carbongmam {

enum class Quadrature { trapezoid, midpoint };

const char* to_string(Quadrature q);

struct DiscretePath {
    std::vector<State> points;
    std::optional<double> action;
};

struct GmamConfig {
    std::size_t n_points = 3000;
    std::size_t max_outer_iters = 20000;
    /// Largest relaxation pseudo-time step; halved on action increase.
    double step_tau = 1e-3;
    double min_step_tau = 1e-8;
    /// Sup-norm node displacement per iteration (per nominal step) for convergence.
    double conv_tol = 1e-8;
    Quadrature quadrature = Quadrature::midpoint;

    /// Endpoint candidates sampled along a target cycle.
    std::size_t n_candidates = 36;
    /// Subdivide once around the best candidate.
    bool refine_candidates = true;
    /// Workers for candidate solves.
    unsigned threads = 1;

    void validate() const;
};

struct TransitionResult {
    DiscretePath path;
    double action = 0.0;
    /// Candidate index on the half-step grid (2k for candidate k, 2k +- 1
    /// for refinements). Zero for point-to-point solves.
    std::size_t endpoint_index = 0;
    bool converged = false;
    std::size_t iterations = 0;
    /// Action after every accepted step, starting with the initial path.
    std::vector<double> action_history;
    double final_displacement = 0.0;
};

struct CandidateOutcome {
    std::size_t index = 0;
    State endpoint{};
    std::optional<double> action;
    bool converged = false;
    std::size_t iterations = 0;
    std::string error;
};

struct CycleTransition {
    TransitionResult best;
    std::vector<CandidateOutcome> candidates;
};

/// Discrete geometric action: sum over segments of
/// |d|_A |b|_A - <d, b>_A with d the chord, evaluated at segment midpoints
/// (or averaged over both ends for the trapezoid rule).
double geometric_action(std::span<const State> points, const StochasticSystem& system,
                        Quadrature quadrature = Quadrature::midpoint);

/// Euclidean length with the A-metric of the system, midpoint rule.
double metric_length(std::span<const State> points, const StochasticSystem& system);

/// Redistribute interior nodes to equal Euclidean chord lengths along the
/// piecewise-linear curve. Endpoints are copied unchanged.
DiscretePath reparameterize(const DiscretePath& path);

/// Resample a polyline to n equidistant points.
std::vector<State> resample(std::span<const State> points, std::size_t n);

/// One outer iteration: semi-implicit update with the lambda^2 phi''
/// term implicit, then endpoint pinning and reparameterization.
DiscretePath relax_step(const DiscretePath& path, const GmamConfig& config, const StochasticSystem& system);

/// Straight-line (or warm-started) relaxation between two fixed endpoints.
/// A warm start is shifted so its ends match, then resampled.
TransitionResult solve(const State& start, const State& end, const GmamConfig& config,
                       const StochasticSystem& system, const DiscretePath* warm_start = nullptr);

/// Minimum over endpoints sampled equidistantly along the cycle.
/// Throws ConvergenceError if every candidate solve fails.
CycleTransition quasipotential_to_cycle(const State& start, const LimitCycle& cycle, const GmamConfig& config,
                                        const StochasticSystem& system, const DiscretePath* warm_start = nullptr);

}  // namespace carbongmam
