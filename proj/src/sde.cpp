#include "carbongmam/sde.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "carbongmam/error.hpp"
#include "carbongmam/parallel.hpp"

namespace carbongmam {

Philox4x32::Counter Philox4x32::generate(Counter ctr, Key key) {
    constexpr std::uint32_t m0 = 0xD2511F53u, m1 = 0xCD9E8D57u;
    constexpr std::uint32_t w0 = 0x9E3779B9u, w1 = 0xBB67AE85u;
    for (int round = 0; round < 10; ++round) {
        const std::uint64_t p0 = static_cast<std::uint64_t>(m0) * ctr[0];
        const std::uint64_t p1 = static_cast<std::uint64_t>(m1) * ctr[2];
        const auto hi0 = static_cast<std::uint32_t>(p0 >> 32), lo0 = static_cast<std::uint32_t>(p0);
        const auto hi1 = static_cast<std::uint32_t>(p1 >> 32), lo1 = static_cast<std::uint32_t>(p1);
        ctr = {hi1 ^ ctr[1] ^ key[0], lo1, hi0 ^ ctr[3] ^ key[1], lo0};
        key[0] += w0;
        key[1] += w1;
    }
    return ctr;
}

std::array<double, 2> normal_pair(std::uint64_t seed, std::uint64_t path, std::uint64_t step) {
    const Philox4x32::Counter out = Philox4x32::generate(
        {static_cast<std::uint32_t>(step), static_cast<std::uint32_t>(step >> 32), static_cast<std::uint32_t>(path),
         static_cast<std::uint32_t>(path >> 32)},
        {static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)});
    const std::uint64_t a = (static_cast<std::uint64_t>(out[0]) << 32) | out[1];
    const std::uint64_t b = (static_cast<std::uint64_t>(out[2]) << 32) | out[3];
    constexpr double scale = 0x1.0p-53;
    const double u1 = static_cast<double>((a >> 11) + 1) * scale;  // (0, 1]
    const double u2 = static_cast<double>(b >> 11) * scale;        // [0, 1)
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double phi = 2.0 * M_PI * u2;
    return {r * std::cos(phi), r * std::sin(phi)};
}

void SimConfig::validate() const {
    if (!(epsilon >= 0.0) || !std::isfinite(epsilon)) throw ConfigError("sim.epsilon", "must be >= 0");
    if (!(dt > 0.0) || !std::isfinite(dt)) throw ConfigError("sim.dt", "must be > 0");
    if (!(t_max > 0.0) || !std::isfinite(t_max)) throw ConfigError("sim.t_max", "must be > 0");
    if (n_paths < 1) throw ConfigError("sim.n_paths", "must be >= 1");
    if (record_every < 1) throw ConfigError("sim.record_every", "must be >= 1");
}

std::size_t SimConfig::n_steps() const {
    const auto full = static_cast<std::size_t>(std::floor(t_max / dt * (1.0 + 1e-12)));
    const double remainder = t_max - static_cast<double>(full) * dt;
    return full + (remainder > 1e-12 * dt ? 1 : 0);
}

PathSummary simulate_path(const StochasticSystem& system, const State& start, const SimConfig& config,
                          std::uint64_t path_id, const PathObserver& observer) {
    config.validate();
    system.require_admissible(start);
    const double floor = system.first_coordinate_floor();
    const std::size_t n = config.n_steps();
    const auto full = static_cast<std::size_t>(std::floor(config.t_max / config.dt * (1.0 + 1e-12)));
    const bool partial = n > full;

    PathSummary summary;
    State x = start;
    summary.last = x;
    if (!observer(0, 0.0, x)) return summary;
    for (std::size_t k = 0; k < n; ++k) {
        const bool last_partial = partial && k + 1 == n;
        const double h = last_partial ? config.t_max - static_cast<double>(k) * config.dt : config.dt;
        const auto xi = normal_pair(config.seed, path_id, k);
        const State drift = system.drift(x);
        const State kick = system.diffusion(x) * State{xi[0], xi[1]};
        State next = x + h * drift + (config.epsilon * std::sqrt(h)) * kick;
        if (!is_finite(next)) {
            summary.non_finite = true;
            break;
        }
        if (next.c < floor) {
            next.c = floor;
            ++summary.clamp_count;
        }
        x = next;
        summary.steps = k + 1;
        summary.last = x;
        const double t = last_partial ? config.t_max : static_cast<double>(k + 1) * config.dt;
        if (!observer(k + 1, t, x)) break;
    }
    return summary;
}

SimTrajectory euler_maruyama(const StochasticSystem& system, const State& start, const SimConfig& config,
                             std::uint64_t path_id) {
    SimTrajectory out;
    out.path_id = path_id;
    out.trajectory.dt = config.dt;
    const std::size_t n = config.n_steps();
    const std::size_t stride = std::max<std::size_t>(1, config.record_every);
    out.trajectory.times.reserve(n / stride + 2);
    out.trajectory.states.reserve(n / stride + 2);
    std::size_t last_kept = 0;
    double last_t = 0.0;
    const PathSummary s = simulate_path(system, start, config, path_id, [&](std::size_t k, double t, const State& x) {
        if (k % stride == 0 || k == n) {
            out.trajectory.times.push_back(t);
            out.trajectory.states.push_back(x);
            last_kept = k;
        }
        last_t = t;
        return true;
    });
    if (s.steps > last_kept) {
        out.trajectory.times.push_back(last_t);
        out.trajectory.states.push_back(s.last);
    }
    out.clamp_count = s.clamp_count;
    out.non_finite = s.non_finite;
    return out;
}

TransitionGeometry::TransitionGeometry(State fixed_point_, LimitCycle stable_, LimitCycle unstable_,
                                       double relative_size)
    : fixed_point(fixed_point_),
      stable(std::move(stable_)),
      unstable(std::move(unstable_)),
      stable_curve_(stable.points),
      unstable_curve_(unstable.points) {
    if (stable.points.size() < 3 || unstable.points.size() < 3) {
        throw DegeneratePathError("transition geometry: cycles need at least 3 points");
    }
    if (!(relative_size > 0.0)) throw ConfigError("relative_size", "must be > 0");
    tube_width = relative_size * stable_curve_.bbox_diagonal();
    ball_radius = tube_width;
    stable_curve_ = ClosedCurve(stable.points, tube_width);
}

TransitionDetector::TransitionDetector(const TransitionGeometry& geometry, bool keep_segment)
    : geometry_(&geometry), keep_segment_(keep_segment) {}

bool TransitionDetector::observe(std::size_t index, double t, const State& x) {
    if (record_.transitioned) return true;
    const TransitionGeometry& g = *geometry_;

    const bool inside = g.unstable_curve().contains(x);
    if (!started_) {
        started_ = true;
        inside_unstable_ = inside;
        last_exit_time_ = t;
        last_exit_index_ = index;
    } else if (inside_unstable_ && !inside) {
        last_exit_time_ = t;
        last_exit_index_ = index;
    }
    inside_unstable_ = inside;

    if (keep_segment_) {
        if (distance(x, g.fixed_point) <= g.ball_radius) segment_.clear();
        segment_.push_back(x);
    }

    const bool in_tube = !inside && g.stable_curve().within(x, g.tube_width);
    if (in_tube && !in_tube_) {
        in_tube_ = true;
        tube_entry_time_ = t;
        tube_entry_index_ = index;
        exit_at_entry_time_ = last_exit_time_;
        exit_at_entry_index_ = last_exit_index_;
        segment_at_entry_ = segment_.size();
    } else if (!in_tube) {
        in_tube_ = false;
    }

    if (in_tube_ && t - tube_entry_time_ >= g.stable.period) {
        record_.transitioned = true;
        record_.exit_time = exit_at_entry_time_;
        record_.exit_index = exit_at_entry_index_;
        record_.arrival_time = tube_entry_time_;
        record_.arrival_index = tube_entry_index_;
        if (keep_segment_) segment_.resize(segment_at_entry_);
        return true;
    }
    return false;
}

TransitionRecord detect_transition(const Trajectory& trajectory, const TransitionGeometry& geometry) {
    TransitionDetector detector(geometry);
    for (std::size_t i = 0; i < trajectory.states.size(); ++i) {
        if (detector.observe(i, trajectory.times[i], trajectory.states[i])) break;
    }
    return detector.record();
}

TransitionRecord detect_transition(const Trajectory& trajectory, const State& fixed_point, const LimitCycle& cycle,
                                   const LimitCycle& unstable_cycle) {
    const TransitionGeometry geometry(fixed_point, cycle, unstable_cycle);
    return detect_transition(trajectory, geometry);
}

HistogramGrid HistogramGrid::around(std::span<const State> points, double margin, std::size_t n_c, std::size_t n_w) {
    if (points.empty()) throw DegeneratePathError("histogram grid: no points");
    State lo = points.front(), hi = points.front();
    for (const auto& p : points) {
        lo = {std::min(lo.c, p.c), std::min(lo.w, p.w)};
        hi = {std::max(hi.c, p.c), std::max(hi.w, p.w)};
    }
    const double dc = std::max(hi.c - lo.c, 1e-12), dw = std::max(hi.w - lo.w, 1e-12);
    HistogramGrid g;
    g.c_min = lo.c - margin * dc;
    g.c_max = hi.c + margin * dc;
    g.w_min = lo.w - margin * dw;
    g.w_max = hi.w + margin * dw;
    g.n_c = n_c;
    g.n_w = n_w;
    g.validate();
    return g;
}

std::size_t HistogramGrid::cell(const State& x) const {
    if (!(x.c >= c_min && x.c < c_max && x.w >= w_min && x.w < w_max)) return size();
    const auto i = std::min(n_c - 1, static_cast<std::size_t>((x.c - c_min) / bin_c()));
    const auto j = std::min(n_w - 1, static_cast<std::size_t>((x.w - w_min) / bin_w()));
    return j * n_c + i;
}

void HistogramGrid::validate() const {
    if (n_c < 1 || n_w < 1) throw ConfigError("grid", "needs at least one cell per axis");
    if (!(c_max > c_min) || !(w_max > w_min) || !std::isfinite(c_max - c_min) || !std::isfinite(w_max - w_min)) {
        throw ConfigError("grid", "bounds must be finite with max > min");
    }
}

BundleResult transition_bundle(const StochasticSystem& system, const State& start, const TransitionGeometry& geometry,
                               const SimConfig& config, const HistogramGrid& grid) {
    config.validate();
    grid.validate();

    struct PathOutcome {
        TransitionRecord record;
        std::vector<std::size_t> cells;
        std::size_t clamps = 0;
        bool non_finite = false;
    };
    std::vector<PathOutcome> outcomes(config.n_paths);
    parallel_for(config.n_paths, config.threads, [&](std::size_t id) {
        TransitionDetector detector(geometry, true);
        const PathSummary s = simulate_path(system, start, config, id, [&](std::size_t k, double t, const State& x) {
            return !detector.observe(k, t, x);
        });
        PathOutcome& out = outcomes[id];
        out.record = detector.record();
        out.clamps = s.clamp_count;
        out.non_finite = s.non_finite;
        if (out.record.transitioned) {
            for (const auto& x : detector.segment()) {
                const std::size_t cell = grid.cell(x);
                if (cell < grid.size()) out.cells.push_back(cell);
            }
            std::sort(out.cells.begin(), out.cells.end());
            out.cells.erase(std::unique(out.cells.begin(), out.cells.end()), out.cells.end());
        }
    });

    BundleResult result;
    result.grid = grid;
    result.counts.assign(grid.size(), 0);
    result.density.assign(grid.size(), 0.0);
    result.n_paths = config.n_paths;
    result.seed = config.seed;
    result.epsilon = config.epsilon;
    for (const auto& out : outcomes) {
        result.records.push_back(out.record);
        result.clamp_count += out.clamps;
        if (out.non_finite) ++result.non_finite_paths;
        if (out.record.transitioned) ++result.n_transitions;
        for (std::size_t cell : out.cells) ++result.counts[cell];
    }
    std::uint64_t total = 0;
    for (auto c : result.counts) total += c;
    if (total > 0) {
        for (std::size_t i = 0; i < result.counts.size(); ++i) {
            result.density[i] = static_cast<double>(result.counts[i]) / static_cast<double>(total);
        }
    }
    if (result.n_transitions < kMinBundleTransitions) {
        std::ostringstream msg;
        msg << "only " << result.n_transitions << " transitions in " << result.n_paths
            << " paths; bundle statistics are unreliable (want at least " << kMinBundleTransitions << ")";
        result.warnings.push_back(msg.str());
    }
    if (result.non_finite_paths > 0) {
        result.warnings.push_back(std::to_string(result.non_finite_paths) + " paths stopped on a non-finite state");
    }
    return result;
}

double concordance(const BundleResult& bundle, std::span<const State> nodes) {
    std::vector<std::uint64_t> occupied;
    for (auto c : bundle.counts) {
        if (c > 0) occupied.push_back(c);
    }
    if (occupied.empty()) return 0.0;
    std::sort(occupied.begin(), occupied.end());
    const std::size_t m = occupied.size();
    const double median = m % 2 == 1 ? static_cast<double>(occupied[m / 2])
                                     : 0.5 * static_cast<double>(occupied[m / 2 - 1] + occupied[m / 2]);
    std::size_t considered = 0, hits = 0;
    for (const auto& x : nodes) {
        const std::size_t cell = bundle.grid.cell(x);
        if (cell >= bundle.grid.size()) continue;
        ++considered;
        if (static_cast<double>(bundle.counts[cell]) > median) ++hits;
    }
    return considered > 0 ? static_cast<double>(hits) / static_cast<double>(considered) : 0.0;
}

}  // namespace carbongmam
