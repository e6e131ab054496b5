#include "carbongmam/dynamics.hpp"

#include <algorithm>
#include <cmath>
#include <optional>
#include <sstream>

#include "carbongmam/error.hpp"
#include "carbongmam/geometry.hpp"
#include "carbongmam/parallel.hpp"

namespace carbongmam {

const char* to_string(CycleStability s) { return s == CycleStability::stable ? "stable" : "unstable"; }

const char* to_string(Regime r) {
    switch (r) {
        case Regime::single_stable_point: return "single-stable-point";
        case Regime::bistable: return "bistable";
        case Regime::cycle_only: return "cycle-only";
    }
    return "unknown";
}

namespace {

void require_in_domain(const StochasticSystem& system, const State& x, double t) {
    if (!is_finite(x) || x.c < system.first_coordinate_floor()) {
        std::ostringstream msg;
        msg << "integration left the admissible domain at t = " << t << " (state " << x.c << ", " << x.w << ")";
        throw DomainError(msg.str());
    }
}

State solve2(const Mat2& m, const State& rhs) {
    const double det = m.det();
    if (!(std::fabs(det) > 0.0) || !std::isfinite(det)) throw ConvergenceError("Newton: singular Jacobian");
    return {(m.a22 * rhs.c - m.a12 * rhs.w) / det, (-m.a21 * rhs.c + m.a11 * rhs.w) / det};
}

/// Cubic Hermite interpolation on one step of length h.
State hermite(const State& x0, const State& d0, const State& x1, const State& d1, double h, double u) {
    const double u2 = u * u;
    const double u3 = u2 * u;
    const double h00 = 2.0 * u3 - 3.0 * u2 + 1.0;
    const double h10 = u3 - 2.0 * u2 + u;
    const double h01 = -2.0 * u3 + 3.0 * u2;
    const double h11 = u3 - u2;
    return h00 * x0 + (h10 * h) * d0 + h01 * x1 + (h11 * h) * d1;
}

/// Dense samples of one revolution, resampled equidistantly in arc length.
/// `steps[k]` is the time step from samples[k] to samples[k + 1].
std::vector<State> resample_orbit(const StochasticSystem& system, const std::vector<State>& samples,
                                  const std::vector<double>& steps, double sign, std::size_t n_out) {
    std::vector<State> derivs;
    derivs.reserve(samples.size());
    for (const auto& s : samples) derivs.push_back(sign * system.drift(s));
    const std::vector<double> cum = cumulative_length(samples);
    const double total = cum.back();

    std::vector<State> out;
    out.reserve(n_out + 1);
    std::size_t k = 0;
    for (std::size_t i = 0; i < n_out; ++i) {
        const double target = total * static_cast<double>(i) / static_cast<double>(n_out);
        while (k + 2 < cum.size() && cum[k + 1] < target) ++k;
        const double seg = cum[k + 1] - cum[k];
        const double u = seg > 0.0 ? std::clamp((target - cum[k]) / seg, 0.0, 1.0) : 0.0;
        out.push_back(hermite(samples[k], derivs[k], samples[k + 1], derivs[k + 1], steps[k], u));
    }
    out.push_back(out.front());
    return out;
}

struct SectionCrossing {
    State point;
    double tau = 0.0;  // time from the step's start point
};

/// Root of flow_step(x, tau).c == c_section for tau in (0, h], Illinois method.
SectionCrossing refine_crossing(const StochasticSystem& system, const State& x, double h, double c_section,
                                Integrator method, double sign) {
    double a = 0.0, b = h;
    double ga = x.c - c_section;
    State xb = flow_step(system, x, b, method, sign);
    double gb = xb.c - c_section;
    State best = xb;
    double best_tau = b;
    int side = 0;
    const double tol = 1e-13 * std::max(1.0, std::fabs(c_section));
    for (int it = 0; it < 60 && std::fabs(gb) > tol; ++it) {
        const double m = (a * gb - b * ga) / (gb - ga);
        const State xm = flow_step(system, x, m, method, sign);
        const double gm = xm.c - c_section;
        best = xm;
        best_tau = m;
        if (std::fabs(gm) <= tol) break;
        if ((gm > 0.0) == (gb > 0.0)) {
            b = m;
            gb = gm;
            if (side == -1) ga *= 0.5;
            side = -1;
        } else {
            a = m;
            ga = gm;
            if (side == 1) gb *= 0.5;
            side = 1;
        }
    }
    return {best, best_tau};
}

}  // namespace

State flow_step(const StochasticSystem& system, const State& x, double h, Integrator method, double sign) {
    if (method == Integrator::euler) return x + (h * sign) * system.drift(x);
    const double hs = h * sign;
    const State k1 = system.drift(x);
    const State k2 = system.drift(x + (0.5 * hs) * k1);
    const State k3 = system.drift(x + (0.5 * hs) * k2);
    const State k4 = system.drift(x + hs * k3);
    return x + (hs / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
}

Trajectory integrate(const StochasticSystem& system, const State& start, double t_end, double dt,
                     Direction direction, Integrator method) {
    if (!(dt > 0.0) || !(t_end > 0.0)) throw DomainError("integrate: requires dt > 0 and t_end > 0");
    require_in_domain(system, start, 0.0);
    const double sign = direction == Direction::forward ? 1.0 : -1.0;
    const auto n_full = static_cast<std::size_t>(std::floor(t_end / dt * (1.0 + 1e-12)));
    const double remainder = t_end - static_cast<double>(n_full) * dt;
    const bool partial = remainder > 1e-12 * dt;

    Trajectory traj;
    traj.dt = dt;
    traj.times.reserve(n_full + 2);
    traj.states.reserve(n_full + 2);
    traj.times.push_back(0.0);
    traj.states.push_back(start);
    State x = start;
    for (std::size_t k = 1; k <= n_full; ++k) {
        x = flow_step(system, x, dt, method, sign);
        const double t = static_cast<double>(k) * dt;
        require_in_domain(system, x, t);
        traj.times.push_back(t);
        traj.states.push_back(x);
    }
    if (partial) {
        x = flow_step(system, x, remainder, method, sign);
        require_in_domain(system, x, t_end);
        traj.times.push_back(t_end);
        traj.states.push_back(x);
    }
    return traj;
}

State flow_map(const StochasticSystem& system, const State& start, double duration, double dt, Direction direction,
               Integrator method) {
    return integrate(system, start, duration, dt, direction, method).states.back();
}

State find_fixed_point(const StochasticSystem& system, const State& guess, const DynamicsOptions& options) {
    system.require_admissible(guess);
    State x = guess;
    State r = system.drift(x);
    for (std::size_t it = 0; it < options.max_newton_iters; ++it) {
        if (max_norm(r) < options.newton_tol) return x;
        const State delta = solve2(system.jacobian(x), r);
        double lambda = 1.0;
        bool accepted = false;
        for (int halving = 0; halving < 40; ++halving, lambda *= 0.5) {
            const State trial = x - lambda * delta;
            if (!is_finite(trial) || trial.c < system.first_coordinate_floor()) continue;
            const State rt = system.drift(trial);
            if (is_finite(rt) && (max_norm(rt) < max_norm(r) || halving == 39)) {
                x = trial;
                r = rt;
                accepted = true;
                break;
            }
        }
        if (!accepted) throw ConvergenceError("Newton: line search left the admissible domain");
    }
    if (max_norm(r) < options.newton_tol) return x;
    std::ostringstream msg;
    msg << "Newton: no convergence after " << options.max_newton_iters << " iterations (residual " << max_norm(r)
        << ")";
    throw ConvergenceError(msg.str());
}

bool is_stable(const Mat2& jacobian) { return jacobian.trace() < 0.0 && jacobian.det() > 0.0; }

LimitCycle find_limit_cycle(const StochasticSystem& system, const State& fixed_point, const State& seed,
                            CycleStability stability, const DynamicsOptions& options) {
    const double sign = stability == CycleStability::stable ? 1.0 : -1.0;
    const double dt = options.dt;
    const double c_section = fixed_point.c;
    const double scale = 1.0 + norm(fixed_point);
    const double fp_tol = 1e-4 * scale;
    const double escape = 1e3 * scale;

    State x = seed;
    double t = 0.0;
    double last_cross_t = 0.0;
    int direction = 0;
    std::optional<State> last_return;
    std::optional<double> last_return_t;

    auto require_ok = [&](const State& s) {
        if (!is_finite(s) || s.c < system.first_coordinate_floor() || distance(s, fixed_point) > escape) {
            throw NoCycleError(std::string("no ") + to_string(stability) + " cycle: trajectory left the domain");
        }
    };
    require_ok(x);

    for (std::size_t step = 0; step < options.max_steps; ++step) {
        const State next = flow_step(system, x, dt, options.integrator, sign);
        require_ok(next);
        const double g0 = x.c - c_section;
        const double g1 = next.c - c_section;
        const bool crosses = (g0 < 0.0 && g1 >= 0.0) || (g0 > 0.0 && g1 <= 0.0);
        if (crosses) {
            const SectionCrossing cr = refine_crossing(system, x, dt, c_section, options.integrator, sign);
            const int dir = g1 > g0 ? 1 : -1;
            if (cr.point.w > fixed_point.w) {
                if (direction == 0) direction = dir;
                if (dir == direction) {
                    const double tc = t + cr.tau;
                    last_cross_t = tc;
                    if (last_return) {
                        const double d = distance(cr.point, *last_return);
                        if (d < options.cycle_tol) {
                            if (distance(cr.point, fixed_point) < fp_tol) {
                                throw NoCycleError(std::string("no ") + to_string(stability) +
                                                   " cycle: return map converged to the fixed point");
                            }
                            // One revolution from the converged section point.
                            const double period_estimate = tc - *last_return_t;
                            std::vector<State> samples{cr.point};
                            std::vector<double> steps;
                            State y = cr.point;
                            double elapsed = 0.0;
                            for (std::size_t k = 0; k < options.max_steps; ++k) {
                                const State z = flow_step(system, y, dt, options.integrator, sign);
                                const double h0 = y.c - c_section;
                                const double h1 = z.c - c_section;
                                const bool x_cross = (h0 < 0.0 && h1 >= 0.0) || (h0 > 0.0 && h1 <= 0.0);
                                const int zdir = h1 > h0 ? 1 : -1;
                                if (x_cross && zdir == direction && elapsed > 0.5 * period_estimate) {
                                    const SectionCrossing end =
                                        refine_crossing(system, y, dt, c_section, options.integrator, sign);
                                    if (end.point.w > fixed_point.w) {
                                        steps.push_back(end.tau);
                                        samples.push_back(end.point);
                                        elapsed += end.tau;
                                        break;
                                    }
                                }
                                steps.push_back(dt);
                                samples.push_back(z);
                                elapsed += dt;
                                y = z;
                            }
                            const double closure = distance(samples.front(), samples.back());
                            if (closure > options.closure_tol) {
                                std::ostringstream msg;
                                msg << "cycle closure " << closure << " exceeds tolerance " << options.closure_tol;
                                throw ConvergenceError(msg.str());
                            }
                            LimitCycle cycle;
                            cycle.period = elapsed;
                            cycle.stability = stability;
                            cycle.points = resample_orbit(system, samples, steps, sign,
                                                          std::max<std::size_t>(256, options.cycle_points));
                            if (stability == CycleStability::unstable) {
                                std::reverse(cycle.points.begin(), cycle.points.end());
                            }
                            return cycle;
                        }
                    }
                    last_return = cr.point;
                    last_return_t = tc;
                }
            }
        }
        x = next;
        t += dt;
        if (t - last_cross_t > options.max_time_between_crossings) {
            throw NoCycleError(std::string("no ") + to_string(stability) +
                               " cycle: trajectory stopped crossing the Poincare section");
        }
    }
    throw ConvergenceError("Poincare return map did not converge within max_steps");
}

LimitCycle find_limit_cycle(const ModelParams& params, CycleStability stability, const DynamicsOptions& options) {
    const CarbonSystem system(params);
    const State fp = find_fixed_point(system, equilibrium_guess(params), options);
    const State seed = stability == CycleStability::stable ? State{fp.c, fp.w + 8.0 * params.mu}
                                                           : State{fp.c, fp.w + 1e-3 * params.mu};
    return find_limit_cycle(system, fp, seed, stability, options);
}

RegimeReport classify_regime(const ModelParams& params, const DynamicsOptions& options) {
    RegimeReport report;
    report.c_x = params.c_x;
    try {
        const CarbonSystem system(params);
        report.fixed_point = find_fixed_point(system, equilibrium_guess(params), options);
        report.fixed_point_stable = is_stable(system.jacobian(report.fixed_point));
        try {
            const State seed{report.fixed_point.c, report.fixed_point.w + 8.0 * params.mu};
            (void)find_limit_cycle(system, report.fixed_point, seed, CycleStability::stable, options);
            report.has_stable_cycle = true;
        } catch (const NoCycleError&) {
            report.has_stable_cycle = false;
        }
        if (!report.fixed_point_stable) {
            report.regime = Regime::cycle_only;
            if (!report.has_stable_cycle) report.error = "unstable fixed point without a stable cycle";
        } else {
            report.regime = report.has_stable_cycle ? Regime::bistable : Regime::single_stable_point;
        }
    } catch (const Error& e) {
        report.error = e.what();
    }
    return report;
}

ScanResult scan_regimes(std::span<const double> c_x_values, const ModelParams& params, const ScanOptions& options) {
    for (const double cx : c_x_values) {
        if (!(cx >= options.window_min && cx <= options.window_max)) {
            std::ostringstream msg;
            msg << "c_x = " << cx << " outside the scan window [" << options.window_min << ", "
                << options.window_max << "]";
            throw ConfigError("c_x", msg.str());
        }
    }
    const auto classify_at = [&](double cx) {
        ModelParams p = params;
        p.c_x = cx;
        return classify_regime(p, options.dynamics);
    };

    ScanResult result;
    result.reports.resize(c_x_values.size());
    parallel_for(c_x_values.size(), options.threads,
                 [&](std::size_t i) { result.reports[i] = classify_at(c_x_values[i]); });

    std::vector<std::size_t> order(c_x_values.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return c_x_values[a] < c_x_values[b]; });

    std::vector<std::pair<std::size_t, std::size_t>> brackets;
    for (std::size_t k = 1; k < order.size(); ++k) {
        const auto& lo = result.reports[order[k - 1]];
        const auto& hi = result.reports[order[k]];
        if (lo.error.empty() && hi.error.empty() && lo.regime != hi.regime) brackets.emplace_back(order[k - 1], order[k]);
    }
    result.thresholds.resize(brackets.size());
    parallel_for(brackets.size(), options.threads, [&](std::size_t i) {
        double a = c_x_values[brackets[i].first];
        double b = c_x_values[brackets[i].second];
        const Regime ra = result.reports[brackets[i].first].regime;
        const Regime rb = result.reports[brackets[i].second].regime;
        while (b - a > options.bisection_tol) {
            const double m = 0.5 * (a + b);
            const RegimeReport rm = classify_at(m);
            if (!rm.error.empty()) break;
            if (rm.regime == ra) {
                a = m;
            } else {
                b = m;
            }
        }
        result.thresholds[i] = {0.5 * (a + b), a, b, ra, rb};
    });
    return result;
}

}  // namespace carbongmam
