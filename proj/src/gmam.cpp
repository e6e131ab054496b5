#include "carbongmam/gmam.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <sstream>
#include <utility>

#include "carbongmam/error.hpp"
#include "carbongmam/geometry.hpp"
#include "carbongmam/parallel.hpp"

namespace carbongmam {

const char* to_string(Quadrature q) { return q == Quadrature::midpoint ? "midpoint" : "trapezoid"; }

void GmamConfig::validate() const {
    if (n_points < 3) throw ConfigError("gmam.n_points", "must be >= 3");
    if (max_outer_iters < 1) throw ConfigError("gmam.max_outer_iters", "must be >= 1");
    if (!(step_tau > 0.0) || !std::isfinite(step_tau)) throw ConfigError("gmam.step_tau", "must be > 0");
    if (!(min_step_tau > 0.0) || min_step_tau > step_tau) {
        throw ConfigError("gmam.min_step_tau", "must be in (0, step_tau]");
    }
    if (!(conv_tol > 0.0) || !std::isfinite(conv_tol)) throw ConfigError("gmam.conv_tol", "must be > 0");
    if (n_candidates < 1) throw ConfigError("gmam.n_candidates", "must be >= 1");
}

namespace {

double segment_term(const State& chord, const ActionTerms& t) {
    const double value = metric_norm(chord, t.inverse_metric) * metric_norm(t.drift, t.inverse_metric) -
                         inner(chord, t.inverse_metric, t.drift);
    // Nonnegative by Cauchy-Schwarz; clip rounding.
    return std::max(0.0, value);
}

/// Thomas algorithm for -r_i x_{i-1} + (1 + 2 r_i) x_i - r_i x_{i+1} = d_i.
void solve_tridiagonal(const std::vector<double>& r, std::vector<double>& d, std::vector<double>& scratch) {
    const std::size_t n = d.size();
    scratch.resize(n);
    double denom = 1.0 + 2.0 * r[0];
    if (!(denom != 0.0) || !std::isfinite(denom)) throw LinearSolveError("relax_step: singular tridiagonal system");
    scratch[0] = -r[0] / denom;
    d[0] /= denom;
    for (std::size_t i = 1; i < n; ++i) {
        denom = 1.0 + 2.0 * r[i] + r[i] * scratch[i - 1];
        if (!(denom != 0.0) || !std::isfinite(denom)) {
            throw LinearSolveError("relax_step: singular tridiagonal system at node " + std::to_string(i + 1));
        }
        scratch[i] = -r[i] / denom;
        d[i] = (d[i] + r[i] * d[i - 1]) / denom;
    }
    for (std::size_t i = n - 1; i-- > 0;) d[i] -= scratch[i] * d[i + 1];
}

// Relative action rise tolerated per accepted step. The relaxation's fixed
// point sits O(1/N^2) above the discrete minimizer, so strict descent would
// stall just short of it.
constexpr double kDescentSlack = 1e-8;

double sup_displacement(std::span<const State> a, std::span<const State> b) {
    double m = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, max_norm(a[i] - b[i]));
    return m;
}

std::vector<State> straight_line(const State& start, const State& end, std::size_t n) {
    std::vector<State> pts(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double s = static_cast<double>(i) / static_cast<double>(n - 1);
        pts[i] = start + s * (end - start);
    }
    pts.front() = start;
    pts.back() = end;
    return pts;
}

}  // namespace

double geometric_action(std::span<const State> points, const StochasticSystem& system, Quadrature quadrature) {
    if (points.size() < 2) return 0.0;
    double total = 0.0;
    if (quadrature == Quadrature::midpoint) {
        for (std::size_t i = 0; i + 1 < points.size(); ++i) {
            const State chord = points[i + 1] - points[i];
            total += segment_term(chord, system.action_terms(0.5 * (points[i] + points[i + 1])));
        }
        return total;
    }
    std::vector<ActionTerms> terms;
    terms.reserve(points.size());
    for (const auto& p : points) terms.push_back(system.action_terms(p));
    for (std::size_t i = 0; i + 1 < points.size(); ++i) {
        const State chord = points[i + 1] - points[i];
        total += 0.5 * (segment_term(chord, terms[i]) + segment_term(chord, terms[i + 1]));
    }
    return total;
}

double metric_length(std::span<const State> points, const StochasticSystem& system) {
    double total = 0.0;
    for (std::size_t i = 0; i + 1 < points.size(); ++i) {
        const State chord = points[i + 1] - points[i];
        total += metric_norm(chord, system.action_terms(0.5 * (points[i] + points[i + 1])).inverse_metric);
    }
    return total;
}

std::vector<State> resample(std::span<const State> points, std::size_t n) {
    if (points.size() < 2 || n < 2) throw DegeneratePathError("resample: need at least two points");
    const std::vector<double> cum = cumulative_length(points);
    const double total = cum.back();
    if (!(total >= 1e-12)) throw DegeneratePathError("resample: total path length below 1e-12");
    std::vector<State> out(n);
    out.front() = points.front();
    out.back() = points.back();
    std::size_t k = 0;
    for (std::size_t i = 1; i + 1 < n; ++i) {
        const double target = total * static_cast<double>(i) / static_cast<double>(n - 1);
        while (k + 2 < cum.size() && cum[k + 1] < target) ++k;
        const double seg = cum[k + 1] - cum[k];
        const double u = seg > 0.0 ? std::clamp((target - cum[k]) / seg, 0.0, 1.0) : 0.0;
        out[i] = points[k] + u * (points[k + 1] - points[k]);
    }
    return out;
}

DiscretePath reparameterize(const DiscretePath& path) {
    if (path.points.size() < 3) throw DegeneratePathError("reparameterize: need at least 3 points");
    return {resample(path.points, path.points.size()), std::nullopt};
}

DiscretePath relax_step(const DiscretePath& path, const GmamConfig& config, const StochasticSystem& system) {
    const std::size_t n = path.points.size();
    if (n < 3) throw DegeneratePathError("relax_step: need at least 3 points");
    const double da = 1.0 / static_cast<double>(n - 1);
    const double tau = config.step_tau;

    std::vector<State> phi = path.points;
    for (std::size_t i = 1; i + 1 < n; ++i) {
        if (norm(phi[i + 1] - phi[i - 1]) / (2.0 * da) < 1e-14) {
            phi = resample(phi, n);
            break;
        }
    }

    const std::size_t m = n - 2;
    std::vector<double> r(m), rhs_c(m), rhs_w(m), scratch;
    for (std::size_t i = 1; i + 1 < n; ++i) {
        const LocalModel lm = system.local_model(phi[i]);
        const State dphi = (phi[i + 1] - phi[i - 1]) / (2.0 * da);
        const double nb = metric_norm(lm.drift, lm.inverse_metric);
        const double np = metric_norm(dphi, lm.inverse_metric);
        const double lambda = np > 0.0 ? nb / np : 0.0;

        // Conjugate momentum of the minimizing Hamiltonian flow.
        const State theta = lm.inverse_metric * (lambda * dphi - lm.drift);
        const Mat2 da_dphi = dphi.c * lm.covariance_gradient[0] + dphi.w * lm.covariance_gradient[1];
        const State h_theta_x = lm.jacobian * dphi + da_dphi * theta;
        const State h_x = lm.jacobian.transposed() * theta +
                          0.5 * State{inner(theta, lm.covariance_gradient[0], theta),
                                      inner(theta, lm.covariance_gradient[1], theta)};
        State explicit_part = -lambda * h_theta_x + lm.covariance * h_x;
        // Tangential motion is undone by reparameterization; keep only the
        // normal part so interpolation does not bias the fixed point.
        const double tn = norm(dphi);
        if (tn > 0.0) {
            const State t_hat = dphi / tn;
            explicit_part -= dot(explicit_part, t_hat) * t_hat;
        }

        const std::size_t k = i - 1;
        r[k] = tau * lambda * lambda / (da * da);
        const State rhs = phi[i] + tau * explicit_part;
        rhs_c[k] = rhs.c;
        rhs_w[k] = rhs.w;
    }
    rhs_c.front() += r.front() * phi.front().c;
    rhs_w.front() += r.front() * phi.front().w;
    rhs_c.back() += r.back() * phi.back().c;
    rhs_w.back() += r.back() * phi.back().w;

    solve_tridiagonal(r, rhs_c, scratch);
    solve_tridiagonal(r, rhs_w, scratch);

    std::vector<State> updated(n);
    updated.front() = path.points.front();
    updated.back() = path.points.back();
    for (std::size_t k = 0; k < m; ++k) {
        updated[k + 1] = {rhs_c[k], rhs_w[k]};
        if (!is_finite(updated[k + 1])) {
            throw LinearSolveError("relax_step: non-finite node " + std::to_string(k + 1) + " after update");
        }
    }
    return reparameterize({std::move(updated), std::nullopt});
}

TransitionResult solve(const State& start, const State& end, const GmamConfig& config,
                       const StochasticSystem& system, const DiscretePath* warm_start) {
    config.validate();
    system.require_admissible(start);
    system.require_admissible(end);
    if (!(distance(start, end) > 0.0)) throw DegeneratePathError("solve: start and end coincide");

    const std::size_t n = config.n_points;
    DiscretePath path;
    if (warm_start != nullptr && warm_start->points.size() >= 2) {
        const auto& src = warm_start->points;
        const std::vector<double> cum = cumulative_length(src);
        const double total = cum.back();
        std::vector<State> shifted(src.size());
        for (std::size_t i = 0; i < src.size(); ++i) {
            const double s = total > 0.0 ? cum[i] / total : 0.0;
            shifted[i] = src[i] + (1.0 - s) * (start - src.front()) + s * (end - src.back());
        }
        path.points = resample(shifted, n);
    } else {
        path.points = straight_line(start, end, n);
    }
    path.points.front() = start;
    path.points.back() = end;

    TransitionResult result;
    double action = geometric_action(path.points, system, config.quadrature);
    result.action_history.push_back(action);

    GmamConfig step_config = config;
    double step = config.step_tau;
    std::size_t streak = 0;
    double displacement = std::numeric_limits<double>::infinity();
    std::size_t it = 0;
    for (; it < config.max_outer_iters; ++it) {
        step_config.step_tau = step;
        DiscretePath trial = relax_step(path, step_config, system);
        const double trial_action = geometric_action(trial.points, system, config.quadrature);
        if (trial_action <= action + kDescentSlack * action + 1e-14) {
            // Displacement per nominal step, so a shrunken step cannot fake convergence.
            displacement = sup_displacement(trial.points, path.points) * (config.step_tau / step);
            path = std::move(trial);
            action = trial_action;
            result.action_history.push_back(action);
            if (displacement < config.conv_tol) {
                ++it;
                result.converged = true;
                break;
            }
            if (++streak >= 10 && step < config.step_tau) {
                step = std::min(config.step_tau, 2.0 * step);
                streak = 0;
            }
        } else {
            streak = 0;
            if (step <= config.min_step_tau) {
                ++it;
                break;
            }
            step = std::max(config.min_step_tau, 0.5 * step);
        }
    }

    path.action = action;
    result.path = std::move(path);
    result.action = action;
    result.iterations = it;
    result.final_displacement = displacement;
    return result;
}

CycleTransition quasipotential_to_cycle(const State& start, const LimitCycle& cycle, const GmamConfig& config,
                                        const StochasticSystem& system, const DiscretePath* warm_start) {
    config.validate();
    if (cycle.points.size() < 3) throw DegeneratePathError("quasipotential_to_cycle: empty cycle");
    const std::vector<double> cum = cumulative_length(cycle.points);
    const std::size_t n = config.n_candidates;
    const double scale = 1.0 + norm(start);

    GmamConfig inner = config;
    inner.threads = 1;

    auto run = [&](std::size_t half_index) {
        CandidateOutcome out;
        out.index = half_index;
        const double frac = static_cast<double>(half_index) / static_cast<double>(2 * n);
        out.endpoint = point_at_fraction(cycle.points, cum, frac);
        TransitionResult r;
        if (distance(out.endpoint, start) <= 1e-12 * scale) {
            out.error = "candidate coincides with the start state";
            return std::make_pair(out, r);
        }
        try {
            r = solve(start, out.endpoint, inner, system, warm_start);
            r.endpoint_index = half_index;
            out.action = r.action;
            out.converged = r.converged;
            out.iterations = r.iterations;
        } catch (const Error& e) {
            out.error = e.what();
        }
        return std::make_pair(out, r);
    };

    std::vector<std::pair<CandidateOutcome, TransitionResult>> coarse(n);
    parallel_for(n, config.threads, [&](std::size_t k) { coarse[k] = run(2 * k); });

    CycleTransition result;
    std::optional<std::size_t> best;
    for (std::size_t k = 0; k < n; ++k) {
        result.candidates.push_back(coarse[k].first);
        if (coarse[k].first.action && (!best || *coarse[k].first.action < *coarse[*best].first.action)) best = k;
    }
    if (!best) {
        std::ostringstream msg;
        msg << "quasipotential_to_cycle: all " << n << " candidate solves failed";
        for (const auto& c : result.candidates) msg << "\n  candidate " << c.index << ": " << c.error;
        throw ConvergenceError(msg.str());
    }
    result.best = std::move(coarse[*best].second);

    if (config.refine_candidates && n > 1) {
        const std::size_t centre = 2 * *best;
        const std::array<std::size_t, 2> neighbours{(centre + 2 * n - 1) % (2 * n), (centre + 1) % (2 * n)};
        std::array<std::pair<CandidateOutcome, TransitionResult>, 2> refined;
        parallel_for(2, config.threads, [&](std::size_t j) { refined[j] = run(neighbours[j]); });
        for (auto& [outcome, res] : refined) {
            result.candidates.push_back(outcome);
            if (outcome.action && *outcome.action < result.best.action) result.best = std::move(res);
        }
    }
    return result;
}

}  // namespace carbongmam
