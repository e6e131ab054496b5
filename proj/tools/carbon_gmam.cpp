#include <chrono>
#include <cstdio>
#include <iostream>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "carbongmam/error.hpp"
#include "carbongmam/experiment.hpp"
#include "carbongmam/parallel.hpp"

using namespace carbongmam;
using json = nlohmann::json;

namespace {

enum ExitCode { kOk = 0, kFailure = 1, kConfig = 2, kNonConvergence = 3, kIo = 4 };

class Stopwatch {
public:
    double seconds() const {
        return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
    }

private:
    std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

struct Run {
    ExperimentConfig config;
    std::string command;
    json args = json::object();
    std::vector<std::pair<std::string, double>> timings;

    std::string echo() const {
        json doc = json::parse(config_to_json(config));
        doc["args"] = args;
        return doc.dump();
    }
};

void print_record(const SweepRecord& r) {
    std::printf("nu=%-8s %-8s action=%-12.6g length=%-10.4g arrival_c=%-9.4g converged=%d%s%s\n",
                format_double(r.nu).c_str(), to_string(r.status), r.action, r.path_length, r.arrival_c,
                r.converged ? 1 : 0, r.note.empty() ? "" : "  ", r.note.c_str());
}

bool any_unconverged(const std::vector<SweepRecord>& records) {
    for (const auto& r : records) {
        if (r.status == RecordStatus::failed) return true;
        if (r.status == RecordStatus::ok && !r.converged) return true;
    }
    return false;
}

int cmd_scan(Run& run, OutputWriter& out, double cx_min, double cx_max, std::size_t steps, double tol) {
    if (!(cx_max >= cx_min)) throw ConfigError("--cx-max", "must be >= --cx-min");
    if (steps < 1) throw ConfigError("--steps", "must be >= 1");
    std::vector<double> grid(steps);
    for (std::size_t i = 0; i < steps; ++i) {
        grid[i] = steps == 1 ? cx_min : cx_min + (cx_max - cx_min) * static_cast<double>(i) / (steps - 1);
    }
    const ModelParams params = experiment_params(run.config, run.config.nu_min);
    ScanOptions opts;
    opts.bisection_tol = tol;
    opts.threads = run.config.threads;
    Stopwatch sw;
    const ScanResult scan = scan_regimes(grid, params, opts);
    run.timings.emplace_back("scan", sw.seconds());

    const std::string csv = scan_csv(scan);
    const std::string footer = scan_json(scan);
    out.write("scan.csv", csv);
    out.write("scan.json", footer);
    std::cout << csv << json::parse(footer).dump() << "\n";
    return kOk;
}

int cmd_path(Run& run, OutputWriter& out, double nu) {
    Stopwatch sw;
    SweepResult result;
    result.outcomes.push_back(run_transition(run.config, nu, run.config.threads));
    run.timings.emplace_back("path", sw.seconds());
    emit_outputs(out, result, {});
    print_record(result.outcomes.front().record);
    return any_unconverged(result.records()) ? kNonConvergence : kOk;
}

int cmd_sweep(Run& run, OutputWriter& out) {
    Stopwatch sw;
    const SweepResult result = run_sweep(run.config);
    run.timings.emplace_back("sweep", sw.seconds());
    emit_outputs(out, result, {});
    for (const auto& r : result.records()) print_record(r);
    return any_unconverged(result.records()) ? kNonConvergence : kOk;
}

int cmd_simulate(Run& run, OutputWriter& out, double nu) {
    const ExperimentConfig& cfg = run.config;
    const ModelParams params = experiment_params(cfg, nu);
    const CarbonSystem sys(params);
    const State fp = find_fixed_point(sys, equilibrium_guess(params));
    std::optional<LimitCycle> stable;
    std::optional<LimitCycle> unstable;
    try {
        stable = find_limit_cycle(params, CycleStability::stable);
        unstable = find_limit_cycle(params, CycleStability::unstable);
    } catch (const NoCycleError& e) {
        throw ConfigError("nu", std::string("parameters are not bistable: ") + e.what());
    }
    const TransitionGeometry geometry(fp, *stable, *unstable, cfg.bundle.relative_size);
    const HistogramGrid grid =
        HistogramGrid::around(geometry.stable.points, cfg.bundle.margin, cfg.bundle.n_c, cfg.bundle.n_w);
    SimConfig sim = cfg.sim;
    sim.threads = cfg.threads;

    Stopwatch sw;
    const BundleResult bundle = transition_bundle(sys, fp, geometry, sim, grid);
    run.timings.emplace_back("bundle", sw.seconds());
    const SimTrajectory first = euler_maruyama(sys, fp, sim, 0);

    out.write("trajectory.csv", trajectory_csv(first.trajectory));
    out.write("bundle_histogram.csv", histogram_csv(bundle));
    out.write("bundle.json", histogram_json(bundle));
    out.write("cycles/stable.csv", cycle_csv(*stable));
    out.write("cycles/unstable.csv", cycle_csv(*unstable));

    std::printf("nu=%s epsilon=%s paths=%zu transitions=%zu clamps=%zu\n", format_double(nu).c_str(),
                format_double(bundle.epsilon).c_str(), bundle.n_paths, bundle.n_transitions, bundle.clamp_count);
    for (const auto& w : bundle.warnings) std::fprintf(stderr, "warning: %s\n", w.c_str());
    return kOk;
}

int cmd_compose(Run& run, OutputWriter& out, double nu) {
    Stopwatch sw;
    SweepResult result;
    result.outcomes.push_back(run_transition(run.config, nu, run.config.threads));
    run.timings.emplace_back("path", sw.seconds());
    const NuOutcome& o = result.outcomes.front();
    print_record(o.record);
    if (o.record.status != RecordStatus::ok) {
        emit_outputs(out, result, {});
        return o.record.status == RecordStatus::skipped ? kConfig : kNonConvergence;
    }
    if (!o.record.converged) std::fprintf(stderr, "warning: composing with a path that did not converge\n");
    Stopwatch sc;
    const ComposedSeries series = compose_transition_series(run.config, o);
    run.timings.emplace_back("compose", sc.seconds());
    emit_outputs(out, result, {series});
    return o.record.converged ? kOk : kNonConvergence;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Most probable transition paths and quasi-potentials for the upper-ocean carbonate model"};
    app.require_subcommand(1);

    std::string config_path;
    std::string output_dir;
    std::optional<std::uint64_t> seed;
    std::optional<unsigned> threads;
    app.add_option("--config", config_path, "Experiment configuration (JSON)");
    app.add_option("--output", output_dir, "Output directory");
    app.add_option("--seed", seed, "Random seed for simulations");
    app.add_option("--threads", threads, "Worker threads (0 = all cores)");

    double cx_min = 50.0;
    double cx_max = 68.0;
    std::size_t steps = 19;
    double bisection_tol = 0.01;
    auto* scan = app.add_subcommand("scan", "Classify regimes over c_x and locate the thresholds");
    scan->add_option("--cx-min", cx_min, "Smallest c_x")->capture_default_str();
    scan->add_option("--cx-max", cx_max, "Largest c_x")->capture_default_str();
    scan->add_option("--steps", steps, "Number of c_x grid points")->capture_default_str();
    scan->add_option("--bisection-tol", bisection_tol, "Threshold bracket width")->capture_default_str();

    double nu = 0.0;
    auto* path = app.add_subcommand("path", "Most probable path to the stable cycle at one nu");
    path->add_option("--nu", nu, "External CO2 input rate")->required();
    auto* sweep = app.add_subcommand("sweep", "Most probable paths over the configured nu grid");
    auto* simulate = app.add_subcommand("simulate", "Monte Carlo transition bundle at one nu");
    simulate->add_option("--nu", nu, "External CO2 input rate")->required();
    auto* compose = app.add_subcommand("compose", "Composed transition time series at one nu");
    compose->add_option("--nu", nu, "External CO2 input rate")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? kOk : kConfig;
    }

    Run run;
    try {
        run.config = config_path.empty() ? ExperimentConfig{} : load_config(config_path);
        if (!output_dir.empty()) run.config.output_dir = output_dir;
        if (seed) run.config.sim.seed = *seed;
        if (threads) run.config.threads = *threads;
        run.config.threads = resolve_threads(run.config.threads);
        run.config.validate();
    } catch (const ConfigError& e) {
        std::fprintf(stderr, "configuration error: %s\n", e.what());
        return kConfig;
    }

    std::optional<OutputWriter> out;
    try {
        out.emplace(run.config.output_dir);
    } catch (const IoError& e) {
        std::fprintf(stderr, "i/o error: %s\n", e.what());
        return kIo;
    }

    Stopwatch total;
    int rc = kOk;
    try {
        if (*scan) {
            run.command = "scan";
            run.args = {{"cx_min", cx_min}, {"cx_max", cx_max}, {"steps", steps}, {"bisection_tol", bisection_tol}};
            rc = cmd_scan(run, *out, cx_min, cx_max, steps, bisection_tol);
        } else if (*path) {
            run.command = "path";
            run.args = {{"nu", nu}};
            rc = cmd_path(run, *out, nu);
        } else if (*sweep) {
            run.command = "sweep";
            rc = cmd_sweep(run, *out);
        } else if (*simulate) {
            run.command = "simulate";
            run.args = {{"nu", nu}};
            rc = cmd_simulate(run, *out, nu);
        } else if (*compose) {
            run.command = "compose";
            run.args = {{"nu", nu}};
            rc = cmd_compose(run, *out, nu);
        }
        run.timings.emplace_back("total", total.seconds());
        out->finish(run.command, run.echo(), "complete");
        out->write_timings(run.timings);
    } catch (const ConfigError& e) {
        std::fprintf(stderr, "configuration error: %s\n", e.what());
        return kConfig;
    } catch (const IoError& e) {
        std::fprintf(stderr, "i/o error: %s\n", e.what());
        try {
            out->finish(run.command, run.echo(), "incomplete", e.what());
        } catch (const Error&) {
        }
        return kIo;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kFailure;
    }
    if (rc == kNonConvergence) std::fprintf(stderr, "warning: at least one solve did not converge\n");
    return rc;
}
