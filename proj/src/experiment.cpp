#include "carbongmam/experiment.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <set>
#include <sstream>
#include <utility>

#include <json.hpp>
#include <openssl/evp.h>

#include "carbongmam/error.hpp"
#include "carbongmam/geometry.hpp"
#include "carbongmam/parallel.hpp"

#ifndef CARBONGMAM_VERSION
#define CARBONGMAM_VERSION "unknown"
#endif

namespace carbongmam {

namespace {

using json = nlohmann::json;

/// Reads fields of one JSON object; anything left unread is an unknown key.
class ObjectReader {
public:
    ObjectReader(const json& obj, std::string prefix) : obj_(obj), prefix_(std::move(prefix)) {
        if (!obj_.is_object()) {
            throw ConfigError(prefix_.empty() ? "" : prefix_.substr(0, prefix_.size() - 1), "must be a JSON object");
        }
    }

    void number(const char* key, double& out) {
        if (const json* v = find(key)) {
            if (!v->is_number()) throw ConfigError(name(key), "must be a number");
            out = v->get<double>();
            if (!std::isfinite(out)) throw ConfigError(name(key), "must be finite");
        }
    }

    template <class Int>
    void integer(const char* key, Int& out) {
        if (const json* v = find(key)) {
            if (!v->is_number_unsigned()) throw ConfigError(name(key), "must be a non-negative integer");
            out = static_cast<Int>(v->get<std::uint64_t>());
        }
    }

    void boolean(const char* key, bool& out) {
        if (const json* v = find(key)) {
            if (!v->is_boolean()) throw ConfigError(name(key), "must be true or false");
            out = v->get<bool>();
        }
    }

    void string(const char* key, std::string& out) {
        if (const json* v = find(key)) {
            if (!v->is_string()) throw ConfigError(name(key), "must be a string");
            out = v->get<std::string>();
        }
    }

    /// Sub-object reader; an absent key reads as an empty object.
    ObjectReader child(const char* key) {
        static const json empty = json::object();
        const json* v = find(key);
        return ObjectReader(v ? *v : empty, name(key) + ".");
    }

    void finish() const {
        for (const auto& item : obj_.items()) {
            if (!seen_.count(item.key())) throw ConfigError(name(item.key()), "unknown key");
        }
    }

private:
    const json* find(const std::string& key) {
        seen_.insert(key);
        const auto it = obj_.find(key);
        return it == obj_.end() ? nullptr : &*it;
    }
    std::string name(const std::string& key) const { return prefix_ + key; }

    const json& obj_;
    std::string prefix_;
    std::set<std::string> seen_;
};

std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("", "cannot open configuration file '" + path.string() + "'");
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

std::string csv_field(const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string out = "\"";
    for (char ch : s) {
        if (ch == '"') out += '"';
        out += ch;
    }
    return out + "\"";
}

json state_json(const State& s) { return json{{"c", s.c}, {"w", s.w}}; }

std::string file_tag(std::size_t index, double nu) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%03zu_nu_%.6g", index, nu);
    return buf;
}

}  // namespace

const char* to_string(LengthMetric m) { return m == LengthMetric::euclidean ? "euclidean" : "metric"; }

const char* to_string(RecordStatus s) {
    switch (s) {
        case RecordStatus::ok: return "ok";
        case RecordStatus::skipped: return "skipped";
        case RecordStatus::failed: return "failed";
    }
    return "?";
}

SimConfig ExperimentConfig::default_sim() {
    SimConfig s;
    s.t_max = 50.0;
    s.n_paths = 100;
    return s;
}

void ExperimentConfig::validate() const {
    if (!(c_x > 0.0)) throw ConfigError("c_x", "must be > 0");
    if (!(nu_min >= 0.0)) throw ConfigError("nu_min", "must be >= 0");
    if (!(nu_max >= nu_min)) throw ConfigError("nu_max", "must be >= nu_min");
    if (!(nu_step > 0.0)) throw ConfigError("nu_step", "must be > 0");
    if ((nu_max - nu_min) / nu_step > 1e6) throw ConfigError("nu_step", "grid would exceed 1e6 points");
    gmam.validate();
    sim.validate();
    if (!(compose.pre_duration > 0.0)) throw ConfigError("compose.pre_duration", "must be > 0");
    if (!(compose.post_duration > 0.0)) throw ConfigError("compose.post_duration", "must be > 0");
    if (!(compose.display_duration > 0.0)) throw ConfigError("compose.display_duration", "must be > 0");
    if (compose.record_every < 1) throw ConfigError("compose.record_every", "must be >= 1");
    if (compose.max_attempts < 1) throw ConfigError("compose.max_attempts", "must be >= 1");
    if (!(bundle.relative_size > 0.0 && bundle.relative_size < 0.5)) {
        throw ConfigError("bundle.relative_size", "must be in (0, 0.5)");
    }
    if (!(bundle.margin >= 0.0)) throw ConfigError("bundle.margin", "must be >= 0");
    if (bundle.n_c < 1) throw ConfigError("bundle.n_c", "must be >= 1");
    if (bundle.n_w < 1) throw ConfigError("bundle.n_w", "must be >= 1");
}

std::vector<double> ExperimentConfig::nu_grid() const {
    const auto n = static_cast<std::size_t>(std::floor((nu_max - nu_min) / nu_step + 1e-9)) + 1;
    std::vector<double> grid(n);
    for (std::size_t i = 0; i < n; ++i) {
        // Round off the accumulated representation error so 19 * 0.01 prints as 0.19.
        grid[i] = std::round((nu_min + static_cast<double>(i) * nu_step) * 1e12) / 1e12;
    }
    return grid;
}

ExperimentConfig parse_config(std::string_view json_text) {
    ExperimentConfig cfg;
    if (json_text.find_first_not_of(" \t\r\n") == std::string_view::npos) return cfg;
    json doc;
    try {
        doc = json::parse(json_text);
    } catch (const json::parse_error& e) {
        throw ConfigError("", std::string("configuration is not valid JSON: ") + e.what());
    }
    ObjectReader top(doc, "");
    std::string s = cfg.params_file.string();
    top.string("params_file", s);
    cfg.params_file = s;
    top.number("c_x", cfg.c_x);
    top.number("nu_min", cfg.nu_min);
    top.number("nu_max", cfg.nu_max);
    top.number("nu_step", cfg.nu_step);
    top.boolean("warm_start", cfg.warm_start);
    std::string metric = to_string(cfg.length_metric);
    top.string("length_metric", metric);
    if (metric == "euclidean") {
        cfg.length_metric = LengthMetric::euclidean;
    } else if (metric == "metric") {
        cfg.length_metric = LengthMetric::metric;
    } else {
        throw ConfigError("length_metric", "must be \"euclidean\" or \"metric\"");
    }
    s = cfg.output_dir.string();
    top.string("output_dir", s);
    cfg.output_dir = s;
    top.integer("threads", cfg.threads);

    ObjectReader g = top.child("gmam");
    g.integer("n_points", cfg.gmam.n_points);
    g.integer("max_outer_iters", cfg.gmam.max_outer_iters);
    g.number("step_tau", cfg.gmam.step_tau);
    g.number("min_step_tau", cfg.gmam.min_step_tau);
    g.number("conv_tol", cfg.gmam.conv_tol);
    std::string quad = to_string(cfg.gmam.quadrature);
    g.string("quadrature", quad);
    if (quad == "midpoint") {
        cfg.gmam.quadrature = Quadrature::midpoint;
    } else if (quad == "trapezoid") {
        cfg.gmam.quadrature = Quadrature::trapezoid;
    } else {
        throw ConfigError("gmam.quadrature", "must be \"midpoint\" or \"trapezoid\"");
    }
    g.integer("n_candidates", cfg.gmam.n_candidates);
    g.boolean("refine_candidates", cfg.gmam.refine_candidates);
    g.finish();

    ObjectReader sim = top.child("sim");
    sim.number("epsilon", cfg.sim.epsilon);
    sim.number("dt", cfg.sim.dt);
    sim.number("t_max", cfg.sim.t_max);
    sim.integer("seed", cfg.sim.seed);
    sim.integer("n_paths", cfg.sim.n_paths);
    sim.integer("record_every", cfg.sim.record_every);
    sim.finish();
    if (!(cfg.sim.epsilon > 0.0)) throw ConfigError("sim.epsilon", "must be > 0");

    ObjectReader comp = top.child("compose");
    comp.number("pre_duration", cfg.compose.pre_duration);
    comp.number("post_duration", cfg.compose.post_duration);
    comp.number("display_duration", cfg.compose.display_duration);
    comp.integer("record_every", cfg.compose.record_every);
    comp.integer("max_attempts", cfg.compose.max_attempts);
    comp.finish();

    ObjectReader bun = top.child("bundle");
    bun.number("relative_size", cfg.bundle.relative_size);
    bun.number("margin", cfg.bundle.margin);
    bun.integer("n_c", cfg.bundle.n_c);
    bun.integer("n_w", cfg.bundle.n_w);
    bun.finish();

    top.finish();
    cfg.validate();
    return cfg;
}

ExperimentConfig load_config(const std::filesystem::path& path) { return parse_config(read_file(path)); }

std::string config_to_json(const ExperimentConfig& cfg) {
    json doc = {
        {"params_file", cfg.params_file.generic_string()},
        {"c_x", cfg.c_x},
        {"nu_min", cfg.nu_min},
        {"nu_max", cfg.nu_max},
        {"nu_step", cfg.nu_step},
        {"warm_start", cfg.warm_start},
        {"length_metric", to_string(cfg.length_metric)},
        {"gmam",
         {{"n_points", cfg.gmam.n_points},
          {"max_outer_iters", cfg.gmam.max_outer_iters},
          {"step_tau", cfg.gmam.step_tau},
          {"min_step_tau", cfg.gmam.min_step_tau},
          {"conv_tol", cfg.gmam.conv_tol},
          {"quadrature", to_string(cfg.gmam.quadrature)},
          {"n_candidates", cfg.gmam.n_candidates},
          {"refine_candidates", cfg.gmam.refine_candidates}}},
        {"sim",
         {{"epsilon", cfg.sim.epsilon},
          {"dt", cfg.sim.dt},
          {"t_max", cfg.sim.t_max},
          {"seed", cfg.sim.seed},
          {"n_paths", cfg.sim.n_paths},
          {"record_every", cfg.sim.record_every}}},
        {"compose",
         {{"pre_duration", cfg.compose.pre_duration},
          {"post_duration", cfg.compose.post_duration},
          {"display_duration", cfg.compose.display_duration},
          {"record_every", cfg.compose.record_every},
          {"max_attempts", cfg.compose.max_attempts}}},
        {"bundle",
         {{"relative_size", cfg.bundle.relative_size},
          {"margin", cfg.bundle.margin},
          {"n_c", cfg.bundle.n_c},
          {"n_w", cfg.bundle.n_w}}},
    };
    return doc.dump(2);
}

double path_length(const DiscretePath& path) { return polyline_length(path.points); }

double path_length(const DiscretePath& path, LengthMetric metric, const StochasticSystem& system) {
    return metric == LengthMetric::euclidean ? polyline_length(path.points) : metric_length(path.points, system);
}

ModelParams experiment_params(const ExperimentConfig& config, double nu) {
    ModelParams p = load_params(config.params_file);
    p.c_x = config.c_x;
    p.nu = nu;
    p.validate();
    return p;
}

namespace {

NuOutcome transition_at(const ExperimentConfig& config, ModelParams params, double nu, unsigned threads,
                        const DiscretePath* warm_start) {
    NuOutcome out;
    out.record.nu = nu;
    params.nu = nu;
    out.params = params;
    auto give_up = [&](RecordStatus status, std::string note) {
        out.record.status = status;
        out.record.note = std::move(note);
        out.record.action = std::nan("");
        out.record.path_length = std::nan("");
        out.record.arrival_c = std::nan("");
        return out;
    };

    try {
        params.validate();
        const CarbonSystem sys(params);
        out.fixed_point = find_fixed_point(sys, equilibrium_guess(params));
        if (!is_stable(sys.jacobian(out.fixed_point))) {
            return give_up(RecordStatus::skipped, "not bistable: fixed point unstable");
        }
        try {
            out.stable = find_limit_cycle(params, CycleStability::stable);
        } catch (const NoCycleError&) {
            return give_up(RecordStatus::skipped, "not bistable: no stable limit cycle");
        }
        try {
            out.unstable = find_limit_cycle(params, CycleStability::unstable);
        } catch (const NoCycleError&) {
            return give_up(RecordStatus::skipped, "not bistable: no unstable limit cycle");
        }

        GmamConfig g = config.gmam;
        g.threads = threads;
        CycleTransition ct = quasipotential_to_cycle(out.fixed_point, *out.stable, g, sys, warm_start);
        out.candidates = std::move(ct.candidates);
        out.record.action = ct.best.action;
        out.record.path_length = path_length(ct.best.path, config.length_metric, sys);
        out.record.arrival_c = ct.best.path.points.back().c;
        out.record.endpoint_index = ct.best.endpoint_index;
        out.record.converged = ct.best.converged;
        out.record.iterations = ct.best.iterations;
        if (!ct.best.converged) out.record.note = "best candidate did not converge";
        out.path = std::move(ct.best.path);
    } catch (const Error& e) {
        return give_up(RecordStatus::failed, e.what());
    }
    return out;
}

}  // namespace

NuOutcome run_transition(const ExperimentConfig& config, double nu, unsigned threads,
                         const DiscretePath* warm_start) {
    config.validate();
    return transition_at(config, experiment_params(config, nu), nu, resolve_threads(threads), warm_start);
}

std::vector<SweepRecord> SweepResult::records() const {
    std::vector<SweepRecord> out;
    out.reserve(outcomes.size());
    for (const auto& o : outcomes) out.push_back(o.record);
    return out;
}

SweepResult run_sweep(const ExperimentConfig& config) {
    config.validate();
    const ModelParams base = experiment_params(config, 0.0);
    const std::vector<double> grid = config.nu_grid();
    const unsigned threads = resolve_threads(config.threads);
    SweepResult result;
    result.outcomes.resize(grid.size());
    if (config.warm_start) {
        const DiscretePath* previous = nullptr;
        for (std::size_t i = 0; i < grid.size(); ++i) {
            result.outcomes[i] = transition_at(config, base, grid[i], threads, previous);
            if (result.outcomes[i].path) previous = &*result.outcomes[i].path;
        }
    } else {
        const auto outer = static_cast<unsigned>(std::min<std::size_t>(threads, grid.size()));
        const unsigned inner = std::max(1u, threads / std::max(1u, outer));
        parallel_for(grid.size(), outer,
                     [&](std::size_t i) { result.outcomes[i] = transition_at(config, base, grid[i], inner, nullptr); });
    }
    return result;
}

ComposedSeries compose_transition_series(const ExperimentConfig& config, const NuOutcome& outcome) {
    if (outcome.record.status != RecordStatus::ok || !outcome.path || !outcome.unstable) {
        throw Error("compose: no transition path at nu = " + format_double(outcome.record.nu));
    }
    const CarbonSystem sys(outcome.params);
    const DiscretePath& path = *outcome.path;
    const ClosedCurve inner(outcome.unstable->points);

    ComposedSeries series;
    series.nu = outcome.record.nu;
    series.path_converged = outcome.record.converged;

    SimConfig sim = config.sim;
    sim.n_paths = 1;
    const std::size_t stride = config.compose.record_every;

    auto record_segment = [&](SeriesSegment& seg, const State& start, double t0, double duration,
                              std::uint64_t path_id, bool confine) {
        sim.t_max = duration;
        const std::size_t n = sim.n_steps();
        seg.times.clear();
        seg.states.clear();
        bool escaped = false;
        const PathSummary s = simulate_path(sys, start, sim, path_id, [&](std::size_t k, double t, const State& x) {
            if (confine && !inner.contains(x)) {
                escaped = true;
                return false;
            }
            if (k % stride == 0 || k == n) {
                seg.times.push_back(t0 + t);
                seg.states.push_back(x);
            }
            return true;
        });
        if (s.non_finite) throw Error("compose: simulation produced a non-finite state");
        return !escaped;
    };

    SeriesSegment pre{"metastable", {}, {}};
    bool found = false;
    for (std::size_t a = 0; a < config.compose.max_attempts && !found; ++a) {
        found = record_segment(pre, outcome.fixed_point, 0.0, config.compose.pre_duration, a, true);
        series.metastable_path_id = a;
    }
    if (!found) {
        throw Error("compose: every metastable segment left the unstable cycle; shorten compose.pre_duration");
    }

    SeriesSegment mid{"transition", {}, {}};
    mid.states = path.points;
    mid.states.front() = pre.states.back();
    const std::vector<double> cum = cumulative_length(mid.states);
    const double t1 = pre.times.back();
    mid.times.resize(cum.size());
    for (std::size_t i = 0; i < cum.size(); ++i) {
        mid.times[i] = t1 + config.compose.display_duration * cum[i] / cum.back();
    }
    mid.times.back() = t1 + config.compose.display_duration;

    SeriesSegment post{"oscillatory", {}, {}};
    // A separate stream from every metastable attempt.
    record_segment(post, mid.states.back(), mid.times.back(), config.compose.post_duration,
                   (std::uint64_t{1} << 32) + series.metastable_path_id, false);

    series.segments = {std::move(pre), std::move(mid), std::move(post)};
    return series;
}

std::string sha256_hex(std::string_view data) {
    unsigned char md[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    if (EVP_Digest(data.data(), data.size(), md, &len, EVP_sha256(), nullptr) != 1) {
        throw Error("sha256: digest failed");
    }
    static const char* hex = "0123456789abcdef";
    std::string out;
    out.reserve(2 * len);
    for (unsigned int i = 0; i < len; ++i) {
        out += hex[md[i] >> 4];
        out += hex[md[i] & 0xf];
    }
    return out;
}

OutputWriter::OutputWriter(std::filesystem::path dir) : dir_(std::move(dir)) {
    std::error_code ec;
    std::filesystem::create_directories(dir_, ec);
    if (ec) throw IoError("cannot create output directory '" + dir_.string() + "': " + ec.message());
}

void OutputWriter::write(const std::string& relative_path, const std::string& content) {
    const std::filesystem::path target = dir_ / relative_path;
    std::error_code ec;
    std::filesystem::create_directories(target.parent_path(), ec);
    if (ec) throw IoError("cannot create directory '" + target.parent_path().string() + "': " + ec.message());
    std::ofstream out(target, std::ios::binary | std::ios::trunc);
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    out.close();
    if (!out) throw IoError("cannot write '" + target.string() + "'");
    files_.push_back({relative_path, content.size(), sha256_hex(content)});
}

void OutputWriter::finish(const std::string& command, const std::string& config_json, const std::string& status,
                          const std::string& error) {
    json files = json::array();
    for (const auto& f : files_) files.push_back({{"path", f.path}, {"bytes", f.bytes}, {"sha256", f.sha256}});
    json doc = {
        {"command", command},
        {"version", version_string()},
        {"status", status},
        {"config", config_json.empty() ? json::object() : json::parse(config_json)},
        {"files", files},
    };
    if (!error.empty()) doc["error"] = error;
    const std::string text = doc.dump(2) + "\n";
    std::ofstream out(dir_ / "manifest.json", std::ios::binary | std::ios::trunc);
    out << text;
    out.close();
    if (!out) throw IoError("cannot write manifest in '" + dir_.string() + "'");
}

void OutputWriter::write_timings(const std::vector<std::pair<std::string, double>>& timings) {
    json doc = json::object();
    for (const auto& [name, seconds] : timings) doc[name] = seconds;
    std::ofstream out(dir_ / "timings.json", std::ios::binary | std::ios::trunc);
    out << doc.dump(2) << "\n";
    if (!out) throw IoError("cannot write timings in '" + dir_.string() + "'");
}

const char* version_string() { return CARBONGMAM_VERSION; }

std::string format_double(double x) {
    if (std::isnan(x)) return "nan";
    if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
    char buf[32];
    for (int digits = 15; digits <= 17; ++digits) {
        std::snprintf(buf, sizeof buf, "%.*g", digits, x);
        if (std::strtod(buf, nullptr) == x) break;
    }
    return buf;
}

std::string sweep_csv(const std::vector<SweepRecord>& records) {
    std::string out = "nu,status,action,path_length,arrival_c,endpoint_index,converged,iterations,note\n";
    for (const auto& r : records) {
        out += format_double(r.nu) + ',' + to_string(r.status) + ',' + format_double(r.action) + ',' +
               format_double(r.path_length) + ',' + format_double(r.arrival_c) + ',' +
               std::to_string(r.endpoint_index) + ',' + (r.converged ? "1" : "0") + ',' +
               std::to_string(r.iterations) + ',' + csv_field(r.note) + '\n';
    }
    return out;
}

std::string path_csv(const DiscretePath& path) {
    const std::vector<double> cum = cumulative_length(path.points);
    std::string out = "index,alpha,c,w\n";
    for (std::size_t i = 0; i < path.points.size(); ++i) {
        const double alpha = cum.back() > 0.0 ? cum[i] / cum.back() : 0.0;
        out += std::to_string(i) + ',' + format_double(alpha) + ',' + format_double(path.points[i].c) + ',' +
               format_double(path.points[i].w) + '\n';
    }
    return out;
}

std::string cycle_csv(const LimitCycle& cycle) {
    std::string out = "index,c,w\n";
    for (std::size_t i = 0; i < cycle.points.size(); ++i) {
        out += std::to_string(i) + ',' + format_double(cycle.points[i].c) + ',' + format_double(cycle.points[i].w) +
               '\n';
    }
    return out;
}

std::string outcome_json(const NuOutcome& o) {
    const auto num = [](double x) { return std::isfinite(x) ? json(x) : json(nullptr); };
    json cands = json::array();
    for (const auto& c : o.candidates) {
        cands.push_back({{"index", c.index},
                         {"endpoint", state_json(c.endpoint)},
                         {"action", c.action ? json(*c.action) : json(nullptr)},
                         {"converged", c.converged},
                         {"iterations", c.iterations},
                         {"error", c.error}});
    }
    json doc = {
        {"nu", o.record.nu},
        {"status", to_string(o.record.status)},
        {"note", o.record.note},
        {"params", json::parse(params_to_json(o.params))},
        {"fixed_point", state_json(o.fixed_point)},
        {"action", num(o.record.action)},
        {"path_length", num(o.record.path_length)},
        {"arrival_c", num(o.record.arrival_c)},
        {"endpoint_index", o.record.endpoint_index},
        {"converged", o.record.converged},
        {"iterations", o.record.iterations},
        {"stable_period", o.stable ? json(o.stable->period) : json(nullptr)},
        {"unstable_period", o.unstable ? json(o.unstable->period) : json(nullptr)},
        {"candidates", cands},
    };
    return doc.dump(2) + "\n";
}

std::string series_csv(const ComposedSeries& series) {
    std::string out = "segment,t,c,w\n";
    for (const auto& seg : series.segments) {
        for (std::size_t i = 0; i < seg.states.size(); ++i) {
            out += seg.label + ',' + format_double(seg.times[i]) + ',' + format_double(seg.states[i].c) + ',' +
                   format_double(seg.states[i].w) + '\n';
        }
    }
    return out;
}

std::string trajectory_csv(const Trajectory& trajectory) {
    std::string out = "t,c,w\n";
    for (std::size_t i = 0; i < trajectory.states.size(); ++i) {
        out += format_double(trajectory.times[i]) + ',' + format_double(trajectory.states[i].c) + ',' +
               format_double(trajectory.states[i].w) + '\n';
    }
    return out;
}

std::string histogram_csv(const BundleResult& b) {
    const HistogramGrid& g = b.grid;
    std::string out = "i_c,i_w,c_center,w_center,count,density\n";
    for (std::size_t j = 0; j < g.n_w; ++j) {
        for (std::size_t i = 0; i < g.n_c; ++i) {
            const std::size_t k = j * g.n_c + i;
            out += std::to_string(i) + ',' + std::to_string(j) + ',' +
                   format_double(g.c_min + (static_cast<double>(i) + 0.5) * g.bin_c()) + ',' +
                   format_double(g.w_min + (static_cast<double>(j) + 0.5) * g.bin_w()) + ',' +
                   std::to_string(b.counts[k]) + ',' + format_double(b.density[k]) + '\n';
        }
    }
    return out;
}

std::string histogram_json(const BundleResult& b) {
    json transitions = json::array();
    for (std::size_t i = 0; i < b.records.size(); ++i) {
        const auto& r = b.records[i];
        if (!r.transitioned) continue;
        transitions.push_back({{"path_id", i}, {"exit_time", r.exit_time}, {"arrival_time", r.arrival_time}});
    }
    json doc = {
        {"grid",
         {{"c_min", b.grid.c_min},
          {"c_max", b.grid.c_max},
          {"w_min", b.grid.w_min},
          {"w_max", b.grid.w_max},
          {"n_c", b.grid.n_c},
          {"n_w", b.grid.n_w},
          {"bin_c", b.grid.bin_c()},
          {"bin_w", b.grid.bin_w()}}},
        {"seed", b.seed},
        {"epsilon", b.epsilon},
        {"n_paths", b.n_paths},
        {"n_transitions", b.n_transitions},
        {"clamp_count", b.clamp_count},
        {"non_finite_paths", b.non_finite_paths},
        {"warnings", b.warnings},
        {"transitions", transitions},
    };
    return doc.dump(2) + "\n";
}

std::string scan_csv(const ScanResult& scan) {
    std::string out = "c_x,regime,fixed_c,fixed_w,fixed_point_stable,has_stable_cycle,error\n";
    for (const auto& r : scan.reports) {
        out += format_double(r.c_x) + ',' + to_string(r.regime) + ',' + format_double(r.fixed_point.c) + ',' +
               format_double(r.fixed_point.w) + ',' + (r.fixed_point_stable ? "1" : "0") + ',' +
               (r.has_stable_cycle ? "1" : "0") + ',' + csv_field(r.error) + '\n';
    }
    return out;
}

std::string scan_json(const ScanResult& scan) {
    json thresholds = json::array();
    for (const auto& t : scan.thresholds) {
        thresholds.push_back({{"c_x", t.c_x},
                              {"lower", t.lower},
                              {"upper", t.upper},
                              {"below", to_string(t.below)},
                              {"above", to_string(t.above)}});
    }
    return json{{"thresholds", thresholds}}.dump(2) + "\n";
}

void emit_outputs(OutputWriter& writer, const SweepResult& sweep, const std::vector<ComposedSeries>& series) {
    writer.write("sweep.csv", sweep_csv(sweep.records()));
    for (std::size_t i = 0; i < sweep.outcomes.size(); ++i) {
        const NuOutcome& o = sweep.outcomes[i];
        const std::string tag = file_tag(i, o.record.nu);
        writer.write("meta/" + tag + ".json", outcome_json(o));
        if (o.path) writer.write("paths/" + tag + ".csv", path_csv(*o.path));
        if (o.stable) writer.write("cycles/" + tag + "_stable.csv", cycle_csv(*o.stable));
        if (o.unstable) writer.write("cycles/" + tag + "_unstable.csv", cycle_csv(*o.unstable));
    }
    for (const auto& s : series) {
        char name[64];
        std::snprintf(name, sizeof name, "series/compose_nu_%.6g.csv", s.nu);
        writer.write(name, series_csv(s));
    }
}

}  // namespace carbongmam
