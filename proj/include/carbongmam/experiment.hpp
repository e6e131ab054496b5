#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "carbongmam/carbon_model.hpp"
#include "carbongmam/dynamics.hpp"
#include "carbongmam/gmam.hpp"
#include "carbongmam/sde.hpp"

namespace carbongmam {

enum class LengthMetric { euclidean, metric };

const char* to_string(LengthMetric m);

struct ComposeConfig {
    double pre_duration = 20.0;
    double post_duration = 20.0;
    /// Time span given to the geometric path segment.
    double display_duration = 5.0;
    std::size_t record_every = 100;
    /// Path ids tried for a metastable segment that stays inside the unstable cycle.
    std::size_t max_attempts = 64;
};

struct BundleConfig {
    double relative_size = 0.02;
    double margin = 0.1;
    std::size_t n_c = 50;
    std::size_t n_w = 50;
};

struct ExperimentConfig {
    std::filesystem::path params_file = "data/rothman-modern-ocean.json";
    double c_x = 62.0;
    double nu_min = 0.0;
    double nu_max = 0.9;
    double nu_step = 0.01;
    bool warm_start = false;
    LengthMetric length_metric = LengthMetric::euclidean;
    GmamConfig gmam{};
    SimConfig sim = default_sim();
    ComposeConfig compose{};
    BundleConfig bundle{};
    std::filesystem::path output_dir = "output";
    unsigned threads = 1;

    static SimConfig default_sim();
    void validate() const;
    std::vector<double> nu_grid() const;
};

/// Strict parse: unknown keys, wrong types and out-of-range values raise
/// ConfigError naming the field. Blank text gives the defaults.
ExperimentConfig parse_config(std::string_view json_text);
ExperimentConfig load_config(const std::filesystem::path& path);
/// Effective configuration as JSON (threads and output_dir excluded).
std::string config_to_json(const ExperimentConfig& config);

double path_length(const DiscretePath& path);
double path_length(const DiscretePath& path, LengthMetric metric, const StochasticSystem& system);

enum class RecordStatus { ok, skipped, failed };

const char* to_string(RecordStatus s);

struct SweepRecord {
    double nu = 0.0;
    RecordStatus status = RecordStatus::ok;
    double action = 0.0;
    double path_length = 0.0;
    double arrival_c = 0.0;
    std::size_t endpoint_index = 0;
    bool converged = false;
    std::size_t iterations = 0;
    /// Reason for a skip or failure.
    std::string note;
};

struct NuOutcome {
    SweepRecord record;
    ModelParams params{};
    State fixed_point{};
    std::optional<LimitCycle> stable;
    std::optional<LimitCycle> unstable;
    std::optional<DiscretePath> path;
    std::vector<CandidateOutcome> candidates;
};

ModelParams experiment_params(const ExperimentConfig& config, double nu);

/// Fixed point, cycles and most probable path to the stable cycle at one nu.
NuOutcome run_transition(const ExperimentConfig& config, double nu, unsigned threads,
                         const DiscretePath* warm_start = nullptr);

struct SweepResult {
    std::vector<NuOutcome> outcomes;
    std::vector<SweepRecord> records() const;
};

/// One outcome per grid point, in grid order. With warm_start the grid is
/// walked in order and threads go to the candidate solves; otherwise grid
/// points run in parallel.
SweepResult run_sweep(const ExperimentConfig& config);

struct SeriesSegment {
    std::string label;
    std::vector<double> times;
    std::vector<State> states;
};

struct ComposedSeries {
    double nu = 0.0;
    /// metastable (green), transition (orange), oscillatory (blue).
    std::vector<SeriesSegment> segments;
    std::uint64_t metastable_path_id = 0;
    bool path_converged = false;
};

/// Noisy segment near the fixed point, the geometric path on an arc-length
/// time axis, and a noisy segment relaxing from the arrival point. The
/// first segment's end replaces the path's first node so that consecutive
/// segments share their boundary state exactly.
ComposedSeries compose_transition_series(const ExperimentConfig& config, const NuOutcome& outcome);

struct FileEntry {
    std::string path;
    std::uintmax_t bytes = 0;
    std::string sha256;
};

std::string sha256_hex(std::string_view data);

/// Single writer for one output directory; every file goes through it and
/// ends up in the manifest.
class OutputWriter {
public:
    explicit OutputWriter(std::filesystem::path dir);

    void write(const std::string& relative_path, const std::string& content);
    const std::vector<FileEntry>& files() const { return files_; }
    const std::filesystem::path& dir() const { return dir_; }

    /// manifest.json: command, config echo, version, files. Timings go to a
    /// separate timings.json so the manifest stays reproducible.
    void finish(const std::string& command, const std::string& config_json, const std::string& status,
                const std::string& error = {});
    void write_timings(const std::vector<std::pair<std::string, double>>& timings);

private:
    std::filesystem::path dir_;
    std::vector<FileEntry> files_;
};

const char* version_string();

std::string format_double(double x);

std::string sweep_csv(const std::vector<SweepRecord>& records);
std::string path_csv(const DiscretePath& path);
std::string cycle_csv(const LimitCycle& cycle);
std::string outcome_json(const NuOutcome& outcome);
std::string series_csv(const ComposedSeries& series);
std::string trajectory_csv(const Trajectory& trajectory);
std::string histogram_csv(const BundleResult& bundle);
std::string histogram_json(const BundleResult& bundle);
std::string scan_csv(const ScanResult& scan);
std::string scan_json(const ScanResult& scan);

/// Writes sweep.csv and per-nu path, cycle and metadata files, plus the
/// composed series given.
void emit_outputs(OutputWriter& writer, const SweepResult& sweep, const std::vector<ComposedSeries>& series);

}  // namespace carbongmam
