#pragma once

// Experiment runner: seeded multi-restart training, sweeps, timing tables
// and plot-data export.
//
// A run writes two files: `<name>.json` holds everything that is a function
// of (config, seed) and is byte-reproducible with one worker;
// `<name>.timing.json` holds the measured per-epoch wall times.

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "pru/config.hpp"

namespace pru {

struct PreparedData {
    std::vector<Sequence> train;
    std::vector<Sequence> test;
    std::size_t input_dim = 0;
    std::size_t output_dim = 0;
};

PreparedData prepare_data(const ExperimentConfig& cfg);

// Parameter count of a `layers`-deep stack including the readout.
std::uint64_t model_param_count(CellKind kind, std::size_t layers, std::uint64_t k, std::uint64_t m, std::uint64_t l);

// k from the config, or the largest k whose model fits target_param_count.
std::size_t resolve_k(const ExperimentConfig& cfg, std::size_t m, std::size_t l);

struct RestartResult {
    std::size_t index = 0;
    std::uint64_t seed = 0;
    bool aborted = false;
    std::string abort_reason;
    double final_metric = 0.0;
    std::vector<double> train_loss;      // mean training loss per epoch
    std::vector<double> epoch_seconds;   // train pass only
    std::uint64_t clamped_probabilities = 0;
};

struct RunResult {
    nlohmann::json config;
    TaskKind task = TaskKind::memorization;
    CellKind cell = CellKind::pru;
    std::size_t layers = 1;
    std::size_t k = 0;
    std::uint64_t param_count = 0;
    std::string metric;  // "mse", "cel" or "accuracy"
    nlohmann::json sweep = nlohmann::json::object();
    std::vector<RestartResult> restarts;

    // Over restarts that did not abort; NaN when none completed.
    double mean_metric() const;
    // Sample standard deviation (n - 1); 0 for a single restart.
    double std_metric() const;
    double mean_epoch_seconds() const;
    std::size_t completed() const;

    nlohmann::json to_json() const;
    nlohmann::json timing_json() const;
    static RunResult from_json(const nlohmann::json& doc, const nlohmann::json* timing = nullptr);
};

struct RunOptions {
    std::size_t workers = 1;
    std::optional<std::uint64_t> seed;
    std::function<void(const std::string&)> log;
};

// Trains one model from `seed` and evaluates it on the test set.
RestartResult train_restart(const ExperimentConfig& cfg, const PreparedData& data, std::size_t k, std::uint64_t seed,
                            Model* trained = nullptr);

RunResult run_config(const ExperimentConfig& cfg, const RunOptions& opts = {});

// Writes results atomically; returns the path of `<dir>/<name>.json`.
std::filesystem::path write_results(const RunResult& result, const std::filesystem::path& dir, const std::string& name);
RunResult read_results(const std::filesystem::path& path);

std::filesystem::path run_experiment(const std::filesystem::path& config_path, const std::filesystem::path& out_dir,
                                     const RunOptions& opts = {});

// Runs every sweep point not already present in out_dir and writes
// `summary.csv`.  Returns the result file paths in sweep order.
std::vector<std::filesystem::path> sweep(const std::filesystem::path& config_path, const std::filesystem::path& out_dir,
                                         const RunOptions& opts = {});

std::string summary_csv(const std::vector<RunResult>& results);

struct TimingRow {
    CellKind cell;
    double mean_epoch_seconds = 0.0;
    std::size_t epochs = 0;
};

struct TimingReport {
    std::vector<TimingRow> rows;  // ascending mean time
    // "holds", "violated" or "inconclusive"; empty with fewer than two cells.
    std::string flag;
    // Relative gap between consecutive rows: t[i+1] / t[i] - 1.
    std::vector<double> gaps;

    std::string format() const;
};

TimingReport timing_report(const std::vector<RunResult>& results);
TimingReport timing_report(const std::filesystem::path& results_dir);

struct PlotRow {
    std::string x;  // swept value as written in the config
    std::string cell;
    double mean_metric = 0.0;
    double std_metric = 0.0;
};

std::vector<PlotRow> plot_rows(const std::vector<RunResult>& results, const std::string& figure_kind,
                               bool normalize_by_delta2);
std::string plot_csv(const std::string& figure_kind, const std::vector<PlotRow>& rows);
std::vector<PlotRow> parse_plot_csv(const std::string& text);

// Writes `<dir>/figure_<kind>.csv` and returns its path.
std::filesystem::path export_plotdata(const std::filesystem::path& results_dir, const std::string& figure_kind,
                                      bool normalize_by_delta2 = false);

std::vector<RunResult> load_results_dir(const std::filesystem::path& dir);

void write_file_atomic(const std::filesystem::path& path, const std::string& contents);

}  // namespace pru
