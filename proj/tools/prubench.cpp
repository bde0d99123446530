// prubench: run, sweep and inspect recurrent-cell experiments.

#include <cstdio>
#include <iostream>

#include <CLI11.hpp>

#include "pru/error.hpp"
#include "pru/harness.hpp"
#include "pru/verify.hpp"

namespace {

enum Exit { ok = 0, other_failure = 1, config_failure = 2, data_failure = 3, numeric_failure = 4 };

void log_line(const std::string& s) { std::cerr << s << std::endl; }

int cmd_gradcheck(std::uint64_t seed) {
    pru::GradcheckOptions opts;
    opts.seed = seed;
    bool all = true;
    for (const auto& c : pru::gradcheck_suite(opts)) {
        std::printf("%-4s %-4s %-14s layers=%zu points=%zu max_rel_error=%.3e\n", c.passed ? "PASS" : "FAIL",
                    pru::to_string(c.cell).c_str(), pru::to_string(c.loss).c_str(), c.layers, c.points,
                    c.max_rel_error);
        all = all && c.passed;
    }
    if (!all) throw pru::NumericError("gradient check failed");
    return ok;
}

int cmd_lemma1(std::uint64_t seed) {
    pru::Lemma1Options opts;
    opts.seed = seed;
    const auto rep = pru::lemma1_suite(opts);
    std::printf("%s systems=%zu equivalent=%zu sequences/system=%zu max_abs_diff=%.3e\n",
                rep.passed() ? "PASS" : "FAIL", rep.systems, rep.equivalent, rep.sequences_per_system,
                rep.max_abs_diff);
    if (!rep.passed()) throw pru::NumericError("Type-I/Type-II equivalence failed");
    return ok;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Recurrent-cell benchmark harness (PRU, LSTM, GRU)"};
    app.require_subcommand(1);

    std::optional<std::uint64_t> seed;
    std::size_t workers = 1;
    std::string out = "results";
    bool quiet = false;
    app.add_option("--seed", seed, "Override the config seed");
    app.add_option("--workers", workers, "Parallel restarts (1 = bit-reproducible)")->check(CLI::PositiveNumber);
    app.add_option("--out", out, "Output directory");
    app.add_flag("-q,--quiet", quiet, "No progress on stderr");

    std::string config;
    auto* run = app.add_subcommand("run", "Run one experiment config");
    run->add_option("config", config, "Config file")->required()->check(CLI::ExistingFile);

    auto* sweep = app.add_subcommand("sweep", "Run every point of a sweep config");
    sweep->add_option("config", config, "Config file")->required()->check(CLI::ExistingFile);

    std::string dir;
    auto* timing = app.add_subcommand("timing", "Per-epoch wall-time table for a results directory");
    timing->add_option("dir", dir, "Results directory")->required();

    std::string figure;
    bool normalize = false;
    auto* exp = app.add_subcommand("export", "Write plot data CSV for one swept field");
    exp->add_option("dir", dir, "Results directory")->required();
    exp->add_option("--figure", figure, "Swept field on the x axis (I, N, delta2, k, ...)")->required();
    exp->add_flag("--normalize-delta2", normalize, "Divide metrics by delta2");

    auto* gradcheck = app.add_subcommand("gradcheck", "Finite-difference check of BPTT for every cell");
    auto* lemma1 = app.add_subcommand("lemma1", "Type-I to Type-II conversion equivalence suite");

    CLI11_PARSE(app, argc, argv);

    pru::RunOptions opts;
    opts.workers = workers;
    opts.seed = seed;
    if (!quiet) opts.log = log_line;

    try {
        if (*run) {
            std::cout << pru::run_experiment(config, out, opts).string() << "\n";
        } else if (*sweep) {
            pru::sweep(config, out, opts);
            std::cout << (std::filesystem::path(out) / "summary.csv").string() << "\n";
        } else if (*timing) {
            std::cout << pru::timing_report(std::filesystem::path(dir)).format();
        } else if (*exp) {
            std::cout << pru::export_plotdata(dir, figure, normalize).string() << "\n";
        } else if (*gradcheck) {
            return cmd_gradcheck(seed.value_or(1));
        } else if (*lemma1) {
            return cmd_lemma1(seed.value_or(1));
        }
        return ok;
    } catch (const pru::ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return config_failure;
    } catch (const pru::DataError& e) {
        std::cerr << "data error: " << e.what() << "\n";
        return data_failure;
    } catch (const pru::NumericError& e) {
        std::cerr << "numeric error: " << e.what() << "\n";
        return numeric_failure;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return other_failure;
    }
}
