#pragma once

// Self-check suites run by `prubench gradcheck` / `prubench lemma1` and by
// the acceptance tests.

#include <cstdint>
#include <string>
#include <vector>

#include "pru/cells.hpp"
#include "pru/network.hpp"

namespace pru {

struct GradcheckCase {
    CellKind cell;
    LossKind loss;
    std::size_t layers;
    std::size_t points = 0;
    std::size_t parameters_checked = 0;
    double max_rel_error = 0.0;
    bool passed = false;
};

struct GradcheckOptions {
    std::size_t points = 20;
    std::size_t max_k = 4;
    std::size_t max_T = 8;
    double eps = 1e-6;
    double tolerance = 1e-5;
    // |a - n| / max(|a|, |n|, floor): entries whose magnitudes are both
    // below `floor` are compared absolutely against tolerance * floor.
    double floor = 1e-3;
    std::uint64_t seed = 1;
};

// |analytic - numeric| relative error as used by the suite.
double gradcheck_rel_error(double analytic, double numeric, double floor);

// Max relative error between bptt and central differences for one model and batch.
double gradcheck_model(const Model& model, std::span<const Sequence> batch, LossKind loss, double eps, double floor);

// Every cell x {MSE final-step, CEL per-step} x {1, 2} layers.
std::vector<GradcheckCase> gradcheck_suite(const GradcheckOptions& opts = {});

struct Lemma1Report {
    std::size_t systems = 0;
    std::size_t equivalent = 0;
    std::size_t sequences_per_system = 0;
    double max_abs_diff = 0.0;
    bool dims_ok = true;  // converted state dim == m + k for every system
    bool passed() const { return systems > 0 && equivalent == systems && dims_ok; }
};

struct Lemma1Options {
    std::size_t systems = 50;
    std::size_t max_k = 3;
    std::size_t max_m = 2;
    std::size_t sequences = 100;
    std::size_t max_len = 10;
    double tolerance = 1e-12;
    std::uint64_t seed = 1;
};

// Random one-hidden-layer Type-I systems against their Type-II conversions.
Lemma1Report lemma1_suite(const Lemma1Options& opts = {});

}  // namespace pru
