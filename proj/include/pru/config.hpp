#pragma once

// Declarative experiment configuration (JSON).  See configs/README.md for
// the schema.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "pru/cells.hpp"
#include "pru/network.hpp"
#include "pru/optim.hpp"

namespace pru {

enum class TaskKind { memorization, adding, charpred, mnist };
enum class OptimizerKind { sgd, adadelta };
enum class InitKind { gaussian, uniform };

std::string to_string(TaskKind task);
TaskKind task_kind_from_string(const std::string& name);

struct ExperimentConfig {
    TaskKind task = TaskKind::memorization;
    CellKind cell = CellKind::pru;
    std::size_t layers = 1;
    std::optional<std::size_t> k;
    std::optional<std::uint64_t> target_param_count;

    // memorization / adding
    std::size_t I = 0;
    std::size_t N = 0;
    double delta2 = 0.0;

    // charpred
    std::filesystem::path corpus;
    std::size_t chunk_length = 50;
    double train_fraction = 0.9;

    // mnist
    std::filesystem::path train_images, train_labels, test_images, test_labels;

    OptimizerKind optimizer = OptimizerKind::sgd;
    SgdConfig sgd;
    AdadeltaConfig adadelta;

    InitKind init = InitKind::gaussian;
    double init_low = -0.1;
    double init_high = 0.1;

    std::size_t restarts = 1;
    std::uint64_t seed = 0;
    // 0 means "all available" for charpred and mnist.
    std::size_t train_count = 0;
    std::size_t test_count = 0;

    // The document this config was parsed from, with defaults filled in.
    nlohmann::json echo;

    LossKind loss() const noexcept;
    Emission emission() const noexcept;
    Activation readout_activation() const noexcept;
    std::size_t epochs() const noexcept;
    std::size_t batch_size() const noexcept;
};

// Relative data paths resolve against `base_dir`.  Unknown keys, missing
// required fields and out-of-range values throw ConfigError naming the field.
ExperimentConfig parse_config(const nlohmann::json& doc, const std::filesystem::path& base_dir = {});
ExperimentConfig load_config(const std::filesystem::path& path);

// One point of a sweep: the config plus the swept (field, value) pairs.
struct SweepPoint {
    ExperimentConfig config;
    std::vector<std::pair<std::string, nlohmann::json>> assignment;
    std::string name;  // file stem, e.g. "PRU__I=2__N=10"
};

// Cartesian product of the "sweep" section.  "cell" may list several
// cells and does not count towards the two-field limit.  A document
// without a sweep section yields a single point.
std::vector<SweepPoint> expand_sweep(const nlohmann::json& doc, const std::filesystem::path& base_dir = {});

nlohmann::json read_json_file(const std::filesystem::path& path);

}  // namespace pru
