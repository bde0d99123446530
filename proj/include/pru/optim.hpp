#pragma once

// Losses, batch BPTT, SGD/Adadelta updates and parameter initializers.

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "pru/cells.hpp"
#include "pru/network.hpp"
#include "pru/rng.hpp"

namespace pru {

// Mirrors the model's parameter fields; see Model::zeros_like.
using GradBundle = Model;

struct SgdConfig {
    std::size_t batch_size = 100;
    double learning_rate = 1e-3;
    std::size_t epochs = 1000;

    void validate() const;
};

struct AdadeltaConfig {
    double rho = 0.95;
    double epsilon = 1e-6;
    double base_lr = 1.0;
    std::size_t batch_size = 32;
    std::size_t epochs = 10;

    void validate() const;
};

// Per-parameter running averages of g^2 and of the squared update.
class AdadeltaState {
public:
    AdadeltaState(const AdadeltaConfig& config, std::size_t param_count);

    const AdadeltaConfig& config() const noexcept { return config_; }
    std::span<const double> mean_sq_grad() const noexcept { return sq_grad_; }
    std::span<const double> mean_sq_update() const noexcept { return sq_update_; }

    // Updates params[i] (parameter number offset + i) in place by base_lr * delta_i.
    void step(std::span<double> params, std::span<const double> grads, std::size_t offset = 0);

private:
    AdadeltaConfig config_;
    std::vector<double> sq_grad_;
    std::vector<double> sq_update_;
};

// ||pred - target||^2
double mse_loss(const Vector& pred, const Vector& target);

// -(1/N) sum_t log pred_t[target_t], probabilities clamped at 1e-12.
// `clamped`, when given, is incremented once per clamped term.
double cel_loss(std::span<const Vector> pred_seq, std::span<const std::uint32_t> targets,
                std::uint64_t* clamped = nullptr);

double accuracy(std::span<const std::uint32_t> predicted, std::span<const std::uint32_t> truth);

std::uint32_t argmax(std::span<const double> v);

struct BpttResult {
    double loss;
    GradBundle grads;
};

// Batch-mean loss and its exact gradient over every model parameter.
BpttResult bptt(const Model& model, std::span<const Sequence> batch, LossKind loss);

// Same, reusing `ws`; `grads` must be shaped like `model` and is overwritten.
double bptt(const Model& model, std::span<const Sequence> batch, LossKind loss, Workspace& ws, GradBundle& grads);

// Throws NumericError naming the first field holding a NaN/Inf.
void check_finite(const GradBundle& grads);

void sgd_step(Model& params, const GradBundle& grads, double lr);
void adadelta_step(AdadeltaState& state, Model& params, const GradBundle& grads);

void init_gaussian(std::span<double> values, Rng& rng);
void init_uniform(std::span<double> values, double lo, double hi, Rng& rng);
void init_gaussian(Model& model, Rng& rng);
void init_uniform(Model& model, double lo, double hi, Rng& rng);

}  // namespace pru
