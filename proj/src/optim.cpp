#include "pru/optim.hpp"

#include <cmath>
#include <sstream>

#include "pru/error.hpp"

namespace pru {

void SgdConfig::validate() const {
    if (batch_size == 0) throw ConfigError("optimizer.batch_size must be positive");
    if (!(learning_rate > 0.0)) throw ConfigError("optimizer.learning_rate must be positive");
    if (epochs == 0) throw ConfigError("optimizer.epochs must be positive");
}

void AdadeltaConfig::validate() const {
    if (!(rho > 0.0 && rho < 1.0)) throw ConfigError("optimizer.rho must lie in (0, 1)");
    if (!(epsilon > 0.0)) throw ConfigError("optimizer.epsilon must be positive");
    if (!(base_lr > 0.0)) throw ConfigError("optimizer.base_lr must be positive");
    if (batch_size == 0) throw ConfigError("optimizer.batch_size must be positive");
    if (epochs == 0) throw ConfigError("optimizer.epochs must be positive");
}

AdadeltaState::AdadeltaState(const AdadeltaConfig& config, std::size_t param_count)
    : config_(config), sq_grad_(param_count, 0.0), sq_update_(param_count, 0.0) {}

void AdadeltaState::step(std::span<double> params, std::span<const double> grads, std::size_t offset) {
    if (params.size() != grads.size() || offset + params.size() > sq_grad_.size())
        throw ShapeError("adadelta: parameter/gradient/accumulator sizes disagree");
    const double rho = config_.rho;
    const double eps = config_.epsilon;
    const double lr = config_.base_lr;
    for (std::size_t i = 0; i < params.size(); ++i) {
        const double g = grads[i];
        double& eg = sq_grad_[offset + i];
        double& ed = sq_update_[offset + i];
        eg = rho * eg + (1.0 - rho) * g * g;
        const double delta = -(std::sqrt(ed + eps) / std::sqrt(eg + eps)) * g;
        ed = rho * ed + (1.0 - rho) * delta * delta;
        params[i] += lr * delta;
    }
}

double mse_loss(const Vector& pred, const Vector& target) {
    if (pred.size() != target.size()) {
        throw ShapeError("mse_loss: prediction has length " + std::to_string(pred.size()) + ", target " +
                         std::to_string(target.size()));
    }
    double sum = 0.0;
    for (std::size_t i = 0; i < pred.size(); ++i) {
        const double d = pred[i] - target[i];
        sum += d * d;
    }
    return sum;
}

double cel_loss(std::span<const Vector> pred_seq, std::span<const std::uint32_t> targets, std::uint64_t* clamped) {
    if (pred_seq.size() != targets.size()) {
        throw ShapeError("cel_loss: " + std::to_string(pred_seq.size()) + " predictions for " +
                         std::to_string(targets.size()) + " targets");
    }
    if (pred_seq.empty()) throw ShapeError("cel_loss: empty sequence");
    double sum = 0.0;
    for (std::size_t t = 0; t < pred_seq.size(); ++t) {
        if (targets[t] >= pred_seq[t].size())
            throw ShapeError("cel_loss: target index " + std::to_string(targets[t]) + " out of range");
        double p = pred_seq[t][targets[t]];
        if (p < 1e-12) {
            p = 1e-12;
            if (clamped) ++*clamped;
        }
        sum -= std::log(p);
    }
    return sum / static_cast<double>(pred_seq.size());
}

double accuracy(std::span<const std::uint32_t> predicted, std::span<const std::uint32_t> truth) {
    if (predicted.size() != truth.size()) {
        throw ShapeError("accuracy: " + std::to_string(predicted.size()) + " predictions for " +
                         std::to_string(truth.size()) + " labels");
    }
    if (truth.empty()) throw ShapeError("accuracy: no examples");
    std::size_t hits = 0;
    for (std::size_t i = 0; i < truth.size(); ++i) hits += predicted[i] == truth[i] ? 1 : 0;
    return static_cast<double>(hits) / static_cast<double>(truth.size());
}

std::uint32_t argmax(std::span<const double> v) {
    std::uint32_t best = 0;
    for (std::uint32_t i = 1; i < v.size(); ++i)
        if (v[i] > v[best]) best = i;
    return best;
}

void check_finite(const GradBundle& grads) {
    for (const auto& [name, f] : grads.named_fields()) {
        for (std::size_t i = 0; i < f.values.size(); ++i) {
            if (!std::isfinite(f.values[i])) {
                std::ostringstream os;
                os << "non-finite gradient in " << name << " at (" << i / f.cols << "," << i % f.cols << ")";
                throw NumericError(os.str());
            }
        }
    }
}

double bptt(const Model& model, std::span<const Sequence> batch, LossKind loss, Workspace& ws, GradBundle& grads) {
    if (batch.empty()) throw ShapeError("bptt: empty batch");
    for (auto& [name, f] : grads.named_fields()) std::fill(f.values.begin(), f.values.end(), 0.0);
    const double weight = 1.0 / static_cast<double>(batch.size());
    double total = 0.0;
    for (const Sequence& seq : batch) total += accumulate_gradient(model, seq, loss, weight, ws, grads);
    check_finite(grads);
    return total * weight;
}

BpttResult bptt(const Model& model, std::span<const Sequence> batch, LossKind loss) {
    model.validate();
    BpttResult out{0.0, model.zeros_like()};
    Workspace ws;
    out.loss = bptt(model, batch, loss, ws, out.grads);
    return out;
}

void sgd_step(Model& params, const GradBundle& grads, double lr) {
    auto pf = params.named_fields();
    const auto gf = grads.named_fields();
    if (pf.size() != gf.size()) throw ShapeError("sgd_step: gradient bundle does not match parameters");
    for (std::size_t f = 0; f < pf.size(); ++f) {
        auto& p = pf[f].second.values;
        const auto& g = gf[f].second.values;
        if (p.size() != g.size()) throw ShapeError("sgd_step: shape mismatch in " + pf[f].first);
        for (std::size_t i = 0; i < p.size(); ++i) p[i] -= lr * g[i];
    }
}

void adadelta_step(AdadeltaState& state, Model& params, const GradBundle& grads) {
    auto pf = params.named_fields();
    const auto gf = grads.named_fields();
    if (pf.size() != gf.size()) throw ShapeError("adadelta_step: gradient bundle does not match parameters");
    std::size_t offset = 0;
    for (std::size_t f = 0; f < pf.size(); ++f) {
        state.step(pf[f].second.values, gf[f].second.values, offset);
        offset += pf[f].second.values.size();
    }
}

void init_gaussian(std::span<double> values, Rng& rng) {
    for (double& v : values) v = rng.normal();
}

void init_uniform(std::span<double> values, double lo, double hi, Rng& rng) {
    if (lo > hi) throw ConfigError("init_uniform: lower bound exceeds upper bound");
    for (double& v : values) v = rng.uniform(lo, hi);
}

void init_gaussian(Model& model, Rng& rng) {
    for (auto& [name, f] : model.named_fields()) init_gaussian(f.values, rng);
}

void init_uniform(Model& model, double lo, double hi, Rng& rng) {
    for (auto& [name, f] : model.named_fields()) init_uniform(f.values, lo, hi, rng);
}

}  // namespace pru
