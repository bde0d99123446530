#include "pru/network.hpp"

#include <cmath>
#include <sstream>

#include "pru/error.hpp"

namespace pru {

namespace {

constexpr double kMinProbability = 1e-12;

template <class Cache>
std::vector<Cache>& trace_for(LayerTrace& trace) {
    if (!std::holds_alternative<std::vector<Cache>>(trace)) trace.template emplace<std::vector<Cache>>();
    return std::get<std::vector<Cache>>(trace);
}

template <class Params, class Cache>
void run_layer(const Params& p, std::span<const std::span<const double>> inputs, std::span<const double> zero,
               std::vector<Cache>& trace) {
    const std::size_t T = inputs.size();
    if (trace.size() < T) trace.resize(T);
    for (std::size_t t = 0; t < T; ++t) {
        const std::span<const double> prev = t == 0 ? zero : state_of(trace[t - 1]);
        forward(p, prev, inputs[t], trace[t]);
    }
}

std::span<const double> trace_state(const LayerTrace& trace, std::size_t t) {
    return std::visit([t](const auto& v) { return state_of(v[t]); }, trace);
}

std::span<const double> trace_output(const LayerTrace& trace, std::size_t t) {
    return std::visit([t](const auto& v) { return output_of(v[t]); }, trace);
}

void resize_vectors(std::vector<Vector>& vs, std::size_t count, std::size_t dim) {
    if (vs.size() < count) vs.resize(count);
    for (std::size_t i = 0; i < count; ++i) {
        if (vs[i].size() != dim)
            vs[i].assign_zero(dim);
        else
            vs[i].fill(0.0);
    }
}

void check_loss_inputs(const Model& model, const Sequence& seq, LossKind loss) {
    const std::size_t T = seq.inputs.size();
    switch (loss) {
        case LossKind::mse_final:
            if (seq.target.size() != model.output_dim()) {
                throw ShapeError("MSE target has length " + std::to_string(seq.target.size()) +
                                 ", model output has length " + std::to_string(model.output_dim()));
            }
            break;
        case LossKind::cel_every_step:
            if (seq.labels.size() != T) {
                throw ShapeError("per-step labels: got " + std::to_string(seq.labels.size()) + " for " +
                                 std::to_string(T) + " steps");
            }
            [[fallthrough]];
        case LossKind::cel_final:
            if (loss == LossKind::cel_final && seq.labels.size() != 1)
                throw ShapeError("final-step classification needs exactly one label");
            if (model.readout.h != Activation::softmax)
                throw ConfigError("cross-entropy objectives require a softmax readout");
            for (std::uint32_t c : seq.labels) {
                if (c >= model.output_dim())
                    throw ShapeError("label " + std::to_string(c) + " out of range for " +
                                     std::to_string(model.output_dim()) + " classes");
            }
            break;
    }
}

// Loss over the emitted outputs of the last forward pass.  When `dpre` is
// non-null, also writes dL/d(readout pre-activation) scaled by `weight`.
double emitted_loss(const Model& model, const Sequence& seq, LossKind loss, Workspace& ws, double weight,
                    std::vector<Vector>* dpre) {
    const std::size_t n = ws.emitted_steps.size();
    double total = 0.0;
    if (loss == LossKind::mse_final) {
        const Vector& y = ws.outputs[0];
        if (dpre) resize_vectors(*dpre, 1, y.size());
        for (std::size_t i = 0; i < y.size(); ++i) {
            const double r = y[i] - seq.target[i];
            total += r * r;
            if (dpre) (*dpre)[0][i] = 2.0 * r * weight;
        }
        if (dpre) activation_backward_inplace(model.readout.h, y, (*dpre)[0]);
        return total;
    }
    if (dpre) resize_vectors(*dpre, n, model.output_dim());
    const double inv_n = 1.0 / static_cast<double>(n);
    for (std::size_t e = 0; e < n; ++e) {
        const Vector& p = ws.outputs[e];
        const std::uint32_t label = loss == LossKind::cel_final ? seq.labels[0] : seq.labels[ws.emitted_steps[e]];
        double prob = p[label];
        if (prob < kMinProbability) {
            prob = kMinProbability;
            ++ws.clamped_probabilities;
        }
        total -= std::log(prob);
        if (dpre) {
            // softmax + cross entropy: d/dpre = p - onehot
            Vector& d = (*dpre)[e];
            for (std::size_t i = 0; i < p.size(); ++i) d[i] = p[i] * inv_n * weight;
            d[label] -= inv_n * weight;
        }
    }
    return total * inv_n;
}

template <class Params, class Cache>
void backward_layer(const Params& p, std::size_t layer, std::vector<Cache>& trace, Workspace& ws, Params& grad,
                    bool need_dx) {
    const std::size_t T = ws.steps;
    const std::size_t k = p.k();
    const std::size_t sd = ws.traces[layer].index() == 1 ? 2 * k : k;
    const std::size_t m = p.m();
    if (ws.zero_state.size() < sd) ws.zero_state.assign_zero(sd);
    const std::span<const double> zero = ws.zero_state.span().first(sd);
    if (need_dx) resize_vectors(ws.dinput, T, m);
    ws.dcarry.assign_zero(sd);
    if (ws.dprev.size() != sd) ws.dprev.assign_zero(sd);
    if (ws.dstate.size() != sd) ws.dstate.assign_zero(sd);

    for (std::size_t t = T; t-- > 0;) {
        for (std::size_t i = 0; i < sd; ++i) ws.dstate[i] = ws.dcarry[i];
        for (std::size_t i = 0; i < k; ++i) ws.dstate[sd - k + i] += ws.dout[t][i];
        const std::span<const double> prev = t == 0 ? zero : state_of(trace[t - 1]);
        const std::span<double> dx = need_dx ? ws.dinput[t].span() : std::span<double>{};
        backward(p, prev, ws.layer_inputs[layer][t], trace[t], ws.dstate, grad, ws.dprev, dx, ws.scratch);
        if (!all_finite(ws.dprev)) {
            std::ostringstream os;
            os << "non-finite state gradient in layer " << layer << " (" << to_string(kind_of(LayerParams(p)))
               << ") at time step t=" << t + 1;
            throw NumericError(os.str());
        }
        std::swap(ws.dcarry, ws.dprev);
    }
}

}  // namespace

std::string to_string(LossKind kind) {
    switch (kind) {
        case LossKind::mse_final: return "mse_final";
        case LossKind::cel_every_step: return "cel_every_step";
        case LossKind::cel_final: return "cel_final";
    }
    return "unknown";
}

Emission emission_for(LossKind kind) noexcept {
    return kind == LossKind::cel_every_step ? Emission::every_step : Emission::final_only;
}

void forward_pass(const Model& model, std::span<const Vector> xs, Emission emit, Workspace& ws) {
    if (xs.empty()) throw ShapeError("cannot unroll an empty input sequence");
    const std::size_t T = xs.size();
    const std::size_t L = model.layers.size();
    const std::size_t m = model.input_dim();
    ws.steps = T;
    ws.traces.resize(L);
    ws.layer_inputs.resize(L);

    auto& in0 = ws.layer_inputs[0];
    in0.resize(T);
    for (std::size_t t = 0; t < T; ++t) {
        if (xs[t].size() != m) {
            std::ostringstream os;
            os << "input at t=" << t + 1 << " has length " << xs[t].size() << ", expected " << m;
            throw ShapeError(os.str());
        }
        in0[t] = xs[t].span();
    }

    for (std::size_t layer = 0; layer < L; ++layer) {
        if (layer > 0) {
            auto& in = ws.layer_inputs[layer];
            in.resize(T);
            for (std::size_t t = 0; t < T; ++t) in[t] = trace_output(ws.traces[layer - 1], t);
        }
        const std::size_t sd = true_state_dim(kind_of(model.layers[layer]), reported_dim(model.layers[layer]));
        if (ws.zero_state.size() < sd) ws.zero_state.assign_zero(sd);
        const std::span<const double> zero = ws.zero_state.span().first(sd);
        const std::span<const std::span<const double>> inputs(ws.layer_inputs[layer].data(), T);
        std::visit(
            [&](const auto& p) {
                using P = std::decay_t<decltype(p)>;
                if constexpr (std::is_same_v<P, PruParams>)
                    run_layer(p, inputs, zero, trace_for<PruCache>(ws.traces[layer]));
                else if constexpr (std::is_same_v<P, LstmParams>)
                    run_layer(p, inputs, zero, trace_for<LstmCache>(ws.traces[layer]));
                else
                    run_layer(p, inputs, zero, trace_for<GruCache>(ws.traces[layer]));
            },
            model.layers[layer]);
    }

    ws.emitted_steps.clear();
    if (emit == Emission::every_step) {
        for (std::size_t t = 0; t < T; ++t) ws.emitted_steps.push_back(t);
    } else {
        ws.emitted_steps.push_back(T - 1);
    }
    const std::size_t n = ws.emitted_steps.size();
    if (ws.outputs.size() < n) ws.outputs.resize(n);
    for (std::size_t e = 0; e < n; ++e) {
        if (ws.outputs[e].size() != model.output_dim()) ws.outputs[e].assign_zero(model.output_dim());
        readout_into(model.readout, trace_output(ws.traces[L - 1], ws.emitted_steps[e]), ws.outputs[e]);
        ++ws.readout_calls;
    }
}

std::span<const double> state_at(const Workspace& ws, std::size_t layer, std::size_t t) {
    return trace_state(ws.traces.at(layer), t);
}

std::span<const double> output_at(const Workspace& ws, std::size_t layer, std::size_t t) {
    return trace_output(ws.traces.at(layer), t);
}

double sequence_loss(const Model& model, const Sequence& seq, LossKind loss, Workspace& ws) {
    check_loss_inputs(model, seq, loss);
    forward_pass(model, seq.inputs, emission_for(loss), ws);
    return emitted_loss(model, seq, loss, ws, 1.0, nullptr);
}

double accumulate_gradient(const Model& model, const Sequence& seq, LossKind loss, double weight, Workspace& ws,
                           Model& grad) {
    check_loss_inputs(model, seq, loss);
    forward_pass(model, seq.inputs, emission_for(loss), ws);
    std::vector<Vector>& dpre = ws.dpre;
    const double value = emitted_loss(model, seq, loss, ws, weight, &dpre);

    const std::size_t T = ws.steps;
    const std::size_t L = model.layers.size();
    const std::size_t k_top = reported_dim(model.layers.back());
    resize_vectors(ws.dout, T, k_top);
    for (std::size_t e = 0; e < ws.emitted_steps.size(); ++e) {
        const std::size_t t = ws.emitted_steps[e];
        const std::span<const double> s = trace_output(ws.traces[L - 1], t);
        kernel::ger_acc(grad.readout.W, dpre[e], s);
        kernel::add_acc(dpre[e], grad.readout.b);
        kernel::gemv_t_acc(model.readout.W, dpre[e], ws.dout[t]);
    }

    for (std::size_t layer = L; layer-- > 0;) {
        const bool need_dx = layer > 0;
        std::visit(
            [&](const auto& p) {
                using P = std::decay_t<decltype(p)>;
                auto& g = std::get<P>(grad.layers[layer]);
                if constexpr (std::is_same_v<P, PruParams>)
                    backward_layer(p, layer, std::get<std::vector<PruCache>>(ws.traces[layer]), ws, g, need_dx);
                else if constexpr (std::is_same_v<P, LstmParams>)
                    backward_layer(p, layer, std::get<std::vector<LstmCache>>(ws.traces[layer]), ws, g, need_dx);
                else
                    backward_layer(p, layer, std::get<std::vector<GruCache>>(ws.traces[layer]), ws, g, need_dx);
            },
            model.layers[layer]);
        if (need_dx) std::swap(ws.dout, ws.dinput);
    }
    return value;
}

UnrollResult unroll(const LayerParams& layer, const ReadoutParams& readout, std::span<const Vector> xs,
                    Emission emit) {
    Model model;
    model.layers.push_back(layer);
    model.readout = readout;
    model.validate();
    Workspace ws;
    forward_pass(model, xs, emit, ws);
    UnrollResult out;
    for (std::size_t t = 0; t < xs.size(); ++t) out.states.emplace_back(state_at(ws, 0, t));
    out.outputs.assign(ws.outputs.begin(), ws.outputs.begin() + static_cast<std::ptrdiff_t>(ws.emitted_steps.size()));
    out.caches = std::move(ws.traces[0]);
    std::visit([&](auto& v) { v.resize(xs.size()); }, out.caches);
    return out;
}

std::vector<Vector> stack(const Model& model, std::span<const Vector> xs, Emission emit) {
    model.validate();
    Workspace ws;
    forward_pass(model, xs, emit, ws);
    return {ws.outputs.begin(), ws.outputs.begin() + static_cast<std::ptrdiff_t>(ws.emitted_steps.size())};
}

}  // namespace pru
