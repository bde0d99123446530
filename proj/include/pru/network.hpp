#pragma once

// Sequence unrolling over a (possibly stacked) model, plus the reusable
// workspace shared by the forward and backward engines.

#include <cstdint>
#include <span>
#include <variant>
#include <vector>

#include "pru/cells.hpp"

namespace pru {

enum class LossKind {
    mse_final,       // squared error of the final-step output against `target`
    cel_every_step,  // cross entropy at every step against `labels[t]`
    cel_final,       // cross entropy of the final-step output against `labels[0]`
};

std::string to_string(LossKind kind);
Emission emission_for(LossKind kind) noexcept;

// One training/test example.  Uses `target` for MSE and `labels` for
// cross-entropy objectives.
struct Sequence {
    std::vector<Vector> inputs;
    Vector target;
    std::vector<std::uint32_t> labels;
};

using SequenceBatch = std::vector<Sequence>;

using LayerTrace = std::variant<std::vector<PruCache>, std::vector<LstmCache>, std::vector<GruCache>>;

// Per-thread scratch space.  Buffers are sized on first use and reused, so
// steady-state training does not allocate.
struct Workspace {
    std::vector<LayerTrace> traces;
    std::vector<std::vector<std::span<const double>>> layer_inputs;
    std::vector<Vector> outputs;            // readout output per emitted step
    std::vector<std::size_t> emitted_steps;
    std::size_t steps = 0;

    std::vector<Vector> dout;               // dL/d(layer output) per step
    std::vector<Vector> dinput;             // dL/d(layer input) per step
    std::vector<Vector> dpre;               // dL/d(readout pre-activation) per emitted step
    Vector dcarry, dprev, dstate, dy, zero_state;
    BackwardScratch scratch;

    std::uint64_t readout_calls = 0;
    std::uint64_t clamped_probabilities = 0;
};

// Runs every layer over xs from the zero initial state and evaluates the
// readout at the steps selected by `emit`.  Does not re-validate the model.
void forward_pass(const Model& model, std::span<const Vector> xs, Emission emit, Workspace& ws);

// Flat state (s, or [c, h] for LSTM) of `layer` after step t of the last forward pass.
std::span<const double> state_at(const Workspace& ws, std::size_t layer, std::size_t t);
std::span<const double> output_at(const Workspace& ws, std::size_t layer, std::size_t t);

// Forward + exact reverse-mode pass for one sequence.  Returns the
// sequence loss; accumulates `weight` times its gradient into `grad`.
double accumulate_gradient(const Model& model, const Sequence& seq, LossKind loss, double weight, Workspace& ws,
                           Model& grad);

// Loss of one sequence without gradients.
double sequence_loss(const Model& model, const Sequence& seq, LossKind loss, Workspace& ws);

struct UnrollResult {
    std::vector<Vector> states;   // flat state after each step
    std::vector<Vector> outputs;  // readout outputs per emission policy
    LayerTrace caches;
};

UnrollResult unroll(const LayerParams& layer, const ReadoutParams& readout, std::span<const Vector> xs,
                    Emission emit);

// Outputs of the readout on the top layer of the stack.
std::vector<Vector> stack(const Model& model, std::span<const Vector> xs, Emission emit);

}  // namespace pru
