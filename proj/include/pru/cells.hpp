#pragma once

// Recurrent cells (PRU, LSTM, GRU), the state-only readout, and parameter
// accounting.
//
// Every cell exposes the same low-level interface used by the unroll and
// BPTT engines:
//
//   forward(params, prev_state, x, cache)      fills cache, cache holds s_t
//   backward(params, prev_state, x, cache, dstate, grad, dprev, dx, scratch)
//
// The state vector is flat: s for PRU/GRU (length k), [c, h] for LSTM
// (length 2k).  The part handed to the readout or to the next layer is
// always the trailing k entries, i.e. s or h.

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "pru/math.hpp"

namespace pru {

enum class CellKind { pru, lstm, gru };

std::string to_string(CellKind kind);
CellKind cell_kind_from_string(const std::string& name);

// Length of the flat state for a cell with reported dimension k.  LSTM
// carries two length-k vectors, so its true state dimension is 2k.
std::size_t true_state_dim(CellKind kind, std::size_t k) noexcept;

template <class T>
struct BasicFieldRef {
    std::string_view name;
    std::span<T> values;
    std::size_t rows;
    std::size_t cols;
};
using FieldRef = BasicFieldRef<double>;
using ConstFieldRef = BasicFieldRef<const double>;

FieldRef field(std::string_view name, Matrix& m);
ConstFieldRef field(std::string_view name, const Matrix& m);
FieldRef field(std::string_view name, Vector& v);
ConstFieldRef field(std::string_view name, const Vector& v);

struct PruParams {
    Matrix U_s;  // k x k
    Matrix U_x;  // k x m
    Vector b_u;  // k
    Matrix C_s;  // k x k
    Matrix C_x;  // k x m
    Vector b_c;  // k

    static PruParams zeros(std::size_t k, std::size_t m);
    std::size_t k() const noexcept { return b_u.size(); }
    std::size_t m() const noexcept { return U_x.cols(); }
    std::vector<FieldRef> fields();
    std::vector<ConstFieldRef> fields() const;
    void validate() const;
};

struct LstmParams {
    Matrix W_i;  // k x (2k + m), input [c_prev, h_prev, x]
    Matrix W_f;
    Matrix W_o;
    Matrix W_c;  // k x (k + m), input [h_prev, x]
    Vector b_i;
    Vector b_f;
    Vector b_o;
    Vector b_g;

    static LstmParams zeros(std::size_t k, std::size_t m);
    std::size_t k() const noexcept { return b_i.size(); }
    std::size_t m() const noexcept { return W_c.cols() - W_c.rows(); }
    std::vector<FieldRef> fields();
    std::vector<ConstFieldRef> fields() const;
    void validate() const;
};

struct GruParams {
    Matrix W_z;  // k x (k + m), input [s_prev, x]
    Matrix W_r;
    Matrix W_h;  // k x (k + m), input [r ⊙ s_prev, x]
    Vector b_z;
    Vector b_r;
    Vector b_h;

    static GruParams zeros(std::size_t k, std::size_t m);
    std::size_t k() const noexcept { return b_z.size(); }
    std::size_t m() const noexcept { return W_z.cols() - W_z.rows(); }
    std::vector<FieldRef> fields();
    std::vector<ConstFieldRef> fields() const;
    void validate() const;
};

struct ReadoutParams {
    Matrix W;  // l x k
    Vector b;  // l
    Activation h = Activation::identity;

    static ReadoutParams zeros(std::size_t k, std::size_t l, Activation h);
    std::size_t k() const noexcept { return W.cols(); }
    std::size_t l() const noexcept { return b.size(); }
    std::vector<FieldRef> fields();
    std::vector<ConstFieldRef> fields() const;
    void validate() const;
};

// Forward caches.  Activations are retained; derivatives of tanh and the
// logistic function are recovered from them.
struct PruCache {
    Vector u;
    Vector c;
    Vector s;
};

struct LstmCache {
    Vector gate_in;  // [c_prev, h_prev, x]
    Vector cand_in;  // [h_prev, x]
    Vector i, f, o;
    Vector g;        // candidate c~
    Vector tanh_c;
    Vector state;    // [c, h]
};

struct GruCache {
    Vector gate_in;   // [s_prev, x]
    Vector cand_in;   // [r ⊙ s_prev, x]
    Vector z, r;
    Vector cand;      // h~
    Vector s;
};

struct BackwardScratch {
    Vector a, b, c, d, e, f;
};

void forward(const PruParams& p, std::span<const double> prev, std::span<const double> x, PruCache& cache);
void forward(const LstmParams& p, std::span<const double> prev, std::span<const double> x, LstmCache& cache);
void forward(const GruParams& p, std::span<const double> prev, std::span<const double> x, GruCache& cache);

// dstate: total dL/ds_t.  grad is accumulated into.  dprev is overwritten.
// dx is overwritten unless empty, in which case the input gradient is skipped.
void backward(const PruParams& p, std::span<const double> prev, std::span<const double> x, const PruCache& cache,
              std::span<const double> dstate, PruParams& grad, std::span<double> dprev, std::span<double> dx,
              BackwardScratch& scratch);
void backward(const LstmParams& p, std::span<const double> prev, std::span<const double> x, const LstmCache& cache,
              std::span<const double> dstate, LstmParams& grad, std::span<double> dprev, std::span<double> dx,
              BackwardScratch& scratch);
void backward(const GruParams& p, std::span<const double> prev, std::span<const double> x, const GruCache& cache,
              std::span<const double> dstate, GruParams& grad, std::span<double> dprev, std::span<double> dx,
              BackwardScratch& scratch);

inline std::span<const double> state_of(const PruCache& c) noexcept { return c.s; }
inline std::span<const double> state_of(const LstmCache& c) noexcept { return c.state; }
inline std::span<const double> state_of(const GruCache& c) noexcept { return c.s; }

inline std::span<const double> output_of(const PruCache& c) noexcept { return c.s; }
inline std::span<const double> output_of(const LstmCache& c) noexcept {
    return state_of(c).subspan(c.state.size() / 2);
}
inline std::span<const double> output_of(const GruCache& c) noexcept { return c.s; }

// Value-returning step functions.
struct PruStep {
    Vector s;
    PruCache cache;
};
struct LstmState {
    Vector c;
    Vector h;
};
struct LstmStep {
    LstmState state;
    LstmCache cache;
};
struct GruStep {
    Vector s;
    GruCache cache;
};

PruStep pru_step(const PruParams& p, const Vector& s_prev, const Vector& x);
LstmStep lstm_step(const LstmParams& p, const LstmState& prev, const Vector& x);
GruStep gru_step(const GruParams& p, const Vector& s_prev, const Vector& x);

// y = h(W s + b).  For LSTM pass h_t only.
Vector readout(const ReadoutParams& r, const Vector& s);

// Writes h(W s + b) into y without allocating.
void readout_into(const ReadoutParams& r, std::span<const double> s, std::span<double> y) noexcept;

using LayerParams = std::variant<PruParams, LstmParams, GruParams>;

CellKind kind_of(const LayerParams& layer) noexcept;
std::size_t reported_dim(const LayerParams& layer) noexcept;
std::size_t input_dim(const LayerParams& layer) noexcept;
LayerParams zero_layer(CellKind kind, std::size_t k, std::size_t m);

std::vector<FieldRef> layer_fields(LayerParams& layer);
std::vector<ConstFieldRef> layer_fields(const LayerParams& layer);

// Stack of recurrent layers with a readout on the top layer.
struct Model {
    std::vector<LayerParams> layers;
    ReadoutParams readout;

    // Layer i+1 consumes layer i's output (h for LSTM); readout reads the top layer.
    static Model make(CellKind kind, std::size_t layers, std::size_t k, std::size_t m, std::size_t l,
                      Activation h);

    std::size_t input_dim() const;
    std::size_t output_dim() const noexcept { return readout.l(); }
    std::size_t param_count() const;

    // Names are "layer<i>.<field>" and "readout.<field>", in declaration order.
    std::vector<std::pair<std::string, FieldRef>> named_fields();
    std::vector<std::pair<std::string, ConstFieldRef>> named_fields() const;

    std::vector<double> flatten() const;
    void unflatten(std::span<const double> values);

    // Same shapes, all zeros; the gradient bundle for this model.
    Model zeros_like() const;

    void validate() const;
};

enum class Emission { final_only, every_step };

// Number of parameters including the readout.
std::uint64_t count_params(CellKind kind, std::uint64_t k, std::uint64_t m, std::uint64_t l);

// Largest k with count_params(kind, k, m, l) <= target.
std::uint64_t match_dim_for_params(CellKind kind, std::uint64_t target, std::uint64_t m, std::uint64_t l);

}  // namespace pru
