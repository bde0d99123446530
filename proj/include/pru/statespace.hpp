#pragma once

// Executable state-space systems.
//
// Type-I:  s_t = F(x_t, s_{t-1}),  y_t = G(x_t, s_t)
// Type-II: s_t = F(x_t, s_{t-1}),  y_t = G(s_t)
//
// Both start from s_0 = 0.

#include <cstddef>
#include <functional>
#include <span>
#include <variant>
#include <vector>

#include "pru/cells.hpp"
#include "pru/math.hpp"
#include "pru/rng.hpp"

namespace pru {

struct TypeISystem {
    std::size_t state_dim = 0;
    std::size_t input_dim = 0;
    std::size_t output_dim = 0;
    std::function<Vector(const Vector& x, const Vector& s)> F;
    std::function<Vector(const Vector& x, const Vector& s)> G;
};

struct TypeIISystem {
    std::size_t state_dim = 0;
    std::size_t input_dim = 0;
    std::size_t output_dim = 0;
    std::function<Vector(const Vector& x, const Vector& s)> F;
    std::function<Vector(const Vector& s)> G;
};

using System = std::variant<TypeISystem, TypeIISystem>;

// Output sequence, same length as xs.  Dimension errors name the time step.
std::vector<Vector> run(const TypeISystem& sys, std::span<const Vector> xs);
std::vector<Vector> run(const TypeIISystem& sys, std::span<const Vector> xs);
std::vector<Vector> run(const System& sys, std::span<const Vector> xs);

// Product-state construction: the new state is (x_t, s_t) in X x S, so the
// Type-II readout can apply the original G to the stored input.
TypeIISystem convert_to_type2(const TypeISystem& sys);

struct EquivalenceResult {
    bool equivalent = true;
    std::vector<Vector> counterexample;  // shortest failing input prefix, empty when equivalent
    double max_abs_diff = 0.0;
};

// Sampled equivalence test: `trials` sequences with lengths uniform in
// [1, max_len] and N(0, 1) inputs; outputs must agree within `tol` per
// component.
EquivalenceResult equivalent(const System& a, const System& b, std::size_t trials, std::size_t max_len, Rng& rng,
                             double tol = 1e-12);

// A stacked model as a Type-II system whose state concatenates the flat
// states of all layers.
TypeIISystem as_system(const Model& model);

}  // namespace pru
