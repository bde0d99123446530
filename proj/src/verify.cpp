#include "pru/verify.hpp"

#include <algorithm>
#include <cmath>

#include "pru/optim.hpp"
#include "pru/statespace.hpp"

namespace pru {

double gradcheck_rel_error(double analytic, double numeric, double floor) {
    return std::abs(analytic - numeric) / std::max({std::abs(analytic), std::abs(numeric), floor});
}

double gradcheck_model(const Model& model, std::span<const Sequence> batch, LossKind loss, double eps, double floor) {
    const auto [value, grads] = bptt(model, batch, loss);
    (void)value;
    const auto analytic = grads.flatten();
    Model probe = model;
    Workspace ws;
    GradBundle scratch = model.zeros_like();
    const auto f = [&](const Vector& theta) {
        probe.unflatten(theta);
        return bptt(probe, batch, loss, ws, scratch);
    };
    const auto numeric = finite_diff_grad(f, Vector(model.flatten()), eps);
    double worst = 0.0;
    for (std::size_t i = 0; i < analytic.size(); ++i)
        worst = std::max(worst, gradcheck_rel_error(analytic[i], numeric[i], floor));
    return worst;
}

std::vector<GradcheckCase> gradcheck_suite(const GradcheckOptions& opts) {
    std::vector<GradcheckCase> cases;
    Rng rng(opts.seed);
    for (CellKind cell : {CellKind::pru, CellKind::lstm, CellKind::gru}) {
        for (LossKind loss : {LossKind::mse_final, LossKind::cel_every_step}) {
            for (std::size_t layers : {1, 2}) {
                GradcheckCase c{cell, loss, layers};
                for (std::size_t p = 0; p < opts.points; ++p) {
                    const std::size_t k = 1 + rng.below(opts.max_k);
                    const std::size_t m = 1 + rng.below(3);
                    const bool cel = loss != LossKind::mse_final;
                    const std::size_t l = cel ? 2 + rng.below(3) : 1 + rng.below(3);
                    Model model = Model::make(cell, layers, k, m, l, cel ? Activation::softmax : Activation::tanh);
                    init_gaussian(model, rng);
                    SequenceBatch batch(2);
                    for (auto& seq : batch) {
                        const std::size_t T = 1 + rng.below(opts.max_T);
                        seq.inputs.assign(T, Vector(m));
                        for (auto& x : seq.inputs)
                            for (double& v : x) v = rng.normal();
                        if (cel) {
                            for (std::size_t t = 0; t < T; ++t)
                                seq.labels.push_back(static_cast<std::uint32_t>(rng.below(l)));
                        } else {
                            seq.target = Vector(l);
                            for (double& v : seq.target) v = rng.normal();
                        }
                    }
                    c.max_rel_error = std::max(c.max_rel_error, gradcheck_model(model, batch, loss, opts.eps, opts.floor));
                    c.parameters_checked += model.param_count();
                    ++c.points;
                }
                c.passed = c.points > 0 && c.max_rel_error < opts.tolerance;
                cases.push_back(c);
            }
        }
    }
    return cases;
}

namespace {

Matrix random_matrix(std::size_t r, std::size_t c, Rng& rng) {
    Matrix m(r, c);
    for (double& v : m.span()) v = rng.normal();
    return m;
}

Vector random_vector(std::size_t n, Rng& rng) {
    Vector v(n);
    for (double& x : v) x = rng.normal();
    return v;
}

// tanh(A s + B x + c) with a hidden layer of width `hidden`, then a linear map to `out`.
struct Mlp {
    Matrix A, B, P;
    Vector c, d;

    Vector operator()(const Vector& s, const Vector& x) const {
        Vector h(A.rows());
        for (std::size_t i = 0; i < h.size(); ++i) {
            double acc = c[i];
            for (std::size_t j = 0; j < s.size(); ++j) acc += A(i, j) * s[j];
            for (std::size_t j = 0; j < x.size(); ++j) acc += B(i, j) * x[j];
            h[i] = std::tanh(acc);
        }
        Vector y(P.rows());
        for (std::size_t i = 0; i < y.size(); ++i) {
            double acc = d[i];
            for (std::size_t j = 0; j < h.size(); ++j) acc += P(i, j) * h[j];
            y[i] = acc;
        }
        return y;
    }
};

Mlp random_mlp(std::size_t s_dim, std::size_t x_dim, std::size_t out, Rng& rng) {
    const std::size_t hidden = 1 + rng.below(4);
    return {random_matrix(hidden, s_dim, rng), random_matrix(hidden, x_dim, rng), random_matrix(out, hidden, rng),
            random_vector(hidden, rng), random_vector(out, rng)};
}

}  // namespace

Lemma1Report lemma1_suite(const Lemma1Options& opts) {
    Lemma1Report rep;
    rep.sequences_per_system = opts.sequences;
    Rng rng(opts.seed);
    for (std::size_t i = 0; i < opts.systems; ++i) {
        const std::size_t k = 1 + rng.below(opts.max_k);
        const std::size_t m = 1 + rng.below(opts.max_m);
        const std::size_t l = 1 + rng.below(2);
        TypeISystem sys;
        sys.state_dim = k;
        sys.input_dim = m;
        sys.output_dim = l;
        const Mlp f = random_mlp(k, m, k, rng);
        const Mlp g = random_mlp(k, m, l, rng);
        sys.F = [f](const Vector& x, const Vector& s) { return f(s, x); };
        sys.G = [g](const Vector& x, const Vector& s) { return g(s, x); };
        const TypeIISystem converted = convert_to_type2(sys);
        if (converted.state_dim != m + k) rep.dims_ok = false;
        const auto res = equivalent(sys, converted, opts.sequences, opts.max_len, rng, opts.tolerance);
        rep.max_abs_diff = std::max(rep.max_abs_diff, res.max_abs_diff);
        ++rep.systems;
        if (res.equivalent) ++rep.equivalent;
    }
    return rep;
}

}  // namespace pru
