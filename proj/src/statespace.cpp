#include "pru/statespace.hpp"

#include <cmath>
#include <sstream>

#include "pru/error.hpp"

namespace pru {

namespace {

void check_len(const Vector& v, std::size_t expected, const char* what, std::size_t t) {
    if (v.size() != expected) {
        std::ostringstream os;
        os << what << " at t=" << t << " has length " << v.size() << ", expected " << expected;
        throw ShapeError(os.str());
    }
}

template <class Sys, class Readout>
std::vector<Vector> run_impl(const Sys& sys, std::span<const Vector> xs, Readout&& read) {
    std::vector<Vector> ys;
    ys.reserve(xs.size());
    Vector s(sys.state_dim);
    for (std::size_t t = 0; t < xs.size(); ++t) {
        check_len(xs[t], sys.input_dim, "input", t + 1);
        s = sys.F(xs[t], s);
        check_len(s, sys.state_dim, "state", t + 1);
        Vector y = read(xs[t], s);
        check_len(y, sys.output_dim, "output", t + 1);
        ys.push_back(std::move(y));
    }
    return ys;
}

std::size_t input_dim_of(const System& s) {
    return std::visit([](const auto& v) { return v.input_dim; }, s);
}

std::size_t output_dim_of(const System& s) {
    return std::visit([](const auto& v) { return v.output_dim; }, s);
}

}  // namespace

std::vector<Vector> run(const TypeISystem& sys, std::span<const Vector> xs) {
    return run_impl(sys, xs, [&](const Vector& x, const Vector& s) { return sys.G(x, s); });
}

std::vector<Vector> run(const TypeIISystem& sys, std::span<const Vector> xs) {
    return run_impl(sys, xs, [&](const Vector&, const Vector& s) { return sys.G(s); });
}

std::vector<Vector> run(const System& sys, std::span<const Vector> xs) {
    return std::visit([&](const auto& v) { return run(v, xs); }, sys);
}

TypeIISystem convert_to_type2(const TypeISystem& sys) {
    const std::size_t m = sys.input_dim;
    const std::size_t k = sys.state_dim;
    TypeIISystem out;
    out.input_dim = m;
    out.state_dim = m + k;
    out.output_dim = sys.output_dim;
    // new state layout: [stored input (m), original state (k)]
    out.F = [F = sys.F, m, k](const Vector& x, const Vector& state) {
        const Vector s(std::span<const double>(state).subspan(m, k));
        const Vector next = F(x, s);
        Vector combined(m + k);
        std::copy(x.begin(), x.end(), combined.begin());
        std::copy(next.begin(), next.end(), combined.begin() + static_cast<std::ptrdiff_t>(m));
        return combined;
    };
    out.G = [G = sys.G, m, k](const Vector& state) {
        const std::span<const double> v(state);
        return G(Vector(v.first(m)), Vector(v.subspan(m, k)));
    };
    return out;
}

EquivalenceResult equivalent(const System& a, const System& b, std::size_t trials, std::size_t max_len, Rng& rng,
                             double tol) {
    if (input_dim_of(a) != input_dim_of(b) || output_dim_of(a) != output_dim_of(b)) {
        std::ostringstream os;
        os << "equivalent: systems have input/output dims " << input_dim_of(a) << "/" << output_dim_of(a) << " and "
           << input_dim_of(b) << "/" << output_dim_of(b);
        throw ShapeError(os.str());
    }
    if (max_len == 0) throw Error("equivalent: max_len must be positive");
    const std::size_t m = input_dim_of(a);
    EquivalenceResult result;
    for (std::size_t trial = 0; trial < trials; ++trial) {
        const std::size_t len = 1 + rng.below(max_len);
        std::vector<Vector> xs(len, Vector(m));
        for (auto& x : xs)
            for (double& v : x) v = rng.normal();
        const auto ya = run(a, xs);
        const auto yb = run(b, xs);
        for (std::size_t t = 0; t < len; ++t) {
            bool differs = false;
            for (std::size_t i = 0; i < ya[t].size(); ++i) {
                const double d = std::abs(ya[t][i] - yb[t][i]);
                result.max_abs_diff = std::max(result.max_abs_diff, d);
                if (!(d <= tol)) differs = true;
            }
            if (differs) {
                if (result.equivalent || t + 1 < result.counterexample.size())
                    result.counterexample.assign(xs.begin(), xs.begin() + static_cast<std::ptrdiff_t>(t + 1));
                result.equivalent = false;
                break;
            }
        }
    }
    return result;
}

TypeIISystem as_system(const Model& model) {
    model.validate();
    std::vector<std::size_t> offsets;
    std::size_t total = 0;
    for (const auto& layer : model.layers) {
        offsets.push_back(total);
        total += true_state_dim(kind_of(layer), reported_dim(layer));
    }
    TypeIISystem sys;
    sys.input_dim = model.input_dim();
    sys.output_dim = model.output_dim();
    sys.state_dim = total;
    sys.F = [model, offsets, total](const Vector& x, const Vector& state) {
        Vector next(total);
        Vector input = x;
        for (std::size_t i = 0; i < model.layers.size(); ++i) {
            const std::size_t sd = true_state_dim(kind_of(model.layers[i]), reported_dim(model.layers[i]));
            const std::span<const double> prev = std::span<const double>(state).subspan(offsets[i], sd);
            std::visit(
                [&](const auto& p) {
                    using P = std::decay_t<decltype(p)>;
                    auto step = [&](auto cache) {
                        forward(p, prev, input, cache);
                        const auto s = state_of(cache);
                        std::copy(s.begin(), s.end(), next.begin() + static_cast<std::ptrdiff_t>(offsets[i]));
                        input = Vector(output_of(cache));
                    };
                    if constexpr (std::is_same_v<P, PruParams>)
                        step(PruCache{});
                    else if constexpr (std::is_same_v<P, LstmParams>)
                        step(LstmCache{});
                    else
                        step(GruCache{});
                },
                model.layers[i]);
        }
        return next;
    };
    const std::size_t top_offset = offsets.back();
    const std::size_t top_sd = total - top_offset;
    const std::size_t k_top = reported_dim(model.layers.back());
    sys.G = [readout = model.readout, top_offset, top_sd, k_top](const Vector& state) {
        const auto top = std::span<const double>(state).subspan(top_offset + top_sd - k_top, k_top);
        Vector y(readout.l());
        readout_into(readout, top, y);
        return y;
    };
    return sys;
}

}  // namespace pru
