#include <doctest.h>

#include <cmath>

#include "oracles.hpp"
#include "pru/cells.hpp"
#include "pru/error.hpp"
#include "pru/network.hpp"

using namespace pru;

namespace {

Vector rand_vector(std::size_t n, Rng& rng) { return Vector(oracle::random_vec(n, rng)); }

}  // namespace

TEST_CASE("pru_step saturation cases") {
    auto p = PruParams::zeros(3, 2);
    auto st = pru_step(p, Vector(3), Vector(2));
    CHECK(st.s == Vector(3));
    CHECK(st.cache.u == Vector(3));
    CHECK(st.cache.c == Vector(3, 0.5));

    Rng rng(1);
    const Vector prev = rand_vector(3, rng);
    p.b_c.fill(50.0);
    st = pru_step(p, prev, rand_vector(2, rng));
    for (std::size_t i = 0; i < 3; ++i) CHECK(std::abs(st.s[i] - prev[i]) <= 1e-12);

    p.b_c.fill(-50.0);
    st = pru_step(p, prev, rand_vector(2, rng));
    for (double v : st.s) CHECK(std::abs(v) <= 1e-12);
}

TEST_CASE("pru_step matches transcription") {
    Rng rng(2);
    for (int trial = 0; trial < 200; ++trial) {
        auto p = PruParams::zeros(3, 2);
        oracle::randomize(p, rng);
        const auto s = oracle::random_vec(3, rng);
        const auto x = oracle::random_vec(2, rng);
        CHECK(oracle::max_abs_diff(oracle::pru(p, s, x), pru_step(p, Vector(s), Vector(x)).s) <= 1e-15);
    }
}

TEST_CASE("lstm_step saturation and transcription") {
    auto p = LstmParams::zeros(2, 2);
    auto st = lstm_step(p, {Vector(2), Vector(2)}, Vector(2));
    CHECK(st.cache.i == Vector(2, 0.5));
    CHECK(st.cache.f == Vector(2, 0.5));
    CHECK(st.cache.o == Vector(2, 0.5));
    CHECK(st.cache.g == Vector(2));
    CHECK(st.state.c == Vector(2));
    CHECK(st.state.h == Vector(2));

    Rng rng(3);
    p.b_f.fill(50.0);
    p.b_i.fill(-50.0);
    const Vector c_prev = rand_vector(2, rng);
    st = lstm_step(p, {c_prev, rand_vector(2, rng)}, rand_vector(2, rng));
    for (std::size_t i = 0; i < 2; ++i) CHECK(std::abs(st.state.c[i] - c_prev[i]) <= 1e-12);

    for (int trial = 0; trial < 200; ++trial) {
        auto q = LstmParams::zeros(2, 2);
        oracle::randomize(q, rng);
        const auto c = oracle::random_vec(2, rng), h = oracle::random_vec(2, rng), x = oracle::random_vec(2, rng);
        const auto want = oracle::lstm(q, c, h, x);
        const auto got = lstm_step(q, {Vector(c), Vector(h)}, Vector(x));
        CHECK(oracle::max_abs_diff(want.c, got.state.c) <= 1e-15);
        CHECK(oracle::max_abs_diff(want.h, got.state.h) <= 1e-15);
    }
}

TEST_CASE("lstm gates see the previous cell state") {
    Rng rng(4);
    auto p = LstmParams::zeros(2, 1);
    oracle::randomize(p, rng);
    const Vector h = rand_vector(2, rng), x = rand_vector(1, rng);
    const auto a = lstm_step(p, {Vector{0.0, 0.0}, h}, x);
    const auto b = lstm_step(p, {Vector{1.0, -1.0}, h}, x);
    CHECK(a.cache.i != b.cache.i);
}

TEST_CASE("gru_step saturation and transcription") {
    auto p = GruParams::zeros(3, 2);
    auto st = gru_step(p, Vector(3), Vector(2));
    CHECK(st.cache.z == Vector(3, 0.5));
    CHECK(st.cache.r == Vector(3, 0.5));
    CHECK(st.cache.cand == Vector(3));
    CHECK(st.s == Vector(3));

    Rng rng(5);
    p.b_z.fill(50.0);
    const Vector prev = rand_vector(3, rng);
    st = gru_step(p, prev, rand_vector(2, rng));
    for (std::size_t i = 0; i < 3; ++i) CHECK(std::abs(st.s[i] - prev[i]) <= 1e-12);

    for (int trial = 0; trial < 200; ++trial) {
        auto q = GruParams::zeros(3, 2);
        oracle::randomize(q, rng);
        const auto s = oracle::random_vec(3, rng), x = oracle::random_vec(2, rng);
        CHECK(oracle::max_abs_diff(oracle::gru(q, s, x), gru_step(q, Vector(s), Vector(x)).s) <= 1e-15);
    }
}

TEST_CASE("step shape errors") {
    CHECK_THROWS_AS(pru_step(PruParams::zeros(3, 2), Vector(2), Vector(2)), ShapeError);
    CHECK_THROWS_AS(gru_step(GruParams::zeros(3, 2), Vector(3), Vector(1)), ShapeError);
    CHECK_THROWS_AS(lstm_step(LstmParams::zeros(2, 2), {Vector(2), Vector(3)}, Vector(2)), ShapeError);
}

TEST_CASE("gate ranges, PRU boundedness and interpolation identity") {
    Rng rng(6);
    auto p = PruParams::zeros(4, 2);
    oracle::randomize(p, rng);
    Vector s(4);
    for (int t = 0; t < 500; ++t) {
        const Vector x = rand_vector(2, rng);
        const auto st = pru_step(p, s, x);
        for (std::size_t i = 0; i < 4; ++i) {
            CHECK(st.cache.c[i] > 0.0);
            CHECK(st.cache.c[i] < 1.0);
            CHECK(std::abs(st.cache.u[i]) < 1.0);
            CHECK(std::abs(st.s[i]) <= 1.0);
            CHECK(std::abs((st.s[i] - st.cache.u[i]) - st.cache.c[i] * (s[i] - st.cache.u[i])) <= 1e-12);
        }
        s = st.s;
    }
}

TEST_CASE("step purity") {
    Rng rng(7);
    auto p = GruParams::zeros(3, 2);
    oracle::randomize(p, rng);
    const Vector s = rand_vector(3, rng), x = rand_vector(2, rng);
    CHECK(gru_step(p, s, x).s == gru_step(p, s, x).s);
}

TEST_CASE("readout") {
    auto r = ReadoutParams::zeros(3, 3, Activation::identity);
    r.W = Matrix::identity(3);
    CHECK(readout(r, Vector{1, -2, 3}) == Vector{1, -2, 3});

    auto q = ReadoutParams::zeros(3, 1, Activation::identity);
    q.W = Matrix(1, 3, {1, 2, 3});
    q.b = Vector{0.5};
    CHECK(readout(q, Vector{1, 1, 1}) == Vector{6.5});

    Rng rng(8);
    auto sm = ReadoutParams::zeros(4, 5, Activation::softmax);
    oracle::randomize(sm, rng);
    const auto y = readout(sm, rand_vector(4, rng));
    double sum = 0.0;
    for (double v : y) sum += v;
    CHECK(std::abs(sum - 1.0) <= 1e-12);
    CHECK_THROWS_AS(readout(sm, Vector(3)), ShapeError);
}

TEST_CASE("LSTM readout ignores the cell state") {
    Rng rng(9);
    auto m = Model::make(CellKind::lstm, 1, 3, 2, 2, Activation::identity);
    for (auto& [name, f] : m.named_fields())
        for (double& v : f.values) v = rng.normal();
    const std::vector<Vector> xs = {rand_vector(2, rng), rand_vector(2, rng)};
    const auto res = unroll(m.layers[0], m.readout, xs, Emission::final_only);
    const auto h = Vector(std::span<const double>(res.states.back()).subspan(3));
    CHECK(readout(m.readout, h) == res.outputs.back());
}

TEST_CASE("unroll base case, saturation and manual chaining") {
    Rng rng(10);
    auto layer = PruParams::zeros(3, 2);
    oracle::randomize(layer, rng);
    auto r = ReadoutParams::zeros(3, 2, Activation::tanh);
    oracle::randomize(r, rng);

    const Vector x0 = rand_vector(2, rng);
    const std::vector<Vector> one = {x0};
    const auto single = unroll(layer, r, one, Emission::final_only);
    const auto step = pru_step(layer, Vector(3), x0);
    CHECK(single.states.back() == step.s);
    CHECK(single.outputs.back() == readout(r, step.s));

    std::vector<Vector> xs;
    for (int t = 0; t < 5; ++t) xs.push_back(rand_vector(2, rng));
    const auto res = unroll(layer, r, xs, Emission::every_step);
    Vector s(3);
    for (const auto& x : xs) s = pru_step(layer, s, x).s;
    CHECK(res.states.back() == s);
    CHECK(res.outputs.size() == 5);
    CHECK(unroll(layer, r, xs, Emission::final_only).outputs.size() == 1);

    auto locked = PruParams::zeros(3, 2);
    oracle::randomize(locked, rng);
    locked.b_c.fill(50.0);
    locked.C_s.fill(0.0);
    locked.C_x.fill(0.0);
    for (double v : unroll(locked, r, xs, Emission::final_only).states.back()) CHECK(std::abs(v) <= 1e-12);
}

TEST_CASE("unroll shape errors carry the time index") {
    auto layer = PruParams::zeros(2, 2);
    const auto r = ReadoutParams::zeros(2, 1, Activation::identity);
    const std::vector<Vector> xs = {Vector(2), Vector(2), Vector(3)};
    try {
        unroll(layer, r, xs, Emission::final_only);
        FAIL("expected ShapeError");
    } catch (const ShapeError& e) {
        CHECK(std::string(e.what()).find("t=3") != std::string::npos);
    }
}

TEST_CASE("stack") {
    Rng rng(11);
    std::vector<Vector> xs;
    for (int t = 0; t < 3; ++t) xs.push_back(rand_vector(2, rng));

    auto single = Model::make(CellKind::gru, 1, 3, 2, 2, Activation::identity);
    for (auto& [n, f] : single.named_fields())
        for (double& v : f.values) v = rng.normal();
    CHECK(stack(single, xs, Emission::every_step) ==
          unroll(single.layers[0], single.readout, xs, Emission::every_step).outputs);

    auto two = Model::make(CellKind::gru, 2, 3, 2, 2, Activation::identity);
    for (auto& [n, f] : two.named_fields())
        for (double& v : f.values) v = rng.normal();
    const auto out = stack(two, xs, Emission::every_step);
    const auto& g1 = std::get<GruParams>(two.layers[0]);
    const auto& g2 = std::get<GruParams>(two.layers[1]);
    oracle::Vec s1(3), s2(3);
    for (std::size_t t = 0; t < 3; ++t) {
        s1 = oracle::gru(g1, s1, xs[t].values());
        s2 = oracle::gru(g2, s2, s1);
        const auto y = oracle::affine(two.readout.W, s2, two.readout.b);
        CHECK(oracle::max_abs_diff(y, out[t]) <= 1e-14);
    }

    auto pru2 = Model::make(CellKind::pru, 2, 3, 2, 1, Activation::identity);
    for (auto& [n, f] : pru2.named_fields())
        for (double& v : f.values) v = rng.normal();
    auto& top = std::get<PruParams>(pru2.layers[1]);
    top.C_s.fill(0.0);
    top.C_x.fill(0.0);
    top.b_c.fill(50.0);
    const auto y0 = readout(pru2.readout, Vector(3));
    for (const auto& y : stack(pru2, xs, Emission::every_step)) CHECK(std::abs(y[0] - y0[0]) <= 1e-12);

    auto bad = two;
    bad.layers[1] = GruParams::zeros(3, 4);
    CHECK_THROWS_AS(bad.validate(), ShapeError);
}

TEST_CASE("count_params examples") {
    CHECK(count_params(CellKind::pru, 1, 1, 1) == 8);
    CHECK(count_params(CellKind::gru, 1, 1, 1) == 11);
    CHECK(count_params(CellKind::lstm, 3, 2, 1) == 103);
}

TEST_CASE("count_params equals enumerated field sizes") {
    for (CellKind kind : {CellKind::pru, CellKind::lstm, CellKind::gru})
        for (std::size_t k : {1, 2, 5, 8})
            for (std::size_t m : {1, 28})
                for (std::size_t l : {1, 10}) {
                    const auto model = Model::make(kind, 1, k, m, l, Activation::identity);
                    std::size_t n = 0;
                    for (const auto& [name, f] : model.named_fields()) n += f.values.size();
                    CHECK(count_params(kind, k, m, l) == n);
                    CHECK(model.param_count() == n);
                }
}

TEST_CASE("match_dim_for_params") {
    for (CellKind kind : {CellKind::pru, CellKind::lstm, CellKind::gru}) {
        CHECK(match_dim_for_params(kind, count_params(kind, 5, 3, 2), 3, 2) == 5);
        CHECK(match_dim_for_params(kind, count_params(kind, 5, 3, 2) - 1, 3, 2) == 4);
    }
    CHECK_THROWS_AS(match_dim_for_params(CellKind::pru, 7, 1, 1), ConfigError);

    // GRU count is 3k^2 + (3m + 3 + l)k + l; largest k from the quadratic formula
    for (std::uint64_t m : {1, 2, 28}) {
        for (std::uint64_t l : {1, 10}) {
            for (std::uint64_t k8 : {2, 8, 20}) {
                const auto target = count_params(CellKind::lstm, k8, m, l);
                const double a = 3.0, b = 3.0 * m + 3.0 + l, c = static_cast<double>(l) - static_cast<double>(target);
                auto k = static_cast<std::uint64_t>(std::floor((-b + std::sqrt(b * b - 4 * a * c)) / (2 * a)));
                while (count_params(CellKind::gru, k + 1, m, l) <= target) ++k;
                while (count_params(CellKind::gru, k, m, l) > target) --k;
                CHECK(match_dim_for_params(CellKind::gru, target, m, l) == k);
            }
        }
    }
}

TEST_CASE("true state dimension") {
    CHECK(true_state_dim(CellKind::lstm, 4) == 8);
    CHECK(true_state_dim(CellKind::pru, 4) == 4);
    auto m = Model::make(CellKind::lstm, 1, 4, 2, 1, Activation::identity);
    const std::vector<Vector> xs = {Vector(2)};
    CHECK(unroll(m.layers[0], m.readout, xs, Emission::final_only).states[0].size() == 8);
}

TEST_CASE("model flatten round-trip and names") {
    auto m = Model::make(CellKind::lstm, 2, 2, 3, 2, Activation::softmax);
    std::vector<double> v(m.param_count());
    for (std::size_t i = 0; i < v.size(); ++i) v[i] = static_cast<double>(i);
    m.unflatten(v);
    CHECK(m.flatten() == v);
    CHECK(m.named_fields().front().first == "layer0.W_i");
    CHECK(m.named_fields().back().first == "readout.b");
    CHECK_THROWS_AS(m.unflatten(std::vector<double>(3)), ShapeError);
    CHECK(cell_kind_from_string("gru") == CellKind::gru);
    CHECK(to_string(CellKind::lstm) == "LSTM");
}
