#include <doctest.h>

#include <cmath>

#include "oracles.hpp"
#include "pru/error.hpp"
#include "pru/optim.hpp"
#include "pru/verify.hpp"

using namespace pru;

namespace {

Model random_model(CellKind kind, std::size_t layers, std::size_t k, std::size_t m, std::size_t l, Activation h,
                   Rng& rng) {
    Model model = Model::make(kind, layers, k, m, l, h);
    init_gaussian(model, rng);
    return model;
}

SequenceBatch mse_batch(std::size_t n, std::size_t T, std::size_t m, std::size_t l, Rng& rng) {
    SequenceBatch batch(n);
    for (auto& s : batch) {
        for (std::size_t t = 0; t < T; ++t) s.inputs.push_back(Vector(oracle::random_vec(m, rng)));
        s.target = Vector(oracle::random_vec(l, rng));
    }
    return batch;
}

}  // namespace

TEST_CASE("mse_loss") {
    CHECK(mse_loss(Vector{1, 2}, Vector{1, 2}) == 0.0);
    CHECK(mse_loss(Vector{1, 0}, Vector{0, 1}) == 2.0);
    Rng rng(1);
    const auto a = oracle::random_vec(7, rng), b = oracle::random_vec(7, rng);
    double want = 0.0;
    for (int i = 0; i < 7; ++i) want += (a[i] - b[i]) * (a[i] - b[i]);
    CHECK(std::abs(mse_loss(Vector(a), Vector(b)) - want) <= 1e-15 * want);
    CHECK_THROWS_AS(mse_loss(Vector(2), Vector(3)), ShapeError);
}

TEST_CASE("cel_loss") {
    const std::vector<Vector> onehot = {Vector{0, 1, 0}, Vector{1, 0, 0}};
    const std::vector<std::uint32_t> idx = {1, 0};
    CHECK(cel_loss(onehot, idx) == 0.0);

    const std::vector<Vector> uniform(3, Vector(5, 0.2));
    const std::vector<std::uint32_t> labels = {0, 3, 4};
    CHECK(cel_loss(uniform, labels) == doctest::Approx(std::log(5.0)).epsilon(1e-15));

    Rng rng(2);
    std::vector<Vector> preds;
    std::vector<std::uint32_t> targets;
    double want = 0.0;
    for (int t = 0; t < 4; ++t) {
        Vector p(3);
        double z = 0.0;
        for (double& v : p) z += (v = rng.uniform() + 0.01);
        for (double& v : p) v /= z;
        targets.push_back(static_cast<std::uint32_t>(rng.below(3)));
        want -= std::log(p[targets.back()]);
        preds.push_back(p);
    }
    CHECK(std::abs(cel_loss(preds, targets) - want / 4) <= 1e-12);

    std::uint64_t clamped = 0;
    const std::vector<Vector> zero = {Vector{1, 0}};
    const std::vector<std::uint32_t> one = {1};
    CHECK(cel_loss(zero, one, &clamped) == doctest::Approx(-std::log(1e-12)));
    CHECK(clamped == 1);
}

TEST_CASE("accuracy") {
    const std::vector<std::uint32_t> a = {1, 2, 3, 4};
    CHECK(accuracy(a, a) == 1.0);
    const std::vector<std::uint32_t> b = {0, 0, 0, 0};
    CHECK(accuracy(a, b) == 0.0);
    const std::vector<std::uint32_t> c = {1, 2, 3, 0};
    CHECK(accuracy(a, c) == 0.75);
    CHECK_THROWS(accuracy(a, std::vector<std::uint32_t>{1}));
}

TEST_CASE("bptt on a flat minimum") {
    Model model = Model::make(CellKind::pru, 1, 3, 1, 2, Activation::identity);
    SequenceBatch batch(4);
    for (auto& s : batch) {
        s.inputs.assign(5, Vector(1));
        s.target = Vector(2);
    }
    const auto res = bptt(model, batch, LossKind::mse_final);
    CHECK(res.loss == 0.0);
    for (double g : res.grads.flatten()) CHECK(g == 0.0);
}

TEST_CASE("bptt matches finite differences for every loss kind") {
    Rng rng(3);
    for (CellKind kind : {CellKind::pru, CellKind::lstm, CellKind::gru}) {
        for (std::size_t layers : {1, 2}) {
            const auto m1 = random_model(kind, layers, 3, 2, 2, Activation::sigmoid, rng);
            CHECK(gradcheck_model(m1, mse_batch(3, 4, 2, 2, rng), LossKind::mse_final, 1e-6, 1e-3) < 1e-5);

            const auto m2 = random_model(kind, layers, 3, 2, 4, Activation::softmax, rng);
            SequenceBatch cls(3);
            for (auto& s : cls) {
                for (int t = 0; t < 5; ++t) s.inputs.push_back(Vector(oracle::random_vec(2, rng)));
                s.labels = {static_cast<std::uint32_t>(rng.below(4))};
            }
            CHECK(gradcheck_model(m2, cls, LossKind::cel_final, 1e-6, 1e-3) < 1e-5);
        }
    }
}

TEST_CASE("readout bias gradient is affine in the targets") {
    Rng rng(4);
    const auto model = random_model(CellKind::gru, 1, 3, 2, 2, Activation::identity, rng);
    auto batch = mse_batch(2, 3, 2, 2, rng);
    auto doubled = batch;
    for (auto& s : doubled)
        for (double& v : s.target) v *= 2;
    auto zero_t = batch;
    for (auto& s : zero_t) s.target.fill(0.0);
    const auto bias_grad = [&](const SequenceBatch& b) {
        auto g = bptt(model, b, LossKind::mse_final).grads.readout.b;
        CHECK(gradcheck_model(model, b, LossKind::mse_final, 1e-6, 1e-3) < 1e-5);
        return g;
    };
    const auto g0 = bias_grad(zero_t), g1 = bias_grad(batch), g2 = bias_grad(doubled);
    for (std::size_t i = 0; i < 2; ++i) CHECK(std::abs((g2[i] - g0[i]) - 2 * (g1[i] - g0[i])) <= 1e-12);
}

TEST_CASE("non-finite gradients name the field") {
    Model g = Model::make(CellKind::pru, 1, 2, 1, 1, Activation::identity);
    g.readout.W(0, 1) = NAN;
    try {
        check_finite(g);
        FAIL("expected NumericError");
    } catch (const NumericError& e) {
        CHECK(std::string(e.what()).find("readout.W") != std::string::npos);
    }
}

TEST_CASE("batch gradient is the mean over sequences") {
    Rng rng(5);
    const auto model = random_model(CellKind::pru, 1, 2, 2, 1, Activation::identity, rng);
    const auto batch = mse_batch(3, 3, 2, 1, rng);
    const auto all = bptt(model, batch, LossKind::mse_final);
    std::vector<double> sum(model.param_count());
    double loss = 0.0;
    for (const auto& s : batch) {
        const auto one = bptt(model, SequenceBatch{s}, LossKind::mse_final);
        loss += one.loss;
        const auto f = one.grads.flatten();
        for (std::size_t i = 0; i < f.size(); ++i) sum[i] += f[i];
    }
    CHECK(all.loss == doctest::Approx(loss / 3).epsilon(1e-14));
    const auto f = all.grads.flatten();
    for (std::size_t i = 0; i < f.size(); ++i) CHECK(f[i] == doctest::Approx(sum[i] / 3).epsilon(1e-12));
}

TEST_CASE("sgd_step") {
    Rng rng(6);
    auto model = random_model(CellKind::gru, 1, 2, 1, 1, Activation::identity, rng);
    const auto before = model.flatten();
    sgd_step(model, model.zeros_like(), 0.1);
    CHECK(model.flatten() == before);
    auto g = model.zeros_like();
    for (auto& [n, f] : g.named_fields())
        for (double& v : f.values) v = 1.0;
    sgd_step(model, g, 0.0);
    CHECK(model.flatten() == before);

    auto tiny = Model::make(CellKind::pru, 1, 1, 1, 1, Activation::identity);
    auto tg = tiny.zeros_like();
    tiny.readout.b[0] = 1.0;
    tg.readout.b[0] = 2.0;
    sgd_step(tiny, tg, 0.1);
    CHECK(tiny.readout.b[0] == doctest::Approx(0.8).epsilon(1e-15));
}

TEST_CASE("small SGD steps do not increase the batch loss") {
    for (CellKind kind : {CellKind::pru, CellKind::lstm, CellKind::gru}) {
        Rng rng(7);
        int ok = 0;
        for (int trial = 0; trial < 100; ++trial) {
            auto model = random_model(kind, 1, 3, 2, 2, Activation::identity, rng);
            const auto batch = mse_batch(4, 4, 2, 2, rng);
            const auto res = bptt(model, batch, LossKind::mse_final);
            sgd_step(model, res.grads, 1e-4);
            if (bptt(model, batch, LossKind::mse_final).loss <= res.loss) ++ok;
        }
        CHECK(ok >= 95);
    }
}

TEST_CASE("adadelta scalar hand evaluation") {
    AdadeltaConfig cfg;
    cfg.base_lr = 0.8;
    AdadeltaState st(cfg, 1);
    std::vector<double> theta = {0.0};
    std::vector<double> zero = {0.0};
    st.step(theta, zero);
    CHECK(theta[0] == 0.0);

    std::vector<double> g = {1.0};
    st.step(theta, g);
    CHECK(std::abs(theta[0] - -0.003577672987448670888) <= 1e-15);
    const double after_first = theta[0];
    st.step(theta, g);
    CHECK(std::abs((theta[0] - after_first) - -0.003623249812426565894) <= 1e-15);
    for (double v : st.mean_sq_grad()) CHECK(v >= 0.0);
    for (double v : st.mean_sq_update()) CHECK(v >= 0.0);
}

TEST_CASE("adadelta under a constant gradient") {
    AdadeltaConfig cfg;
    AdadeltaState st(cfg, 1);
    std::vector<double> theta = {0.0}, g = {0.5};
    // scalar simulation of the update rule
    double eg = 0.0, ed = 0.0, prev_mag = 0.0;
    for (int i = 0; i < 1000; ++i) {
        const double before = theta[0];
        st.step(theta, g);
        eg = 0.95 * eg + 0.05 * 0.25;
        const double d = -std::sqrt(ed + 1e-6) / std::sqrt(eg + 1e-6) * 0.5;
        ed = 0.95 * ed + 0.05 * d * d;
        const double mag = std::abs(theta[0] - before);
        CHECK(mag == doctest::Approx(std::abs(d)).epsilon(1e-9));
        CHECK(mag >= prev_mag);
        prev_mag = mag;
    }
}

TEST_CASE("adadelta direction is invariant to gradient scale") {
    Rng rng(8);
    std::vector<double> g(6);
    for (double& v : g) v = (rng.uniform() < 0.5 ? -1 : 1) * (1 + rng.uniform());
    for (double scale : {1.0, 3.0, 100.0}) {
        AdadeltaState a(AdadeltaConfig{}, 6), b(AdadeltaConfig{}, 6);
        std::vector<double> ta(6, 0.0), tb(6, 0.0), gs(g);
        for (double& v : gs) v *= scale;
        a.step(ta, g);
        b.step(tb, gs);
        double na = 0.0, nb = 0.0, dot = 0.0;
        for (int i = 0; i < 6; ++i) {
            na += ta[i] * ta[i];
            nb += tb[i] * tb[i];
            dot += ta[i] * tb[i];
        }
        CHECK(std::abs(dot / std::sqrt(na * nb) - 1.0) <= 1e-9);
        CHECK(std::sqrt(nb / na) <= 1.0 + 1e-6 / (0.05 * 1.0));
    }
}

TEST_CASE("initializers") {
    auto m = Model::make(CellKind::lstm, 1, 3, 2, 2, Activation::identity);
    Rng rng(9);
    init_uniform(m, 0.0, 0.0, rng);
    for (double v : m.flatten()) CHECK(v == 0.0);
    init_uniform(m, -0.1, 0.1, rng);
    for (double v : m.flatten()) {
        CHECK(v >= -0.1);
        CHECK(v <= 0.1);
    }
    CHECK_THROWS_AS(init_uniform(m, 1.0, 0.0, rng), ConfigError);

    std::vector<double> draws(1000000);
    Rng g(10);
    init_gaussian(draws, g);
    double mean = 0.0, var = 0.0;
    for (double v : draws) mean += v;
    mean /= draws.size();
    for (double v : draws) var += (v - mean) * (v - mean);
    var /= draws.size();
    CHECK(std::abs(mean) <= 0.005);
    CHECK(std::abs(var - 1.0) <= 0.01);

    Rng a(42), b(42);
    auto ma = m, mb = m;
    init_gaussian(ma, a);
    init_gaussian(mb, b);
    CHECK(ma.flatten() == mb.flatten());
}

TEST_CASE("config validation") {
    SgdConfig s;
    s.learning_rate = -1;
    CHECK_THROWS_AS(s.validate(), ConfigError);
    AdadeltaConfig a;
    a.rho = 1.0;
    CHECK_THROWS_AS(a.validate(), ConfigError);
}
