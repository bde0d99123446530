#include <doctest.h>

#include "pru/config.hpp"
#include "pru/error.hpp"

using namespace pru;
using nlohmann::json;

namespace {

json base() {
    return json::parse(R"({
        "task": "adding", "cell": "GRU", "k": 3,
        "task_params": {"N": 6, "delta2": 1.0},
        "train_count": 100, "test_count": 20,
        "optimizer": {"kind": "sgd", "batch_size": 50, "learning_rate": 0.001, "epochs": 3},
        "restarts": 2, "seed": 9
    })");
}

std::string error_of(const json& doc) {
    try {
        parse_config(doc);
    } catch (const ConfigError& e) {
        return e.what();
    }
    return "";
}

}  // namespace

TEST_CASE("valid config and derived settings") {
    const auto cfg = parse_config(base());
    CHECK(cfg.task == TaskKind::adding);
    CHECK(cfg.cell == CellKind::gru);
    CHECK(cfg.k == 3u);
    CHECK(cfg.layers == 1);
    CHECK(cfg.loss() == LossKind::mse_final);
    CHECK(cfg.emission() == Emission::final_only);
    CHECK(cfg.readout_activation() == Activation::identity);
    CHECK(cfg.init == InitKind::gaussian);
    CHECK(cfg.batch_size() == 50);
    CHECK(cfg.epochs() == 3);
}

TEST_CASE("schema violations name the field") {
    auto d = base();
    d["bogus"] = 1;
    CHECK(error_of(d).find("bogus") != std::string::npos);

    d = base();
    d["task_params"]["extra"] = 2;
    CHECK(error_of(d).find("task_params.extra") != std::string::npos);

    d = base();
    d["target_param_count"] = 100;
    CHECK(error_of(d).find("exactly one") != std::string::npos);

    d = base();
    d.erase("k");
    CHECK(error_of(d).find("exactly one") != std::string::npos);

    d = base();
    d["restarts"] = 0;
    CHECK(error_of(d).find("restarts") != std::string::npos);

    d = base();
    d["task_params"].erase("N");
    CHECK(error_of(d).find("task_params.N") != std::string::npos);

    d = base();
    d["optimizer"]["kind"] = "adam";
    CHECK(error_of(d).find("optimizer.kind") != std::string::npos);

    d = base();
    d["cell"] = "RNN";
    CHECK(error_of(d).find("cell") != std::string::npos);

    d = base();
    d["init"] = {{"kind", "uniform"}, {"low", 1.0}, {"high", 0.0}};
    CHECK(error_of(d).find("init.low") != std::string::npos);
}

TEST_CASE("data tasks default to two layers, softmax and uniform init") {
    const auto d = json::parse(R"({
        "task": "charpred", "cell": "PRU", "k": 8,
        "task_params": {"corpus": "sonnets.txt"},
        "optimizer": {"kind": "adadelta", "base_lr": 0.8, "epochs": 1}
    })");
    const auto cfg = parse_config(d, "/data");
    CHECK(cfg.layers == 2);
    CHECK(cfg.corpus == std::filesystem::path("/data/sonnets.txt"));
    CHECK(cfg.loss() == LossKind::cel_every_step);
    CHECK(cfg.emission() == Emission::every_step);
    CHECK(cfg.readout_activation() == Activation::softmax);
    CHECK(cfg.init == InitKind::uniform);
    CHECK(cfg.chunk_length == 50);
    CHECK(cfg.adadelta.base_lr == 0.8);
}

TEST_CASE("sweep expansion") {
    auto d = base();
    d["sweep"] = {{"cell", {"PRU", "LSTM", "GRU"}}, {"k", {1, 2, 3}}};
    const auto pts = expand_sweep(d);
    CHECK(pts.size() == 9);
    CHECK(pts[0].name == "PRU__k=1");
    CHECK(pts[8].name == "GRU__k=3");
    CHECK(pts[4].config.k == 2u);
    CHECK(pts[4].config.cell == CellKind::lstm);

    d["sweep"] = {{"N", {4, 6}}, {"delta2", {0.5, 1.0}}};
    const auto two = expand_sweep(d);
    CHECK(two.size() == 4);
    CHECK(two[1].config.N == 6);

    d["sweep"] = {{"N", {4}}, {"delta2", {1.0}}, {"k", {1}}};
    CHECK_THROWS_AS(expand_sweep(d), ConfigError);
    d["sweep"] = {{"colour", {1}}};
    CHECK_THROWS_AS(expand_sweep(d), ConfigError);

    d["sweep"] = {{"target_param_count", {50, 80}}};
    const auto tp = expand_sweep(d);
    CHECK_FALSE(tp[0].config.k.has_value());
    CHECK(tp[1].config.target_param_count == 80u);
    CHECK(expand_sweep(base()).size() == 1);
}
