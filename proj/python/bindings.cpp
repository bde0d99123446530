#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <filesystem>
#include <string>
#include <vector>

#include "pru/cells.hpp"
#include "pru/config.hpp"
#include "pru/error.hpp"
#include "pru/harness.hpp"
#include "pru/network.hpp"
#include "pru/optim.hpp"
#include "pru/serialize.hpp"
#include "pru/tasks.hpp"
#include "pru/verify.hpp"

namespace py = pybind11;
using namespace pru;

namespace {

using Array = py::array_t<double, py::array::c_style | py::array::forcecast>;

LossKind loss_from_string(const std::string& name) {
    if (name == "mse_final") return LossKind::mse_final;
    if (name == "cel_every_step") return LossKind::cel_every_step;
    if (name == "cel_final") return LossKind::cel_final;
    throw ConfigError("unknown loss '" + name + "'");
}

std::vector<Vector> rows_of(const Array& a) {
    if (a.ndim() != 2) throw ShapeError("expected a 2-d array (steps x inputs), got " + std::to_string(a.ndim()) + "-d");
    std::vector<Vector> out;
    const auto r = a.unchecked<2>();
    for (py::ssize_t t = 0; t < r.shape(0); ++t) out.emplace_back(std::span<const double>(r.data(t, 0), r.shape(1)));
    return out;
}

Array matrix_array(const std::vector<Vector>& rows, std::size_t cols) {
    Array out({rows.size(), cols});
    auto w = out.mutable_unchecked<2>();
    for (std::size_t i = 0; i < rows.size(); ++i)
        for (std::size_t j = 0; j < cols; ++j) w(i, j) = rows[i][j];
    return out;
}

Array flat_array(const std::vector<double>& v) {
    Array out(v.size());
    std::copy(v.begin(), v.end(), out.mutable_data());
    return out;
}

// Targets: a vector per sequence for MSE, a label list (or one int) for CEL.
std::vector<Sequence> make_batch(const std::vector<Array>& inputs, const py::list& targets, LossKind loss) {
    if (inputs.size() != targets.size())
        throw ShapeError(std::to_string(inputs.size()) + " input sequences but " + std::to_string(targets.size()) +
                         " targets");
    std::vector<Sequence> batch(inputs.size());
    for (std::size_t i = 0; i < inputs.size(); ++i) {
        batch[i].inputs = rows_of(inputs[i]);
        py::handle t = targets[i];
        if (loss == LossKind::mse_final) {
            const Array a = py::cast<Array>(t);
            batch[i].target = Vector(std::span<const double>(a.data(), static_cast<std::size_t>(a.size())));
        } else if (py::isinstance<py::int_>(t)) {
            batch[i].labels = {t.cast<std::uint32_t>()};
        } else {
            batch[i].labels = t.cast<std::vector<std::uint32_t>>();
        }
    }
    return batch;
}

py::dict json_to_dict(const nlohmann::json& doc) {
    return py::module_::import("json").attr("loads")(doc.dump()).cast<py::dict>();
}

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "PRU, LSTM and GRU recurrent networks with exact BPTT";

    static py::exception<Error> base(m, "PruError", PyExc_RuntimeError);
    static py::exception<ShapeError> shape(m, "ShapeError", base.ptr());
    static py::exception<NumericError> numeric(m, "NumericError", base.ptr());
    static py::exception<ConfigError> config(m, "ConfigError", base.ptr());
    static py::exception<DataError> data(m, "DataError", base.ptr());
    py::register_exception_translator([](std::exception_ptr p) {
        try {
            if (p) std::rethrow_exception(p);
        } catch (const ShapeError& e) {
            py::set_error(shape, e.what());
        } catch (const NumericError& e) {
            py::set_error(numeric, e.what());
        } catch (const ConfigError& e) {
            py::set_error(config, e.what());
        } catch (const DataError& e) {
            py::set_error(data, e.what());
        } catch (const Error& e) {
            py::set_error(base, e.what());
        }
    });

    m.def(
        "count_params",
        [](const std::string& cell, std::uint64_t k, std::uint64_t mdim, std::uint64_t l) {
            return count_params(cell_kind_from_string(cell), k, mdim, l);
        },
        py::arg("cell"), py::arg("k"), py::arg("m"), py::arg("l"),
        "Parameters of a one-layer model including the readout.");
    m.def(
        "match_dim_for_params",
        [](const std::string& cell, std::uint64_t target, std::uint64_t mdim, std::uint64_t l) {
            return match_dim_for_params(cell_kind_from_string(cell), target, mdim, l);
        },
        py::arg("cell"), py::arg("target"), py::arg("m"), py::arg("l"));

    py::class_<Model>(m, "Model")
        .def(py::init([](const std::string& cell, std::size_t layers, std::size_t k, std::size_t mdim, std::size_t l,
                         const std::string& activation) {
                 return Model::make(cell_kind_from_string(cell), layers, k, mdim, l,
                                    activation_from_string(activation));
             }),
             py::arg("cell"), py::arg("layers"), py::arg("k"), py::arg("m"), py::arg("l"),
             py::arg("activation") = "identity")
        .def_property_readonly("cell", [](const Model& self) { return to_string(kind_of(self.layers.at(0))); })
        .def_property_readonly("layers", [](const Model& self) { return self.layers.size(); })
        .def_property_readonly("k", [](const Model& self) { return reported_dim(self.layers.at(0)); })
        .def_property_readonly("input_dim", &Model::input_dim)
        .def_property_readonly("output_dim", &Model::output_dim)
        .def_property_readonly("param_count", &Model::param_count)
        .def("field_names",
             [](const Model& self) {
                 std::vector<std::string> names;
                 for (const auto& [name, f] : self.named_fields()) names.push_back(name);
                 return names;
             })
        .def("get_params", [](const Model& self) { return flat_array(self.flatten()); })
        .def("set_params",
             [](Model& self, const Array& values) {
                 self.unflatten(std::span<const double>(values.data(), static_cast<std::size_t>(values.size())));
             })
        .def(
            "init_gaussian",
            [](Model& self, std::uint64_t seed) {
                Rng rng(seed);
                init_gaussian(self, rng);
            },
            py::arg("seed"))
        .def(
            "init_uniform",
            [](Model& self, double low, double high, std::uint64_t seed) {
                Rng rng(seed);
                init_uniform(self, low, high, rng);
            },
            py::arg("low"), py::arg("high"), py::arg("seed"))
        .def(
            "forward",
            [](const Model& self, const Array& xs, bool every_step) {
                const auto ys = stack(self, rows_of(xs), every_step ? Emission::every_step : Emission::final_only);
                return matrix_array(ys, self.output_dim());
            },
            py::arg("xs"), py::arg("every_step") = false,
            "Readout outputs, one row per emitted step, from the zero initial state.")
        .def(
            "loss_and_grad",
            [](const Model& self, const std::vector<Array>& inputs, const py::list& targets, const std::string& loss) {
                const LossKind kind = loss_from_string(loss);
                const auto batch = make_batch(inputs, targets, kind);
                auto res = bptt(self, batch, kind);
                return py::make_tuple(res.loss, flat_array(res.grads.flatten()));
            },
            py::arg("inputs"), py::arg("targets"), py::arg("loss") = "mse_final",
            "Batch-mean loss and its gradient, flattened like get_params().")
        .def("save", [](const Model& self, const std::string& path) { save_params(path, self); })
        .def_static("load", [](const std::string& path) { return load_params(path); });

    m.def(
        "gen_memorization",
        [](std::size_t I, std::size_t N, double delta2, std::size_t count, std::uint64_t seed) {
            Rng rng(seed);
            const auto data = gen_memorization(I, N, delta2, count, rng);
            Array xs({count, I + N}), ys({count, I});
            auto wx = xs.mutable_unchecked<2>();
            auto wy = ys.mutable_unchecked<2>();
            for (std::size_t i = 0; i < count; ++i) {
                for (std::size_t t = 0; t < I + N; ++t) wx(i, t) = data[i].inputs[t][0];
                for (std::size_t t = 0; t < I; ++t) wy(i, t) = data[i].target[t];
            }
            return py::make_tuple(xs, ys);
        },
        py::arg("I"), py::arg("N"), py::arg("delta2"), py::arg("count"), py::arg("seed"),
        "Inputs (count, I+N) and targets (count, I).");
    m.def(
        "gen_adding",
        [](std::size_t N, double delta2, std::size_t count, std::uint64_t seed) {
            Rng rng(seed);
            const auto data = gen_adding(N, delta2, count, rng);
            Array xs({count, N, std::size_t{2}}), ys(count);
            auto wx = xs.mutable_unchecked<3>();
            auto wy = ys.mutable_unchecked<1>();
            for (std::size_t i = 0; i < count; ++i) {
                for (std::size_t t = 0; t < N; ++t) {
                    wx(i, t, 0) = data[i].inputs[t][0];
                    wx(i, t, 1) = data[i].inputs[t][1];
                }
                wy(i) = data[i].target;
            }
            return py::make_tuple(xs, ys);
        },
        py::arg("N"), py::arg("delta2"), py::arg("count"), py::arg("seed"),
        "Inputs (count, N, 2) and targets (count,).");

    m.def(
        "gradcheck_suite",
        [](std::size_t points, std::uint64_t seed) {
            GradcheckOptions opts;
            opts.points = points;
            opts.seed = seed;
            py::list out;
            for (const auto& c : gradcheck_suite(opts)) {
                py::dict d;
                d["cell"] = to_string(c.cell);
                d["loss"] = to_string(c.loss);
                d["layers"] = c.layers;
                d["points"] = c.points;
                d["max_rel_error"] = c.max_rel_error;
                d["passed"] = c.passed;
                out.append(d);
            }
            return out;
        },
        py::arg("points") = 20, py::arg("seed") = 1);
    m.def(
        "lemma1_suite",
        [](std::size_t systems, std::uint64_t seed) {
            Lemma1Options opts;
            opts.systems = systems;
            opts.seed = seed;
            const auto rep = lemma1_suite(opts);
            py::dict d;
            d["systems"] = rep.systems;
            d["equivalent"] = rep.equivalent;
            d["max_abs_diff"] = rep.max_abs_diff;
            d["passed"] = rep.passed();
            return d;
        },
        py::arg("systems") = 50, py::arg("seed") = 1);

    m.def(
        "load_config",
        [](const std::string& path) { return json_to_dict(load_config(path).echo); }, py::arg("path"),
        "Validated config with defaults filled in.");
    m.def(
        "run_config",
        [](const std::string& path, std::size_t workers) {
            const auto cfg = load_config(path);
            RunOptions opts;
            opts.workers = workers;
            RunResult r;
            {
                py::gil_scoped_release release;
                r = run_config(cfg, opts);
            }
            py::dict d = json_to_dict(r.to_json());
            d["timing"] = json_to_dict(r.timing_json());
            return d;
        },
        py::arg("path"), py::arg("workers") = 1);
    m.def(
        "sweep",
        [](const std::string& path, const std::string& out_dir, std::size_t workers) {
            RunOptions opts;
            opts.workers = workers;
            std::vector<std::filesystem::path> paths;
            {
                py::gil_scoped_release release;
                paths = sweep(path, out_dir, opts);
            }
            std::vector<std::string> out;
            for (const auto& p : paths) out.push_back(p.string());
            return out;
        },
        py::arg("path"), py::arg("out_dir"), py::arg("workers") = 1);
    m.def(
        "timing_report", [](const std::string& results_dir) { return timing_report(results_dir).format(); },
        py::arg("results_dir"));
}
