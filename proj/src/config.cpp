#include "pru/config.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>

#include "pru/error.hpp"

namespace pru {

using nlohmann::json;

namespace {

// Swept field name -> location in the document.
const std::vector<std::pair<std::string, json::json_pointer>>& sweepable() {
    static const std::vector<std::pair<std::string, json::json_pointer>> fields = {
        {"k", json::json_pointer("/k")},
        {"target_param_count", json::json_pointer("/target_param_count")},
        {"layers", json::json_pointer("/layers")},
        {"I", json::json_pointer("/task_params/I")},
        {"N", json::json_pointer("/task_params/N")},
        {"delta2", json::json_pointer("/task_params/delta2")},
        {"chunk_length", json::json_pointer("/task_params/chunk_length")},
        {"train_count", json::json_pointer("/train_count")},
        {"epochs", json::json_pointer("/optimizer/epochs")},
        {"batch_size", json::json_pointer("/optimizer/batch_size")},
        {"learning_rate", json::json_pointer("/optimizer/learning_rate")},
        {"base_lr", json::json_pointer("/optimizer/base_lr")},
        {"seed", json::json_pointer("/seed")},
    };
    return fields;
}

class Section {
public:
    Section(const json& obj, std::string path) : obj_(obj), path_(std::move(path)) {
        if (!obj_.is_object()) throw ConfigError(where("") + " must be an object");
    }

    bool has(const std::string& key) {
        seen_.insert(key);
        return obj_.contains(key);
    }

    const json& raw(const std::string& key) {
        if (!has(key)) throw ConfigError("missing required field " + where(key));
        return obj_.at(key);
    }

    std::string str(const std::string& key) {
        const auto& v = raw(key);
        if (!v.is_string()) throw ConfigError(where(key) + " must be a string");
        return v.get<std::string>();
    }

    std::uint64_t uint(const std::string& key, std::uint64_t min = 0) {
        const auto& v = raw(key);
        if (!v.is_number_integer() || (v.is_number_integer() && !v.is_number_unsigned() && v.get<std::int64_t>() < 0))
            throw ConfigError(where(key) + " must be a non-negative integer");
        const auto u = v.get<std::uint64_t>();
        if (u < min) throw ConfigError(where(key) + " must be at least " + std::to_string(min));
        return u;
    }

    std::uint64_t uint_or(const std::string& key, std::uint64_t fallback, std::uint64_t min = 0) {
        return has(key) ? uint(key, min) : fallback;
    }

    double real(const std::string& key) {
        const auto& v = raw(key);
        if (!v.is_number()) throw ConfigError(where(key) + " must be a number");
        const double d = v.get<double>();
        if (!std::isfinite(d)) throw ConfigError(where(key) + " must be finite");
        return d;
    }

    double real_or(const std::string& key, double fallback) { return has(key) ? real(key) : fallback; }

    Section child(const std::string& key) { return Section(raw(key), path_.empty() ? key : path_ + "." + key); }

    // Call after all reads; rejects keys nobody asked about.
    void finish() const {
        for (const auto& [key, value] : obj_.items()) {
            if (!seen_.count(key)) throw ConfigError("unknown key " + where(key));
        }
    }

    std::string where(const std::string& key) const {
        if (key.empty()) return path_.empty() ? "config" : "'" + path_ + "'";
        return "'" + (path_.empty() ? key : path_ + "." + key) + "'";
    }

private:
    const json& obj_;
    std::string path_;
    std::set<std::string> seen_;
};

std::filesystem::path resolve(const std::filesystem::path& base, const std::string& p) {
    const std::filesystem::path path(p);
    return path.is_absolute() || base.empty() ? path : base / path;
}

std::string value_label(const json& v) {
    if (v.is_string()) return v.get<std::string>();
    return v.dump();
}

}  // namespace

std::string to_string(TaskKind task) {
    switch (task) {
        case TaskKind::memorization: return "memorization";
        case TaskKind::adding: return "adding";
        case TaskKind::charpred: return "charpred";
        case TaskKind::mnist: return "mnist";
    }
    return "?";
}

TaskKind task_kind_from_string(const std::string& name) {
    if (name == "memorization") return TaskKind::memorization;
    if (name == "adding") return TaskKind::adding;
    if (name == "charpred") return TaskKind::charpred;
    if (name == "mnist") return TaskKind::mnist;
    throw ConfigError("'task' must be one of memorization, adding, charpred, mnist (got '" + name + "')");
}

LossKind ExperimentConfig::loss() const noexcept {
    switch (task) {
        case TaskKind::charpred: return LossKind::cel_every_step;
        case TaskKind::mnist: return LossKind::cel_final;
        default: return LossKind::mse_final;
    }
}

Emission ExperimentConfig::emission() const noexcept { return emission_for(loss()); }

Activation ExperimentConfig::readout_activation() const noexcept {
    return task == TaskKind::charpred || task == TaskKind::mnist ? Activation::softmax : Activation::identity;
}

std::size_t ExperimentConfig::epochs() const noexcept {
    return optimizer == OptimizerKind::sgd ? sgd.epochs : adadelta.epochs;
}

std::size_t ExperimentConfig::batch_size() const noexcept {
    return optimizer == OptimizerKind::sgd ? sgd.batch_size : adadelta.batch_size;
}

ExperimentConfig parse_config(const json& doc, const std::filesystem::path& base_dir) {
    ExperimentConfig cfg;
    Section top(doc, "");
    cfg.task = task_kind_from_string(top.str("task"));
    try {
        cfg.cell = cell_kind_from_string(top.str("cell"));
    } catch (const ConfigError&) {
        throw ConfigError("'cell' must be one of PRU, LSTM, GRU");
    }
    const bool data_task = cfg.task == TaskKind::charpred || cfg.task == TaskKind::mnist;
    cfg.layers = top.uint_or("layers", data_task ? 2 : 1, 1);

    const bool has_k = top.has("k");
    const bool has_target = top.has("target_param_count");
    if (has_k == has_target) throw ConfigError("exactly one of 'k' and 'target_param_count' must be given");
    if (has_k) cfg.k = top.uint("k", 1);
    if (has_target) cfg.target_param_count = top.uint("target_param_count", 1);

    Section tp = top.child("task_params");
    switch (cfg.task) {
        case TaskKind::memorization:
            cfg.I = tp.uint("I", 1);
            cfg.N = tp.uint("N");
            cfg.delta2 = tp.real("delta2");
            break;
        case TaskKind::adding:
            cfg.N = tp.uint("N", 2);
            cfg.delta2 = tp.real("delta2");
            break;
        case TaskKind::charpred:
            cfg.corpus = resolve(base_dir, tp.str("corpus"));
            cfg.chunk_length = tp.uint_or("chunk_length", 50, 1);
            cfg.train_fraction = tp.real_or("train_fraction", 0.9);
            if (!(cfg.train_fraction > 0.0 && cfg.train_fraction < 1.0))
                throw ConfigError("'task_params.train_fraction' must lie strictly between 0 and 1");
            break;
        case TaskKind::mnist:
            cfg.train_images = resolve(base_dir, tp.str("train_images"));
            cfg.train_labels = resolve(base_dir, tp.str("train_labels"));
            cfg.test_images = resolve(base_dir, tp.str("test_images"));
            cfg.test_labels = resolve(base_dir, tp.str("test_labels"));
            break;
    }
    if (cfg.delta2 < 0.0) throw ConfigError("'task_params.delta2' must be non-negative");
    tp.finish();

    Section opt = top.child("optimizer");
    const std::string kind = opt.str("kind");
    if (kind == "sgd") {
        cfg.optimizer = OptimizerKind::sgd;
        cfg.sgd.batch_size = opt.uint_or("batch_size", cfg.sgd.batch_size, 1);
        cfg.sgd.learning_rate = opt.real_or("learning_rate", cfg.sgd.learning_rate);
        cfg.sgd.epochs = opt.uint_or("epochs", cfg.sgd.epochs, 1);
        cfg.sgd.validate();
    } else if (kind == "adadelta") {
        cfg.optimizer = OptimizerKind::adadelta;
        cfg.adadelta.batch_size = opt.uint_or("batch_size", cfg.adadelta.batch_size, 1);
        cfg.adadelta.base_lr = opt.real_or("base_lr", cfg.adadelta.base_lr);
        cfg.adadelta.rho = opt.real_or("rho", cfg.adadelta.rho);
        cfg.adadelta.epsilon = opt.real_or("epsilon", cfg.adadelta.epsilon);
        cfg.adadelta.epochs = opt.uint_or("epochs", cfg.adadelta.epochs, 1);
        cfg.adadelta.validate();
    } else {
        throw ConfigError("'optimizer.kind' must be sgd or adadelta (got '" + kind + "')");
    }
    opt.finish();

    // defaults: N(0,1) for the synthetic tasks, U[-0.1, 0.1] for the data tasks
    cfg.init = data_task ? InitKind::uniform : InitKind::gaussian;
    if (top.has("init")) {
        Section init = top.child("init");
        const std::string ik = init.str("kind");
        if (ik == "gaussian") {
            cfg.init = InitKind::gaussian;
        } else if (ik == "uniform") {
            cfg.init = InitKind::uniform;
            cfg.init_low = init.real_or("low", cfg.init_low);
            cfg.init_high = init.real_or("high", cfg.init_high);
            if (cfg.init_low > cfg.init_high) throw ConfigError("'init.low' exceeds 'init.high'");
        } else {
            throw ConfigError("'init.kind' must be gaussian or uniform (got '" + ik + "')");
        }
        init.finish();
    }

    cfg.restarts = top.uint_or("restarts", 1, 1);
    cfg.seed = top.uint_or("seed", 0);
    if (data_task) {
        cfg.train_count = top.uint_or("train_count", 0);
        cfg.test_count = top.uint_or("test_count", 0);
    } else {
        cfg.train_count = top.uint("train_count", 1);
        cfg.test_count = top.uint("test_count", 1);
    }
    top.has("sweep");  // consumed by expand_sweep
    top.finish();

    cfg.echo = doc;
    cfg.echo.erase("sweep");
    return cfg;
}

json read_json_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config " + path.string());
    try {
        return json::parse(in);
    } catch (const json::parse_error& e) {
        throw ConfigError("config " + path.string() + " is not valid JSON: " + e.what());
    }
}

ExperimentConfig load_config(const std::filesystem::path& path) {
    return parse_config(read_json_file(path), path.parent_path());
}

std::vector<SweepPoint> expand_sweep(const json& doc, const std::filesystem::path& base_dir) {
    if (!doc.is_object()) throw ConfigError("config must be an object");
    json base = doc;
    std::vector<json> cells;
    std::vector<std::pair<std::string, std::vector<json>>> axes;

    if (doc.contains("sweep")) {
        const json& sweep = doc.at("sweep");
        if (!sweep.is_object()) throw ConfigError("'sweep' must be an object of lists");
        for (const auto& [key, values] : sweep.items()) {
            if (!values.is_array() || values.empty())
                throw ConfigError("'sweep." + key + "' must be a non-empty list");
            if (key == "cell") {
                cells.assign(values.begin(), values.end());
                continue;
            }
            bool known = false;
            for (const auto& [name, ptr] : sweepable()) known = known || name == key;
            if (!known) throw ConfigError("'sweep." + key + "' is not a sweepable field");
            axes.emplace_back(key, std::vector<json>(values.begin(), values.end()));
        }
        if (axes.size() > 2) throw ConfigError("at most 2 fields may be swept (cell excluded)");
        base.erase("sweep");
    }
    if (cells.empty()) {
        if (!base.contains("cell")) throw ConfigError("missing required field 'cell'");
        cells.push_back(base.at("cell"));
    }
    // fix the order of axes to the sweepable() order so names are stable
    std::sort(axes.begin(), axes.end(), [](const auto& a, const auto& b) {
        auto rank = [](const std::string& n) {
            const auto& f = sweepable();
            for (std::size_t i = 0; i < f.size(); ++i)
                if (f[i].first == n) return i;
            return f.size();
        };
        return rank(a.first) < rank(b.first);
    });

    std::vector<SweepPoint> points;
    std::vector<std::size_t> idx(axes.size(), 0);
    for (const auto& cell : cells) {
        std::fill(idx.begin(), idx.end(), 0);
        while (true) {
            json d = base;
            d["cell"] = cell;
            SweepPoint pt;
            std::string name = cell.is_string() ? cell.get<std::string>() : cell.dump();
            for (std::size_t a = 0; a < axes.size(); ++a) {
                const auto& [field, values] = axes[a];
                const json& v = values[idx[a]];
                for (const auto& [fname, ptr] : sweepable()) {
                    if (fname != field) continue;
                    if (field == "k") d.erase("target_param_count");
                    if (field == "target_param_count") d.erase("k");
                    d[ptr] = v;
                }
                pt.assignment.emplace_back(field, v);
                name += "__" + field + "=" + value_label(v);
            }
            pt.config = parse_config(d, base_dir);
            // the echo records the resolved point, not the sweep
            pt.name = name;
            points.push_back(std::move(pt));

            std::size_t a = 0;
            for (; a < axes.size(); ++a) {
                if (++idx[a] < axes[a].second.size()) break;
                idx[a] = 0;
            }
            if (a == axes.size()) break;
        }
    }
    return points;
}

}  // namespace pru
