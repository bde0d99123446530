#include "pru/harness.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <mutex>
#include <numeric>
#include <set>
#include <sstream>
#include <thread>

#include "pru/error.hpp"
#include "pru/tasks.hpp"

namespace pru {

using nlohmann::json;

namespace {

constexpr int results_schema_version = 1;
constexpr std::uint64_t data_salt = 0xDA7A5E7ULL;
constexpr std::uint64_t shuffle_salt = 0x5A0FF1EULL;

void parallel_for(std::size_t n, std::size_t workers, const std::function<void(std::size_t)>& fn) {
    workers = std::max<std::size_t>(1, std::min(workers, n));
    if (workers == 1) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr error;
    std::mutex error_mutex;
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w) {
        pool.emplace_back([&] {
            for (std::size_t i = next++; i < n; i = next++) {
                try {
                    fn(i);
                } catch (...) {
                    std::lock_guard lock(error_mutex);
                    if (!error) error = std::current_exception();
                }
            }
        });
    }
    for (auto& t : pool) t.join();
    if (error) std::rethrow_exception(error);
}

std::string metric_name(TaskKind task) {
    switch (task) {
        case TaskKind::charpred: return "cel";
        case TaskKind::mnist: return "accuracy";
        default: return "mse";
    }
}

std::string fmt_double(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

json number_or_null(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

double number_from(const json& v) {
    return v.is_null() ? std::numeric_limits<double>::quiet_NaN() : v.get<double>();
}

std::string read_text(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError(DataError::Kind::unreadable, "cannot open " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::filesystem::path timing_path_for(const std::filesystem::path& results_path) {
    auto p = results_path;
    p.replace_extension(".timing.json");
    return p;
}

double evaluate(const Model& model, const ExperimentConfig& cfg, std::span<const Sequence> test, Workspace& ws) {
    if (test.empty()) throw ConfigError("test set is empty");
    switch (cfg.task) {
        case TaskKind::memorization:
        case TaskKind::adding: {
            double total = 0.0;
            for (const auto& seq : test) total += sequence_loss(model, seq, LossKind::mse_final, ws);
            return total / static_cast<double>(test.size());
        }
        case TaskKind::charpred: {
            double total = 0.0;
            std::size_t steps = 0;
            for (const auto& seq : test) {
                total += sequence_loss(model, seq, LossKind::cel_every_step, ws) * static_cast<double>(seq.labels.size());
                steps += seq.labels.size();
            }
            return total / static_cast<double>(steps);
        }
        case TaskKind::mnist: {
            std::size_t correct = 0;
            for (const auto& seq : test) {
                forward_pass(model, seq.inputs, Emission::final_only, ws);
                if (argmax(ws.outputs[0]) == seq.labels[0]) ++correct;
            }
            return static_cast<double>(correct) / static_cast<double>(test.size());
        }
    }
    return 0.0;
}

template <class T>
void take_prefix(std::vector<T>& v, std::size_t n, const char* what) {
    if (n == 0) return;
    if (n > v.size()) {
        throw ConfigError(std::string("'") + what + "' is " + std::to_string(n) + " but only " +
                          std::to_string(v.size()) + " are available");
    }
    v.resize(n);
}

}  // namespace

// ---------------------------------------------------------------- data

PreparedData prepare_data(const ExperimentConfig& cfg) {
    PreparedData data;
    Rng rng(mix_seed(cfg.seed, data_salt));
    switch (cfg.task) {
        case TaskKind::memorization: {
            for (const auto& inst : gen_memorization(cfg.I, cfg.N, cfg.delta2, cfg.train_count, rng))
                data.train.push_back(to_sequence(inst));
            for (const auto& inst : gen_memorization(cfg.I, cfg.N, cfg.delta2, cfg.test_count, rng))
                data.test.push_back(to_sequence(inst));
            data.input_dim = 1;
            data.output_dim = cfg.I;
            break;
        }
        case TaskKind::adding: {
            for (const auto& inst : gen_adding(cfg.N, cfg.delta2, cfg.train_count, rng))
                data.train.push_back(to_sequence(inst));
            for (const auto& inst : gen_adding(cfg.N, cfg.delta2, cfg.test_count, rng))
                data.test.push_back(to_sequence(inst));
            data.input_dim = 2;
            data.output_dim = 1;
            break;
        }
        case TaskKind::charpred: {
            const auto corpus = load_char_corpus(cfg.corpus, cfg.train_fraction);
            data.train = char_chunks(corpus.train(), corpus.K(), cfg.chunk_length);
            data.test = char_chunks(corpus.test(), corpus.K(), cfg.chunk_length);
            take_prefix(data.train, cfg.train_count, "train_count");
            take_prefix(data.test, cfg.test_count, "test_count");
            data.input_dim = corpus.K();
            data.output_dim = corpus.K();
            break;
        }
        case TaskKind::mnist: {
            const auto train = load_mnist_idx(cfg.train_images, cfg.train_labels);
            const auto test = load_mnist_idx(cfg.test_images, cfg.test_labels);
            if (train.cols != test.cols) throw DataError(DataError::Kind::malformed, "train/test image widths differ");
            std::size_t n_train = cfg.train_count ? cfg.train_count : train.size();
            std::size_t n_test = cfg.test_count ? cfg.test_count : test.size();
            if (n_train > train.size() || n_test > test.size())
                throw ConfigError("'train_count'/'test_count' exceed the images available");
            for (std::size_t i = 0; i < n_train; ++i) data.train.push_back(mnist_sequence(train, i));
            for (std::size_t i = 0; i < n_test; ++i) data.test.push_back(mnist_sequence(test, i));
            data.input_dim = train.cols;
            data.output_dim = 10;
            break;
        }
    }
    if (data.train.empty()) throw DataError(DataError::Kind::empty, "training set is empty");
    if (data.test.empty()) throw DataError(DataError::Kind::empty, "test set is empty");
    return data;
}

std::uint64_t model_param_count(CellKind kind, std::size_t layers, std::uint64_t k, std::uint64_t m,
                                std::uint64_t l) {
    std::uint64_t total = count_params(kind, k, m, l);
    const std::uint64_t readout = l * k + l;
    for (std::size_t i = 1; i < layers; ++i) total += count_params(kind, k, k, l) - readout;
    return total;
}

std::size_t resolve_k(const ExperimentConfig& cfg, std::size_t m, std::size_t l) {
    if (cfg.k) return *cfg.k;
    const auto target = *cfg.target_param_count;
    if (model_param_count(cfg.cell, cfg.layers, 1, m, l) > target) {
        throw ConfigError("'target_param_count' " + std::to_string(target) + " is below the smallest " +
                          to_string(cfg.cell) + " model (" +
                          std::to_string(model_param_count(cfg.cell, cfg.layers, 1, m, l)) + ")");
    }
    std::size_t k = 1;
    while (model_param_count(cfg.cell, cfg.layers, k + 1, m, l) <= target) ++k;
    return k;
}

// ---------------------------------------------------------------- training

RestartResult train_restart(const ExperimentConfig& cfg, const PreparedData& data, std::size_t k, std::uint64_t seed,
                            Model* trained) {
    RestartResult out;
    out.seed = seed;
    Model model = Model::make(cfg.cell, cfg.layers, k, data.input_dim, data.output_dim, cfg.readout_activation());
    Rng init_rng(seed);
    if (cfg.init == InitKind::gaussian)
        init_gaussian(model, init_rng);
    else
        init_uniform(model, cfg.init_low, cfg.init_high, init_rng);

    Rng shuffle_rng(mix_seed(seed, shuffle_salt));
    const LossKind loss = cfg.loss();
    const std::size_t batch_size = cfg.batch_size();
    Workspace ws;
    GradBundle grads = model.zeros_like();
    std::optional<AdadeltaState> adadelta;
    if (cfg.optimizer == OptimizerKind::adadelta) adadelta.emplace(cfg.adadelta, model.param_count());

    std::vector<std::size_t> order(data.train.size());
    std::vector<Sequence> batch;
    try {
        for (std::size_t epoch = 0; epoch < cfg.epochs(); ++epoch) {
            std::iota(order.begin(), order.end(), std::size_t{0});
            shuffle_rng.shuffle(order);
            double loss_sum = 0.0;
            const auto start = std::chrono::steady_clock::now();
            for (std::size_t b = 0; b < order.size(); b += batch_size) {
                const std::size_t n = std::min(batch_size, order.size() - b);
                batch.clear();
                for (std::size_t i = 0; i < n; ++i) batch.push_back(data.train[order[b + i]]);
                const double batch_loss = bptt(model, batch, loss, ws, grads);
                if (!std::isfinite(batch_loss)) {
                    throw NumericError("non-finite training loss in epoch " + std::to_string(epoch + 1) +
                                       ", batch starting at " + std::to_string(b));
                }
                check_finite(grads);
                if (adadelta)
                    adadelta_step(*adadelta, model, grads);
                else
                    sgd_step(model, grads, cfg.sgd.learning_rate);
                loss_sum += batch_loss * static_cast<double>(n);
            }
            const auto stop = std::chrono::steady_clock::now();
            out.epoch_seconds.push_back(std::chrono::duration<double>(stop - start).count());
            out.train_loss.push_back(loss_sum / static_cast<double>(order.size()));
        }
        out.final_metric = evaluate(model, cfg, data.test, ws);
        if (!std::isfinite(out.final_metric)) throw NumericError("non-finite test metric");
    } catch (const NumericError& e) {
        out.aborted = true;
        out.abort_reason = e.what();
        out.final_metric = std::numeric_limits<double>::quiet_NaN();
    }
    out.clamped_probabilities = ws.clamped_probabilities;
    if (trained) *trained = std::move(model);
    return out;
}

RunResult run_config(const ExperimentConfig& cfg_in, const RunOptions& opts) {
    ExperimentConfig cfg = cfg_in;
    if (opts.seed) {
        cfg.seed = *opts.seed;
        cfg.echo["seed"] = cfg.seed;
    }
    const PreparedData data = prepare_data(cfg);
    RunResult result;
    result.config = cfg.echo;
    result.task = cfg.task;
    result.cell = cfg.cell;
    result.layers = cfg.layers;
    result.k = resolve_k(cfg, data.input_dim, data.output_dim);
    result.param_count = model_param_count(cfg.cell, cfg.layers, result.k, data.input_dim, data.output_dim);
    result.metric = metric_name(cfg.task);
    result.restarts.resize(cfg.restarts);

    std::mutex log_mutex;
    parallel_for(cfg.restarts, opts.workers, [&](std::size_t i) {
        RestartResult r = train_restart(cfg, data, result.k, cfg.seed + i);
        r.index = i;
        if (opts.log) {
            std::lock_guard lock(log_mutex);
            opts.log(to_string(cfg.cell) + " restart " + std::to_string(i + 1) + "/" + std::to_string(cfg.restarts) +
                     (r.aborted ? " aborted: " + r.abort_reason : " " + result.metric + "=" + fmt_double(r.final_metric)));
        }
        result.restarts[i] = std::move(r);
    });
    return result;
}

// ---------------------------------------------------------------- results

std::size_t RunResult::completed() const {
    return static_cast<std::size_t>(std::count_if(restarts.begin(), restarts.end(), [](const auto& r) {
        return !r.aborted;
    }));
}

double RunResult::mean_metric() const {
    double sum = 0.0;
    std::size_t n = 0;
    for (const auto& r : restarts) {
        if (r.aborted) continue;
        sum += r.final_metric;
        ++n;
    }
    return n ? sum / static_cast<double>(n) : std::numeric_limits<double>::quiet_NaN();
}

double RunResult::std_metric() const {
    const std::size_t n = completed();
    if (n == 0) return std::numeric_limits<double>::quiet_NaN();
    if (n == 1) return 0.0;
    const double mean = mean_metric();
    double ss = 0.0;
    for (const auto& r : restarts)
        if (!r.aborted) ss += (r.final_metric - mean) * (r.final_metric - mean);
    return std::sqrt(ss / static_cast<double>(n - 1));
}

double RunResult::mean_epoch_seconds() const {
    double sum = 0.0;
    std::size_t n = 0;
    for (const auto& r : restarts) {
        for (double s : r.epoch_seconds) sum += s;
        n += r.epoch_seconds.size();
    }
    return n ? sum / static_cast<double>(n) : std::numeric_limits<double>::quiet_NaN();
}

json RunResult::to_json() const {
    json doc;
    doc["schema_version"] = results_schema_version;
    doc["config"] = config;
    doc["task"] = to_string(task);
    doc["cell"] = to_string(cell);
    doc["layers"] = layers;
    doc["k"] = k;
    doc["param_count"] = param_count;
    doc["metric"] = metric;
    doc["sweep"] = sweep;
    json rs = json::array();
    for (const auto& r : restarts) {
        json j;
        j["index"] = r.index;
        j["seed"] = r.seed;
        j["aborted"] = r.aborted;
        if (r.aborted) j["abort_reason"] = r.abort_reason;
        j["final_metric"] = number_or_null(r.final_metric);
        json curve = json::array();
        for (double v : r.train_loss) curve.push_back(number_or_null(v));
        j["train_loss"] = std::move(curve);
        j["clamped_probabilities"] = r.clamped_probabilities;
        rs.push_back(std::move(j));
    }
    doc["restarts"] = std::move(rs);
    doc["aggregate"] = {{"mean_metric", number_or_null(mean_metric())},
                        {"std_metric", number_or_null(std_metric())},
                        {"completed", completed()},
                        {"aborted", restarts.size() - completed()}};
    return doc;
}

json RunResult::timing_json() const {
    json doc;
    doc["schema_version"] = results_schema_version;
    doc["cell"] = to_string(cell);
    doc["k"] = k;
    json rs = json::array();
    for (const auto& r : restarts) rs.push_back({{"index", r.index}, {"epoch_seconds", r.epoch_seconds}});
    doc["restarts"] = std::move(rs);
    doc["mean_epoch_seconds"] = number_or_null(mean_epoch_seconds());
    return doc;
}

RunResult RunResult::from_json(const json& doc, const json* timing) {
    try {
        if (doc.at("schema_version").get<int>() != results_schema_version)
            throw DataError(DataError::Kind::malformed, "unsupported results schema version");
        RunResult r;
        r.config = doc.at("config");
        r.task = task_kind_from_string(doc.at("task").get<std::string>());
        r.cell = cell_kind_from_string(doc.at("cell").get<std::string>());
        r.layers = doc.at("layers").get<std::size_t>();
        r.k = doc.at("k").get<std::size_t>();
        r.param_count = doc.at("param_count").get<std::uint64_t>();
        r.metric = doc.at("metric").get<std::string>();
        r.sweep = doc.at("sweep");
        for (const auto& j : doc.at("restarts")) {
            RestartResult rr;
            rr.index = j.at("index").get<std::size_t>();
            rr.seed = j.at("seed").get<std::uint64_t>();
            rr.aborted = j.at("aborted").get<bool>();
            if (rr.aborted) rr.abort_reason = j.at("abort_reason").get<std::string>();
            rr.final_metric = number_from(j.at("final_metric"));
            for (const auto& v : j.at("train_loss")) rr.train_loss.push_back(number_from(v));
            rr.clamped_probabilities = j.at("clamped_probabilities").get<std::uint64_t>();
            r.restarts.push_back(std::move(rr));
        }
        if (timing) {
            const auto& rs = timing->at("restarts");
            if (rs.size() != r.restarts.size())
                throw DataError(DataError::Kind::count_mismatch, "timing file restart count differs from results");
            for (std::size_t i = 0; i < rs.size(); ++i)
                r.restarts[i].epoch_seconds = rs[i].at("epoch_seconds").get<std::vector<double>>();
        }
        return r;
    } catch (const json::exception& e) {
        throw DataError(DataError::Kind::malformed, std::string("malformed results document: ") + e.what());
    }
}

void write_file_atomic(const std::filesystem::path& path, const std::string& contents) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    auto tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw DataError(DataError::Kind::unreadable, "cannot write " + tmp.string());
        out << contents;
        if (!out) throw DataError(DataError::Kind::unreadable, "write failed for " + tmp.string());
    }
    std::filesystem::rename(tmp, path);
}

std::filesystem::path write_results(const RunResult& result, const std::filesystem::path& dir,
                                    const std::string& name) {
    const auto path = dir / (name + ".json");
    write_file_atomic(timing_path_for(path), result.timing_json().dump(2) + "\n");
    write_file_atomic(path, result.to_json().dump(2) + "\n");
    return path;
}

RunResult read_results(const std::filesystem::path& path) {
    json doc;
    try {
        doc = json::parse(read_text(path));
    } catch (const json::parse_error& e) {
        throw DataError(DataError::Kind::malformed, path.string() + " is not valid JSON: " + e.what());
    }
    const auto tpath = timing_path_for(path);
    if (std::filesystem::exists(tpath)) {
        const json timing = json::parse(read_text(tpath));
        return RunResult::from_json(doc, &timing);
    }
    return RunResult::from_json(doc);
}

std::vector<RunResult> load_results_dir(const std::filesystem::path& dir) {
    if (!std::filesystem::is_directory(dir))
        throw DataError(DataError::Kind::unreadable, dir.string() + " is not a directory");
    std::vector<std::filesystem::path> files;
    for (const auto& entry : std::filesystem::directory_iterator(dir)) {
        const auto& p = entry.path();
        const auto name = p.filename().string();
        if (p.extension() != ".json" || name.ends_with(".timing.json")) continue;
        files.push_back(p);
    }
    std::sort(files.begin(), files.end());
    std::vector<RunResult> out;
    for (const auto& f : files) out.push_back(read_results(f));
    if (out.empty()) throw DataError(DataError::Kind::empty, "no results files in " + dir.string());
    return out;
}

std::filesystem::path run_experiment(const std::filesystem::path& config_path, const std::filesystem::path& out_dir,
                                     const RunOptions& opts) {
    const auto cfg = load_config(config_path);
    const auto result = run_config(cfg, opts);
    return write_results(result, out_dir, config_path.stem().string());
}

// ---------------------------------------------------------------- sweep

std::string summary_csv(const std::vector<RunResult>& results) {
    std::vector<std::string> fields;
    for (const auto& r : results)
        for (const auto& [key, value] : r.sweep.items())
            if (key != "k" && std::find(fields.begin(), fields.end(), key) == fields.end()) fields.push_back(key);
    std::ostringstream os;
    os << "task,cell,k,param_count";
    for (const auto& f : fields) os << ',' << f;
    os << ",mean_metric,std_metric,mean_epoch_seconds\n";
    for (const auto& r : results) {
        os << to_string(r.task) << ',' << to_string(r.cell) << ',' << r.k << ',' << r.param_count;
        for (const auto& f : fields) {
            os << ',';
            if (r.sweep.contains(f)) os << (r.sweep[f].is_string() ? r.sweep[f].get<std::string>() : r.sweep[f].dump());
        }
        os << ',' << fmt_double(r.mean_metric()) << ',' << fmt_double(r.std_metric()) << ','
           << fmt_double(r.mean_epoch_seconds()) << '\n';
    }
    return os.str();
}

std::vector<std::filesystem::path> sweep(const std::filesystem::path& config_path,
                                         const std::filesystem::path& out_dir, const RunOptions& opts) {
    const json doc = read_json_file(config_path);
    auto points = expand_sweep(doc, config_path.parent_path());
    std::vector<std::filesystem::path> paths;
    std::vector<RunResult> results;
    for (auto& pt : points) {
        const auto path = out_dir / (pt.name + ".json");
        if (std::filesystem::exists(path)) {
            if (opts.log) opts.log("skip " + pt.name + " (exists)");
            results.push_back(read_results(path));
        } else {
            if (opts.log) opts.log("run " + pt.name);
            RunResult r = run_config(pt.config, opts);
            for (const auto& [field, value] : pt.assignment) r.sweep[field] = value;
            write_results(r, out_dir, pt.name);
            results.push_back(std::move(r));
        }
        paths.push_back(path);
    }
    write_file_atomic(out_dir / "summary.csv", summary_csv(results));
    return paths;
}

// ---------------------------------------------------------------- timing

TimingReport timing_report(const std::vector<RunResult>& results) {
    if (results.empty()) throw DataError(DataError::Kind::empty, "timing_report: no results");
    // every run must share its settings apart from the cell kind
    auto settings = [](const RunResult& r) {
        json c = r.config;
        c.erase("cell");
        c["k(resolved)"] = r.k;
        return c.flatten();
    };
    const json ref = settings(results.front());
    std::set<std::string> mismatched;
    for (const auto& r : results) {
        const json s = settings(r);
        for (const auto& [key, value] : s.items())
            if (!ref.contains(key) || ref[key] != value) mismatched.insert(key);
        for (const auto& [key, value] : ref.items())
            if (!s.contains(key)) mismatched.insert(key);
    }
    if (!mismatched.empty()) {
        std::string list;
        for (const auto& m : mismatched) list += (list.empty() ? "" : ", ") + m;
        throw ConfigError("timing_report: results are not comparable; differing fields: " + list);
    }

    std::map<CellKind, std::pair<double, std::size_t>> acc;
    for (const auto& r : results) {
        for (const auto& rr : r.restarts) {
            auto& [sum, n] = acc[r.cell];
            for (double s : rr.epoch_seconds) sum += s;
            n += rr.epoch_seconds.size();
        }
    }
    TimingReport rep;
    for (const auto& [cell, sn] : acc) {
        if (sn.second == 0)
            throw DataError(DataError::Kind::empty, "timing_report: no wall times for " + to_string(cell));
        rep.rows.push_back({cell, sn.first / static_cast<double>(sn.second), sn.second});
    }
    std::stable_sort(rep.rows.begin(), rep.rows.end(),
                     [](const auto& a, const auto& b) { return a.mean_epoch_seconds < b.mean_epoch_seconds; });
    for (std::size_t i = 1; i < rep.rows.size(); ++i)
        rep.gaps.push_back(rep.rows[i].mean_epoch_seconds / rep.rows[i - 1].mean_epoch_seconds - 1.0);
    if (rep.rows.size() < 2) return rep;

    auto rank = [](CellKind c) { return c == CellKind::pru ? 0 : c == CellKind::gru ? 1 : 2; };
    bool tie = false;
    bool ordered = true;
    for (std::size_t i = 1; i < rep.rows.size(); ++i) {
        if (rep.rows[i].mean_epoch_seconds == rep.rows[i - 1].mean_epoch_seconds) tie = true;
        if (rank(rep.rows[i].cell) < rank(rep.rows[i - 1].cell)) ordered = false;
    }
    rep.flag = tie ? "inconclusive" : ordered ? "holds" : "violated";
    return rep;
}

TimingReport timing_report(const std::filesystem::path& results_dir) {
    return timing_report(load_results_dir(results_dir));
}

std::string TimingReport::format() const {
    std::ostringstream os;
    char buf[128];
    std::snprintf(buf, sizeof buf, "%-6s %18s %8s %10s\n", "cell", "mean_epoch_seconds", "epochs", "gap");
    os << buf;
    for (std::size_t i = 0; i < rows.size(); ++i) {
        const std::string gap = i == 0 ? "" : fmt_double(gaps[i - 1] * 100.0).substr(0, 6) + "%";
        std::snprintf(buf, sizeof buf, "%-6s %18.6f %8zu %10s\n", to_string(rows[i].cell).c_str(),
                      rows[i].mean_epoch_seconds, rows[i].epochs, gap.c_str());
        os << buf;
    }
    if (!flag.empty()) {
        os << "ordering:";
        for (std::size_t i = 0; i < rows.size(); ++i) os << (i ? " < " : " ") << to_string(rows[i].cell);
        os << "\nPRU < GRU < LSTM: " << flag << "\n";
    }
    return os.str();
}

// ---------------------------------------------------------------- plot data

std::vector<PlotRow> plot_rows(const std::vector<RunResult>& results, const std::string& figure_kind,
                               bool normalize_by_delta2) {
    if (results.empty()) throw DataError(DataError::Kind::empty, "export: no results");
    std::vector<std::pair<std::size_t, const RunResult*>> picked;
    json other;
    bool first = true;
    for (const auto& r : results) {
        if (!r.sweep.contains(figure_kind)) {
            throw ConfigError("export: result for " + to_string(r.cell) + " does not sweep '" + figure_kind + "'");
        }
        json rest = r.sweep;
        rest.erase(figure_kind);
        if (first) {
            other = rest;
            first = false;
        } else if (rest != other) {
            throw ConfigError("export: results also vary in " + rest.dump() + " vs " + other.dump() +
                              "; export needs a single varying field");
        }
        picked.emplace_back(picked.size(), &r);
    }
    auto cell_rank = [](CellKind c) { return c == CellKind::pru ? 0 : c == CellKind::lstm ? 1 : 2; };
    std::stable_sort(picked.begin(), picked.end(), [&](const auto& a, const auto& b) {
        const auto& ra = *a.second;
        const auto& rb = *b.second;
        if (ra.cell != rb.cell) return cell_rank(ra.cell) < cell_rank(rb.cell);
        const json& xa = ra.sweep[figure_kind];
        const json& xb = rb.sweep[figure_kind];
        if (xa.is_number() && xb.is_number()) return xa.get<double>() < xb.get<double>();
        return xa.dump() < xb.dump();
    });
    std::vector<PlotRow> rows;
    for (const auto& [i, r] : picked) {
        PlotRow row;
        const json& x = r->sweep[figure_kind];
        row.x = x.is_string() ? x.get<std::string>() : x.dump();
        row.cell = to_string(r->cell);
        row.mean_metric = r->mean_metric();
        row.std_metric = r->std_metric();
        if (normalize_by_delta2) {
            const auto ptr = json::json_pointer("/task_params/delta2");
            if (!r->config.contains(ptr)) throw ConfigError("export: normalization needs task_params.delta2");
            const double d2 = r->config[ptr].get<double>();
            if (d2 == 0.0) throw NumericError("export: cannot normalize by delta2 = 0");
            row.mean_metric /= d2;
            row.std_metric /= d2;
        }
        rows.push_back(std::move(row));
    }
    return rows;
}

std::string plot_csv(const std::string& figure_kind, const std::vector<PlotRow>& rows) {
    std::ostringstream os;
    os << figure_kind << ",cell,mean_metric,std_metric\n";
    for (const auto& r : rows)
        os << r.x << ',' << r.cell << ',' << fmt_double(r.mean_metric) << ',' << fmt_double(r.std_metric) << '\n';
    return os.str();
}

std::vector<PlotRow> parse_plot_csv(const std::string& text) {
    std::istringstream is(text);
    std::string line;
    if (!std::getline(is, line)) throw DataError(DataError::Kind::empty, "plot CSV is empty");
    std::vector<PlotRow> rows;
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        std::vector<std::string> cols;
        std::stringstream ss(line);
        std::string col;
        while (std::getline(ss, col, ',')) cols.push_back(col);
        if (cols.size() != 4) throw DataError(DataError::Kind::malformed, "plot CSV row needs 4 columns: " + line);
        rows.push_back({cols[0], cols[1], std::strtod(cols[2].c_str(), nullptr), std::strtod(cols[3].c_str(), nullptr)});
    }
    return rows;
}

std::filesystem::path export_plotdata(const std::filesystem::path& results_dir, const std::string& figure_kind,
                                      bool normalize_by_delta2) {
    const auto rows = plot_rows(load_results_dir(results_dir), figure_kind, normalize_by_delta2);
    const auto path = results_dir / ("figure_" + figure_kind + ".csv");
    write_file_atomic(path, plot_csv(figure_kind, rows));
    return path;
}

}  // namespace pru
