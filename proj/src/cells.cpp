#include "pru/cells.hpp"

#include <cmath>
#include <sstream>

#include "pru/error.hpp"

namespace pru {

namespace {

inline void ensure(Vector& v, std::size_t n) {
    if (v.size() != n) v.assign_zero(n);
}

inline void zero(Vector& v, std::size_t n) {
    if (v.size() != n)
        v.assign_zero(n);
    else
        v.fill(0.0);
}

void require_shape(const Matrix& m, std::size_t rows, std::size_t cols, const char* what) {
    if (m.rows() != rows || m.cols() != cols) {
        std::ostringstream os;
        os << what << " is " << shape_string(m) << ", expected " << rows << "x" << cols;
        throw ShapeError(os.str());
    }
}

void require_len(const Vector& v, std::size_t n, const char* what) {
    if (v.size() != n) {
        std::ostringstream os;
        os << what << " has length " << v.size() << ", expected " << n;
        throw ShapeError(os.str());
    }
}

void require_span(std::span<const double> v, std::size_t n, const char* what) {
    if (v.size() != n) {
        std::ostringstream os;
        os << what << " has length " << v.size() << ", expected " << n;
        throw ShapeError(os.str());
    }
}

}  // namespace

std::string to_string(CellKind kind) {
    switch (kind) {
        case CellKind::pru: return "PRU";
        case CellKind::lstm: return "LSTM";
        case CellKind::gru: return "GRU";
    }
    return "unknown";
}

CellKind cell_kind_from_string(const std::string& name) {
    if (name == "PRU" || name == "pru") return CellKind::pru;
    if (name == "LSTM" || name == "lstm") return CellKind::lstm;
    if (name == "GRU" || name == "gru") return CellKind::gru;
    throw ConfigError("unknown cell kind '" + name + "' (expected PRU, LSTM or GRU)");
}

std::size_t true_state_dim(CellKind kind, std::size_t k) noexcept {
    return kind == CellKind::lstm ? 2 * k : k;
}

FieldRef field(std::string_view name, Matrix& m) { return {name, m.span(), m.rows(), m.cols()}; }
ConstFieldRef field(std::string_view name, const Matrix& m) { return {name, m.span(), m.rows(), m.cols()}; }
FieldRef field(std::string_view name, Vector& v) { return {name, v.span(), v.size(), 1}; }
ConstFieldRef field(std::string_view name, const Vector& v) { return {name, v.span(), v.size(), 1}; }

// ---------------------------------------------------------------- params

PruParams PruParams::zeros(std::size_t k, std::size_t m) {
    return {Matrix(k, k), Matrix(k, m), Vector(k), Matrix(k, k), Matrix(k, m), Vector(k)};
}

std::vector<FieldRef> PruParams::fields() {
    return {field("U_s", U_s), field("U_x", U_x), field("b_u", b_u),
            field("C_s", C_s), field("C_x", C_x), field("b_c", b_c)};
}

std::vector<ConstFieldRef> PruParams::fields() const {
    return {field("U_s", U_s), field("U_x", U_x), field("b_u", b_u),
            field("C_s", C_s), field("C_x", C_x), field("b_c", b_c)};
}

void PruParams::validate() const {
    const std::size_t k = b_u.size();
    const std::size_t m = U_x.cols();
    require_shape(U_s, k, k, "PRU U_s");
    require_shape(U_x, k, m, "PRU U_x");
    require_shape(C_s, k, k, "PRU C_s");
    require_shape(C_x, k, m, "PRU C_x");
    require_len(b_c, k, "PRU b_c");
}

LstmParams LstmParams::zeros(std::size_t k, std::size_t m) {
    return {Matrix(k, 2 * k + m), Matrix(k, 2 * k + m), Matrix(k, 2 * k + m), Matrix(k, k + m),
            Vector(k), Vector(k), Vector(k), Vector(k)};
}

std::vector<FieldRef> LstmParams::fields() {
    return {field("W_i", W_i), field("W_f", W_f), field("W_o", W_o), field("W_c", W_c),
            field("b_i", b_i), field("b_f", b_f), field("b_o", b_o), field("b_g", b_g)};
}

std::vector<ConstFieldRef> LstmParams::fields() const {
    return {field("W_i", W_i), field("W_f", W_f), field("W_o", W_o), field("W_c", W_c),
            field("b_i", b_i), field("b_f", b_f), field("b_o", b_o), field("b_g", b_g)};
}

void LstmParams::validate() const {
    const std::size_t k = b_i.size();
    if (W_c.cols() < k) throw ShapeError("LSTM W_c has fewer columns than k");
    const std::size_t m = W_c.cols() - k;
    require_shape(W_i, k, 2 * k + m, "LSTM W_i");
    require_shape(W_f, k, 2 * k + m, "LSTM W_f");
    require_shape(W_o, k, 2 * k + m, "LSTM W_o");
    require_shape(W_c, k, k + m, "LSTM W_c");
    require_len(b_f, k, "LSTM b_f");
    require_len(b_o, k, "LSTM b_o");
    require_len(b_g, k, "LSTM b_g");
}

GruParams GruParams::zeros(std::size_t k, std::size_t m) {
    return {Matrix(k, k + m), Matrix(k, k + m), Matrix(k, k + m), Vector(k), Vector(k), Vector(k)};
}

std::vector<FieldRef> GruParams::fields() {
    return {field("W_z", W_z), field("W_r", W_r), field("W_h", W_h),
            field("b_z", b_z), field("b_r", b_r), field("b_h", b_h)};
}

std::vector<ConstFieldRef> GruParams::fields() const {
    return {field("W_z", W_z), field("W_r", W_r), field("W_h", W_h),
            field("b_z", b_z), field("b_r", b_r), field("b_h", b_h)};
}

void GruParams::validate() const {
    const std::size_t k = b_z.size();
    if (W_z.cols() < k) throw ShapeError("GRU W_z has fewer columns than k");
    const std::size_t m = W_z.cols() - k;
    require_shape(W_z, k, k + m, "GRU W_z");
    require_shape(W_r, k, k + m, "GRU W_r");
    require_shape(W_h, k, k + m, "GRU W_h");
    require_len(b_r, k, "GRU b_r");
    require_len(b_h, k, "GRU b_h");
}

ReadoutParams ReadoutParams::zeros(std::size_t k, std::size_t l, Activation h) {
    return {Matrix(l, k), Vector(l), h};
}

std::vector<FieldRef> ReadoutParams::fields() { return {field("W", W), field("b", b)}; }
std::vector<ConstFieldRef> ReadoutParams::fields() const { return {field("W", W), field("b", b)}; }

void ReadoutParams::validate() const { require_shape(W, b.size(), W.cols(), "readout W"); }

// ---------------------------------------------------------------- PRU

void forward(const PruParams& p, std::span<const double> prev, std::span<const double> x, PruCache& cache) {
    const std::size_t k = p.k();
    ensure(cache.u, k);
    ensure(cache.c, k);
    ensure(cache.s, k);
    kernel::affine_into(p.U_x, x, p.b_u, cache.u);
    kernel::gemv_acc(p.U_s, prev, cache.u);
    kernel::affine_into(p.C_x, x, p.b_c, cache.c);
    kernel::gemv_acc(p.C_s, prev, cache.c);
    for (std::size_t i = 0; i < k; ++i) {
        const double u = std::tanh(cache.u[i]);
        const double c = sigmoid(cache.c[i]);
        cache.u[i] = u;
        cache.c[i] = c;
        cache.s[i] = c * prev[i] + (1.0 - c) * u;
    }
}

void backward(const PruParams& p, std::span<const double> prev, std::span<const double> x, const PruCache& cache,
              std::span<const double> dstate, PruParams& grad, std::span<double> dprev, std::span<double> dx,
              BackwardScratch& scratch) {
    const std::size_t k = p.k();
    Vector& du = scratch.a;
    Vector& dc = scratch.b;
    ensure(du, k);
    ensure(dc, k);
    for (std::size_t i = 0; i < k; ++i) {
        const double ds = dstate[i];
        const double u = cache.u[i];
        const double c = cache.c[i];
        du[i] = ds * (1.0 - c) * (1.0 - u * u);
        dc[i] = ds * (prev[i] - u) * c * (1.0 - c);
        dprev[i] = ds * c;
    }
    kernel::gemv_t_acc(p.U_s, du, dprev);
    kernel::gemv_t_acc(p.C_s, dc, dprev);

    kernel::ger_acc(grad.U_s, du, prev);
    kernel::ger_acc(grad.U_x, du, x);
    kernel::add_acc(du, grad.b_u);
    kernel::ger_acc(grad.C_s, dc, prev);
    kernel::ger_acc(grad.C_x, dc, x);
    kernel::add_acc(dc, grad.b_c);

    if (!dx.empty()) {
        std::fill(dx.begin(), dx.end(), 0.0);
        kernel::gemv_t_acc(p.U_x, du, dx);
        kernel::gemv_t_acc(p.C_x, dc, dx);
    }
}

// ---------------------------------------------------------------- LSTM

void forward(const LstmParams& p, std::span<const double> prev, std::span<const double> x, LstmCache& cache) {
    const std::size_t k = p.k();
    const std::size_t m = x.size();
    ensure(cache.gate_in, 2 * k + m);
    ensure(cache.cand_in, k + m);
    ensure(cache.i, k);
    ensure(cache.f, k);
    ensure(cache.o, k);
    ensure(cache.g, k);
    ensure(cache.tanh_c, k);
    ensure(cache.state, 2 * k);

    std::copy(prev.begin(), prev.end(), cache.gate_in.begin());
    std::copy(x.begin(), x.end(), cache.gate_in.begin() + 2 * k);
    std::copy(prev.begin() + k, prev.end(), cache.cand_in.begin());
    std::copy(x.begin(), x.end(), cache.cand_in.begin() + k);

    kernel::affine_into(p.W_i, cache.gate_in, p.b_i, cache.i);
    kernel::affine_into(p.W_f, cache.gate_in, p.b_f, cache.f);
    kernel::affine_into(p.W_o, cache.gate_in, p.b_o, cache.o);
    kernel::affine_into(p.W_c, cache.cand_in, p.b_g, cache.g);
    for (std::size_t j = 0; j < k; ++j) {
        const double i = sigmoid(cache.i[j]);
        const double f = sigmoid(cache.f[j]);
        const double o = sigmoid(cache.o[j]);
        const double g = std::tanh(cache.g[j]);
        const double c = i * g + f * prev[j];
        const double tc = std::tanh(c);
        cache.i[j] = i;
        cache.f[j] = f;
        cache.o[j] = o;
        cache.g[j] = g;
        cache.tanh_c[j] = tc;
        cache.state[j] = c;
        cache.state[k + j] = o * tc;
    }
}

void backward(const LstmParams& p, std::span<const double> prev, std::span<const double> x, const LstmCache& cache,
              std::span<const double> dstate, LstmParams& grad, std::span<double> dprev, std::span<double> dx,
              BackwardScratch& scratch) {
    const std::size_t k = p.k();
    const std::size_t m = x.size();
    Vector& di = scratch.a;
    Vector& df = scratch.b;
    Vector& dout = scratch.c;
    Vector& dg = scratch.d;
    Vector& dgate_in = scratch.e;
    Vector& dcand_in = scratch.f;
    ensure(di, k);
    ensure(df, k);
    ensure(dout, k);
    ensure(dg, k);
    zero(dgate_in, 2 * k + m);
    zero(dcand_in, k + m);

    for (std::size_t j = 0; j < k; ++j) {
        const double dh = dstate[k + j];
        const double tc = cache.tanh_c[j];
        const double i = cache.i[j];
        const double f = cache.f[j];
        const double o = cache.o[j];
        const double g = cache.g[j];
        const double dc = dstate[j] + dh * o * (1.0 - tc * tc);
        dout[j] = dh * tc * o * (1.0 - o);
        di[j] = dc * g * i * (1.0 - i);
        df[j] = dc * prev[j] * f * (1.0 - f);
        dg[j] = dc * i * (1.0 - g * g);
        dprev[j] = dc * f;
    }

    kernel::ger_acc(grad.W_i, di, cache.gate_in);
    kernel::ger_acc(grad.W_f, df, cache.gate_in);
    kernel::ger_acc(grad.W_o, dout, cache.gate_in);
    kernel::ger_acc(grad.W_c, dg, cache.cand_in);
    kernel::add_acc(di, grad.b_i);
    kernel::add_acc(df, grad.b_f);
    kernel::add_acc(dout, grad.b_o);
    kernel::add_acc(dg, grad.b_g);

    kernel::gemv_t_acc(p.W_i, di, dgate_in);
    kernel::gemv_t_acc(p.W_f, df, dgate_in);
    kernel::gemv_t_acc(p.W_o, dout, dgate_in);
    kernel::gemv_t_acc(p.W_c, dg, dcand_in);

    for (std::size_t j = 0; j < k; ++j) {
        dprev[j] += dgate_in[j];
        dprev[k + j] = dgate_in[k + j] + dcand_in[j];
    }
    if (!dx.empty()) {
        for (std::size_t j = 0; j < m; ++j) dx[j] = dgate_in[2 * k + j] + dcand_in[k + j];
    }
}

// ---------------------------------------------------------------- GRU

void forward(const GruParams& p, std::span<const double> prev, std::span<const double> x, GruCache& cache) {
    const std::size_t k = p.k();
    const std::size_t m = x.size();
    ensure(cache.gate_in, k + m);
    ensure(cache.cand_in, k + m);
    ensure(cache.z, k);
    ensure(cache.r, k);
    ensure(cache.cand, k);
    ensure(cache.s, k);

    std::copy(prev.begin(), prev.end(), cache.gate_in.begin());
    std::copy(x.begin(), x.end(), cache.gate_in.begin() + k);
    kernel::affine_into(p.W_z, cache.gate_in, p.b_z, cache.z);
    kernel::affine_into(p.W_r, cache.gate_in, p.b_r, cache.r);
    for (std::size_t j = 0; j < k; ++j) {
        cache.z[j] = sigmoid(cache.z[j]);
        cache.r[j] = sigmoid(cache.r[j]);
        cache.cand_in[j] = cache.r[j] * prev[j];
    }
    std::copy(x.begin(), x.end(), cache.cand_in.begin() + k);
    kernel::affine_into(p.W_h, cache.cand_in, p.b_h, cache.cand);
    for (std::size_t j = 0; j < k; ++j) {
        const double h = std::tanh(cache.cand[j]);
        const double z = cache.z[j];
        cache.cand[j] = h;
        cache.s[j] = z * prev[j] + (1.0 - z) * h;
    }
}

void backward(const GruParams& p, std::span<const double> prev, std::span<const double> x, const GruCache& cache,
              std::span<const double> dstate, GruParams& grad, std::span<double> dprev, std::span<double> dx,
              BackwardScratch& scratch) {
    const std::size_t k = p.k();
    const std::size_t m = x.size();
    Vector& dcand = scratch.a;
    Vector& dz = scratch.b;
    Vector& dr = scratch.c;
    Vector& dcand_in = scratch.d;
    Vector& dgate_in = scratch.e;
    ensure(dcand, k);
    ensure(dz, k);
    ensure(dr, k);
    zero(dcand_in, k + m);
    zero(dgate_in, k + m);

    for (std::size_t j = 0; j < k; ++j) {
        const double ds = dstate[j];
        const double z = cache.z[j];
        const double h = cache.cand[j];
        dcand[j] = ds * (1.0 - z) * (1.0 - h * h);
        dz[j] = ds * (prev[j] - h) * z * (1.0 - z);
        dprev[j] = ds * z;
    }
    kernel::ger_acc(grad.W_h, dcand, cache.cand_in);
    kernel::add_acc(dcand, grad.b_h);
    kernel::gemv_t_acc(p.W_h, dcand, dcand_in);

    for (std::size_t j = 0; j < k; ++j) {
        const double r = cache.r[j];
        dr[j] = dcand_in[j] * prev[j] * r * (1.0 - r);
        dprev[j] += dcand_in[j] * r;
    }
    kernel::ger_acc(grad.W_z, dz, cache.gate_in);
    kernel::ger_acc(grad.W_r, dr, cache.gate_in);
    kernel::add_acc(dz, grad.b_z);
    kernel::add_acc(dr, grad.b_r);
    kernel::gemv_t_acc(p.W_z, dz, dgate_in);
    kernel::gemv_t_acc(p.W_r, dr, dgate_in);

    for (std::size_t j = 0; j < k; ++j) dprev[j] += dgate_in[j];
    if (!dx.empty()) {
        for (std::size_t j = 0; j < m; ++j) dx[j] = dgate_in[k + j] + dcand_in[k + j];
    }
}

// ---------------------------------------------------------------- value API

PruStep pru_step(const PruParams& p, const Vector& s_prev, const Vector& x) {
    p.validate();
    require_span(s_prev, p.k(), "pru_step: s_prev");
    require_span(x, p.m(), "pru_step: x");
    PruStep out;
    forward(p, s_prev, x, out.cache);
    out.s = out.cache.s;
    return out;
}

LstmStep lstm_step(const LstmParams& p, const LstmState& prev, const Vector& x) {
    p.validate();
    require_span(prev.c, p.k(), "lstm_step: c_prev");
    require_span(prev.h, p.k(), "lstm_step: h_prev");
    require_span(x, p.m(), "lstm_step: x");
    const std::size_t k = p.k();
    Vector flat(2 * k);
    std::copy(prev.c.begin(), prev.c.end(), flat.begin());
    std::copy(prev.h.begin(), prev.h.end(), flat.begin() + k);
    LstmStep out;
    forward(p, flat, x, out.cache);
    out.state.c = Vector(state_of(out.cache).first(k));
    out.state.h = Vector(output_of(out.cache));
    return out;
}

GruStep gru_step(const GruParams& p, const Vector& s_prev, const Vector& x) {
    p.validate();
    require_span(s_prev, p.k(), "gru_step: s_prev");
    require_span(x, p.m(), "gru_step: x");
    GruStep out;
    forward(p, s_prev, x, out.cache);
    out.s = out.cache.s;
    return out;
}

void readout_into(const ReadoutParams& r, std::span<const double> s, std::span<double> y) noexcept {
    kernel::affine_into(r.W, s, r.b, y);
    activate_inplace(r.h, y);
}

Vector readout(const ReadoutParams& r, const Vector& s) {
    r.validate();
    require_span(s, r.k(), "readout: s");
    Vector y(r.l());
    readout_into(r, s, y);
    return y;
}

// ---------------------------------------------------------------- layers

CellKind kind_of(const LayerParams& layer) noexcept {
    switch (layer.index()) {
        case 0: return CellKind::pru;
        case 1: return CellKind::lstm;
        default: return CellKind::gru;
    }
}

std::size_t reported_dim(const LayerParams& layer) noexcept {
    return std::visit([](const auto& p) { return p.k(); }, layer);
}

std::size_t input_dim(const LayerParams& layer) noexcept {
    return std::visit([](const auto& p) { return p.m(); }, layer);
}

LayerParams zero_layer(CellKind kind, std::size_t k, std::size_t m) {
    switch (kind) {
        case CellKind::pru: return PruParams::zeros(k, m);
        case CellKind::lstm: return LstmParams::zeros(k, m);
        case CellKind::gru: return GruParams::zeros(k, m);
    }
    throw Error("zero_layer: bad cell kind");
}

std::vector<FieldRef> layer_fields(LayerParams& layer) {
    return std::visit([](auto& p) { return p.fields(); }, layer);
}

std::vector<ConstFieldRef> layer_fields(const LayerParams& layer) {
    return std::visit([](const auto& p) { return p.fields(); }, layer);
}

Model Model::make(CellKind kind, std::size_t layers, std::size_t k, std::size_t m, std::size_t l, Activation h) {
    if (layers == 0 || k == 0 || m == 0 || l == 0) throw ShapeError("Model::make: dimensions must be positive");
    Model model;
    for (std::size_t i = 0; i < layers; ++i) model.layers.push_back(zero_layer(kind, k, i == 0 ? m : k));
    model.readout = ReadoutParams::zeros(k, l, h);
    return model;
}

std::size_t Model::input_dim() const {
    if (layers.empty()) throw ShapeError("model has no layers");
    return pru::input_dim(layers.front());
}

std::size_t Model::param_count() const {
    std::size_t n = 0;
    for (const auto& [name, f] : named_fields()) n += f.values.size();
    return n;
}

std::vector<std::pair<std::string, FieldRef>> Model::named_fields() {
    std::vector<std::pair<std::string, FieldRef>> out;
    for (std::size_t i = 0; i < layers.size(); ++i) {
        for (const FieldRef& f : layer_fields(layers[i]))
            out.emplace_back("layer" + std::to_string(i) + "." + std::string(f.name), f);
    }
    for (const FieldRef& f : readout.fields()) out.emplace_back("readout." + std::string(f.name), f);
    return out;
}

std::vector<std::pair<std::string, ConstFieldRef>> Model::named_fields() const {
    std::vector<std::pair<std::string, ConstFieldRef>> out;
    for (std::size_t i = 0; i < layers.size(); ++i) {
        for (const ConstFieldRef& f : layer_fields(layers[i]))
            out.emplace_back("layer" + std::to_string(i) + "." + std::string(f.name), f);
    }
    for (const ConstFieldRef& f : readout.fields()) out.emplace_back("readout." + std::string(f.name), f);
    return out;
}

std::vector<double> Model::flatten() const {
    std::vector<double> out;
    out.reserve(param_count());
    for (const auto& [name, f] : named_fields()) out.insert(out.end(), f.values.begin(), f.values.end());
    return out;
}

void Model::unflatten(std::span<const double> values) {
    if (values.size() != param_count()) {
        throw ShapeError("Model::unflatten: got " + std::to_string(values.size()) + " values for " +
                         std::to_string(param_count()) + " parameters");
    }
    std::size_t offset = 0;
    for (auto& [name, f] : named_fields()) {
        std::copy_n(values.begin() + static_cast<std::ptrdiff_t>(offset), f.values.size(), f.values.begin());
        offset += f.values.size();
    }
}

Model Model::zeros_like() const {
    Model g = *this;
    for (auto& [name, f] : g.named_fields()) std::fill(f.values.begin(), f.values.end(), 0.0);
    return g;
}

void Model::validate() const {
    if (layers.empty()) throw ShapeError("model has no layers");
    for (std::size_t i = 0; i < layers.size(); ++i) {
        std::visit([](const auto& p) { p.validate(); }, layers[i]);
        if (i > 0 && pru::input_dim(layers[i]) != reported_dim(layers[i - 1])) {
            std::ostringstream os;
            os << "layer " << i << " expects input dimension " << pru::input_dim(layers[i]) << " but layer " << i - 1
               << " emits " << reported_dim(layers[i - 1]);
            throw ShapeError(os.str());
        }
    }
    readout.validate();
    if (readout.k() != reported_dim(layers.back())) {
        throw ShapeError("readout expects state dimension " + std::to_string(readout.k()) + " but top layer has " +
                         std::to_string(reported_dim(layers.back())));
    }
}

// ---------------------------------------------------------------- accounting

std::uint64_t count_params(CellKind kind, std::uint64_t k, std::uint64_t m, std::uint64_t l) {
    const std::uint64_t readout = l * k + l;
    switch (kind) {
        case CellKind::pru: return 2 * k * k + 2 * k * m + 2 * k + readout;
        case CellKind::lstm: return 3 * k * (2 * k + m) + k * (k + m) + 4 * k + readout;
        case CellKind::gru: return 3 * k * (k + m) + 3 * k + readout;
    }
    return 0;
}

std::uint64_t match_dim_for_params(CellKind kind, std::uint64_t target, std::uint64_t m, std::uint64_t l) {
    if (target < count_params(kind, 1, m, l)) {
        throw ConfigError("target_param_count " + std::to_string(target) + " is below the minimum " +
                          std::to_string(count_params(kind, 1, m, l)) + " for " + to_string(kind));
    }
    std::uint64_t k = 1;
    while (count_params(kind, k + 1, m, l) <= target) ++k;
    return k;
}

}  // namespace pru
