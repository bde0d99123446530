#include "pru/serialize.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

#include "pru/error.hpp"

namespace pru {

namespace {

constexpr char magic[8] = {'P', 'R', 'U', 'P', 'A', 'R', 'A', 'M'};

void put_u64(std::vector<std::uint8_t>& out, std::uint64_t v) {
    for (int i = 0; i < 8; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

class Reader {
public:
    explicit Reader(const std::vector<std::uint8_t>& bytes) : bytes_(bytes) {}

    std::uint64_t u64(const char* what) {
        if (pos_ + 8 > bytes_.size())
            throw DataError(DataError::Kind::truncated, std::string("parameter file truncated reading ") + what);
        std::uint64_t v = 0;
        for (int i = 0; i < 8; ++i) v |= std::uint64_t{bytes_[pos_ + i]} << (8 * i);
        pos_ += 8;
        return v;
    }

    std::size_t pos() const noexcept { return pos_; }
    void skip(std::size_t n) { pos_ += n; }

private:
    const std::vector<std::uint8_t>& bytes_;
    std::size_t pos_ = 0;
};

std::uint64_t kind_tag(CellKind kind) {
    switch (kind) {
        case CellKind::pru: return 0;
        case CellKind::lstm: return 1;
        case CellKind::gru: return 2;
    }
    return 0;
}

std::uint64_t activation_tag(Activation a) { return static_cast<std::uint64_t>(a); }

}  // namespace

std::vector<std::uint8_t> encode_params(const Model& model) {
    model.validate();
    const auto values = model.flatten();
    std::vector<std::uint8_t> out(std::begin(magic), std::end(magic));
    put_u64(out, param_format_version);
    put_u64(out, kind_tag(kind_of(model.layers.front())));
    put_u64(out, model.layers.size());
    put_u64(out, reported_dim(model.layers.front()));
    put_u64(out, model.input_dim());
    put_u64(out, model.output_dim());
    put_u64(out, activation_tag(model.readout.h));
    put_u64(out, values.size());
    for (double v : values) put_u64(out, std::bit_cast<std::uint64_t>(v));
    return out;
}

Model decode_params(const std::vector<std::uint8_t>& bytes) {
    using K = DataError::Kind;
    if (bytes.size() < sizeof magic || std::memcmp(bytes.data(), magic, sizeof magic) != 0)
        throw DataError(K::bad_magic, "not a parameter file (bad magic)");
    Reader r(bytes);
    r.skip(sizeof magic);
    const auto version = r.u64("version");
    if (version != param_format_version)
        throw DataError(K::malformed, "unsupported parameter file version " + std::to_string(version));
    const auto tag = r.u64("cell kind");
    if (tag > 2) throw DataError(K::malformed, "unknown cell kind tag " + std::to_string(tag));
    const auto layers = r.u64("layers");
    const auto k = r.u64("k");
    const auto m = r.u64("m");
    const auto l = r.u64("l");
    const auto act = r.u64("activation");
    if (act > static_cast<std::uint64_t>(Activation::softmax))
        throw DataError(K::malformed, "unknown activation tag " + std::to_string(act));
    const auto count = r.u64("value count");
    if (layers < 1 || k < 1 || m < 1 || l < 1) throw DataError(K::malformed, "parameter file has a zero dimension");

    const CellKind kinds[] = {CellKind::pru, CellKind::lstm, CellKind::gru};
    Model model = Model::make(kinds[tag], layers, k, m, l, static_cast<Activation>(act));
    if (count != model.param_count()) {
        throw DataError(K::count_mismatch, "parameter file holds " + std::to_string(count) + " values, header implies " +
                                               std::to_string(model.param_count()));
    }
    if (bytes.size() - r.pos() < count * 8) throw DataError(K::truncated, "parameter file truncated in values");
    if (bytes.size() - r.pos() > count * 8) throw DataError(K::malformed, "trailing bytes after parameter values");
    std::vector<double> values(count);
    for (auto& v : values) v = std::bit_cast<double>(r.u64("value"));
    model.unflatten(values);
    return model;
}

void save_params(const std::filesystem::path& path, const Model& model) {
    const auto bytes = encode_params(model);
    const auto tmp = path.string() + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw DataError(DataError::Kind::unreadable, "cannot write " + tmp);
        out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
        if (!out) throw DataError(DataError::Kind::unreadable, "write failed for " + tmp);
    }
    std::filesystem::rename(tmp, path);
}

Model load_params(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError(DataError::Kind::unreadable, "cannot open " + path.string());
    std::vector<std::uint8_t> bytes{std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
    return decode_params(bytes);
}

}  // namespace pru
