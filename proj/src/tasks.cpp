#include "pru/tasks.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <iterator>
#include <sstream>

#include "pru/error.hpp"

namespace pru {

namespace {

std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError(DataError::Kind::unreadable, "cannot open " + path.string());
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

std::uint32_t read_be32(std::span<const std::uint8_t> bytes, std::size_t offset) {
    return (std::uint32_t{bytes[offset]} << 24) | (std::uint32_t{bytes[offset + 1]} << 16) |
           (std::uint32_t{bytes[offset + 2]} << 8) | std::uint32_t{bytes[offset + 3]};
}

void put_be32(std::vector<std::uint8_t>& out, std::uint32_t v) {
    out.push_back(static_cast<std::uint8_t>(v >> 24));
    out.push_back(static_cast<std::uint8_t>(v >> 16));
    out.push_back(static_cast<std::uint8_t>(v >> 8));
    out.push_back(static_cast<std::uint8_t>(v));
}

void put_value(std::ostream& os, double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    os << buf;
}

}  // namespace

// ---------------------------------------------------------------- memorization

std::vector<MemorizationInstance> gen_memorization(std::size_t I, std::size_t N, double delta2, std::size_t count,
                                                   Rng& rng) {
    if (I < 1) throw ConfigError("memorization: I must be at least 1");
    if (count < 1) throw ConfigError("memorization: count must be at least 1");
    if (!(delta2 >= 0.0)) throw ConfigError("memorization: delta2 must be non-negative");
    const double sd = std::sqrt(delta2);
    std::vector<MemorizationInstance> out(count);
    for (auto& inst : out) {
        inst.inputs.reserve(I + N);
        for (std::size_t t = 0; t < I; ++t) inst.inputs.push_back(Vector{rng.below(2) == 0 ? 1.0 : -1.0});
        for (std::size_t t = 0; t < N; ++t) {
            const double z = rng.normal();
            inst.inputs.push_back(Vector{sd == 0.0 ? 0.0 : sd * z});
        }
        inst.target = memorization_oracle(inst.inputs, I);
    }
    return out;
}

Vector memorization_oracle(std::span<const Vector> inputs, std::size_t I) {
    if (I > inputs.size()) {
        throw ShapeError("memorization_oracle: I=" + std::to_string(I) + " exceeds sequence length " +
                         std::to_string(inputs.size()));
    }
    Vector out(I);
    for (std::size_t t = 0; t < I; ++t) {
        if (inputs[t].size() != 1) throw ShapeError("memorization_oracle: inputs must be scalars");
        out[t] = inputs[t][0];
    }
    return out;
}

// ---------------------------------------------------------------- adding

std::pair<std::size_t, std::size_t> pair_from_index(std::size_t N, std::uint64_t index) {
    std::size_t i = 0;
    std::uint64_t remaining = index;
    while (remaining >= N - 1 - i) {
        remaining -= N - 1 - i;
        ++i;
    }
    return {i, i + 1 + static_cast<std::size_t>(remaining)};
}

std::vector<AddingInstance> gen_adding(std::size_t N, double delta2, std::size_t count, Rng& rng) {
    if (N < 2) throw ConfigError("adding: N must be at least 2");
    if (count < 1) throw ConfigError("adding: count must be at least 1");
    if (!(delta2 >= 0.0)) throw ConfigError("adding: delta2 must be non-negative");
    const double sd = std::sqrt(delta2);
    const std::uint64_t pairs = static_cast<std::uint64_t>(N) * (N - 1) / 2;
    std::vector<AddingInstance> out(count);
    for (auto& inst : out) {
        inst.inputs.assign(N, Vector(2));
        for (auto& x : inst.inputs) {
            const double z = rng.normal();
            x[0] = sd == 0.0 ? 0.0 : sd * z;
        }
        const auto [a, b] = pair_from_index(N, rng.below(pairs));
        inst.inputs[a][1] = 1.0;
        inst.inputs[b][1] = 1.0;
        inst.target = adding_oracle(inst.inputs);
    }
    return out;
}

double adding_oracle(std::span<const Vector> inputs) {
    double sum = 0.0;
    for (std::size_t t = 0; t < inputs.size(); ++t) {
        if (inputs[t].size() != 2)
            throw ShapeError("adding_oracle: entry " + std::to_string(t + 1) + " is not a 2-vector");
        sum += inputs[t][0] * inputs[t][1];
    }
    return sum;
}

// ---------------------------------------------------------------- character corpus

std::span<const std::vector<std::uint32_t>> CharDataset::train() const {
    return std::span(sequences).first(train_count);
}

std::span<const std::vector<std::uint32_t>> CharDataset::test() const {
    return std::span(sequences).subspan(train_count);
}

CharDataset parse_char_corpus(const std::string& text, double train_fraction) {
    if (!(train_fraction > 0.0 && train_fraction <= 1.0))
        throw ConfigError("train_fraction must lie in (0, 1]");
    if (text.empty()) throw DataError(DataError::Kind::empty, "corpus is empty");

    CharDataset ds;
    ds.train_fraction = train_fraction;
    std::int32_t index_of[256];
    std::fill(std::begin(index_of), std::end(index_of), -1);

    std::size_t start = 0;
    while (start <= text.size()) {
        std::size_t end = text.find('\n', start);
        if (end == std::string::npos) end = text.size();
        std::size_t stop = end;
        if (stop > start && text[stop - 1] == '\r') --stop;
        if (stop - start >= 2) {
            std::vector<std::uint32_t> seq;
            seq.reserve(stop - start);
            for (std::size_t i = start; i < stop; ++i) {
                const auto c = static_cast<unsigned char>(text[i]);
                if (index_of[c] < 0) {
                    index_of[c] = static_cast<std::int32_t>(ds.alphabet.size());
                    ds.alphabet.push_back(c);
                }
                seq.push_back(static_cast<std::uint32_t>(index_of[c]));
            }
            ds.total_characters += seq.size();
            ds.sequences.push_back(std::move(seq));
        }
        start = end + 1;
    }
    if (ds.sequences.empty()) throw DataError(DataError::Kind::empty, "corpus has no line with two or more symbols");
    if (ds.alphabet.size() < 2) throw DataError(DataError::Kind::malformed, "corpus needs at least 2 distinct symbols");
    ds.train_count = static_cast<std::size_t>(std::floor(train_fraction * static_cast<double>(ds.sequences.size())));
    if (ds.train_count == 0) ds.train_count = 1;
    return ds;
}

CharDataset load_char_corpus(const std::filesystem::path& path, double train_fraction) {
    const auto bytes = read_file(path);
    return parse_char_corpus(std::string(bytes.begin(), bytes.end()), train_fraction);
}

std::vector<Sequence> char_chunks(std::span<const std::vector<std::uint32_t>> sequences, std::size_t K,
                                  std::size_t chunk_length) {
    if (chunk_length == 0) throw ConfigError("chunk_length must be positive");
    std::vector<Sequence> out;
    for (const auto& seq : sequences) {
        // chunks overlap by one symbol so every transition appears exactly once
        for (std::size_t begin = 0; begin + 1 < seq.size(); begin += chunk_length) {
            const std::size_t n = std::min(chunk_length, seq.size() - 1 - begin);
            Sequence s;
            s.inputs.reserve(n);
            s.labels.reserve(n);
            for (std::size_t t = 0; t < n; ++t) {
                if (seq[begin + t] >= K || seq[begin + t + 1] >= K) throw ShapeError("char_chunks: symbol index >= K");
                Vector x(K);
                x[seq[begin + t]] = 1.0;
                s.inputs.push_back(std::move(x));
                s.labels.push_back(seq[begin + t + 1]);
            }
            out.push_back(std::move(s));
        }
    }
    return out;
}

// ---------------------------------------------------------------- MNIST

std::span<const std::uint8_t> MnistDataset::image(std::size_t i) const {
    return std::span(pixels).subspan(i * rows * cols, rows * cols);
}

std::vector<Vector> MnistDataset::row_sequence(std::size_t i) const {
    const auto img = image(i);
    std::vector<Vector> seq(rows, Vector(cols));
    for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t c = 0; c < cols; ++c) seq[r][c] = img[r * cols + c] / 255.0;
    return seq;
}

MnistDataset parse_mnist_idx(std::span<const std::uint8_t> images_file, std::span<const std::uint8_t> labels_file) {
    using K = DataError::Kind;
    if (images_file.size() < 4) throw DataError(K::truncated, "IDX images: file shorter than its magic number");
    if (const auto magic = read_be32(images_file, 0); magic != 0x00000803) {
        char buf[64];
        std::snprintf(buf, sizeof buf, "IDX images: bad magic 0x%08x (expected 0x00000803)", magic);
        throw DataError(K::bad_magic, buf);
    }
    if (labels_file.size() < 4) throw DataError(K::truncated, "IDX labels: file shorter than its magic number");
    if (const auto magic = read_be32(labels_file, 0); magic != 0x00000801) {
        char buf[64];
        std::snprintf(buf, sizeof buf, "IDX labels: bad magic 0x%08x (expected 0x00000801)", magic);
        throw DataError(K::bad_magic, buf);
    }
    if (images_file.size() < 16) throw DataError(K::truncated, "IDX images: header truncated");
    if (labels_file.size() < 8) throw DataError(K::truncated, "IDX labels: header truncated");

    MnistDataset ds;
    const std::size_t count = read_be32(images_file, 4);
    ds.rows = read_be32(images_file, 8);
    ds.cols = read_be32(images_file, 12);
    const std::size_t label_count = read_be32(labels_file, 4);
    const std::size_t pixel_bytes = count * ds.rows * ds.cols;
    if (images_file.size() < 16 + pixel_bytes) {
        throw DataError(K::truncated, "IDX images: header declares " + std::to_string(count) + " images but only " +
                                          std::to_string(images_file.size() - 16) + " pixel bytes follow");
    }
    if (labels_file.size() < 8 + label_count) {
        throw DataError(K::truncated, "IDX labels: header declares " + std::to_string(label_count) +
                                          " labels but only " + std::to_string(labels_file.size() - 8) + " follow");
    }
    if (count != label_count) {
        throw DataError(K::count_mismatch, "IDX: " + std::to_string(count) + " images but " +
                                               std::to_string(label_count) + " labels");
    }
    ds.pixels.assign(images_file.begin() + 16, images_file.begin() + 16 + static_cast<std::ptrdiff_t>(pixel_bytes));
    ds.labels.assign(labels_file.begin() + 8, labels_file.begin() + 8 + static_cast<std::ptrdiff_t>(label_count));
    for (std::size_t i = 0; i < ds.labels.size(); ++i) {
        if (ds.labels[i] > 9)
            throw DataError(K::malformed, "IDX labels: label " + std::to_string(ds.labels[i]) + " at item " +
                                              std::to_string(i) + " is outside 0..9");
    }
    return ds;
}

MnistDataset load_mnist_idx(const std::filesystem::path& images_path, const std::filesystem::path& labels_path) {
    const auto images = read_file(images_path);
    const auto labels = read_file(labels_path);
    return parse_mnist_idx(images, labels);
}

std::vector<std::uint8_t> encode_idx_images(std::span<const std::uint8_t> pixels, std::size_t count,
                                            std::size_t rows, std::size_t cols) {
    if (pixels.size() != count * rows * cols) throw ShapeError("encode_idx_images: pixel count mismatch");
    std::vector<std::uint8_t> out;
    out.reserve(16 + pixels.size());
    put_be32(out, 0x00000803);
    put_be32(out, static_cast<std::uint32_t>(count));
    put_be32(out, static_cast<std::uint32_t>(rows));
    put_be32(out, static_cast<std::uint32_t>(cols));
    out.insert(out.end(), pixels.begin(), pixels.end());
    return out;
}

std::vector<std::uint8_t> encode_idx_labels(std::span<const std::uint8_t> labels) {
    std::vector<std::uint8_t> out;
    out.reserve(8 + labels.size());
    put_be32(out, 0x00000801);
    put_be32(out, static_cast<std::uint32_t>(labels.size()));
    out.insert(out.end(), labels.begin(), labels.end());
    return out;
}

// ---------------------------------------------------------------- conversions

Sequence to_sequence(const MemorizationInstance& inst) { return {inst.inputs, inst.target, {}}; }

Sequence to_sequence(const AddingInstance& inst) { return {inst.inputs, Vector{inst.target}, {}}; }

Sequence mnist_sequence(const MnistDataset& data, std::size_t i) {
    return {data.row_sequence(i), Vector(), {data.labels.at(i)}};
}

// ---------------------------------------------------------------- text export

void write_dataset_text(std::ostream& os, std::span<const MemorizationInstance> data) {
    for (const auto& inst : data) {
        for (const auto& x : inst.inputs) {
            put_value(os, x[0]);
            os << ' ';
        }
        os << '|';
        for (double t : inst.target) {
            os << ' ';
            put_value(os, t);
        }
        os << '\n';
    }
}

void write_dataset_text(std::ostream& os, std::span<const AddingInstance> data) {
    for (const auto& inst : data) {
        for (const auto& x : inst.inputs) {
            put_value(os, x[0]);
            os << ' ';
            put_value(os, x[1]);
            os << ' ';
        }
        os << "| ";
        put_value(os, inst.target);
        os << '\n';
    }
}

std::vector<TextRecord> read_dataset_text(std::istream& is) {
    std::vector<TextRecord> out;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(is, line)) {
        ++line_no;
        if (line.empty()) continue;
        const auto bar = line.find('|');
        if (bar == std::string::npos)
            throw DataError(DataError::Kind::malformed, "dataset line " + std::to_string(line_no) + " has no '|'");
        TextRecord rec;
        auto parse = [&](const std::string& part, std::vector<double>& dst) {
            std::istringstream ss(part);
            std::string tok;
            while (ss >> tok) {
                char* end = nullptr;
                const double v = std::strtod(tok.c_str(), &end);
                if (end == tok.c_str() || *end != '\0') {
                    throw DataError(DataError::Kind::malformed,
                                    "dataset line " + std::to_string(line_no) + ": bad value '" + tok + "'");
                }
                dst.push_back(v);
            }
        };
        parse(line.substr(0, bar), rec.inputs);
        parse(line.substr(bar + 1), rec.targets);
        out.push_back(std::move(rec));
    }
    return out;
}

}  // namespace pru
