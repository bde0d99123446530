#pragma once

// Synthetic task generators with their exact oracles, and loaders for the
// character-corpus and MNIST IDX datasets.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "pru/math.hpp"
#include "pru/network.hpp"
#include "pru/rng.hpp"

namespace pru {

// ---------------------------------------------------------------- memorization

struct MemorizationInstance {
    std::vector<Vector> inputs;  // I + N scalars: I symbols in {+1, -1}, then N noise samples
    Vector target;               // the first I inputs
};

// Noise entries are N(0, delta2); with delta2 == 0 they are exactly 0.
std::vector<MemorizationInstance> gen_memorization(std::size_t I, std::size_t N, double delta2, std::size_t count,
                                                   Rng& rng);

// The memorization machine: first I scalars of the sequence, in order.
Vector memorization_oracle(std::span<const Vector> inputs, std::size_t I);

// ---------------------------------------------------------------- adding

struct AddingInstance {
    std::vector<Vector> inputs;  // N two-vectors: (value, marker)
    double target = 0.0;
};

// Markers form an unordered pair drawn uniformly from the N(N-1)/2 choices.
std::vector<AddingInstance> gen_adding(std::size_t N, double delta2, std::size_t count, Rng& rng);

// sum_t x_t[1] * x_t[2]
double adding_oracle(std::span<const Vector> inputs);

// Unordered pair (i < j) with the given index in lexicographic order.
std::pair<std::size_t, std::size_t> pair_from_index(std::size_t N, std::uint64_t index);

// ---------------------------------------------------------------- character corpus

struct CharDataset {
    std::vector<unsigned char> alphabet;             // first-appearance order; newline excluded
    std::vector<std::vector<std::uint32_t>> sequences;  // one per kept line, as alphabet indices
    double train_fraction = 0.9;
    std::size_t train_count = 0;                      // leading sequences used for training
    std::size_t total_characters = 0;                 // symbol occurrences in kept sequences

    std::size_t K() const noexcept { return alphabet.size(); }
    std::span<const std::vector<std::uint32_t>> train() const;
    std::span<const std::vector<std::uint32_t>> test() const;
};

// Lines are newline-delimited (a trailing '\r' is stripped); lines shorter
// than two symbols have no prediction target and are dropped.
CharDataset load_char_corpus(const std::filesystem::path& path, double train_fraction);
CharDataset parse_char_corpus(const std::string& text, double train_fraction);

// One-hot encoded chunks of at most `chunk_length` inputs; labels[t] is the
// index of the symbol following input t.
std::vector<Sequence> char_chunks(std::span<const std::vector<std::uint32_t>> sequences, std::size_t K,
                                  std::size_t chunk_length);

// ---------------------------------------------------------------- MNIST

struct MnistDataset {
    std::size_t rows = 28;
    std::size_t cols = 28;
    std::vector<std::uint8_t> pixels;  // count * rows * cols, row-major per image
    std::vector<std::uint8_t> labels;

    std::size_t size() const noexcept { return labels.size(); }
    std::span<const std::uint8_t> image(std::size_t i) const;
    // Image i as `rows` vectors of `cols` pixels scaled to [0, 1].
    std::vector<Vector> row_sequence(std::size_t i) const;
};

MnistDataset load_mnist_idx(const std::filesystem::path& images_path, const std::filesystem::path& labels_path);
MnistDataset parse_mnist_idx(std::span<const std::uint8_t> images_file, std::span<const std::uint8_t> labels_file);

std::vector<std::uint8_t> encode_idx_images(std::span<const std::uint8_t> pixels, std::size_t count,
                                            std::size_t rows, std::size_t cols);
std::vector<std::uint8_t> encode_idx_labels(std::span<const std::uint8_t> labels);

// ---------------------------------------------------------------- conversions

Sequence to_sequence(const MemorizationInstance& inst);
Sequence to_sequence(const AddingInstance& inst);
Sequence mnist_sequence(const MnistDataset& data, std::size_t i);

// ---------------------------------------------------------------- text export
//
// One instance per line: the flattened input values, then " | ", then the
// target value(s).  Values are printed with 17 significant digits so that
// parsing restores them exactly.

void write_dataset_text(std::ostream& os, std::span<const MemorizationInstance> data);
void write_dataset_text(std::ostream& os, std::span<const AddingInstance> data);

struct TextRecord {
    std::vector<double> inputs;
    std::vector<double> targets;
};
std::vector<TextRecord> read_dataset_text(std::istream& is);

}  // namespace pru
