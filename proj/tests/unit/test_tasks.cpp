#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "pru/error.hpp"
#include "pru/tasks.hpp"

using namespace pru;

namespace {

std::vector<std::uint8_t> be32(std::uint32_t v) {
    return {static_cast<std::uint8_t>(v >> 24), static_cast<std::uint8_t>(v >> 16), static_cast<std::uint8_t>(v >> 8),
            static_cast<std::uint8_t>(v)};
}

std::vector<std::uint8_t> cat(std::initializer_list<std::vector<std::uint8_t>> parts) {
    std::vector<std::uint8_t> out;
    for (const auto& p : parts) out.insert(out.end(), p.begin(), p.end());
    return out;
}

// IDX fixture built byte by byte: 1 image of 2 rows x 3 columns.
const std::vector<std::uint8_t> fixture_pixels = {0, 1, 127, 128, 254, 255};

std::vector<std::uint8_t> fixture_images() {
    return cat({{0x00, 0x00, 0x08, 0x03}, be32(1), be32(2), be32(3), fixture_pixels});
}

std::vector<std::uint8_t> fixture_labels(std::uint8_t label = 7) {
    return cat({{0x00, 0x00, 0x08, 0x01}, be32(1), {label}});
}

DataError::Kind kind_of_failure(const std::vector<std::uint8_t>& images, const std::vector<std::uint8_t>& labels) {
    try {
        parse_mnist_idx(images, labels);
    } catch (const DataError& e) {
        return e.kind();
    }
    FAIL("expected DataError");
    return DataError::Kind::unreadable;
}

}  // namespace

TEST_CASE("memorization generator and oracle") {
    Rng rng(1);
    for (const auto& inst : gen_memorization(3, 4, 0.0, 200, rng)) {
        CHECK(inst.inputs.size() == 7);
        for (std::size_t t = 0; t < 3; ++t) CHECK(std::abs(inst.inputs[t][0]) == 1.0);
        for (std::size_t t = 3; t < 7; ++t) CHECK(inst.inputs[t][0] == 0.0);
        CHECK(memorization_oracle(inst.inputs, 3) == inst.target);
    }
    for (const auto& inst : gen_memorization(2, 0, 1.0, 20, rng)) {
        CHECK(inst.inputs.size() == 2);
        CHECK(inst.target == Vector{inst.inputs[0][0], inst.inputs[1][0]});
    }
    const std::vector<Vector> seq = {Vector{1}, Vector{-1}, Vector{0.3}};
    CHECK(memorization_oracle(seq, 2) == Vector{1, -1});
    CHECK(memorization_oracle(seq, 3) == Vector{1, -1, 0.3});
    CHECK_THROWS_AS(memorization_oracle(seq, 4), ShapeError);
    CHECK_THROWS_AS(gen_memorization(0, 2, 1.0, 1, rng), ConfigError);
}

TEST_CASE("memorization noise moments") {
    Rng rng(2);
    const auto data = gen_memorization(2, 20, 1.0, 50000, rng);
    double sum = 0.0, sq = 0.0;
    std::size_t n = 0;
    for (const auto& inst : data)
        for (std::size_t t = 2; t < 22; ++t) {
            sum += inst.inputs[t][0];
            sq += inst.inputs[t][0] * inst.inputs[t][0];
            ++n;
        }
    const double mean = sum / n;
    CHECK(std::abs(mean) <= 3.0 / std::sqrt(static_cast<double>(n)));
    CHECK(std::abs(sq / n - mean * mean - 1.0) <= 0.05);
}

TEST_CASE("adding generator and oracle") {
    Rng rng(3);
    for (const auto& inst : gen_adding(2, 1.0, 50, rng)) {
        CHECK(inst.inputs[0][1] == 1.0);
        CHECK(inst.inputs[1][1] == 1.0);
        CHECK(inst.target == inst.inputs[0][0] + inst.inputs[1][0]);
    }
    for (const auto& inst : gen_adding(6, 0.0, 50, rng)) CHECK(inst.target == 0.0);
    for (const auto& inst : gen_adding(9, 2.0, 500, rng)) {
        int markers = 0;
        for (const auto& x : inst.inputs) {
            CHECK((x[1] == 0.0 || x[1] == 1.0));
            markers += x[1] == 1.0;
        }
        CHECK(markers == 2);
        CHECK(std::abs(adding_oracle(inst.inputs) - inst.target) <= 1e-15);
    }
    const std::vector<Vector> seq = {Vector{0.7, 1}, Vector{0.4, 0}, Vector{-0.2, 1}};
    CHECK(adding_oracle(seq) == doctest::Approx(0.5).epsilon(1e-15));
    const std::vector<Vector> none = {Vector{0.7, 0}, Vector{0.4, 0}};
    CHECK(adding_oracle(none) == 0.0);
    CHECK_THROWS_AS(gen_adding(1, 1.0, 1, rng), ConfigError);
    CHECK_THROWS_AS(adding_oracle(std::vector<Vector>{Vector{1.0}}), ShapeError);
}

TEST_CASE("pair_from_index enumerates every unordered pair once") {
    for (std::size_t N : {2, 3, 5, 9}) {
        std::set<std::pair<std::size_t, std::size_t>> seen;
        for (std::uint64_t i = 0; i < N * (N - 1) / 2; ++i) {
            const auto p = pair_from_index(N, i);
            CHECK(p.first < p.second);
            CHECK(p.second < N);
            seen.insert(p);
        }
        CHECK(seen.size() == N * (N - 1) / 2);
    }
}

TEST_CASE("generators are deterministic") {
    Rng a(9), b(9);
    const auto x = gen_adding(5, 1.0, 20, a);
    const auto y = gen_adding(5, 1.0, 20, b);
    for (std::size_t i = 0; i < x.size(); ++i) {
        CHECK(x[i].inputs == y[i].inputs);
        CHECK(x[i].target == y[i].target);
    }
}

TEST_CASE("char corpus") {
    auto ds = parse_char_corpus("abab\n", 1.0);
    CHECK(ds.K() == 2);
    REQUIRE(ds.sequences.size() == 1);
    const auto chunks = char_chunks(ds.sequences, ds.K(), 50);
    REQUIRE(chunks.size() == 1);
    CHECK(chunks[0].inputs.size() == 3);
    CHECK(chunks[0].inputs[0] == Vector{1, 0});
    CHECK(chunks[0].inputs[1] == Vector{0, 1});
    CHECK(chunks[0].labels == std::vector<std::uint32_t>{1, 0, 1});

    ds = parse_char_corpus("x\nhello\ny\r\nab\n", 0.5);
    CHECK(ds.sequences.size() == 2);
    CHECK(ds.train_count == 1);
    CHECK(ds.test().size() == 1);
    CHECK(std::string(ds.alphabet.begin(), ds.alphabet.end()) == "heloab");

    CHECK_THROWS_AS(parse_char_corpus("", 0.9), DataError);
    CHECK_THROWS_AS(load_char_corpus("/nonexistent/file.txt", 0.9), DataError);
    CHECK_THROWS_AS(parse_char_corpus("aaaa\n", 0.9), DataError);
}

TEST_CASE("char chunks keep the shift invariant across cuts") {
    const std::vector<std::vector<std::uint32_t>> seqs = {{0, 1, 2, 0, 1, 2, 0}};
    const auto chunks = char_chunks(seqs, 3, 4);
    REQUIRE(chunks.size() == 2);
    CHECK(chunks[0].inputs.size() == 4);
    CHECK(chunks[1].inputs.size() == 2);
    std::vector<std::uint32_t> labels;
    for (const auto& c : chunks) labels.insert(labels.end(), c.labels.begin(), c.labels.end());
    CHECK(labels == std::vector<std::uint32_t>{1, 2, 0, 1, 2, 0});
    for (const auto& c : chunks)
        for (std::size_t t = 0; t + 1 < c.inputs.size(); ++t) CHECK(c.inputs[t + 1][c.labels[t]] == 1.0);
}

TEST_CASE("bundled corpus") {
    const auto ds = load_char_corpus(std::filesystem::path(PRU_DATA_DIR) / "sonnets.txt", 0.9);
    CHECK(ds.K() >= 2);
    CHECK(ds.K() <= 64);
    CHECK(ds.train_count == static_cast<std::size_t>(std::floor(0.9 * ds.sequences.size())));
}

TEST_CASE("IDX fixture parses byte for byte") {
    const auto ds = parse_mnist_idx(fixture_images(), fixture_labels());
    CHECK(ds.size() == 1);
    CHECK(ds.rows == 2);
    CHECK(ds.cols == 3);
    CHECK(std::vector<std::uint8_t>(ds.image(0).begin(), ds.image(0).end()) == fixture_pixels);
    CHECK(ds.labels[0] == 7);
    const auto seq = ds.row_sequence(0);
    CHECK(seq.size() == 2);
    CHECK(seq[0] == Vector{0.0, 1 / 255.0, 127 / 255.0});
    CHECK(seq[1][2] == 1.0);
    CHECK(encode_idx_images(fixture_pixels, 1, 2, 3) == fixture_images());
    CHECK(encode_idx_labels(std::vector<std::uint8_t>{7}) == fixture_labels());
}

TEST_CASE("IDX errors are distinguished") {
    auto bad = fixture_images();
    bad[3] = 0x01;
    CHECK(kind_of_failure(bad, fixture_labels()) == DataError::Kind::bad_magic);
    CHECK(kind_of_failure(fixture_images(), fixture_images()) == DataError::Kind::bad_magic);
    auto short_img = fixture_images();
    short_img.pop_back();
    CHECK(kind_of_failure(short_img, fixture_labels()) == DataError::Kind::truncated);
    CHECK(kind_of_failure({0, 0}, fixture_labels()) == DataError::Kind::truncated);
    const auto two_labels = cat({{0x00, 0x00, 0x08, 0x01}, be32(2), {1, 2}});
    CHECK(kind_of_failure(fixture_images(), two_labels) == DataError::Kind::count_mismatch);
    CHECK(kind_of_failure(fixture_images(), fixture_labels(12)) == DataError::Kind::malformed);
    CHECK_THROWS_AS(load_mnist_idx("/nonexistent/a", "/nonexistent/b"), DataError);
}

TEST_CASE("all-zero image gives zero row vectors") {
    const std::vector<std::uint8_t> pixels(28 * 28, 0);
    const auto ds = parse_mnist_idx(encode_idx_images(pixels, 1, 28, 28), encode_idx_labels(std::vector<std::uint8_t>{3}));
    const auto seq = ds.row_sequence(0);
    CHECK(seq.size() == 28);
    for (const auto& row : seq) CHECK(row == Vector(28));
}

TEST_CASE("bundled MNIST subset") {
    const std::filesystem::path dir(PRU_DATA_DIR);
    const auto train = load_mnist_idx(dir / "mnist-subset-train-images-idx3-ubyte", dir / "mnist-subset-train-labels-idx1-ubyte");
    const auto test = load_mnist_idx(dir / "mnist-subset-test-images-idx3-ubyte", dir / "mnist-subset-test-labels-idx1-ubyte");
    CHECK(train.size() == 2000);
    CHECK(test.size() == 500);
    std::map<int, int> counts;
    for (auto l : train.labels) ++counts[l];
    for (int d = 0; d < 10; ++d) CHECK(counts[d] == 200);
}

TEST_CASE("text export round-trips exactly") {
    Rng rng(4);
    const auto mem = gen_memorization(2, 3, 1.0, 5, rng);
    std::stringstream ss;
    write_dataset_text(ss, mem);
    const auto recs = read_dataset_text(ss);
    REQUIRE(recs.size() == 5);
    for (std::size_t i = 0; i < 5; ++i) {
        for (std::size_t t = 0; t < 5; ++t) CHECK(recs[i].inputs[t] == mem[i].inputs[t][0]);
        CHECK(recs[i].targets == mem[i].target.values());
    }
    const auto add = gen_adding(4, 1.0, 3, rng);
    std::stringstream sa;
    write_dataset_text(sa, add);
    const auto ra = read_dataset_text(sa);
    CHECK(ra[0].inputs.size() == 8);
    CHECK(ra[0].targets == std::vector<double>{add[0].target});
    std::stringstream broken("1 2 3\n");
    CHECK_THROWS_AS(read_dataset_text(broken), DataError);
}
