#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <string_view>

namespace pru {

// Seeded generator whose every derived draw is defined here rather than by
// the standard library's (implementation-defined) distributions, so a seed
// reproduces the same stream on any platform.
//
//   raw bits : std::mt19937_64 (fully specified by the standard)
//   uniform  : top 53 bits / 2^53, in [0, 1)
//   integers : Lemire's multiply-shift with rejection, unbiased
//   normal   : Marsaglia polar method, spare value cached
class Rng {
public:
    static constexpr std::string_view algorithm = "mt19937_64/u53/lemire/polar";

    explicit Rng(std::uint64_t seed) : seed_(seed), engine_(seed) {}

    std::uint64_t seed() const noexcept { return seed_; }

    std::uint64_t next_u64() { return engine_(); }
    double uniform();
    double uniform(double lo, double hi);
    // Uniform integer in [0, n); n > 0.
    std::uint64_t below(std::uint64_t n);
    double normal();
    double normal(double mean, double stddev) { return mean + stddev * normal(); }

    void shuffle(std::span<std::size_t> items);

private:
    std::uint64_t seed_;
    std::mt19937_64 engine_;
    bool has_spare_ = false;
    double spare_ = 0.0;
};

// SplitMix64 finalizer; derives independent sub-seeds from one config seed.
std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t salt) noexcept;

}  // namespace pru
