#pragma once

// Binary parameter files.
//
// Layout (all integers little-endian uint64, values little-endian IEEE-754
// binary64):
//
//   magic "PRUPARAM", version, cell kind tag (0 PRU, 1 LSTM, 2 GRU),
//   layers, k, m, l, readout activation tag, value count,
//   then every parameter in Model::named_fields order.

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <vector>

#include "pru/cells.hpp"

namespace pru {

inline constexpr std::uint64_t param_format_version = 1;

std::vector<std::uint8_t> encode_params(const Model& model);
Model decode_params(const std::vector<std::uint8_t>& bytes);

void save_params(const std::filesystem::path& path, const Model& model);
Model load_params(const std::filesystem::path& path);

}  // namespace pru
