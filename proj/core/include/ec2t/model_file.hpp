#pragma once

// ".ec2t" model container.
//
//   "EC2TMODL"  u8 version (1)  u16 layer_count
//   per layer:
//     u16 name_length, name bytes (UTF-8)
//     u8  kind (0 = conv2d, 1 = fully-connected)
//     u32 dims[4]   conv: N, K, M, output side   fc: M, N, 1, 1
//     u16 w_n, u16 w_p               (binary16)
//     u32 location_bytes, location mask (LSB-first, zero padded)
//     u32 sign_bytes, sign mask      (one bit per nonzero, row-major)
//     u8  has_bn, then M_eff x u16 batch-norm biases when set
//   u32 CRC-32 (IEEE) of every preceding byte
//
// All integers are little-endian.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ec2t/half.hpp"
#include "ec2t/ternary_layer.hpp"

namespace ec2t::storage {

inline constexpr char kModelMagic[8] = {'E', 'C', '2', 'T', 'M', 'O', 'D', 'L'};
inline constexpr std::uint8_t kModelVersion = 1;

struct ModelLayer {
  std::string name;
  TernaryLayer layer;
  std::optional<std::vector<Half>> bn_bias;  // effective_out entries when present

  friend bool operator==(const ModelLayer&, const ModelLayer&) = default;
};

struct ModelFile {
  std::vector<ModelLayer> layers;

  friend bool operator==(const ModelFile&, const ModelFile&) = default;
};

std::vector<std::uint8_t> serialize_model(const ModelFile& model);

/// Throws FormatError (or CorruptLayerError) on a bad magic, version,
/// checksum, truncated or trailing data, or inconsistent masks.
ModelFile parse_model(std::span<const std::uint8_t> bytes);

void save_model(const std::filesystem::path& path, const ModelFile& model);
ModelFile load_model(const std::filesystem::path& path);
std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path);

struct VerifyCheck {
  std::string name;
  bool passed = false;
  std::string detail;
};

/// Integrity checks over a serialized model: parse (checksum and mask
/// invariants), byte-identical re-serialization, decode/encode round trip per
/// layer, and sparse-vs-dense kernel equivalence on seeded random inputs.
std::vector<VerifyCheck> verify_model(std::span<const std::uint8_t> bytes, std::uint64_t seed);

}  // namespace ec2t::storage
