#pragma once

#include <filesystem>
#include <iosfwd>

#include "ec2t/tensor.hpp"

namespace ec2t {

// ".ect-tensor" container: magic "ECT-TNSR", u8 version (1), u8 rank,
// rank x u32 dims, then row-major f32 values. Everything little-endian.
inline constexpr char kTensorMagic[8] = {'E', 'C', 'T', '-', 'T', 'N', 'S', 'R'};
inline constexpr std::uint8_t kTensorVersion = 1;

void write_tensor(std::ostream& out, const Tensor& tensor);
Tensor read_tensor(std::istream& in);

void save_tensor(const std::filesystem::path& path, const Tensor& tensor);
Tensor load_tensor(const std::filesystem::path& path);

}  // namespace ec2t
