#include "ec2t/tensor_io.hpp"

#include <algorithm>
#include <fstream>
#include <istream>
#include <ostream>

#include "ec2t/error.hpp"
#include "le_io.hpp"

namespace ec2t {

void write_tensor(std::ostream& out, const Tensor& tensor) {
  if (tensor.rank() > 255) throw DimensionError("tensor rank exceeds 255");
  out.write(kTensorMagic, sizeof(kTensorMagic));
  detail::put_le<std::uint8_t>(out, kTensorVersion);
  detail::put_le<std::uint8_t>(out, static_cast<std::uint8_t>(tensor.rank()));
  for (auto d : tensor.shape()) {
    if (d > 0xFFFFFFFFu) throw DimensionError("tensor dimension exceeds 32 bits");
    detail::put_le<std::uint32_t>(out, static_cast<std::uint32_t>(d));
  }
  for (float v : tensor.values()) detail::put_f32(out, v);
  if (!out) throw Error("failed to write tensor");
}

Tensor read_tensor(std::istream& in) {
  char magic[sizeof(kTensorMagic)];
  if (!in.read(magic, sizeof(magic)) || !std::equal(magic, magic + sizeof(magic), kTensorMagic)) {
    throw FormatError("not an ECT-TNSR tensor file");
  }
  const auto version = detail::get_le<std::uint8_t>(in, "version");
  if (version != kTensorVersion) throw FormatError("unsupported tensor version " + std::to_string(version));
  const auto rank = detail::get_le<std::uint8_t>(in, "rank");
  if (rank == 0) throw FormatError("tensor rank must be at least 1");
  Shape shape(rank);
  for (auto& d : shape) d = detail::get_le<std::uint32_t>(in, "dimension");
  const std::size_t count = shape_size(shape);
  std::vector<float> data(count);
  for (auto& v : data) v = detail::get_f32(in, "tensor values");
  return Tensor(std::move(shape), std::move(data));
}

void save_tensor(const std::filesystem::path& path, const Tensor& tensor) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot open " + path.string() + " for writing");
  write_tensor(out, tensor);
}

Tensor load_tensor(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path.string());
  return read_tensor(in);
}

}  // namespace ec2t
