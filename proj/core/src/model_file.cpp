#include "ec2t/model_file.hpp"

#include <zlib.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iterator>
#include <sstream>

#include "ec2t/error.hpp"
#include "ec2t/rng.hpp"
#include "ec2t/ternary_kernels.hpp"
#include "le_io.hpp"

namespace ec2t::storage {

namespace {

std::uint32_t crc32_of(std::span<const std::uint8_t> bytes) {
  uLong crc = crc32(0L, Z_NULL, 0);
  // zlib takes uInt lengths; feed large buffers in chunks.
  std::size_t offset = 0;
  while (offset < bytes.size()) {
    const auto chunk = static_cast<uInt>(std::min<std::size_t>(bytes.size() - offset, 1u << 30));
    crc = crc32(crc, bytes.data() + offset, chunk);
    offset += chunk;
  }
  return static_cast<std::uint32_t>(crc);
}

std::uint32_t checked_u32(std::size_t value, const char* what) {
  if (value > 0xFFFFFFFFu) throw FormatError(std::string(what) + " does not fit in 32 bits");
  return static_cast<std::uint32_t>(value);
}

void write_mask(std::ostream& out, const BitMask& mask) {
  detail::put_le<std::uint32_t>(out, checked_u32(mask.bytes().size(), "mask length"));
  out.write(reinterpret_cast<const char*>(mask.bytes().data()), static_cast<std::streamsize>(mask.bytes().size()));
}

BitMask read_mask(std::istream& in, std::size_t bits, const char* what) {
  const auto length = detail::get_le<std::uint32_t>(in, what);
  if (length != BitMask::byte_length(bits)) {
    throw CorruptLayerError(std::string(what) + " has " + std::to_string(length) + " bytes, expected " +
                            std::to_string(BitMask::byte_length(bits)));
  }
  std::vector<std::uint8_t> bytes(length);
  if (!in.read(reinterpret_cast<char*>(bytes.data()), length)) {
    throw FormatError(std::string("truncated ") + what);
  }
  return BitMask::from_bytes(bits, std::move(bytes));
}

}  // namespace

std::vector<std::uint8_t> serialize_model(const ModelFile& model) {
  if (model.layers.size() > 0xFFFFu) throw FormatError("too many layers for the model format");
  std::ostringstream out(std::ios::binary);
  out.write(kModelMagic, sizeof(kModelMagic));
  detail::put_le<std::uint8_t>(out, kModelVersion);
  detail::put_le<std::uint16_t>(out, static_cast<std::uint16_t>(model.layers.size()));
  for (const auto& entry : model.layers) {
    const auto& layer = entry.layer;
    const auto& d = layer.dims;
    if (entry.name.size() > 0xFFFFu) throw FormatError("layer name too long");
    detail::put_le<std::uint16_t>(out, static_cast<std::uint16_t>(entry.name.size()));
    out.write(entry.name.data(), static_cast<std::streamsize>(entry.name.size()));
    detail::put_le<std::uint8_t>(out, static_cast<std::uint8_t>(d.kind));
    if (d.kind == LayerKind::conv2d) {
      for (auto v : {d.in_channels, d.kernel, d.out_channels, d.out_resolution}) {
        detail::put_le<std::uint32_t>(out, checked_u32(v, "dimension"));
      }
    } else {
      for (auto v : {d.out_channels, d.in_channels, std::size_t{1}, std::size_t{1}}) {
        detail::put_le<std::uint32_t>(out, checked_u32(v, "dimension"));
      }
    }
    detail::put_le<std::uint16_t>(out, layer.negative);
    detail::put_le<std::uint16_t>(out, layer.positive);
    write_mask(out, layer.location);
    write_mask(out, layer.sign);
    if (entry.bn_bias) {
      if (entry.bn_bias->size() != layer.effective_out) {
        throw FormatError("layer '" + entry.name + "' needs one batch-norm bias per effective output channel");
      }
      detail::put_le<std::uint8_t>(out, 1);
      for (auto b : *entry.bn_bias) detail::put_le<std::uint16_t>(out, b);
    } else {
      detail::put_le<std::uint8_t>(out, 0);
    }
  }
  const std::string body = std::move(out).str();
  std::vector<std::uint8_t> bytes(body.begin(), body.end());
  const auto crc = crc32_of(bytes);
  for (int i = 0; i < 4; ++i) bytes.push_back(static_cast<std::uint8_t>((crc >> (8 * i)) & 0xFFu));
  return bytes;
}

ModelFile parse_model(std::span<const std::uint8_t> bytes) {
  constexpr std::size_t kMinimum = sizeof(kModelMagic) + 1 + 2 + 4;
  if (bytes.size() < kMinimum) throw FormatError("model file too short");
  const auto body = bytes.first(bytes.size() - 4);
  std::uint32_t stored = 0;
  for (int i = 0; i < 4; ++i) stored |= static_cast<std::uint32_t>(bytes[body.size() + i]) << (8 * i);
  if (!std::equal(body.begin(), body.begin() + sizeof(kModelMagic), kModelMagic)) {
    throw FormatError("not an EC2TMODL model file");
  }
  if (crc32_of(body) != stored) throw FormatError("model checksum mismatch");

  std::istringstream in(std::string(body.begin(), body.end()), std::ios::binary);
  in.ignore(sizeof(kModelMagic));
  const auto version = detail::get_le<std::uint8_t>(in, "version");
  if (version != kModelVersion) throw FormatError("unsupported model version " + std::to_string(version));
  const auto count = detail::get_le<std::uint16_t>(in, "layer count");

  ModelFile model;
  model.layers.reserve(count);
  for (std::uint16_t l = 0; l < count; ++l) {
    ModelLayer entry;
    const auto name_length = detail::get_le<std::uint16_t>(in, "name length");
    entry.name.resize(name_length);
    if (!in.read(entry.name.data(), name_length)) throw FormatError("truncated layer name");
    const auto kind = detail::get_le<std::uint8_t>(in, "layer kind");
    std::uint32_t dims[4];
    for (auto& v : dims) v = detail::get_le<std::uint32_t>(in, "dimension");
    LayerDims d;
    if (kind == static_cast<std::uint8_t>(LayerKind::conv2d)) {
      d = LayerDims::conv(dims[0], dims[1], dims[2], dims[3]);
    } else if (kind == static_cast<std::uint8_t>(LayerKind::fully_connected)) {
      if (dims[2] != 1 || dims[3] != 1) throw CorruptLayerError("fully-connected layer with unused dims != 1");
      d = LayerDims::fc(dims[0], dims[1]);
    } else {
      throw FormatError("unknown layer kind " + std::to_string(kind));
    }
    try {
      validate(d);
    } catch (const InvalidArgument& e) {
      throw CorruptLayerError(e.what());
    }
    const auto negative = detail::get_le<std::uint16_t>(in, "w_n");
    const auto positive = detail::get_le<std::uint16_t>(in, "w_p");
    auto location = read_mask(in, d.elements(), "location mask");
    auto sign = read_mask(in, location.popcount(), "sign mask");
    entry.layer = make_ternary_layer(d, std::move(location), std::move(sign), negative, positive);
    const auto has_bn = detail::get_le<std::uint8_t>(in, "batch-norm flag");
    if (has_bn > 1) throw FormatError("invalid batch-norm flag");
    if (has_bn) {
      std::vector<Half> bias(entry.layer.effective_out);
      for (auto& b : bias) b = detail::get_le<std::uint16_t>(in, "batch-norm bias");
      entry.bn_bias = std::move(bias);
    }
    model.layers.push_back(std::move(entry));
  }
  if (in.peek() != std::char_traits<char>::eof()) throw FormatError("trailing bytes after last layer");
  return model;
}

void save_model(const std::filesystem::path& path, const ModelFile& model) {
  const auto bytes = serialize_model(model);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot open " + path.string() + " for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error("failed to write " + path.string());
}

std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

ModelFile load_model(const std::filesystem::path& path) { return parse_model(read_file_bytes(path)); }

namespace {

// Worst absolute deviation between the sparse kernel and the dense kernel on
// the decoded weights, over a few random inputs.
double kernel_deviation(const TernaryLayer& layer, Rng& rng) {
  const SparseTernaryKernel sparse(layer);
  const Tensor weights = decode_ternary_layer(layer);
  double worst = 0.0;
  for (int trial = 0; trial < 3; ++trial) {
    Tensor dense_out, sparse_out;
    if (layer.dims.kind == LayerKind::conv2d) {
      const std::size_t side = std::max<std::size_t>(layer.dims.kernel + 2, 5);
      Tensor input({layer.dims.in_channels, side, side});
      for (auto& v : input.mutable_values()) v = static_cast<float>(rng.uniform(-1.0, 1.0));
      const std::size_t padding = layer.dims.kernel / 2;
      dense_out = conv2d_dense(input, weights, 1, padding);
      sparse_out = sparse.conv2d(input, 1, padding);
    } else {
      Tensor input({layer.dims.in_channels});
      for (auto& v : input.mutable_values()) v = static_cast<float>(rng.uniform(-1.0, 1.0));
      dense_out = fc_dense(input, weights);
      sparse_out = sparse.fc(input);
    }
    for (std::size_t i = 0; i < dense_out.size(); ++i) {
      const double scale = std::max(1.0, std::fabs(static_cast<double>(dense_out[i])));
      worst = std::max(worst, std::fabs(static_cast<double>(dense_out[i]) - sparse_out[i]) / scale);
    }
  }
  return worst;
}

}  // namespace

std::vector<VerifyCheck> verify_model(std::span<const std::uint8_t> bytes, std::uint64_t seed) {
  std::vector<VerifyCheck> checks;
  ModelFile model;
  try {
    model = parse_model(bytes);
    checks.push_back({"parse", true, std::to_string(model.layers.size()) + " layers, checksum ok"});
  } catch (const Error& e) {
    checks.push_back({"parse", false, e.what()});
    return checks;
  }

  const auto reserialized = serialize_model(model);
  const bool identical = std::equal(reserialized.begin(), reserialized.end(), bytes.begin(), bytes.end());
  checks.push_back({"reserialize", identical, identical ? "byte-identical" : "re-serialized bytes differ"});

  Rng rng(seed);
  for (const auto& entry : model.layers) {
    const auto& layer = entry.layer;
    const auto labels = decode_labels(layer);
    const quant::CentroidSet centroids{layer.negative_value(), layer.positive_value()};
    const auto reencoded = encode_ternary_layer(labels, centroids, layer.dims);
    const bool round_trip = reencoded == layer && decode_ternary_layer(reencoded) == decode_ternary_layer(layer);
    checks.push_back({"round-trip:" + entry.name, round_trip, round_trip ? "identity" : "encode(decode(x)) != x"});

    const double deviation = kernel_deviation(layer, rng);
    const bool equivalent = deviation <= 1e-6;
    std::ostringstream detail;
    detail << "max scaled deviation " << deviation;
    checks.push_back({"kernel:" + entry.name, equivalent, detail.str()});
  }
  return checks;
}

}  // namespace ec2t::storage
