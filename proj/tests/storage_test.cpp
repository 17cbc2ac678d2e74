#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>

#include <zlib.h>

#include "ec2t/error.hpp"
#include "ec2t/model_file.hpp"
#include "ec2t/ternary_kernels.hpp"
#include "ec2t/ternary_layer.hpp"
#include "oracles.hpp"

namespace ec2t::storage {
namespace {

using quant::Label;
constexpr Label N = Label::negative, Z = Label::zero, P = Label::positive;

quant::AssignmentMatrix labels_for(const LayerDims& dims, std::vector<Label> labels) {
  return quant::AssignmentMatrix(dims.weight_shape(), std::move(labels));
}

LayerDims random_dims(Rng& rng) {
  if (rng.below(2)) return LayerDims::fc(1 + rng.below(12), 1 + rng.below(12));
  return LayerDims::conv(1 + rng.below(5), 1 + 2 * rng.below(2), 1 + rng.below(6), 1 + rng.below(4));
}

quant::CentroidSet random_centroids(Rng& rng) {
  return {static_cast<float>(-rng.uniform(1e-3, 2)), static_cast<float>(rng.uniform(1e-3, 2))};
}

TEST(Encode, DirectExample) {
  const auto dims = LayerDims::fc(1, 4);
  const auto layer = encode_ternary_layer(labels_for(dims, {P, Z, N, Z}), {-0.5f, 0.5f}, dims);
  EXPECT_EQ(layer.location.size(), 4u);
  EXPECT_EQ(layer.location.bytes()[0], 0b0101);  // bits 1010 in element order, LSB first
  EXPECT_EQ(layer.sign.size(), 2u);
  EXPECT_EQ(layer.sign.bytes()[0], 0b01);
  EXPECT_EQ(layer.density(), 0.5);
  EXPECT_EQ(decode_ternary_layer(layer), Tensor({1, 4}, {0.5f, 0, -0.5f, 0}));
}

TEST(Encode, AllZeroLayer) {
  const auto dims = LayerDims::conv(3, 3, 2);
  const auto layer = encode_ternary_layer(quant::AssignmentMatrix(dims.weight_shape(), Z), {-1.0f, 1.0f}, dims);
  EXPECT_EQ(layer.nonzeros(), 0u);
  EXPECT_EQ(layer.effective_in, 0u);
  EXPECT_EQ(layer.effective_out, 0u);
  EXPECT_EQ(layer.density(), 0.0);
  EXPECT_EQ(decode_ternary_layer(layer), Tensor(dims.weight_shape()));
  const auto count = count_storage_params(layer, true);
  EXPECT_EQ(count.sign, 0.0);
  EXPECT_EQ(count.mask, 0.0);
  EXPECT_EQ(count.centroids, 1.0);
}

TEST(Encode, CentroidsRoundToHalf) {
  const auto dims = LayerDims::fc(1, 2);
  const auto layer = encode_ternary_layer(labels_for(dims, {P, N}), {-0.1f, 0.3f}, dims);
  EXPECT_EQ(layer.positive, float_to_half(0.3f));
  EXPECT_EQ(layer.negative, float_to_half(-0.1f));
  EXPECT_EQ(decode_ternary_layer(layer), Tensor({1, 2}, {round_through_half(0.3f), round_through_half(-0.1f)}));
}

TEST(Encode, EffectiveChannels) {
  // 3 out x 4 in FC; only out rows 0 and 2 and in columns 1 and 3 carry weights.
  const auto dims = LayerDims::fc(3, 4);
  const auto layer = encode_ternary_layer(labels_for(dims, {Z, P, Z, Z, Z, Z, Z, Z, Z, N, Z, P}), {-1.0f, 1.0f}, dims);
  EXPECT_EQ(layer.effective_out, 2u);
  EXPECT_EQ(layer.effective_in, 2u);
}

TEST(RoundTrip, RandomConvLayer) {
  Rng rng(2);
  const auto dims = LayerDims::conv(4, 3, 8);
  for (int trial = 0; trial < 50; ++trial) {
    const auto a = labels_for(dims, oracle::random_labels(rng, dims.elements(), rng.uniform()));
    const auto c = random_centroids(rng);
    const auto layer = encode_ternary_layer(a, c, dims);
    EXPECT_EQ(decode_ternary_layer(layer), materialize_half(a, c));
    EXPECT_EQ(decode_labels(layer), a);
    EXPECT_EQ(layer.location.popcount(), layer.sign.size());
  }
}

TEST(RoundTrip, FuzzedLayers) {
  Rng rng(3);
  for (int trial = 0; trial < 1000; ++trial) {
    const auto dims = random_dims(rng);
    const auto a = labels_for(dims, oracle::random_labels(rng, dims.elements(), rng.uniform()));
    const auto c = random_centroids(rng);
    const auto layer = encode_ternary_layer(a, c, dims);
    ASSERT_EQ(decode_ternary_layer(layer), materialize_half(a, c));
    ASSERT_EQ(decode_labels(layer), a);
  }
}

TEST(MakeLayer, RejectsInconsistentMasks) {
  const auto dims = LayerDims::fc(1, 4);
  BitMask location(4);
  location.set(0);
  location.set(2);
  EXPECT_THROW(make_ternary_layer(dims, location, BitMask(1), 0, 0), CorruptLayerError);
  EXPECT_THROW(make_ternary_layer(dims, BitMask(5), BitMask(0), 0, 0), CorruptLayerError);
  EXPECT_NO_THROW(make_ternary_layer(dims, location, BitMask(2), 0xB800, 0x3800));
}

TEST(StorageCount, WorkedExample) {
  const auto dims = LayerDims::conv(16, 3, 32);
  std::vector<Label> labels(dims.elements(), Z);
  for (std::size_t i = 0; i < labels.size(); i += 4) labels[i] = (i / 4) % 2 ? P : N;
  const auto layer = encode_ternary_layer(labels_for(dims, labels), {-1.0f, 1.0f}, dims);
  ASSERT_EQ(layer.effective_in, 16u);
  ASSERT_EQ(layer.effective_out, 32u);
  ASSERT_EQ(layer.nonzeros() * 4, dims.elements());
  const auto count = count_storage_params(layer, true);
  EXPECT_EQ(count.mask, 144.0);
  EXPECT_EQ(count.sign, 36.0);
  EXPECT_EQ(count.centroids, 1.0);
  EXPECT_EQ(count.batch_norm, 16.0);
  EXPECT_EQ(count.total(), 197.0);
  EXPECT_EQ(count_storage_params(layer, false).total(), 181.0);
}

TEST(StorageCount, DenseTernaryHasEqualMaskAndSign) {
  const auto dims = LayerDims::conv(3, 3, 4);
  const auto layer = encode_ternary_layer(quant::AssignmentMatrix(dims.weight_shape(), N), {-1.0f, 1.0f}, dims);
  const auto count = count_storage_params(layer, false);
  EXPECT_EQ(count.sign, count.mask);
  EXPECT_EQ(count.batch_norm, 0.0);
}

TEST(StorageCount, MatchesRecountOracle) {
  Rng rng(4);
  for (int trial = 0; trial < 200; ++trial) {
    const auto dims = random_dims(rng);
    const auto labels = oracle::random_labels(rng, dims.elements(), rng.uniform());
    const bool bn = rng.below(2);
    const auto layer = encode_ternary_layer(labels_for(dims, labels), random_centroids(rng), dims);
    const auto got = count_storage_params(layer, bn);
    const auto ref = oracle::recount_storage(labels, dims.out_channels, dims.in_channels, dims.kernel, bn);
    EXPECT_EQ(layer.effective_in, ref.effective_in);
    EXPECT_EQ(layer.effective_out, ref.effective_out);
    EXPECT_EQ(got.mask, ref.mask);
    EXPECT_NEAR(got.sign, ref.sign, 1e-12);
    EXPECT_EQ(got.centroids, ref.centroids);
    EXPECT_EQ(got.batch_norm, ref.batch_norm);
    EXPECT_NEAR(got.total(), got.mask + got.sign + got.centroids + got.batch_norm + got.dense, 1e-12);
  }
}

TEST(StorageCount, MonotoneInDensity) {
  Rng rng(5);
  const auto dims = LayerDims::conv(6, 3, 5);
  for (int trial = 0; trial < 100; ++trial) {
    auto labels = oracle::random_labels(rng, dims.elements(), rng.uniform());
    const auto before = count_storage_params(encode_ternary_layer(labels_for(dims, labels), {-1.0f, 1.0f}, dims), true);
    // Adding nonzeros never shrinks any count.
    for (auto& l : labels)
      if (l == Z && rng.below(3) == 0) l = P;
    const auto after = count_storage_params(encode_ternary_layer(labels_for(dims, labels), {-1.0f, 1.0f}, dims), true);
    EXPECT_GE(after.mask, before.mask);
    EXPECT_GE(after.sign, before.sign);
    EXPECT_GE(after.batch_norm, before.batch_norm);
    EXPECT_GE(after.total(), before.total());
  }
}

TEST(Kernels, SparseConvMatchesDenseOnDecodedWeights) {
  Rng rng(6);
  for (int trial = 0; trial < 60; ++trial) {
    const std::size_t n = 1 + rng.below(4), k = 1 + 2 * rng.below(2), m = 1 + rng.below(6);
    const auto dims = LayerDims::conv(n, k, m);
    const auto layer = encode_ternary_layer(labels_for(dims, oracle::random_labels(rng, dims.elements(), rng.uniform())),
                                            random_centroids(rng), dims);
    const auto x = oracle::random_tensor(rng, {n, 6, 6});
    const std::size_t stride = 1 + rng.below(2), pad = rng.below(2);
    const auto sparse = ternary_conv2d(x, layer, stride, pad);
    const auto dense = conv2d_dense(x, decode_ternary_layer(layer), stride, pad);
    const auto exact = oracle::conv2d(x, decode_ternary_layer(layer), stride, pad);
    ASSERT_EQ(sparse.shape(), dense.shape());
    for (std::size_t i = 0; i < exact.size(); ++i) {
      EXPECT_NEAR(sparse[i], dense[i], 1e-6 * std::max(1.0, std::fabs(exact[i])));
      EXPECT_NEAR(sparse[i], exact[i], 1e-6 * std::max(1.0, std::fabs(exact[i])));
    }
  }
}

TEST(Kernels, SparseFcMatchesDense) {
  Rng rng(7);
  for (int trial = 0; trial < 60; ++trial) {
    const auto dims = LayerDims::fc(1 + rng.below(10), 1 + rng.below(10));
    const auto layer = encode_ternary_layer(labels_for(dims, oracle::random_labels(rng, dims.elements(), rng.uniform())),
                                            random_centroids(rng), dims);
    const auto x = oracle::random_tensor(rng, {dims.in_channels});
    const auto sparse = ternary_fc(x, layer);
    const auto dense = fc_dense(x, decode_ternary_layer(layer));
    for (std::size_t i = 0; i < dense.size(); ++i) EXPECT_NEAR(sparse[i], dense[i], 1e-6 * std::max(1.0f, std::fabs(dense[i])));
  }
}

TEST(Kernels, TapListsFollowMasks) {
  const auto dims = LayerDims::fc(2, 3);
  const auto layer = encode_ternary_layer(labels_for(dims, {P, Z, N, Z, P, P}), {-1.0f, 1.0f}, dims);
  const SparseTernaryKernel kernel(layer);
  EXPECT_EQ(kernel.positive_taps(0), (std::vector<std::uint32_t>{0}));
  EXPECT_EQ(kernel.negative_taps(0), (std::vector<std::uint32_t>{2}));
  EXPECT_EQ(kernel.positive_taps(1), (std::vector<std::uint32_t>{1, 2}));
  EXPECT_TRUE(kernel.negative_taps(1).empty());
  EXPECT_THROW(ternary_fc(Tensor({4}), layer), DimensionError);
}

ModelFile sample_model(Rng& rng, std::size_t layers) {
  ModelFile model;
  for (std::size_t i = 0; i < layers; ++i) {
    const auto dims = random_dims(rng);
    ModelLayer entry{"layer" + std::to_string(i),
                     encode_ternary_layer(labels_for(dims, oracle::random_labels(rng, dims.elements(), 0.5)),
                                          random_centroids(rng), dims),
                     std::nullopt};
    if (rng.below(2)) {
      std::vector<Half> bias(entry.layer.effective_out);
      for (auto& b : bias) b = float_to_half(static_cast<float>(rng.uniform(-1, 1)));
      entry.bn_bias = bias;
    }
    model.layers.push_back(std::move(entry));
  }
  return model;
}

TEST(ModelFile, RoundTripIsBitwise) {
  Rng rng(8);
  for (int trial = 0; trial < 50; ++trial) {
    const auto model = sample_model(rng, 1 + rng.below(4));
    const auto bytes = serialize_model(model);
    const auto parsed = parse_model(bytes);
    EXPECT_EQ(parsed, model);
    EXPECT_EQ(serialize_model(parsed), bytes);
  }
}

TEST(ModelFile, HeaderLayout) {
  const auto dims = LayerDims::conv(2, 3, 4, 8);
  ModelFile model{{{"c", encode_ternary_layer(quant::AssignmentMatrix(dims.weight_shape(), P), {-1.0f, 1.0f}, dims), {}}}};
  const auto bytes = serialize_model(model);
  EXPECT_EQ(std::string(bytes.begin(), bytes.begin() + 8), "EC2TMODL");
  EXPECT_EQ(bytes[8], 1);
  EXPECT_EQ(bytes[9], 1);
  EXPECT_EQ(bytes[10], 0);
  EXPECT_EQ(bytes[11], 1);  // name length
  EXPECT_EQ(bytes[13], 'c');
  EXPECT_EQ(bytes[14], 0);  // kind conv
  EXPECT_EQ(bytes[15], 2);  // N
  EXPECT_EQ(bytes[19], 3);  // K
  EXPECT_EQ(bytes[23], 4);  // M
  EXPECT_EQ(bytes[27], 8);  // output side
  const uLong crc = crc32(0L, bytes.data(), static_cast<uInt>(bytes.size() - 4));
  const std::uint32_t stored = bytes[bytes.size() - 4] | (bytes[bytes.size() - 3] << 8) |
                               (bytes[bytes.size() - 2] << 16) | (static_cast<std::uint32_t>(bytes.back()) << 24);
  EXPECT_EQ(stored, static_cast<std::uint32_t>(crc));
}

TEST(ModelFile, FileRoundTrip) {
  Rng rng(9);
  const auto model = sample_model(rng, 3);
  const auto path = std::filesystem::temp_directory_path() / "ec2t_storage_test.ec2t";
  save_model(path, model);
  EXPECT_EQ(read_file_bytes(path), serialize_model(model));
  EXPECT_EQ(load_model(path), model);
  std::filesystem::remove(path);
  EXPECT_THROW(load_model(path), Error);
}

TEST(ModelFile, RejectsMalformedInput) {
  Rng rng(10);
  const auto bytes = serialize_model(sample_model(rng, 2));
  auto bad = bytes;
  bad[0] = 'X';
  EXPECT_THROW(parse_model(bad), FormatError);
  EXPECT_THROW(parse_model(std::span(bytes).first(bytes.size() - 1)), FormatError);
  auto trailing = bytes;
  trailing.push_back(0);
  EXPECT_THROW(parse_model(trailing), FormatError);
  EXPECT_THROW(parse_model(std::vector<std::uint8_t>{}), FormatError);
}

TEST(ModelFile, EverySingleBitFlipIsRejected) {
  Rng rng(11);
  const auto bytes = serialize_model(sample_model(rng, 2));
  for (std::size_t bit = 0; bit < bytes.size() * 8; ++bit) {
    auto corrupt = bytes;
    corrupt[bit / 8] ^= static_cast<std::uint8_t>(1u << (bit % 8));
    EXPECT_THROW(parse_model(corrupt), FormatError) << "bit " << bit;
  }
}

TEST(ModelFile, InconsistentMasksBehindValidChecksum) {
  // A location mask whose popcount no longer matches the stored sign mask
  // length fails even with a fresh checksum.
  const auto dims = LayerDims::fc(1, 16);
  std::vector<Label> labels(16, Z);
  std::fill(labels.begin(), labels.begin() + 8, P);
  ModelFile model{{{"fc", encode_ternary_layer(labels_for(dims, labels), {-1.0f, 1.0f}, dims), {}}}};
  auto bytes = serialize_model(model);
  bytes.resize(bytes.size() - 4);
  // location mask bytes sit after the header, name, kind, dims, centroids and its length.
  const std::size_t location = 8 + 1 + 2 + 2 + 2 + 1 + 16 + 4 + 4;
  ASSERT_EQ(bytes[location], 0xFF);
  ASSERT_EQ(bytes[location + 1], 0x00);
  bytes[location + 1] = 0x01;
  const uLong crc = crc32(0L, bytes.data(), static_cast<uInt>(bytes.size()));
  for (int i = 0; i < 4; ++i) bytes.push_back(static_cast<std::uint8_t>(crc >> (8 * i)));
  EXPECT_THROW(parse_model(bytes), FormatError);
}

TEST(Verify, CleanModelPassesAllChecks) {
  Rng rng(12);
  const auto bytes = serialize_model(sample_model(rng, 3));
  const auto checks = verify_model(bytes, 1);
  ASSERT_EQ(checks.size(), 2u + 2u * 3u);
  for (const auto& c : checks) EXPECT_TRUE(c.passed) << c.name << ": " << c.detail;
}

TEST(Verify, CorruptionFailsParseCheck) {
  Rng rng(13);
  auto bytes = serialize_model(sample_model(rng, 1));
  bytes[bytes.size() / 2] ^= 0x10;
  const auto checks = verify_model(bytes, 1);
  ASSERT_FALSE(checks.empty());
  EXPECT_FALSE(checks.front().passed);
}

}  // namespace
}  // namespace ec2t::storage
