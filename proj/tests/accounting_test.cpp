#include <gtest/gtest.h>

#include "ec2t/accounting.hpp"
#include "ec2t/arch.hpp"
#include "ec2t/error.hpp"
#include "oracles.hpp"

namespace ec2t::accounting {
namespace {

using quant::Label;
using storage::LayerDims;
constexpr Label N = Label::negative, Z = Label::zero, P = Label::positive;

LayerSpec conv(std::size_t in, std::size_t k, std::size_t out, std::size_t side) {
  return {"conv", LayerKind::conv2d, in, out, k, 1, side, side, true};
}

storage::TernaryLayer ternary(const LayerDims& dims, std::vector<Label> labels) {
  return storage::encode_ternary_layer(quant::AssignmentMatrix(dims.weight_shape(), std::move(labels)),
                                       {-1.0f, 1.0f}, dims);
}

// Walks every output position and channel and counts operand fetches directly.
OpsCount recount_ops(const std::vector<Label>& labels, std::size_t out, std::size_t taps, std::size_t h,
                     std::size_t w, bool tree) {
  OpsCount ops;
  for (std::size_t y = 0; y < h; ++y)
    for (std::size_t x = 0; x < w; ++x)
      for (std::size_t m = 0; m < out; ++m) {
        std::uint64_t pos = 0, neg = 0;
        for (std::size_t t = 0; t < taps; ++t) {
          pos += labels[m * taps + t] == P;
          neg += labels[m * taps + t] == N;
        }
        if (pos + neg == 0) continue;
        ops.mults += 2;
        // A tree over z operands takes z - 1 adds; combining the two signed
        // partial sums takes one more.
        ops.adds += tree ? pos + neg - 1 + (pos > 0 && neg > 0) : pos + neg;
      }
  return ops;
}

TEST(DenseOps, HandCounts) {
  EXPECT_EQ(count_dense_ops(conv(1, 1, 1, 1)), (OpsCount{1, 1}));
  const auto c = count_dense_ops(conv(16, 3, 32, 8));
  EXPECT_EQ(c.mults, 294912u);
  EXPECT_EQ(c.adds, c.mults);
  const auto doubled = count_dense_ops(conv(16, 3, 64, 8));
  EXPECT_EQ(doubled.mults, 2 * c.mults);
  EXPECT_EQ(doubled.adds, 2 * c.adds);

  const LayerSpec fc{"fc", LayerKind::fully_connected, 64, 10, 1, 1, 1, 1, false};
  EXPECT_EQ(count_dense_ops(fc), (OpsCount{640, 640}));
  const LayerSpec bn{"bn", LayerKind::batch_norm, 32, 32, 1, 1, 8, 8, false};
  EXPECT_EQ(count_dense_ops(bn), (OpsCount{32 * 64, 32 * 64}));
  EXPECT_EQ(dense_param_count(bn), 64u);
  EXPECT_EQ(dense_param_count(fc), 640u);
}

TEST(TernaryOps, HandCounts) {
  const auto dims = LayerDims::fc(1, 3);
  const auto layer = ternary(dims, {P, Z, N});
  EXPECT_EQ(count_ternary_ops(layer, 1, 1, false), (OpsCount{2, 2}));
  EXPECT_EQ(count_ternary_ops(layer, 1, 1, true), (OpsCount{2, 2}));

  const auto wide = ternary(LayerDims::fc(1, 5), {P, P, P, N, Z});
  EXPECT_EQ(count_ternary_ops(wide, 1, 1, false), (OpsCount{4, 2}));
  EXPECT_EQ(count_ternary_ops(wide, 1, 1, true), (OpsCount{4, 2}));
  const auto one_sided = ternary(LayerDims::fc(1, 5), {P, P, P, Z, Z});
  EXPECT_EQ(count_ternary_ops(one_sided, 1, 1, false), (OpsCount{3, 2}));
  EXPECT_EQ(count_ternary_ops(one_sided, 1, 1, true), (OpsCount{2, 2}));

  const auto zero = ternary(LayerDims::conv(2, 3, 2), std::vector<Label>(36, Z));
  EXPECT_EQ(count_ternary_ops(zero, 4, 4, false).flops(), 0u);
}

TEST(TernaryOps, DenseTernaryCollapsesMultiplications) {
  const auto dims = LayerDims::conv(16, 3, 32);
  const auto layer = ternary(dims, std::vector<Label>(dims.elements(), P));
  const auto t = count_ternary_ops(layer, 8, 8, false);
  const auto d = count_dense_ops(conv(16, 3, 32, 8));
  EXPECT_EQ(t.mults, 2u * 32 * 64);
  EXPECT_EQ(d.mults, 144u * 32 * 64);
  EXPECT_EQ(t.adds, d.adds);
}

TEST(TernaryOps, MatchesPositionWalkOracle) {
  Rng rng(3);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t n = 1 + rng.below(5), k = 1 + 2 * rng.below(2), m = 1 + rng.below(6);
    const std::size_t h = 1 + rng.below(4), w = 1 + rng.below(4);
    const auto dims = LayerDims::conv(n, k, m, h);
    const auto labels = oracle::random_labels(rng, dims.elements(), rng.uniform());
    const auto layer = ternary(dims, labels);
    for (bool tree : {false, true}) {
      const auto got = count_ternary_ops(layer, h, w, tree);
      const auto ref = recount_ops(labels, m, n * k * k, h, w, tree);
      EXPECT_EQ(got, ref) << "tree=" << tree;
      EXPECT_EQ(got.flops(), got.adds + got.mults);
    }
  }
}

TEST(TernaryOps, MonotoneInSparsityAndTreeNeverWorse) {
  Rng rng(4);
  const auto dims = LayerDims::conv(4, 3, 6);
  for (int trial = 0; trial < 100; ++trial) {
    auto labels = oracle::random_labels(rng, dims.elements(), rng.uniform() * 0.5);
    const auto before = count_ternary_ops(ternary(dims, labels), 3, 3, false);
    EXPECT_LE(count_ternary_ops(ternary(dims, labels), 3, 3, true).adds, before.adds);
    for (auto& l : labels)
      if (rng.below(3) == 0) l = Z;
    const auto after = count_ternary_ops(ternary(dims, labels), 3, 3, false);
    EXPECT_LE(after.adds, before.adds);
    EXPECT_LE(after.mults, before.mults);
  }
}

TEST(ModelReport, FullyDenseModel) {
  const auto specs = arch::expand_layers(arch::micronet_descriptor(10));
  const auto report = dense_report(specs);
  EXPECT_EQ(report.sparsity(), 0.0);
  OpsCount ops;
  std::uint64_t params = 0;
  for (const auto& s : specs) {
    ops += count_dense_ops(s);
    params += dense_param_count(s);
  }
  EXPECT_EQ(report.ops, ops);
  EXPECT_EQ(report.params.total(), static_cast<double>(params));
  for (const auto& row : report.rows) EXPECT_EQ(row.ops.flops(), row.ops.adds + row.ops.mults);
}

TEST(ModelReport, ToyModelMatchesRecount) {
  // conv (ternary) -> bn -> fc (dense)
  const auto dims = LayerDims::conv(2, 3, 3, 4);
  std::vector<Label> labels(dims.elements(), Z);
  labels[0] = P;
  labels[5] = N;
  labels[18] = P;  // second output channel
  const auto layer = ternary(dims, labels);
  const LayerSpec conv_spec{"conv", LayerKind::conv2d, 2, 3, 3, 1, 4, 4, true};
  const LayerSpec bn_spec{"bn", LayerKind::batch_norm, 3, 3, 1, 1, 4, 4, false};
  const LayerSpec fc_spec{"fc", LayerKind::fully_connected, 3, 2, 1, 1, 1, 1, false};
  const std::vector<ReportLayer> model{{conv_spec, layer}, {bn_spec, std::nullopt}, {fc_spec, std::nullopt}};
  const auto report = model_report(model, false);

  ASSERT_EQ(report.rows.size(), 3u);
  EXPECT_EQ(report.rows[0].ops, recount_ops(labels, 3, 18, 4, 4, false));
  EXPECT_EQ(report.rows[0].ops, (OpsCount{3 * 16, 4 * 16}));
  EXPECT_EQ(report.rows[1].ops, (OpsCount{3 * 16, 3 * 16}));
  EXPECT_EQ(report.rows[1].params.batch_norm, 1.0);  // two effective output channels
  EXPECT_EQ(report.rows[1].params.dense, 0.0);
  EXPECT_EQ(report.rows[2].params.dense, 6.0);
  EXPECT_EQ(report.weights, 54u + 6u);
  EXPECT_EQ(report.zeros, 51u);
  EXPECT_DOUBLE_EQ(report.sparsity(), 51.0 / 60.0);
  const auto storage = storage::count_storage_params(layer, false);
  EXPECT_DOUBLE_EQ(report.params.total(), storage.total() + 1.0 + 6.0);
  OpsCount sum;
  for (const auto& r : report.rows) sum += r.ops;
  EXPECT_EQ(sum, report.ops);
}

TEST(ModelReport, MismatchedEncodingThrows) {
  const auto layer = ternary(LayerDims::fc(2, 3), {P, Z, N, Z, P, P});
  const LayerSpec wrong{"fc", LayerKind::fully_connected, 4, 2, 1, 1, 1, 1, true};
  const std::vector<ReportLayer> model{{wrong, layer}};
  EXPECT_THROW(model_report(model, false), DimensionError);
}

TEST(ModelReport, MicroNetBaselineScale) {
  // The built-in descriptor at d = w = r = 1.
  const auto report = dense_report(arch::expand_layers(arch::micronet_descriptor(10)));
  EXPECT_EQ(static_cast<std::uint64_t>(report.params.total()), 661328u);
}

}  // namespace
}  // namespace ec2t::accounting
