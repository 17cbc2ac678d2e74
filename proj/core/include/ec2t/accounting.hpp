#pragma once

// Parameter and operation accounting.
//
// Dense layers use the fused multiply-accumulate convention (adds == mults).
// Ternary layers cost one accumulation per nonzero weight and two
// multiplications per output channel and position that has any nonzero
// weight. Pooling, activations and softmax are not counted.

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ec2t/tensor.hpp"
#include "ec2t/ternary_layer.hpp"

namespace ec2t::accounting {

struct OpsCount {
  std::uint64_t adds = 0;
  std::uint64_t mults = 0;

  std::uint64_t flops() const noexcept { return adds + mults; }
  OpsCount& operator+=(const OpsCount& other) noexcept {
    adds += other.adds;
    mults += other.mults;
    return *this;
  }
  friend bool operator==(const OpsCount&, const OpsCount&) = default;
};

OpsCount count_dense_ops(const LayerSpec& spec);

/// `tree_adder` counts n operands as n - 1 additions:
/// max(z_m - 1, 0) + 1 when both sign clusters are present in channel m.
OpsCount count_ternary_ops(const storage::TernaryLayer& layer, std::size_t out_height, std::size_t out_width,
                           bool tree_adder);

/// Full-precision parameters of a layer: weights for conv/fc, scale and bias
/// for batch-norm.
std::uint64_t dense_param_count(const LayerSpec& spec);

struct ReportLayer {
  LayerSpec spec;
  std::optional<storage::TernaryLayer> ternary;
};

struct LayerRow {
  std::string name;
  LayerKind kind = LayerKind::conv2d;
  bool ternary = false;
  OpsCount ops;
  storage::StorageCount params;
  std::uint64_t weights = 0;  // weight elements (0 for batch-norm)
  std::uint64_t zeros = 0;    // zero-valued weight elements
};

struct ModelReport {
  std::vector<LayerRow> rows;
  OpsCount ops;
  storage::StorageCount params;
  std::uint64_t weights = 0;
  std::uint64_t zeros = 0;
  bool tree_adder = false;

  // Zero-valued fraction of all weight elements.
  double sparsity() const noexcept {
    return weights ? static_cast<double>(zeros) / static_cast<double>(weights) : 0.0;
  }
};

/// Dense counting for layers without a ternary encoding, ternary counting for
/// the rest. A batch-norm layer directly after a ternary layer stores one
/// 16-bit bias per effective output channel; otherwise it holds 2 M full
/// parameters. Throws DimensionError when a ternary encoding does not match
/// its spec.
ModelReport model_report(std::span<const ReportLayer> layers, bool tree_adder);

ModelReport dense_report(std::span<const LayerSpec> specs);

}  // namespace ec2t::accounting
