#pragma once

// Dual-mask storage of a sparse ternary layer.
//
// A location mask marks every nonzero weight; a sign mask, with one bit per
// nonzero weight in row-major order, marks the positive ones. Two binary16
// values hold w_n and w_p. Fractional parameter counting treats a mask bit as
// 1/32 and a 16-bit value as 1/2 of a 32-bit parameter.

#include <cstddef>
#include <optional>

#include "ec2t/bit_mask.hpp"
#include "ec2t/half.hpp"
#include "ec2t/quantizer.hpp"
#include "ec2t/tensor.hpp"

namespace ec2t::storage {

/// Geometry of a ternary layer. Conv weights are M x N x K x K and FC weights
/// M x N (kernel == 1), both row-major. `out_resolution` is the square output
/// side of a conv layer and only feeds operation counting.
struct LayerDims {
  LayerKind kind = LayerKind::fully_connected;
  std::size_t out_channels = 1;
  std::size_t in_channels = 1;
  std::size_t kernel = 1;
  std::size_t out_resolution = 1;

  static LayerDims conv(std::size_t in, std::size_t kernel, std::size_t out, std::size_t out_resolution = 1);
  static LayerDims fc(std::size_t out, std::size_t in);

  std::size_t taps() const noexcept { return in_channels * kernel * kernel; }  // per output channel
  std::size_t elements() const noexcept { return out_channels * taps(); }
  Shape weight_shape() const;

  friend bool operator==(const LayerDims&, const LayerDims&) = default;
};

void validate(const LayerDims& dims);

struct TernaryLayer {
  LayerDims dims;
  BitMask location;  // dims.elements() bits, 1 = nonzero
  BitMask sign;      // location.popcount() bits, 1 = positive
  Half negative = 0;
  Half positive = 0;
  std::size_t effective_in = 0;   // input channels with at least one nonzero weight
  std::size_t effective_out = 0;  // output channels with at least one nonzero weight

  std::size_t nonzeros() const noexcept { return sign.size(); }
  // Nonzero fraction over the full tensor.
  double density() const noexcept;
  float negative_value() const noexcept { return half_to_float(negative); }
  float positive_value() const noexcept { return half_to_float(positive); }

  friend bool operator==(const TernaryLayer&, const TernaryLayer&) = default;
};

/// Builds a layer from raw masks, validating the mask invariants and deriving
/// the effective channel counts. Throws CorruptLayerError on mismatch.
TernaryLayer make_ternary_layer(const LayerDims& dims, BitMask location, BitMask sign, Half negative,
                                Half positive);

TernaryLayer encode_ternary_layer(const quant::AssignmentMatrix& assignment,
                                  const quant::CentroidSet& centroids, const LayerDims& dims);

/// Dense weights with w_p / w_n (half-precision values) at the marked positions.
Tensor decode_ternary_layer(const TernaryLayer& layer);

quant::AssignmentMatrix decode_labels(const TernaryLayer& layer);

/// The exact tensor the layer decodes to: centroids rounded through binary16.
Tensor materialize_half(const quant::AssignmentMatrix& assignment, const quant::CentroidSet& centroids);

/// Fractional parameter counts. `dense` holds full-precision parameters of
/// non-ternary layers; the other fields follow the dual-mask rules.
struct StorageCount {
  double dense = 0.0;
  double mask = 0.0;
  double sign = 0.0;
  double centroids = 0.0;
  double batch_norm = 0.0;

  double total() const noexcept { return dense + mask + sign + centroids + batch_norm; }
  StorageCount& operator+=(const StorageCount& other) noexcept;
};

/// mask = N_eff K^2 M_eff / 32, sign = sigma N_eff K^2 M_eff / 32 with sigma
/// measured over the effective sub-tensor, centroids = 1, batch-norm biases
/// M_eff / 2 when requested.
StorageCount count_storage_params(const TernaryLayer& layer, bool include_bn);

}  // namespace ec2t::storage
