#pragma once

// Inference kernels that run directly on the dual-mask representation: each
// output is w_p * (sum of inputs under positive taps) + w_n * (sum under
// negative taps), i.e. accumulations plus two multiplications.

#include <cstdint>
#include <vector>

#include "ec2t/tensor.hpp"
#include "ec2t/ternary_layer.hpp"

namespace ec2t::storage {

/// Tap lists per output channel, decoded once from the masks.
class SparseTernaryKernel {
 public:
  explicit SparseTernaryKernel(const TernaryLayer& layer);

  const LayerDims& dims() const noexcept { return dims_; }
  float negative() const noexcept { return negative_; }
  float positive() const noexcept { return positive_; }
  // Flat tap offsets n * K * K + ky * K + kx within one output channel.
  const std::vector<std::uint32_t>& positive_taps(std::size_t m) const { return positive_taps_[m]; }
  const std::vector<std::uint32_t>& negative_taps(std::size_t m) const { return negative_taps_[m]; }

  Tensor conv2d(const Tensor& input, std::size_t stride, std::size_t padding) const;
  Tensor fc(const Tensor& input) const;

 private:
  LayerDims dims_;
  float negative_;
  float positive_;
  std::vector<std::vector<std::uint32_t>> positive_taps_;
  std::vector<std::vector<std::uint32_t>> negative_taps_;
};

inline Tensor ternary_conv2d(const Tensor& input, const TernaryLayer& layer, std::size_t stride,
                             std::size_t padding) {
  return SparseTernaryKernel(layer).conv2d(input, stride, padding);
}

inline Tensor ternary_fc(const Tensor& input, const TernaryLayer& layer) { return SparseTernaryKernel(layer).fc(input); }

}  // namespace ec2t::storage
