#pragma once

#include <vector>

#include "ec2t/quantizer.hpp"
#include "ec2t/rng.hpp"
#include "ec2t/tensor.hpp"
#include "ec2t/ternary_layer.hpp"

namespace ec2t::bench {

inline Tensor uniform_tensor(Rng& rng, Shape shape) {
  std::size_t n = 1;
  for (auto d : shape) n *= d;
  std::vector<float> v(n);
  for (auto& x : v) x = static_cast<float>(rng.uniform(-1, 1));
  return Tensor(std::move(shape), std::move(v));
}

// Ternary layer with roughly the given fraction of zero labels.
inline storage::TernaryLayer sparse_layer(Rng& rng, const storage::LayerDims& dims, double sparsity) {
  std::vector<quant::Label> labels(dims.elements());
  for (auto& l : labels) {
    if (rng.uniform() < sparsity) {
      l = quant::Label::zero;
    } else {
      l = rng.below(2) ? quant::Label::positive : quant::Label::negative;
    }
  }
  return storage::encode_ternary_layer(quant::AssignmentMatrix(dims.weight_shape(), std::move(labels)),
                                       {-0.5f, 0.5f}, dims);
}

}  // namespace ec2t::bench
