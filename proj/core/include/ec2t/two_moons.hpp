#pragma once

#include <cstdint>
#include <vector>

#include "ec2t/tensor.hpp"

namespace ec2t::train {

struct Dataset {
  Tensor inputs;            // samples x features
  std::vector<int> labels;  // one class index per sample

  std::size_t size() const noexcept { return labels.size(); }
  std::size_t features() const { return inputs.dim(1); }

  friend bool operator==(const Dataset&, const Dataset&) = default;
};

/// Two interleaved half circles: class 0 on (cos t, sin t), class 1 on
/// (1 - cos t, 0.5 - sin t), t evenly spaced over [0, pi], n / 2 points each,
/// plus N(0, noise^2) jitter on both coordinates drawn from Rng(seed).
Dataset gen_two_moons(std::size_t n, double noise, std::uint64_t seed);

}  // namespace ec2t::train
