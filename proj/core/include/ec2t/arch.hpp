#pragma once

// Compound model scaling: depth, width and resolution factors
// d = a^phi, w = b^phi, r = c^phi subject to a * b^2 * c^2 ~= 2 with a, b, c >= 1,
// and the MicroNet architecture descriptor they are applied to.

#include <cmath>
#include <cstddef>
#include <vector>

#include "ec2t/tensor.hpp"

namespace ec2t::arch {

inline constexpr double kScalingTolerance = 0.01;
inline constexpr double kGridMax = 3.0;

struct ScalingSolution {
  double a = 1.0;
  double b = 1.0;
  double c = 1.0;
  double phi = 0.0;
  double d = 1.0;
  double w = 1.0;
  double r = 1.0;

  double residual() const noexcept { return std::abs(a * b * b * c * c - 2.0); }

  // Derives d, w, r from (a, b, c, phi).
  static ScalingSolution from_constants(double a, double b, double c, double phi);
};

/// Grid search over {1, 1 + step, ..., 3}^3 (c pinned to 1 with `fix_r`) for
/// the smallest constraint residual. Near-equal residuals (within 1e-9) are
/// broken by how close the scaled MicroNet's dense FLOPs come to 2^phi times
/// the baseline, then by grid order. Throws InfeasibleError when the best
/// residual exceeds `tolerance`.
ScalingSolution solve_compound_scaling(double phi, bool fix_r, double grid_step,
                                       double tolerance = kScalingTolerance);

struct Stage {
  std::size_t repetitions = 1;
  std::size_t channels = 1;
  std::size_t resolution = 1;

  friend bool operator==(const Stage&, const Stage&) = default;
};

struct ArchDescriptor {
  LayerSpec stem;
  std::vector<Stage> stages;
  LayerSpec head;
  std::size_t n_classes = 10;

  friend bool operator==(const ArchDescriptor&, const ArchDescriptor&) = default;
};

void validate(const ArchDescriptor& arch);

/// Stem 3x3 conv to 16 channels at 32x32, three stages of 7 blocks with
/// {16, 32, 64} channels at {32, 16, 8}, global pooling and an FC head.
/// Stem and head are excluded from quantization.
ArchDescriptor micronet_descriptor(std::size_t n_classes);

/// max(1, floor(x + 0.5)).
std::size_t round_half_up(double x);

/// Scales repetitions by d, channels (stem and head widths included) by w and
/// resolutions by r, rounding half up with a floor of 1.
ArchDescriptor scale_architecture(const ArchDescriptor& arch, const ScalingSolution& solution);

/// Layer-by-layer expansion. Each building block is conv3x3-BN-conv3x3-BN with
/// a residual; the first block of a stage whose resolution or width changes
/// uses stride 2 (when the resolution shrinks) and a 1x1 projection + BN on the
/// shortcut.
std::vector<LayerSpec> expand_layers(const ArchDescriptor& arch);

}  // namespace ec2t::arch
