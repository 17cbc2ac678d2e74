#include "ec2t/arch.hpp"

#include <cmath>
#include <limits>
#include <sstream>

#include "ec2t/accounting.hpp"
#include "ec2t/error.hpp"

namespace ec2t::arch {

ScalingSolution ScalingSolution::from_constants(double a, double b, double c, double phi) {
  ScalingSolution s;
  s.a = a;
  s.b = b;
  s.c = c;
  s.phi = phi;
  s.d = std::pow(a, phi);
  s.w = std::pow(b, phi);
  s.r = std::pow(c, phi);
  return s;
}

namespace {

std::uint64_t dense_flops(const ArchDescriptor& arch) {
  const auto layers = expand_layers(arch);
  std::uint64_t flops = 0;
  for (const auto& l : layers) flops += accounting::count_dense_ops(l).flops();
  return flops;
}

}  // namespace

ScalingSolution solve_compound_scaling(double phi, bool fix_r, double grid_step, double tolerance) {
  if (!(phi >= 0.0) || !std::isfinite(phi)) throw InvalidArgument("phi must be a finite value >= 0");
  if (!(grid_step > 0.0 && grid_step <= 0.5)) throw InvalidArgument("grid step must lie in (0, 0.5]");

  std::vector<double> grid;
  for (std::size_t i = 0;; ++i) {
    const double v = 1.0 + static_cast<double>(i) * grid_step;
    if (v > kGridMax + 1e-9) break;
    grid.push_back(v);
  }

  struct Candidate {
    double a, b, c, residual;
  };
  std::vector<Candidate> candidates;
  double best = std::numeric_limits<double>::infinity();
  constexpr double kTieWidth = 1e-9;
  const std::size_t c_count = fix_r ? 1 : grid.size();
  for (double a : grid) {
    for (double b : grid) {
      for (std::size_t ci = 0; ci < c_count; ++ci) {
        const double c = grid[ci];
        const double residual = std::abs(a * b * b * c * c - 2.0);
        if (residual > best + kTieWidth) continue;
        if (residual < best - kTieWidth) candidates.clear();
        best = std::min(best, residual);
        candidates.push_back({a, b, c, residual});
      }
    }
  }
  if (best > tolerance) {
    std::ostringstream os;
    os << "no grid point satisfies a*b^2*c^2 ~= 2 within " << tolerance << " (best residual " << best << ")";
    throw InfeasibleError(os.str(), best);
  }

  const auto base = micronet_descriptor(10);
  const double base_flops = static_cast<double>(dense_flops(base));
  const double budget = std::pow(2.0, phi);
  ScalingSolution chosen;
  double chosen_gap = std::numeric_limits<double>::infinity();
  for (const auto& cand : candidates) {
    if (cand.residual > best + kTieWidth) continue;
    const auto solution = ScalingSolution::from_constants(cand.a, cand.b, cand.c, phi);
    const double ratio = static_cast<double>(dense_flops(scale_architecture(base, solution))) / base_flops;
    const double gap = std::abs(ratio - budget);
    if (gap < chosen_gap) {
      chosen_gap = gap;
      chosen = solution;
    }
  }
  return chosen;
}

void validate(const ArchDescriptor& arch) {
  validate(arch.stem);
  validate(arch.head);
  if (arch.stages.empty()) throw InvalidArgument("architecture needs at least one stage");
  if (arch.n_classes < 2) throw InvalidArgument("architecture needs at least two classes");
  std::size_t previous = arch.stem.out_height;
  for (const auto& s : arch.stages) {
    if (s.repetitions == 0 || s.channels == 0 || s.resolution == 0) {
      throw InvalidArgument("stage repetitions, channels and resolution must be positive");
    }
    if (s.resolution > previous) throw InvalidArgument("stage resolutions must not grow");
    previous = s.resolution;
  }
  if (arch.head.out_channels != arch.n_classes) throw InvalidArgument("head width must equal n_classes");
}

ArchDescriptor micronet_descriptor(std::size_t n_classes) {
  if (n_classes < 2) throw InvalidArgument("n_classes must be at least 2");
  ArchDescriptor arch;
  arch.stem = LayerSpec{"stem.conv", LayerKind::conv2d, 3, 16, 3, 1, 32, 32, false};
  arch.stages = {{7, 16, 32}, {7, 32, 16}, {7, 64, 8}};
  arch.head = LayerSpec{"head.fc", LayerKind::fully_connected, 64, n_classes, 1, 1, 1, 1, false};
  arch.n_classes = n_classes;
  return arch;
}

std::size_t round_half_up(double x) {
  const double rounded = std::floor(x + 0.5);
  return rounded < 1.0 ? 1 : static_cast<std::size_t>(rounded);
}

ArchDescriptor scale_architecture(const ArchDescriptor& arch, const ScalingSolution& solution) {
  validate(arch);
  const auto scale = [](std::size_t v, double f) { return round_half_up(static_cast<double>(v) * f); };
  ArchDescriptor out = arch;
  out.stem.out_channels = scale(arch.stem.out_channels, solution.w);
  out.stem.out_height = scale(arch.stem.out_height, solution.r);
  out.stem.out_width = scale(arch.stem.out_width, solution.r);
  for (auto& s : out.stages) {
    s.repetitions = scale(s.repetitions, solution.d);
    s.channels = scale(s.channels, solution.w);
    s.resolution = scale(s.resolution, solution.r);
  }
  out.head.in_channels = scale(arch.head.in_channels, solution.w);
  return out;
}

std::vector<LayerSpec> expand_layers(const ArchDescriptor& arch) {
  validate(arch);
  std::vector<LayerSpec> layers;
  const auto bn = [](std::string name, std::size_t channels, std::size_t res) {
    return LayerSpec{std::move(name), LayerKind::batch_norm, channels, channels, 1, 1, res, res, false};
  };
  const auto conv = [](std::string name, std::size_t in, std::size_t out, std::size_t k, std::size_t stride,
                       std::size_t res) {
    return LayerSpec{std::move(name), LayerKind::conv2d, in, out, k, stride, res, res, true};
  };

  layers.push_back(arch.stem);
  layers.push_back(bn("stem.bn", arch.stem.out_channels, arch.stem.out_height));

  std::size_t channels = arch.stem.out_channels;
  std::size_t resolution = arch.stem.out_height;
  for (std::size_t s = 0; s < arch.stages.size(); ++s) {
    const auto& stage = arch.stages[s];
    for (std::size_t b = 0; b < stage.repetitions; ++b) {
      const std::string prefix = "stage" + std::to_string(s + 1) + ".block" + std::to_string(b) + ".";
      const std::size_t stride = (b == 0 && stage.resolution < resolution) ? 2 : 1;
      const std::size_t res = stage.resolution;
      layers.push_back(conv(prefix + "conv1", channels, stage.channels, 3, stride, res));
      layers.push_back(bn(prefix + "bn1", stage.channels, res));
      layers.push_back(conv(prefix + "conv2", stage.channels, stage.channels, 3, 1, res));
      layers.push_back(bn(prefix + "bn2", stage.channels, res));
      if (b == 0 && (channels != stage.channels || stride != 1)) {
        layers.push_back(conv(prefix + "proj", channels, stage.channels, 1, stride, res));
        layers.push_back(bn(prefix + "proj_bn", stage.channels, res));
      }
      channels = stage.channels;
      resolution = res;
    }
  }
  LayerSpec head = arch.head;
  head.in_channels = channels;
  layers.push_back(head);
  return layers;
}

}  // namespace ec2t::arch
