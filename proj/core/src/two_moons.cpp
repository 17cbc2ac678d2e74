#include "ec2t/two_moons.hpp"

#include <cmath>
#include <numbers>

#include "ec2t/error.hpp"
#include "ec2t/rng.hpp"

namespace ec2t::train {

Dataset gen_two_moons(std::size_t n, double noise, std::uint64_t seed) {
  if (n < 2) throw InvalidArgument("two-moons needs at least 2 samples");
  if (n % 2 != 0) throw InvalidArgument("two-moons sample count must be even");
  if (!(noise >= 0.0)) throw InvalidArgument("noise must be non-negative");

  const std::size_t half = n / 2;
  std::vector<float> xy;
  xy.reserve(2 * n);
  std::vector<int> labels;
  labels.reserve(n);
  Rng rng(seed);
  for (int cls = 0; cls < 2; ++cls) {
    for (std::size_t i = 0; i < half; ++i) {
      const double t = half > 1 ? std::numbers::pi * static_cast<double>(i) / static_cast<double>(half - 1) : 0.0;
      double x = cls == 0 ? std::cos(t) : 1.0 - std::cos(t);
      double y = cls == 0 ? std::sin(t) : 0.5 - std::sin(t);
      if (noise > 0.0) {
        x += noise * rng.normal();
        y += noise * rng.normal();
      }
      xy.push_back(static_cast<float>(x));
      xy.push_back(static_cast<float>(y));
      labels.push_back(cls);
    }
  }
  return Dataset{Tensor({n, 2}, std::move(xy)), std::move(labels)};
}

}  // namespace ec2t::train
