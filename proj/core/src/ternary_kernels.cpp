#include "ec2t/ternary_kernels.hpp"

#include "ec2t/error.hpp"

namespace ec2t::storage {

SparseTernaryKernel::SparseTernaryKernel(const TernaryLayer& layer)
    : dims_(layer.dims),
      negative_(layer.negative_value()),
      positive_(layer.positive_value()),
      positive_taps_(layer.dims.out_channels),
      negative_taps_(layer.dims.out_channels) {
  const auto labels = decode_labels(layer);
  const std::size_t taps = dims_.taps();
  for (std::size_t m = 0; m < dims_.out_channels; ++m) {
    for (std::size_t t = 0; t < taps; ++t) {
      switch (labels[m * taps + t]) {
        case quant::Label::positive: positive_taps_[m].push_back(static_cast<std::uint32_t>(t)); break;
        case quant::Label::negative: negative_taps_[m].push_back(static_cast<std::uint32_t>(t)); break;
        case quant::Label::zero: break;
      }
    }
  }
}

Tensor SparseTernaryKernel::conv2d(const Tensor& input, std::size_t stride, std::size_t padding) const {
  if (dims_.kind != LayerKind::conv2d) throw DimensionError("layer is not a convolution");
  if (input.rank() != 3 || input.dim(0) != dims_.in_channels) {
    throw DimensionError("conv input must be " + std::to_string(dims_.in_channels) + " x H x W, got " +
                         shape_to_string(input.shape()));
  }
  const std::size_t height = input.dim(1), width = input.dim(2), k = dims_.kernel;
  const std::size_t out_h = conv_output_size(height, k, stride, padding);
  const std::size_t out_w = conv_output_size(width, k, stride, padding);
  const float* x = input.data();
  const auto pad = static_cast<std::ptrdiff_t>(padding);

  struct Tap {
    std::size_t offset;  // n * H * W + ky * W + kx
    std::size_t ky, kx;
  };
  const auto resolve = [&](const std::vector<std::uint32_t>& taps) {
    std::vector<Tap> out;
    out.reserve(taps.size());
    for (auto t : taps) {
      const std::size_t n = t / (k * k), ky = (t / k) % k, kx = t % k;
      out.push_back({(n * height + ky) * width + kx, ky, kx});
    }
    return out;
  };

  // Sum of the input under one tap list at one output position.
  const auto gather = [&](const std::vector<Tap>& taps, std::size_t oy, std::size_t ox) {
    const auto y0 = static_cast<std::ptrdiff_t>(oy * stride) - pad;
    const auto x0 = static_cast<std::ptrdiff_t>(ox * stride) - pad;
    double acc = 0.0;
    if (y0 >= 0 && x0 >= 0 && y0 + static_cast<std::ptrdiff_t>(k) <= static_cast<std::ptrdiff_t>(height) &&
        x0 + static_cast<std::ptrdiff_t>(k) <= static_cast<std::ptrdiff_t>(width)) {
      const float* base = x + static_cast<std::size_t>(y0) * width + static_cast<std::size_t>(x0);
      for (const auto& t : taps) acc += base[t.offset];
      return acc;
    }
    for (const auto& t : taps) {
      const auto iy = y0 + static_cast<std::ptrdiff_t>(t.ky);
      const auto ix = x0 + static_cast<std::ptrdiff_t>(t.kx);
      if (iy < 0 || ix < 0 || iy >= static_cast<std::ptrdiff_t>(height) || ix >= static_cast<std::ptrdiff_t>(width)) {
        continue;
      }
      acc += x[static_cast<std::ptrdiff_t>(t.offset) + y0 * static_cast<std::ptrdiff_t>(width) + x0];
    }
    return acc;
  };

  Tensor out({dims_.out_channels, out_h, out_w});
  auto y = out.mutable_values();
  for (std::size_t m = 0; m < dims_.out_channels; ++m) {
    const auto pos = resolve(positive_taps_[m]);
    const auto neg = resolve(negative_taps_[m]);
    for (std::size_t oy = 0; oy < out_h; ++oy) {
      for (std::size_t ox = 0; ox < out_w; ++ox) {
        const double value = static_cast<double>(positive_) * gather(pos, oy, ox) +
                             static_cast<double>(negative_) * gather(neg, oy, ox);
        y[(m * out_h + oy) * out_w + ox] = static_cast<float>(value);
      }
    }
  }
  return out;
}

Tensor SparseTernaryKernel::fc(const Tensor& input) const {
  if (dims_.kind != LayerKind::fully_connected) throw DimensionError("layer is not fully connected");
  if (input.size() != dims_.in_channels) {
    throw DimensionError("fc layer expects " + std::to_string(dims_.in_channels) + " inputs, got " +
                         std::to_string(input.size()));
  }
  Tensor out({dims_.out_channels});
  for (std::size_t m = 0; m < dims_.out_channels; ++m) {
    double pos = 0.0, neg = 0.0;
    for (auto t : positive_taps_[m]) pos += input[t];
    for (auto t : negative_taps_[m]) neg += input[t];
    out[m] = static_cast<float>(static_cast<double>(positive_) * pos + static_cast<double>(negative_) * neg);
  }
  return out;
}

}  // namespace ec2t::storage
