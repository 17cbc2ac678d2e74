#include "ec2t/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <sstream>

#include "ec2t/error.hpp"

namespace ec2t {

std::size_t shape_size(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

std::string shape_to_string(const Shape& shape) {
  std::ostringstream os;
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << 'x';
    os << shape[i];
  }
  return os.str();
}

namespace {

void check_shape(const Shape& shape) {
  if (shape.empty()) throw DimensionError("tensor rank must be at least 1");
  for (auto d : shape) {
    if (d == 0) throw DimensionError("tensor dimensions must be positive, got " + shape_to_string(shape));
  }
}

}  // namespace

Tensor::Tensor(Shape shape) : shape_(std::move(shape)) {
  check_shape(shape_);
  data_.assign(shape_size(shape_), 0.0f);
}

Tensor::Tensor(Shape shape, std::vector<float> data) : shape_(std::move(shape)), data_(std::move(data)) {
  check_shape(shape_);
  if (shape_size(shape_) != data_.size()) {
    throw DimensionError("shape " + shape_to_string(shape_) + " does not match " +
                         std::to_string(data_.size()) + " values");
  }
  check_finite();
}

Tensor::Tensor(Shape shape, std::initializer_list<float> data)
    : Tensor(std::move(shape), std::vector<float>(data)) {}

Tensor Tensor::reshaped(Shape shape) const { return Tensor(std::move(shape), data_); }

void Tensor::check_finite() const {
  for (std::size_t i = 0; i < data_.size(); ++i) {
    if (!std::isfinite(data_[i])) {
      throw DimensionError("non-finite tensor value at flat index " + std::to_string(i));
    }
  }
}

const char* to_string(LayerKind kind) {
  switch (kind) {
    case LayerKind::conv2d: return "conv2d";
    case LayerKind::fully_connected: return "fc";
    case LayerKind::batch_norm: return "batch_norm";
  }
  return "unknown";
}

std::size_t LayerSpec::weight_count() const {
  switch (kind) {
    case LayerKind::conv2d: return in_channels * kernel * kernel * out_channels;
    case LayerKind::fully_connected: return in_channels * out_channels;
    case LayerKind::batch_norm: return 0;
  }
  return 0;
}

Shape LayerSpec::weight_shape() const {
  switch (kind) {
    case LayerKind::conv2d: return {out_channels, in_channels, kernel, kernel};
    case LayerKind::fully_connected: return {out_channels, in_channels};
    case LayerKind::batch_norm: return {out_channels};
  }
  return {};
}

void validate(const LayerSpec& spec) {
  if (spec.in_channels == 0 || spec.out_channels == 0 || spec.kernel == 0 || spec.stride == 0 ||
      spec.out_height == 0 || spec.out_width == 0) {
    throw InvalidArgument("layer '" + spec.name + "' has a zero dimension");
  }
  if (spec.kind == LayerKind::batch_norm && spec.in_channels != spec.out_channels) {
    throw InvalidArgument("batch-norm layer '" + spec.name + "' must have in == out channels");
  }
  if (spec.kind == LayerKind::fully_connected && (spec.kernel != 1 || spec.out_height != 1 || spec.out_width != 1)) {
    throw InvalidArgument("fully-connected layer '" + spec.name + "' must have kernel 1 and 1x1 output");
  }
}

std::size_t conv_output_size(std::size_t input, std::size_t kernel, std::size_t stride,
                             std::size_t padding) {
  if (stride == 0) throw DimensionError("stride must be positive");
  if (input + 2 * padding < kernel) {
    throw DimensionError("kernel " + std::to_string(kernel) + " larger than padded input " +
                         std::to_string(input + 2 * padding));
  }
  return (input + 2 * padding - kernel) / stride + 1;
}

Tensor conv2d_dense(const Tensor& input, const Tensor& weights, std::size_t stride,
                    std::size_t padding) {
  if (input.rank() != 3) throw DimensionError("conv2d input must be N x H x W, got " + shape_to_string(input.shape()));
  if (weights.rank() != 4) throw DimensionError("conv2d weights must be M x N x K x K, got " + shape_to_string(weights.shape()));
  const std::size_t n_in = input.dim(0), height = input.dim(1), width = input.dim(2);
  const std::size_t n_out = weights.dim(0), k = weights.dim(2);
  if (weights.dim(1) != n_in) {
    throw DimensionError("conv2d weights expect " + std::to_string(weights.dim(1)) +
                         " input channels, input has " + std::to_string(n_in));
  }
  if (weights.dim(3) != k) throw DimensionError("conv2d kernel must be square");
  const std::size_t out_h = conv_output_size(height, k, stride, padding);
  const std::size_t out_w = conv_output_size(width, k, stride, padding);

  Tensor out({n_out, out_h, out_w});
  const float* x = input.data();
  const float* w = weights.data();
  auto y = out.mutable_values();
  const auto pad = static_cast<std::ptrdiff_t>(padding);

  for (std::size_t m = 0; m < n_out; ++m) {
    for (std::size_t oy = 0; oy < out_h; ++oy) {
      for (std::size_t ox = 0; ox < out_w; ++ox) {
        double acc = 0.0;
        for (std::size_t n = 0; n < n_in; ++n) {
          for (std::size_t ky = 0; ky < k; ++ky) {
            const auto iy = static_cast<std::ptrdiff_t>(oy * stride + ky) - pad;
            if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(height)) continue;
            for (std::size_t kx = 0; kx < k; ++kx) {
              const auto ix = static_cast<std::ptrdiff_t>(ox * stride + kx) - pad;
              if (ix < 0 || ix >= static_cast<std::ptrdiff_t>(width)) continue;
              acc += static_cast<double>(x[(n * height + static_cast<std::size_t>(iy)) * width +
                                           static_cast<std::size_t>(ix)]) *
                     w[((m * n_in + n) * k + ky) * k + kx];
            }
          }
        }
        y[(m * out_h + oy) * out_w + ox] = static_cast<float>(acc);
      }
    }
  }
  return out;
}

Tensor fc_dense(const Tensor& input, const Tensor& weights) {
  if (weights.rank() != 2) throw DimensionError("fc weights must be M x N, got " + shape_to_string(weights.shape()));
  const std::size_t n_out = weights.dim(0), n_in = weights.dim(1);
  if (input.size() != n_in) {
    throw DimensionError("fc weights expect " + std::to_string(n_in) + " inputs, got " +
                         std::to_string(input.size()));
  }
  Tensor out({n_out});
  for (std::size_t m = 0; m < n_out; ++m) {
    double acc = 0.0;
    for (std::size_t n = 0; n < n_in; ++n) acc += static_cast<double>(weights[m * n_in + n]) * input[n];
    out[m] = static_cast<float>(acc);
  }
  return out;
}

Tensor channel_affine(const Tensor& input, std::span<const float> scale,
                      std::span<const float> bias) {
  const std::size_t channels = input.dim(0);
  if (scale.size() != channels || bias.size() != channels) {
    throw DimensionError("affine parameters must have one entry per channel");
  }
  const std::size_t per_channel = input.size() / channels;
  Tensor out = input;
  auto y = out.mutable_values();
  for (std::size_t c = 0; c < channels; ++c) {
    for (std::size_t i = 0; i < per_channel; ++i) {
      y[c * per_channel + i] = scale[c] * y[c * per_channel + i] + bias[c];
    }
  }
  return out;
}

}  // namespace ec2t
