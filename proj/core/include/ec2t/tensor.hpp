#pragma once

#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

namespace ec2t {

using Shape = std::vector<std::size_t>;

std::size_t shape_size(const Shape& shape);
std::string shape_to_string(const Shape& shape);

/// Dense row-major tensor of 32-bit floats.
///
/// Every dimension is positive and every value is finite; both are checked
/// on construction and on assignment through `set`.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Shape shape);  // zero-filled
  Tensor(Shape shape, std::vector<float> data);
  Tensor(Shape shape, std::initializer_list<float> data);

  const Shape& shape() const noexcept { return shape_; }
  std::size_t rank() const noexcept { return shape_.size(); }
  std::size_t dim(std::size_t i) const { return shape_.at(i); }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  std::span<const float> values() const noexcept { return data_; }
  std::span<float> mutable_values() noexcept { return data_; }
  const float* data() const noexcept { return data_.data(); }

  float operator[](std::size_t i) const { return data_[i]; }
  float& operator[](std::size_t i) { return data_[i]; }

  // Row-major accessors, bounds-unchecked beyond rank.
  float at(std::size_t i, std::size_t j) const { return data_[i * shape_[1] + j]; }
  float at(std::size_t i, std::size_t j, std::size_t k) const {
    return data_[(i * shape_[1] + j) * shape_[2] + k];
  }
  float at(std::size_t i, std::size_t j, std::size_t k, std::size_t l) const {
    return data_[((i * shape_[1] + j) * shape_[2] + k) * shape_[3] + l];
  }

  Tensor reshaped(Shape shape) const;

  // Throws DimensionError when a value is NaN or infinite.
  void check_finite() const;

  friend bool operator==(const Tensor&, const Tensor&) = default;

 private:
  Shape shape_;
  std::vector<float> data_;
};

enum class LayerKind : std::uint8_t { conv2d = 0, fully_connected = 1, batch_norm = 2 };

const char* to_string(LayerKind kind);

/// Structural description of one layer, used for counting and for building
/// reference networks. Fully-connected layers use kernel = 1 and a 1x1 output;
/// batch-norm layers carry channel counts (in == out) and the spatial size they
/// normalize over.
struct LayerSpec {
  std::string name;
  LayerKind kind = LayerKind::conv2d;
  std::size_t in_channels = 1;
  std::size_t out_channels = 1;
  std::size_t kernel = 1;
  std::size_t stride = 1;
  std::size_t out_height = 1;
  std::size_t out_width = 1;
  bool quantize = false;

  std::size_t weight_count() const;
  Shape weight_shape() const;

  friend bool operator==(const LayerSpec&, const LayerSpec&) = default;
};

// Throws InvalidArgument when a dimension is zero or batch-norm channels differ.
void validate(const LayerSpec& spec);

/// H_out = (H + 2*padding - K) / stride + 1; throws DimensionError when the
/// kernel does not fit.
std::size_t conv_output_size(std::size_t input, std::size_t kernel, std::size_t stride,
                             std::size_t padding);

/// Cross-correlation of an N x H x W input with M x N x K x K weights.
/// Accumulates in double over (n, ky, kx) in row-major order.
Tensor conv2d_dense(const Tensor& input, const Tensor& weights, std::size_t stride,
                    std::size_t padding);

/// Matrix-vector product of M x N weights with an input of N elements,
/// accumulated in double.
Tensor fc_dense(const Tensor& input, const Tensor& weights);

/// Per-channel y = scale[c] * x + bias[c] over a C x ... tensor (batch-norm at
/// inference time).
Tensor channel_affine(const Tensor& input, std::span<const float> scale,
                      std::span<const float> bias);

}  // namespace ec2t
