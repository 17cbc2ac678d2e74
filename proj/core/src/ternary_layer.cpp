#include "ec2t/ternary_layer.hpp"

#include <string>
#include <vector>

#include "ec2t/error.hpp"

namespace ec2t::storage {

LayerDims LayerDims::conv(std::size_t in, std::size_t kernel, std::size_t out, std::size_t out_resolution) {
  return {LayerKind::conv2d, out, in, kernel, out_resolution};
}

LayerDims LayerDims::fc(std::size_t out, std::size_t in) { return {LayerKind::fully_connected, out, in, 1, 1}; }

Shape LayerDims::weight_shape() const {
  if (kind == LayerKind::conv2d) return {out_channels, in_channels, kernel, kernel};
  return {out_channels, in_channels};
}

void validate(const LayerDims& dims) {
  if (dims.kind == LayerKind::batch_norm) throw InvalidArgument("batch-norm layers are not ternary");
  if (dims.out_channels == 0 || dims.in_channels == 0 || dims.kernel == 0 || dims.out_resolution == 0) {
    throw InvalidArgument("ternary layer dimensions must be positive");
  }
  if (dims.kind == LayerKind::fully_connected && (dims.kernel != 1 || dims.out_resolution != 1)) {
    throw InvalidArgument("fully-connected ternary layers have kernel 1 and a 1x1 output");
  }
}

double TernaryLayer::density() const noexcept {
  const auto total = dims.elements();
  return total ? static_cast<double>(nonzeros()) / static_cast<double>(total) : 0.0;
}

namespace {

void derive_effective_channels(TernaryLayer& layer) {
  const auto& d = layer.dims;
  const std::size_t kk = d.kernel * d.kernel;
  std::vector<bool> in_used(d.in_channels, false);
  layer.effective_out = 0;
  for (std::size_t m = 0; m < d.out_channels; ++m) {
    bool out_used = false;
    for (std::size_t n = 0; n < d.in_channels; ++n) {
      const std::size_t base = (m * d.in_channels + n) * kk;
      for (std::size_t t = 0; t < kk; ++t) {
        if (layer.location.test(base + t)) {
          out_used = true;
          in_used[n] = true;
          break;
        }
      }
    }
    if (out_used) ++layer.effective_out;
  }
  layer.effective_in = 0;
  for (bool used : in_used) layer.effective_in += used ? 1 : 0;
}

}  // namespace

TernaryLayer make_ternary_layer(const LayerDims& dims, BitMask location, BitMask sign, Half negative,
                                Half positive) {
  validate(dims);
  if (location.size() != dims.elements()) {
    throw CorruptLayerError("location mask has " + std::to_string(location.size()) + " bits, layer has " +
                            std::to_string(dims.elements()) + " weights");
  }
  if (location.popcount() != sign.size()) {
    throw CorruptLayerError("location mask marks " + std::to_string(location.popcount()) +
                            " nonzeros but sign mask has " + std::to_string(sign.size()) + " bits");
  }
  TernaryLayer layer{dims, std::move(location), std::move(sign), negative, positive, 0, 0};
  derive_effective_channels(layer);
  return layer;
}

TernaryLayer encode_ternary_layer(const quant::AssignmentMatrix& assignment,
                                  const quant::CentroidSet& centroids, const LayerDims& dims) {
  validate(dims);
  if (assignment.size() != dims.elements()) {
    throw DimensionError("assignment has " + std::to_string(assignment.size()) + " labels, layer " +
                         shape_to_string(dims.weight_shape()) + " needs " + std::to_string(dims.elements()));
  }
  BitMask location(dims.elements());
  BitMask sign;
  for (std::size_t i = 0; i < assignment.size(); ++i) {
    const auto label = assignment[i];
    if (label == quant::Label::zero) continue;
    location.set(i);
    sign.push_back(label == quant::Label::positive);
  }
  return make_ternary_layer(dims, std::move(location), std::move(sign), float_to_half(centroids.negative),
                            float_to_half(centroids.positive));
}

quant::AssignmentMatrix decode_labels(const TernaryLayer& layer) {
  if (layer.location.size() != layer.dims.elements() || layer.location.popcount() != layer.sign.size()) {
    throw CorruptLayerError("mask sizes are inconsistent with the layer geometry");
  }
  std::vector<quant::Label> labels(layer.dims.elements(), quant::Label::zero);
  std::size_t k = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (!layer.location.test(i)) continue;
    labels[i] = layer.sign.test(k++) ? quant::Label::positive : quant::Label::negative;
  }
  return quant::AssignmentMatrix(layer.dims.weight_shape(), std::move(labels));
}

Tensor decode_ternary_layer(const TernaryLayer& layer) {
  const quant::CentroidSet values{layer.negative_value(), layer.positive_value()};
  return quant::materialize(decode_labels(layer), values);
}

Tensor materialize_half(const quant::AssignmentMatrix& assignment, const quant::CentroidSet& centroids) {
  const quant::CentroidSet rounded{round_through_half(centroids.negative), round_through_half(centroids.positive)};
  return quant::materialize(assignment, rounded);
}

StorageCount& StorageCount::operator+=(const StorageCount& other) noexcept {
  dense += other.dense;
  mask += other.mask;
  sign += other.sign;
  centroids += other.centroids;
  batch_norm += other.batch_norm;
  return *this;
}

StorageCount count_storage_params(const TernaryLayer& layer, bool include_bn) {
  const auto kk = static_cast<double>(layer.dims.kernel * layer.dims.kernel);
  const double effective_elements =
      static_cast<double>(layer.effective_in) * kk * static_cast<double>(layer.effective_out);

  StorageCount count;
  count.mask = effective_elements / 32.0;
  // sigma * effective_elements is exactly the nonzero count.
  count.sign = static_cast<double>(layer.nonzeros()) / 32.0;
  count.centroids = 1.0;
  if (include_bn) count.batch_norm = static_cast<double>(layer.effective_out) / 2.0;
  return count;
}

}  // namespace ec2t::storage
