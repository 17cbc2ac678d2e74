#include "ec2t/accounting.hpp"

#include <algorithm>

#include "ec2t/error.hpp"

namespace ec2t::accounting {

OpsCount count_dense_ops(const LayerSpec& spec) {
  validate(spec);
  const std::uint64_t positions = spec.out_height * spec.out_width;
  switch (spec.kind) {
    case LayerKind::conv2d:
    case LayerKind::fully_connected: {
      const std::uint64_t mults = spec.weight_count() * positions;
      return {mults, mults};
    }
    case LayerKind::batch_norm:
      return {spec.out_channels * positions, spec.out_channels * positions};
  }
  return {};
}

OpsCount count_ternary_ops(const storage::TernaryLayer& layer, std::size_t out_height, std::size_t out_width,
                           bool tree_adder) {
  const auto labels = storage::decode_labels(layer);
  const std::size_t taps = layer.dims.taps();
  OpsCount per_position;
  for (std::size_t m = 0; m < layer.dims.out_channels; ++m) {
    std::uint64_t positive = 0, negative = 0;
    for (std::size_t t = 0; t < taps; ++t) {
      const auto label = labels[m * taps + t];
      positive += label == quant::Label::positive;
      negative += label == quant::Label::negative;
    }
    const std::uint64_t nonzero = positive + negative;
    if (nonzero == 0) continue;
    if (tree_adder) {
      per_position.adds += (nonzero - 1) + ((positive > 0 && negative > 0) ? 1 : 0);
    } else {
      per_position.adds += nonzero;
    }
    per_position.mults += 2;
  }
  const std::uint64_t positions = static_cast<std::uint64_t>(out_height) * out_width;
  return {per_position.adds * positions, per_position.mults * positions};
}

std::uint64_t dense_param_count(const LayerSpec& spec) {
  if (spec.kind == LayerKind::batch_norm) return 2 * spec.out_channels;
  return spec.weight_count();
}

namespace {

void check_consistent(const LayerSpec& spec, const storage::TernaryLayer& layer) {
  const auto& d = layer.dims;
  const bool ok = spec.kind == d.kind && spec.in_channels == d.in_channels && spec.out_channels == d.out_channels &&
                  (spec.kind != LayerKind::conv2d || spec.kernel == d.kernel);
  if (!ok) {
    throw DimensionError("layer '" + spec.name + "' spec " + shape_to_string(spec.weight_shape()) +
                         " does not match ternary encoding " + shape_to_string(d.weight_shape()));
  }
}

}  // namespace

ModelReport model_report(std::span<const ReportLayer> layers, bool tree_adder) {
  ModelReport report;
  report.tree_adder = tree_adder;
  const storage::TernaryLayer* previous_ternary = nullptr;
  for (const auto& entry : layers) {
    const auto& spec = entry.spec;
    validate(spec);
    LayerRow row;
    row.name = spec.name;
    row.kind = spec.kind;
    if (entry.ternary) {
      if (spec.kind == LayerKind::batch_norm) throw DimensionError("batch-norm layer '" + spec.name + "' cannot be ternary");
      check_consistent(spec, *entry.ternary);
      row.ternary = true;
      row.ops = count_ternary_ops(*entry.ternary, spec.out_height, spec.out_width, tree_adder);
      row.params = storage::count_storage_params(*entry.ternary, false);
      row.weights = spec.weight_count();
      row.zeros = row.weights - entry.ternary->nonzeros();
      previous_ternary = &*entry.ternary;
    } else {
      row.ops = count_dense_ops(spec);
      if (spec.kind == LayerKind::batch_norm && previous_ternary != nullptr) {
        row.params.batch_norm = static_cast<double>(previous_ternary->effective_out) / 2.0;
      } else {
        row.params.dense = static_cast<double>(dense_param_count(spec));
      }
      row.weights = spec.weight_count();
      if (spec.kind != LayerKind::batch_norm) previous_ternary = nullptr;
    }
    report.ops += row.ops;
    report.params += row.params;
    report.weights += row.weights;
    report.zeros += row.zeros;
    report.rows.push_back(std::move(row));
  }
  return report;
}

ModelReport dense_report(std::span<const LayerSpec> specs) {
  std::vector<ReportLayer> layers;
  layers.reserve(specs.size());
  for (const auto& s : specs) layers.push_back({s, std::nullopt});
  return model_report(layers, false);
}

}  // namespace ec2t::accounting
