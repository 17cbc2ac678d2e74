#include "ec2t/trainer.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numeric>
#include <sstream>
#include <string>

#include "ec2t/error.hpp"
#include "ec2t/rng.hpp"

namespace ec2t::train {

void validate(const MlpSpec& spec) {
  if (spec.widths.size() < 2) throw InvalidArgument("an MLP needs an input and an output width");
  if (spec.quantize.size() != spec.layer_count()) throw InvalidArgument("one quantize flag per weight layer");
  for (auto w : spec.widths) {
    if (w == 0) throw InvalidArgument("MLP widths must be positive");
  }
}

MlpSpec make_mlp(std::vector<std::size_t> widths) {
  MlpSpec spec{std::move(widths), {}};
  const std::size_t layers = spec.layer_count();
  spec.quantize.assign(layers, false);
  for (std::size_t l = 1; l + 1 < layers; ++l) spec.quantize[l] = true;
  validate(spec);
  return spec;
}

MlpSpec reference_mlp() { return make_mlp({2, 16, 16, 2}); }

DualModel DualModel::initialize(const MlpSpec& spec, std::uint64_t seed) {
  validate(spec);
  DualModel model;
  model.spec_ = spec;
  Rng rng(seed);
  for (std::size_t l = 0; l < spec.layer_count(); ++l) {
    const std::size_t in = spec.widths[l], out = spec.widths[l + 1];
    const double stddev = std::sqrt(2.0 / static_cast<double>(in));
    std::vector<float> w(in * out);
    for (auto& v : w) v = static_cast<float>(stddev * rng.normal());
    DenseLayer layer{Tensor({out, in}, std::move(w)), Tensor({out}), spec.quantize[l], {}, {}};
    if (layer.quantized) {
      layer.centroids = quant::init_centroids(layer.latent);
      layer.assignment = quant::nearest_assignment(layer.latent, layer.centroids);
    }
    model.layers_.push_back(std::move(layer));
  }
  return model;
}

Tensor DualModel::forward_weights(std::size_t l) const {
  const auto& layer = layers_.at(l);
  if (!layer.quantized) return layer.latent;
  return quant::materialize(layer.assignment, layer.centroids);
}

void DualModel::set_latent(std::size_t l, Tensor weights) {
  if (weights.shape() != layers_.at(l).latent.shape()) throw DimensionError("latent shape mismatch");
  layers_[l].latent = std::move(weights);
  ++version_;
}

void DualModel::set_bias(std::size_t l, Tensor bias) {
  if (bias.shape() != layers_.at(l).bias.shape()) throw DimensionError("bias shape mismatch");
  layers_[l].bias = std::move(bias);
  ++version_;
}

void DualModel::set_centroids(std::size_t l, quant::CentroidSet centroids) {
  if (!layers_.at(l).quantized) throw InvalidArgument("layer " + std::to_string(l) + " is not ternary");
  centroids.clamp();
  layers_[l].centroids = centroids;
  ++version_;
}

void DualModel::set_assignment(std::size_t l, quant::AssignmentMatrix assignment) {
  if (!layers_.at(l).quantized) throw InvalidArgument("layer " + std::to_string(l) + " is not ternary");
  if (assignment.shape() != layers_[l].latent.shape()) throw DimensionError("assignment shape mismatch");
  layers_[l].assignment = std::move(assignment);
  ++version_;
}

bool DualModel::consistent() const {
  for (const auto& layer : layers_) {
    if (!layer.quantized) continue;
    if (layer.assignment.shape() != layer.latent.shape() || !layer.centroids.valid()) return false;
  }
  return true;
}

std::vector<std::size_t> DualModel::quantized_layers() const {
  std::vector<std::size_t> out;
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    if (layers_[l].quantized) out.push_back(l);
  }
  return out;
}

ForwardResult forward_quantized(const DualModel& model, const Tensor& input) {
  const auto& widths = model.spec().widths;
  if (input.rank() != 2 || input.dim(1) != widths.front()) {
    throw DimensionError("input must be batch x " + std::to_string(widths.front()) + ", got " +
                         shape_to_string(input.shape()));
  }
  const std::size_t batch = input.dim(0);
  ForwardCache cache;
  cache.version = model.version();
  cache.batch = batch;

  std::vector<double> activation(input.values().begin(), input.values().end());
  const std::size_t layers = model.layers().size();
  for (std::size_t l = 0; l < layers; ++l) {
    const Tensor weights = model.forward_weights(l);
    const auto& bias = model.layer(l).bias;
    const std::size_t in = widths[l], out = widths[l + 1];
    std::vector<double> z(batch * out);
    for (std::size_t b = 0; b < batch; ++b) {
      for (std::size_t m = 0; m < out; ++m) {
        double acc = 0.0;
        for (std::size_t n = 0; n < in; ++n) acc += static_cast<double>(weights[m * in + n]) * activation[b * in + n];
        z[b * out + m] = acc + static_cast<double>(bias[m]);
      }
    }
    cache.inputs.push_back(std::move(activation));
    activation = z;
    if (l + 1 < layers) {
      for (auto& v : activation) v = std::max(v, 0.0);
    }
    cache.preactivations.push_back(std::move(z));
  }

  for (double v : activation) {
    if (!std::isfinite(static_cast<float>(v))) throw DivergenceError("non-finite network output");
  }
  std::vector<float> logits(activation.size());
  std::transform(activation.begin(), activation.end(), logits.begin(), [](double v) { return static_cast<float>(v); });
  return {Tensor({batch, widths.back()}, std::move(logits)), std::move(cache)};
}

std::vector<LayerGradients> backward_ste(const DualModel& model, const ForwardCache& cache,
                                         const Tensor& loss_grad) {
  if (cache.version != model.version() || cache.inputs.size() != model.layers().size()) {
    throw StaleCacheError("forward cache does not belong to the current model state");
  }
  const auto& widths = model.spec().widths;
  const std::size_t batch = cache.batch;
  if (loss_grad.rank() != 2 || loss_grad.dim(0) != batch || loss_grad.dim(1) != widths.back()) {
    throw DimensionError("loss gradient must be " + std::to_string(batch) + " x " + std::to_string(widths.back()));
  }

  const std::size_t layers = model.layers().size();
  std::vector<LayerGradients> grads(layers);
  std::vector<double> upstream(loss_grad.values().begin(), loss_grad.values().end());
  for (std::size_t l = layers; l-- > 0;) {
    const std::size_t in = widths[l], out = widths[l + 1];
    const auto& a_in = cache.inputs[l];
    const Tensor weights = model.forward_weights(l);

    std::vector<double> dw(out * in, 0.0), db(out, 0.0);
    for (std::size_t b = 0; b < batch; ++b) {
      for (std::size_t m = 0; m < out; ++m) {
        const double g = upstream[b * out + m];
        if (g == 0.0) continue;
        db[m] += g;
        for (std::size_t n = 0; n < in; ++n) dw[m * in + n] += g * a_in[b * in + n];
      }
    }

    auto& lg = grads[l];
    const auto& layer = model.layer(l);
    if (layer.quantized) {
      for (std::size_t i = 0; i < dw.size(); ++i) {
        switch (layer.assignment[i]) {
          case quant::Label::negative: lg.negative += dw[i]; break;
          case quant::Label::positive: lg.positive += dw[i]; break;
          case quant::Label::zero: break;
        }
      }
    }
    std::vector<float> dw_f(dw.begin(), dw.end()), db_f(db.begin(), db.end());
    lg.latent = Tensor({out, in}, std::move(dw_f));
    lg.bias = Tensor({out}, std::move(db_f));

    if (l == 0) break;
    const auto& z_prev = cache.preactivations[l - 1];
    std::vector<double> next(batch * in, 0.0);
    for (std::size_t b = 0; b < batch; ++b) {
      for (std::size_t n = 0; n < in; ++n) {
        if (z_prev[b * in + n] <= 0.0) continue;
        double acc = 0.0;
        for (std::size_t m = 0; m < out; ++m) acc += upstream[b * out + m] * static_cast<double>(weights[m * in + n]);
        next[b * in + n] = acc;
      }
    }
    upstream = std::move(next);
  }
  return grads;
}

double softmax_cross_entropy(const Tensor& logits, std::span<const int> labels, Tensor* grad) {
  if (logits.rank() != 2 || logits.dim(0) != labels.size()) throw DimensionError("one label per logit row");
  const std::size_t batch = logits.dim(0), classes = logits.dim(1);
  double loss = 0.0;
  std::vector<float> g(batch * classes);
  for (std::size_t b = 0; b < batch; ++b) {
    const auto label = static_cast<std::size_t>(labels[b]);
    if (labels[b] < 0 || label >= classes) throw InvalidArgument("label out of range");
    double peak = logits[b * classes];
    for (std::size_t c = 1; c < classes; ++c) peak = std::max(peak, static_cast<double>(logits[b * classes + c]));
    double denom = 0.0;
    for (std::size_t c = 0; c < classes; ++c) denom += std::exp(static_cast<double>(logits[b * classes + c]) - peak);
    loss += std::log(denom) - (static_cast<double>(logits[b * classes + label]) - peak);
    for (std::size_t c = 0; c < classes; ++c) {
      const double p = std::exp(static_cast<double>(logits[b * classes + c]) - peak) / denom;
      g[b * classes + c] = static_cast<float>((p - (c == label ? 1.0 : 0.0)) / static_cast<double>(batch));
    }
  }
  if (grad != nullptr) *grad = Tensor({batch, classes}, std::move(g));
  return loss / static_cast<double>(batch);
}

void validate(const TrainConfig& config) {
  if (!(config.gamma >= 0.0)) throw InvalidArgument("gamma must be non-negative");
  if (config.epochs == 0 || config.batch_size == 0) throw InvalidArgument("epochs and batch size must be positive");
  if (!(config.learning_rate > 0.0) || !(config.centroid_learning_rate > 0.0)) {
    throw InvalidArgument("learning rates must be positive");
  }
  if (config.reassign_every && *config.reassign_every == 0) throw InvalidArgument("reassign_every must be positive");
  if (config.mode == quant::Mode::ttq_threshold && !(config.ttq_threshold >= 0.0 && config.ttq_threshold < 1.0)) {
    throw InvalidArgument("ttq threshold must lie in [0, 1)");
  }
}

quant::LambdaState reassign(DualModel& model, double gamma, quant::Mode mode, double ttq_threshold) {
  quant::LambdaState state;
  state.gamma = gamma;
  const auto ternary = model.quantized_layers();
  if (ternary.empty()) return state;

  std::vector<std::size_t> counts;
  for (auto l : ternary) counts.push_back(model.layer(l).latent.size());
  state.delta = quant::compute_delta(counts);
  for (std::size_t i = 0; i < ternary.size(); ++i) {
    const auto& layer = model.layer(ternary[i]);
    state.lambda_max.push_back(mode == quant::Mode::ec2t ? quant::compute_lambda_max(layer.latent, layer.centroids)
                                                         : quant::LambdaMax{});
    const double lambda = state.lambda(i);
    auto result = quant::quantize_layer(layer.latent, layer.centroids, lambda, mode, ttq_threshold);
    model.set_assignment(ternary[i], std::move(result.assignment));
  }
  return state;
}

double model_sparsity(const DualModel& model) {
  std::size_t zeros = 0, total = 0;
  for (const auto& layer : model.layers()) {
    if (!layer.quantized) continue;
    total += layer.assignment.size();
    zeros += static_cast<std::size_t>(
        std::count(layer.assignment.labels().begin(), layer.assignment.labels().end(), quant::Label::zero));
  }
  return total ? static_cast<double>(zeros) / static_cast<double>(total) : 0.0;
}

Evaluation evaluate(const DualModel& model, const Dataset& data) {
  const auto logits = forward_quantized(model, data.inputs).output;
  const std::size_t classes = logits.dim(1);
  std::size_t correct = 0;
  for (std::size_t b = 0; b < data.size(); ++b) {
    std::size_t best = 0;
    for (std::size_t c = 1; c < classes; ++c) {
      if (logits[b * classes + c] > logits[b * classes + best]) best = c;
    }
    correct += static_cast<int>(best) == data.labels[b];
  }
  return {static_cast<double>(correct) / static_cast<double>(data.size()), model_sparsity(model)};
}

namespace {

Tensor gather_rows(const Tensor& inputs, std::span<const std::size_t> rows) {
  const std::size_t features = inputs.dim(1);
  std::vector<float> out;
  out.reserve(rows.size() * features);
  for (auto r : rows) {
    const auto row = inputs.values().subspan(r * features, features);
    out.insert(out.end(), row.begin(), row.end());
  }
  return Tensor({rows.size(), features}, std::move(out));
}

void require_finite(std::span<const float> values, std::size_t layer, const char* what) {
  for (const float v : values) {
    if (!std::isfinite(v)) throw DivergenceError("non-finite " + std::string(what) + " in layer " + std::to_string(layer));
  }
}

void apply_sgd(DualModel& model, const std::vector<LayerGradients>& grads, const TrainConfig& config) {
  const auto lr = static_cast<float>(config.learning_rate);
  for (std::size_t l = 0; l < grads.size(); ++l) {
    const auto& layer = model.layer(l);
    Tensor latent = layer.latent;
    auto w = latent.mutable_values();
    for (std::size_t i = 0; i < w.size(); ++i) w[i] -= lr * grads[l].latent[i];
    Tensor bias = layer.bias;
    auto b = bias.mutable_values();
    for (std::size_t i = 0; i < b.size(); ++i) b[i] -= lr * grads[l].bias[i];
    require_finite(w, l, "latent weights");
    require_finite(b, l, "bias");
    if (layer.quantized) {
      quant::CentroidSet c = layer.centroids;
      c.negative = static_cast<float>(c.negative - config.centroid_learning_rate * grads[l].negative);
      c.positive = static_cast<float>(c.positive - config.centroid_learning_rate * grads[l].positive);
      require_finite(std::array<float, 2>{c.negative, c.positive}, l, "centroids");
      model.set_centroids(l, c);
    }
    model.set_latent(l, std::move(latent));
    model.set_bias(l, std::move(bias));
  }
}

}  // namespace

TrainResult train_ec2t(const MlpSpec& spec, const Dataset& data, const TrainConfig& config) {
  validate(config);
  if (data.size() == 0) throw InvalidArgument("training data is empty");
  if (data.features() != spec.widths.front()) throw DimensionError("data features do not match the network input");

  Rng rng(config.seed);
  TrainResult result{DualModel::initialize(spec, rng.next()), {}, {}};
  DualModel& model = result.model;
  result.last_lambda = reassign(model, config.warmup_epochs > 0 ? 0.0 : config.gamma, config.mode,
                                config.ttq_threshold);

  const std::size_t steps_per_epoch = (data.size() + config.batch_size - 1) / config.batch_size;
  const std::size_t reassign_every = config.reassign_every.value_or(steps_per_epoch);
  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), std::size_t{0});

  std::size_t step = 0;
  for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
    for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[rng.below(i)]);
    double loss_sum = 0.0;
    for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
      const std::size_t end = std::min(order.size(), start + config.batch_size);
      const std::span<const std::size_t> rows(order.data() + start, end - start);
      std::vector<int> labels;
      for (auto r : rows) labels.push_back(data.labels[r]);

      auto forward = forward_quantized(model, gather_rows(data.inputs, rows));
      Tensor grad;
      const double loss = softmax_cross_entropy(forward.output, labels, &grad);
      if (!std::isfinite(loss)) {
        std::ostringstream os;
        os << "training diverged at epoch " << epoch << ", step " << step << " (loss " << loss << ")";
        throw DivergenceError(os.str());
      }
      loss_sum += loss;
      apply_sgd(model, backward_ste(model, forward.cache, grad), config);
      ++step;
      if (step % reassign_every == 0) {
        const double gamma = epoch > config.warmup_epochs ? config.gamma : 0.0;
        result.last_lambda = reassign(model, gamma, config.mode, config.ttq_threshold);
      }
    }

    MetricsRow row;
    row.epoch = epoch;
    row.train_loss = loss_sum / static_cast<double>(steps_per_epoch);
    const auto eval = evaluate(model, data);
    row.train_accuracy = eval.accuracy;
    row.model_sparsity = eval.sparsity;
    for (auto l : model.quantized_layers()) {
      row.centroids.push_back({l, model.layer(l).centroids.negative, model.layer(l).centroids.positive});
    }
    result.metrics.push_back(std::move(row));
  }
  return result;
}

}  // namespace ec2t::train
