#pragma once

// Dual-model (latent full-precision + ternary forward) training of a small
// fully-connected network with straight-through gradients and periodic
// entropy-constrained reassignment.

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "ec2t/quantizer.hpp"
#include "ec2t/tensor.hpp"
#include "ec2t/two_moons.hpp"

namespace ec2t::train {

/// Fully-connected network with ReLU between layers. `widths` lists the layer
/// sizes including input and output; `quantize[l]` flags weight layer l.
struct MlpSpec {
  std::vector<std::size_t> widths;
  std::vector<bool> quantize;

  std::size_t layer_count() const noexcept { return widths.empty() ? 0 : widths.size() - 1; }
};

void validate(const MlpSpec& spec);

/// Quantizes every weight layer except the first and the last.
MlpSpec make_mlp(std::vector<std::size_t> widths);

/// 2-16-16-2; only the 16x16 layer is ternary.
MlpSpec reference_mlp();

/// One weight layer. Biases stay full precision.
struct DenseLayer {
  Tensor latent;  // out x in
  Tensor bias;    // out
  bool quantized = false;
  quant::CentroidSet centroids;
  quant::AssignmentMatrix assignment;  // empty unless quantized
};

class DualModel {
 public:
  /// He-normal latent weights, zero biases; ternary layers get centroids from
  /// init_centroids and nearest-centroid labels.
  static DualModel initialize(const MlpSpec& spec, std::uint64_t seed);

  const MlpSpec& spec() const noexcept { return spec_; }
  const std::vector<DenseLayer>& layers() const noexcept { return layers_; }
  const DenseLayer& layer(std::size_t l) const { return layers_.at(l); }

  /// Weights used in the forward pass: centroid values for ternary layers,
  /// latent weights otherwise.
  Tensor forward_weights(std::size_t l) const;

  /// Bumped on every parameter or assignment change; forward caches record it.
  std::uint64_t version() const noexcept { return version_; }

  // Mutators. Each bumps the version.
  void set_latent(std::size_t l, Tensor weights);
  void set_bias(std::size_t l, Tensor bias);
  void set_centroids(std::size_t l, quant::CentroidSet centroids);
  void set_assignment(std::size_t l, quant::AssignmentMatrix assignment);

  /// Labels match the latent shapes and centroids keep their signs.
  bool consistent() const;

  std::vector<std::size_t> quantized_layers() const;

 private:
  MlpSpec spec_;
  std::vector<DenseLayer> layers_;
  std::uint64_t version_ = 0;
};

struct ForwardCache {
  std::uint64_t version = 0;
  std::size_t batch = 0;
  std::vector<std::vector<double>> inputs;          // per layer, batch x in
  std::vector<std::vector<double>> preactivations;  // per layer, batch x out
};

struct ForwardResult {
  Tensor output;  // batch x classes (logits)
  ForwardCache cache;
};

/// `input` is batch x features.
ForwardResult forward_quantized(const DualModel& model, const Tensor& input);

struct LayerGradients {
  Tensor latent;  // dL/dq passed straight through (ordinary gradient for full-precision layers)
  Tensor bias;
  double negative = 0.0;  // dL/dw_n, summed over elements labelled n
  double positive = 0.0;  // dL/dw_p, summed over elements labelled p
};

/// Throws StaleCacheError when the model changed since the forward pass.
std::vector<LayerGradients> backward_ste(const DualModel& model, const ForwardCache& cache,
                                         const Tensor& loss_grad);

/// Mean softmax cross-entropy over the batch; writes dL/dlogits when `grad`
/// is given.
double softmax_cross_entropy(const Tensor& logits, std::span<const int> labels, Tensor* grad);

struct TrainConfig {
  double gamma = 0.0;
  std::size_t epochs = 200;
  std::size_t batch_size = 32;
  double learning_rate = 0.05;
  double centroid_learning_rate = 0.005;
  std::optional<std::size_t> reassign_every;  // steps; unset = once per epoch
  std::size_t warmup_epochs = 0;              // epochs trained with lambda = 0 before gamma applies
  std::uint64_t seed = 1;
  quant::Mode mode = quant::Mode::ec2t;
  double ttq_threshold = 0.05;
};

void validate(const TrainConfig& config);

struct LayerCentroids {
  std::size_t layer = 0;
  float negative = 0.0f;
  float positive = 0.0f;

  friend bool operator==(const LayerCentroids&, const LayerCentroids&) = default;
};

struct MetricsRow {
  std::size_t epoch = 0;
  double train_loss = 0.0;
  double train_accuracy = 0.0;
  double model_sparsity = 0.0;
  std::vector<LayerCentroids> centroids;

  friend bool operator==(const MetricsRow&, const MetricsRow&) = default;
};

/// Recomputes delta and lambda_max for every ternary layer, sets
/// lambda = gamma * delta * lambda_max and reassigns the labels. Latent
/// weights and centroids are untouched.
quant::LambdaState reassign(DualModel& model, double gamma, quant::Mode mode = quant::Mode::ec2t,
                            double ttq_threshold = 0.0);

struct TrainResult {
  DualModel model;
  std::vector<MetricsRow> metrics;
  quant::LambdaState last_lambda;
};

/// Plain SGD on mini-batches drawn from a seeded shuffle. Throws
/// DivergenceError when the loss becomes non-finite.
TrainResult train_ec2t(const MlpSpec& spec, const Dataset& data, const TrainConfig& config);

struct Evaluation {
  double accuracy = 0.0;
  double sparsity = 0.0;
};

Evaluation evaluate(const DualModel& model, const Dataset& data);

/// Zero-label fraction over all ternary layers (0 when there are none).
double model_sparsity(const DualModel& model);

}  // namespace ec2t::train
