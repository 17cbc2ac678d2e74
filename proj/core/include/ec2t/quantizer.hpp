#pragma once

// Entropy-constrained ternary assignment.
//
// Every quantized layer holds three centroids {w_n, 0, w_p}. Each weight is
// assigned to the centroid minimizing
//
//     cost_c(W_ij) = (W_ij - w_c)^2 - lambda * log2(P_c)
//
// where P_c is the fraction of the layer's weights currently assigned to c,
// floored at 1 / (2 N_W) so that empty clusters have finite cost. lambda is
// the per-layer product gamma * delta * lambda_max.

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

#include "ec2t/tensor.hpp"

namespace ec2t::quant {

enum class Label : std::uint8_t { negative = 0, zero = 1, positive = 2 };

inline constexpr std::size_t kClusterCount = 3;
inline constexpr float kCentroidEpsilon = 1e-8f;
inline constexpr int kMaxFixedPointIterations = 10;
inline constexpr double kLambdaMaxCap = 1048576.0;  // 2^20
inline constexpr double kLambdaMaxPrecision = 1e-3;
inline constexpr double kLambdaMaxFloor = 0x1p-30;
inline constexpr double kLambdaMaxScanStep = 2e-3;  // relative grid step inside the bracket

constexpr std::size_t index(Label label) noexcept { return static_cast<std::size_t>(label); }
char label_char(Label label) noexcept;

/// Ternary centroid values of one layer. The zero centroid is implicit.
struct CentroidSet {
  float negative = -kCentroidEpsilon;
  float positive = kCentroidEpsilon;

  float value(Label label) const noexcept {
    switch (label) {
      case Label::negative: return negative;
      case Label::positive: return positive;
      case Label::zero: break;
    }
    return 0.0f;
  }

  // Restores w_n <= -eps and w_p >= eps after a gradient step.
  void clamp() noexcept;
  bool valid() const noexcept { return negative <= -kCentroidEpsilon && positive >= kCentroidEpsilon; }

  friend bool operator==(const CentroidSet&, const CentroidSet&) = default;
};

/// Per-element labels with the shape of the layer's weights.
class AssignmentMatrix {
 public:
  AssignmentMatrix() = default;
  AssignmentMatrix(Shape shape, std::vector<Label> labels);
  AssignmentMatrix(Shape shape, Label fill);

  const Shape& shape() const noexcept { return shape_; }
  std::size_t size() const noexcept { return labels_.size(); }
  std::span<const Label> labels() const noexcept { return labels_; }
  Label operator[](std::size_t i) const { return labels_[i]; }
  void set(std::size_t i, Label label) { labels_[i] = label; }

  friend bool operator==(const AssignmentMatrix&, const AssignmentMatrix&) = default;

 private:
  Shape shape_;
  std::vector<Label> labels_;
};

struct ClusterStats {
  std::array<std::size_t, kClusterCount> counts{};
  std::array<double, kClusterCount> probabilities{};

  std::size_t total() const noexcept { return counts[0] + counts[1] + counts[2]; }
  std::size_t count(Label c) const noexcept { return counts[index(c)]; }
  double probability(Label c) const noexcept { return probabilities[index(c)]; }
  double floor() const noexcept { return 1.0 / (2.0 * static_cast<double>(total())); }

  // Stats from explicit counts, with the 1/(2 N) floor applied.
  static ClusterStats from_counts(std::size_t n_negative, std::size_t n_zero, std::size_t n_positive);

  friend bool operator==(const ClusterStats&, const ClusterStats&) = default;
};

/// Costs laid out as [cluster][element].
struct CostTensor {
  Shape shape;
  std::vector<double> costs;

  std::size_t elements() const noexcept { return costs.size() / kClusterCount; }
  double at(Label c, std::size_t i) const noexcept { return costs[index(c) * elements() + i]; }
};

enum class Mode { ec2t, ttq_threshold };
Mode parse_mode(std::string_view text);
const char* to_string(Mode mode);

struct QuantizeResult {
  AssignmentMatrix assignment;
  ClusterStats stats;
  int iterations = 0;      // assign/stats rounds performed (ec2t mode)
  bool converged = true;   // false when the iteration cap was hit
};

struct LambdaMax {
  double value = 0.0;
  bool capped = false;  // no emptying found below kLambdaMaxCap; value == cap
};

/// Global gamma with the per-layer delta and lambda_max it is applied to.
struct LambdaState {
  double gamma = 0.0;
  std::vector<double> delta;
  std::vector<LambdaMax> lambda_max;

  double lambda(std::size_t layer) const { return gamma * delta.at(layer) * lambda_max.at(layer).value; }
};

/// w_p = mean of positive weights, w_n = mean of negative weights; an empty
/// side falls back to +/- kCentroidEpsilon. Throws DegenerateInitError for an
/// all-zero tensor.
CentroidSet init_centroids(const Tensor& weights);

ClusterStats cluster_stats(const AssignmentMatrix& assignment);

CostTensor assignment_cost(const Tensor& weights, const CentroidSet& centroids,
                           const ClusterStats& stats, double lambda);

/// Element-wise argmin over the clusters. Ties go to zero, then negative.
AssignmentMatrix assign(const CostTensor& cost);

/// Nearest-centroid labels with the same tie-break as `assign`.
AssignmentMatrix nearest_assignment(const Tensor& weights, const CentroidSet& centroids);

/// Alternates assign and cluster_stats, starting from the stats of the
/// nearest-centroid labels, until the labels stop changing or the iteration
/// cap is reached (the last iterate is kept).
QuantizeResult fixed_point_assignment(const Tensor& weights, const CentroidSet& centroids,
                                      double lambda, int max_iterations = kMaxFixedPointIterations);

/// delta_l = N_l / max_k N_k over the quantized layers' element counts.
std::vector<double> compute_delta(std::span<const std::size_t> element_counts);

/// Smallest lambda at which the fixed-point assignment empties the negative or
/// the positive cluster. Bracketed by doubling (or halving) from 1, scanned
/// on a geometric grid inside the bracket, then refined by bisection to
/// kLambdaMaxPrecision relative width.
LambdaMax compute_lambda_max(const Tensor& weights, const CentroidSet& centroids);

/// ec2t: fixed-point entropy-constrained assignment at `lambda`.
/// ttq_threshold: zero where |W| <= t * max|W|, sign otherwise; t in [0, 1).
QuantizeResult quantize_layer(const Tensor& weights, const CentroidSet& centroids, double lambda,
                              Mode mode = Mode::ec2t, double threshold = 0.0);

/// Quantized weight tensor q_ij = centroid(A_ij).
Tensor materialize(const AssignmentMatrix& assignment, const CentroidSet& centroids);

/// Fraction of zero labels.
double sparsity(const AssignmentMatrix& assignment);

}  // namespace ec2t::quant
