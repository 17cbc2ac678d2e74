#include "ec2t/quantizer.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "ec2t/error.hpp"

namespace ec2t::quant {

char label_char(Label label) noexcept {
  switch (label) {
    case Label::negative: return 'n';
    case Label::zero: return '0';
    case Label::positive: return 'p';
  }
  return '?';
}

void CentroidSet::clamp() noexcept {
  negative = std::min(negative, -kCentroidEpsilon);
  positive = std::max(positive, kCentroidEpsilon);
}

AssignmentMatrix::AssignmentMatrix(Shape shape, std::vector<Label> labels)
    : shape_(std::move(shape)), labels_(std::move(labels)) {
  if (shape_size(shape_) != labels_.size()) {
    throw DimensionError("assignment shape " + shape_to_string(shape_) + " does not match " +
                         std::to_string(labels_.size()) + " labels");
  }
}

AssignmentMatrix::AssignmentMatrix(Shape shape, Label fill)
    : shape_(std::move(shape)), labels_(shape_size(shape_), fill) {}

ClusterStats ClusterStats::from_counts(std::size_t n_negative, std::size_t n_zero, std::size_t n_positive) {
  ClusterStats stats;
  stats.counts = {n_negative, n_zero, n_positive};
  const auto total = static_cast<double>(stats.total());
  if (stats.total() == 0) throw InvalidArgument("cluster statistics need at least one element");
  const double floor = 1.0 / (2.0 * total);
  for (std::size_t c = 0; c < kClusterCount; ++c) {
    stats.probabilities[c] = std::max(static_cast<double>(stats.counts[c]) / total, floor);
  }
  return stats;
}

Mode parse_mode(std::string_view text) {
  if (text == "ec2t") return Mode::ec2t;
  if (text == "ttq" || text == "ttq-threshold") return Mode::ttq_threshold;
  throw InvalidArgument("unknown quantization mode '" + std::string(text) + "'");
}

const char* to_string(Mode mode) {
  switch (mode) {
    case Mode::ec2t: return "ec2t";
    case Mode::ttq_threshold: return "ttq-threshold";
  }
  return "unknown";
}

CentroidSet init_centroids(const Tensor& weights) {
  if (weights.empty()) throw InvalidArgument("cannot initialize centroids from an empty tensor");
  double pos_sum = 0.0, neg_sum = 0.0;
  std::size_t pos_n = 0, neg_n = 0;
  for (float w : weights.values()) {
    if (w > 0.0f) {
      pos_sum += w;
      ++pos_n;
    } else if (w < 0.0f) {
      neg_sum += w;
      ++neg_n;
    }
  }
  if (pos_n == 0 && neg_n == 0) throw DegenerateInitError("all-zero weights give no centroid information");
  CentroidSet c;
  c.positive = pos_n ? static_cast<float>(pos_sum / static_cast<double>(pos_n)) : kCentroidEpsilon;
  c.negative = neg_n ? static_cast<float>(neg_sum / static_cast<double>(neg_n)) : -kCentroidEpsilon;
  c.clamp();
  return c;
}

ClusterStats cluster_stats(const AssignmentMatrix& assignment) {
  std::array<std::size_t, kClusterCount> counts{};
  for (Label l : assignment.labels()) ++counts[index(l)];
  return ClusterStats::from_counts(counts[0], counts[1], counts[2]);
}

CostTensor assignment_cost(const Tensor& weights, const CentroidSet& centroids,
                           const ClusterStats& stats, double lambda) {
  if (lambda < 0.0) throw InvalidArgument("lambda must be non-negative");
  const std::size_t n = weights.size();
  CostTensor cost{weights.shape(), std::vector<double>(kClusterCount * n)};
  const auto values = weights.values();
  for (std::size_t c = 0; c < kClusterCount; ++c) {
    const auto label = static_cast<Label>(c);
    const double centroid = centroids.value(label);
    const double entropy = lambda * std::log2(stats.probabilities[c]);
    double* row = cost.costs.data() + c * n;
    for (std::size_t i = 0; i < n; ++i) {
      const double diff = static_cast<double>(values[i]) - centroid;
      row[i] = diff * diff - entropy;
    }
  }
  return cost;
}

AssignmentMatrix assign(const CostTensor& cost) {
  const std::size_t n = cost.elements();
  std::vector<Label> labels(n);
  const double* neg = cost.costs.data();
  const double* zero = neg + n;
  const double* pos = zero + n;
  for (std::size_t i = 0; i < n; ++i) {
    Label best = Label::zero;
    double best_cost = zero[i];
    if (neg[i] < best_cost) {
      best = Label::negative;
      best_cost = neg[i];
    }
    if (pos[i] < best_cost) best = Label::positive;
    labels[i] = best;
  }
  return AssignmentMatrix(cost.shape, std::move(labels));
}

AssignmentMatrix nearest_assignment(const Tensor& weights, const CentroidSet& centroids) {
  const auto uniform = ClusterStats::from_counts(1, 1, 1);
  return assign(assignment_cost(weights, centroids, uniform, 0.0));
}

QuantizeResult fixed_point_assignment(const Tensor& weights, const CentroidSet& centroids,
                                      double lambda, int max_iterations) {
  if (weights.empty()) throw InvalidArgument("cannot quantize an empty tensor");
  QuantizeResult result;
  result.assignment = nearest_assignment(weights, centroids);
  result.stats = cluster_stats(result.assignment);
  result.converged = false;
  for (int it = 1; it <= max_iterations; ++it) {
    auto next = assign(assignment_cost(weights, centroids, result.stats, lambda));
    result.iterations = it;
    if (next == result.assignment) {
      result.converged = true;
      break;
    }
    result.assignment = std::move(next);
    result.stats = cluster_stats(result.assignment);
  }
  return result;
}

std::vector<double> compute_delta(std::span<const std::size_t> element_counts) {
  if (element_counts.empty()) throw InvalidArgument("delta needs at least one quantized layer");
  const std::size_t largest = *std::max_element(element_counts.begin(), element_counts.end());
  if (largest == 0) throw InvalidArgument("quantized layers must have elements");
  std::vector<double> delta;
  delta.reserve(element_counts.size());
  for (auto n : element_counts) {
    if (n == 0) throw InvalidArgument("quantized layers must have elements");
    delta.push_back(static_cast<double>(n) / static_cast<double>(largest));
  }
  return delta;
}

namespace {

bool sign_cluster_empty(const ClusterStats& stats) {
  return stats.count(Label::negative) == 0 || stats.count(Label::positive) == 0;
}

}  // namespace

LambdaMax compute_lambda_max(const Tensor& weights, const CentroidSet& centroids) {
  if (sign_cluster_empty(cluster_stats(nearest_assignment(weights, centroids)))) return {0.0, false};

  const auto empties = [&](double lambda) {
    return sign_cluster_empty(fixed_point_assignment(weights, centroids, lambda).stats);
  };

  double lo = 0.0;
  double hi = 1.0;
  if (empties(hi)) {
    while (hi > kLambdaMaxFloor && empties(0.5 * hi)) hi *= 0.5;
    lo = hi > kLambdaMaxFloor ? 0.5 * hi : 0.0;
  } else {
    while (!empties(hi)) {
      if (hi >= kLambdaMaxCap) return {kLambdaMaxCap, true};
      lo = hi;
      hi *= 2.0;
    }
  }
  // Emptying is not monotone in lambda once the iteration cap truncates an
  // oscillation, so look for the first emptying grid point inside the bracket
  // before bisecting.
  if (lo > 0.0) {
    for (double x = lo * (1.0 + kLambdaMaxScanStep); x < hi; x *= 1.0 + kLambdaMaxScanStep) {
      if (empties(x)) {
        hi = x;
        break;
      }
      lo = x;
    }
  }
  for (int step = 0; step < 200 && hi - lo > kLambdaMaxPrecision * hi; ++step) {
    const double mid = 0.5 * (lo + hi);
    if (empties(mid)) {
      hi = mid;
    } else {
      lo = mid;
    }
  }
  return {hi, false};
}

QuantizeResult quantize_layer(const Tensor& weights, const CentroidSet& centroids, double lambda,
                              Mode mode, double threshold) {
  switch (mode) {
    case Mode::ec2t:
      return fixed_point_assignment(weights, centroids, lambda);
    case Mode::ttq_threshold: {
      if (!(threshold >= 0.0 && threshold < 1.0)) throw InvalidArgument("ttq threshold must lie in [0, 1)");
      if (weights.empty()) throw InvalidArgument("cannot quantize an empty tensor");
      double max_abs = 0.0;
      for (float w : weights.values()) max_abs = std::max(max_abs, std::fabs(static_cast<double>(w)));
      const double delta = threshold * max_abs;
      std::vector<Label> labels;
      labels.reserve(weights.size());
      for (float w : weights.values()) {
        const double v = w;
        if (std::fabs(v) <= delta) {
          labels.push_back(Label::zero);
        } else {
          labels.push_back(v > 0.0 ? Label::positive : Label::negative);
        }
      }
      QuantizeResult result;
      result.assignment = AssignmentMatrix(weights.shape(), std::move(labels));
      result.stats = cluster_stats(result.assignment);
      result.iterations = 1;
      return result;
    }
  }
  throw InvalidArgument("invalid quantization mode");
}

Tensor materialize(const AssignmentMatrix& assignment, const CentroidSet& centroids) {
  std::vector<float> values;
  values.reserve(assignment.size());
  for (Label l : assignment.labels()) values.push_back(centroids.value(l));
  return Tensor(assignment.shape(), std::move(values));
}

double sparsity(const AssignmentMatrix& assignment) {
  if (assignment.size() == 0) return 0.0;
  const auto zeros = std::count(assignment.labels().begin(), assignment.labels().end(), Label::zero);
  return static_cast<double>(zeros) / static_cast<double>(assignment.size());
}

}  // namespace ec2t::quant
