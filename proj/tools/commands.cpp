#include "commands.hpp"

#include <fstream>
#include <iomanip>
#include <ostream>
#include <sstream>

#include "ec2t/accounting.hpp"
#include "ec2t/arch.hpp"
#include "ec2t/error.hpp"
#include "ec2t/model_file.hpp"
#include "ec2t/parallel.hpp"
#include "ec2t/quantizer.hpp"
#include "ec2t/tensor_io.hpp"
#include "ec2t/trainer.hpp"
#include "ec2t/two_moons.hpp"
#include "json.hpp"

namespace ec2t::cli {
namespace {

using nlohmann::ordered_json;

void emit(std::ostream& out, const ordered_json& doc) { out << doc.dump(2) << '\n'; }

ordered_json histogram_json(const quant::ClusterStats& stats) {
  return {{"negative", stats.count(quant::Label::negative)},
          {"zero", stats.count(quant::Label::zero)},
          {"positive", stats.count(quant::Label::positive)}};
}

struct QuantizedWeights {
  quant::CentroidSet centroids;
  quant::QuantizeResult result;
  std::optional<quant::LambdaMax> lambda_max;
  double delta = 1.0;
  double lambda = 0.0;
};

// Per-layer lambda = gamma * delta * lambda_max, delta over the given tensors.
std::vector<QuantizedWeights> quantize_all(const std::vector<Tensor>& weights, double gamma, quant::Mode mode,
                                           double threshold) {
  std::vector<std::size_t> sizes;
  for (const auto& w : weights) sizes.push_back(w.size());
  const auto delta = quant::compute_delta(sizes);

  std::vector<QuantizedWeights> out(weights.size());
  parallel_for(weights.size(), [&](std::size_t l) {
    auto& q = out[l];
    q.centroids = quant::init_centroids(weights[l]);
    q.delta = delta[l];
    if (mode == quant::Mode::ec2t) {
      q.lambda_max = quant::compute_lambda_max(weights[l], q.centroids);
      q.lambda = gamma * q.delta * q.lambda_max->value;
    }
    q.result = quant::quantize_layer(weights[l], q.centroids, q.lambda, mode, threshold);
  });
  return out;
}

train::TrainConfig make_config(const DemoOptions& demo, std::uint64_t seed) {
  train::TrainConfig config;
  config.gamma = demo.gamma;
  config.epochs = demo.epochs;
  config.warmup_epochs = demo.warmup.value_or(demo.epochs * 3 / 4);
  config.batch_size = demo.batch;
  config.learning_rate = demo.learning_rate;
  config.centroid_learning_rate = demo.centroid_learning_rate;
  config.seed = seed;
  config.mode = quant::parse_mode(demo.mode);
  config.ttq_threshold = demo.threshold;
  return config;
}

train::TrainResult train_demo(const DemoOptions& demo, std::uint64_t seed) {
  const auto data = train::gen_two_moons(demo.samples, demo.noise, seed);
  return train::train_ec2t(train::reference_mlp(), data, make_config(demo, seed));
}

std::string centroid_header(const train::MlpSpec& spec) {
  std::string header;
  for (std::size_t l = 0; l < spec.layer_count(); ++l) {
    if (!spec.quantize[l]) continue;
    header += ",w_n_" + std::to_string(l) + ",w_p_" + std::to_string(l);
  }
  return header;
}

void write_centroids(std::ostream& csv, const std::vector<train::LayerCentroids>& centroids) {
  for (const auto& c : centroids) csv << ',' << c.negative << ',' << c.positive;
}

std::vector<accounting::ReportLayer> report_layers(const storage::ModelFile& model) {
  std::vector<accounting::ReportLayer> layers;
  for (const auto& entry : model.layers) {
    const auto& dims = entry.layer.dims;
    LayerSpec spec;
    spec.name = entry.name;
    spec.kind = dims.kind;
    spec.in_channels = dims.in_channels;
    spec.out_channels = dims.out_channels;
    spec.kernel = dims.kernel;
    spec.out_height = spec.out_width = dims.kind == LayerKind::conv2d ? dims.out_resolution : 1;
    spec.quantize = true;
    layers.push_back({spec, entry.layer});
    if (entry.bn_bias) {
      LayerSpec bn = spec;
      bn.name = entry.name + ".bn";
      bn.kind = LayerKind::batch_norm;
      bn.in_channels = bn.out_channels = dims.out_channels;
      bn.kernel = 1;
      bn.quantize = false;
      layers.push_back({bn, std::nullopt});
    }
  }
  return layers;
}

ordered_json params_json(const storage::StorageCount& p) {
  return {{"dense", p.dense},       {"mask", p.mask},
          {"sign", p.sign},         {"centroids", p.centroids},
          {"batch_norm", p.batch_norm}, {"total", p.total()}};
}

ordered_json ops_json(const accounting::OpsCount& ops) {
  return {{"adds", ops.adds}, {"mults", ops.mults}, {"flops", ops.flops()}};
}

void print_table(std::ostream& out, const accounting::ModelReport& report) {
  std::ostringstream s;
  s << std::left << std::setw(20) << "layer" << std::setw(16) << "kind" << std::setw(8) << "ternary" << std::right
    << std::setw(14) << "params" << std::setw(14) << "adds" << std::setw(14) << "mults" << std::setw(10)
    << "sparsity" << '\n';
  s << std::fixed;
  for (const auto& row : report.rows) {
    const double sparsity = row.weights ? static_cast<double>(row.zeros) / static_cast<double>(row.weights) : 0.0;
    s << std::left << std::setw(20) << row.name << std::setw(16) << to_string(row.kind) << std::setw(8)
      << (row.ternary ? "yes" : "no") << std::right << std::setprecision(2) << std::setw(14) << row.params.total()
      << std::setw(14) << row.ops.adds << std::setw(14) << row.ops.mults << std::setprecision(4) << std::setw(10)
      << sparsity << '\n';
  }
  s << std::left << std::setw(44) << (report.tree_adder ? "total (tree adder)" : "total") << std::right
    << std::setprecision(2) << std::setw(14) << report.params.total() << std::setw(14) << report.ops.adds
    << std::setw(14) << report.ops.mults << std::setprecision(4) << std::setw(10) << report.sparsity() << '\n';
  out << s.str();
}

}  // namespace

int run_scale(const GlobalOptions&, const ScaleOptions& options, std::ostream& out) {
  const auto solution = arch::solve_compound_scaling(options.phi, options.fix_r, options.grid_step);
  const auto base = arch::micronet_descriptor(options.classes);
  const auto scaled = arch::scale_architecture(base, solution);
  const auto base_layers = arch::expand_layers(base);
  const auto scaled_layers = arch::expand_layers(scaled);
  const auto base_report = accounting::dense_report(base_layers);
  const auto scaled_report = accounting::dense_report(scaled_layers);

  ordered_json stages = ordered_json::array();
  for (const auto& st : scaled.stages) {
    stages.push_back({{"repetitions", st.repetitions}, {"channels", st.channels}, {"resolution", st.resolution}});
  }
  ordered_json doc;
  doc["solution"] = {{"phi", solution.phi}, {"a", solution.a},   {"b", solution.b},
                     {"c", solution.c},     {"d", solution.d},   {"w", solution.w},
                     {"r", solution.r},     {"residual", solution.residual()}};
  doc["descriptor"] = {{"arch", options.arch},
                       {"classes", scaled.n_classes},
                       {"stem", {{"channels", scaled.stem.out_channels}, {"resolution", scaled.stem.out_height}}},
                       {"stages", stages},
                       {"head", {{"in", scaled.head.in_channels}, {"out", scaled.head.out_channels}}},
                       {"layers", scaled_layers.size()}};
  doc["dense"] = {{"params", scaled_report.params.total()},
                  {"ops", ops_json(scaled_report.ops)},
                  {"baseline_params", base_report.params.total()},
                  {"baseline_flops", base_report.ops.flops()},
                  {"flops_ratio", static_cast<double>(scaled_report.ops.flops()) /
                                      static_cast<double>(base_report.ops.flops())}};
  emit(out, doc);
  return 0;
}

int run_quantize(const GlobalOptions&, const QuantizeOptions& options, std::ostream& out) {
  const auto weights = load_tensor(options.weights);
  const auto mode = quant::parse_mode(options.mode);
  const auto q = quantize_all({weights}, options.gamma, mode, options.threshold).front();

  ordered_json doc;
  doc["mode"] = quant::to_string(mode);
  doc["shape"] = weights.shape();
  doc["histogram"] = histogram_json(q.result.stats);
  doc["sparsity"] = quant::sparsity(q.result.assignment);
  doc["centroids"] = {{"negative", q.centroids.negative}, {"positive", q.centroids.positive}};
  if (q.lambda_max) {
    doc["lambda"] = {{"gamma", options.gamma},
                     {"delta", q.delta},
                     {"lambda_max", q.lambda_max->value},
                     {"lambda_max_capped", q.lambda_max->capped},
                     {"lambda", q.lambda},
                     {"iterations", q.result.iterations},
                     {"converged", q.result.converged}};
  } else {
    doc["threshold"] = options.threshold;
  }
  emit(out, doc);
  return 0;
}

int run_train_demo(const GlobalOptions& global, const TrainDemoOptions& options, std::ostream& out) {
  std::ostringstream csv;
  csv << std::setprecision(9);
  const auto spec = train::reference_mlp();
  if (options.sweep.empty()) {
    const auto result = train_demo(options.demo, global.seed);
    csv << "epoch,train_loss,train_accuracy,model_sparsity" << centroid_header(spec) << '\n';
    for (const auto& row : result.metrics) {
      csv << row.epoch << ',' << row.train_loss << ',' << row.train_accuracy << ',' << row.model_sparsity;
      write_centroids(csv, row.centroids);
      csv << '\n';
    }
  } else {
    csv << "gamma,final_loss,final_accuracy,final_sparsity" << centroid_header(spec) << '\n';
    for (const double gamma : options.sweep) {
      auto demo = options.demo;
      demo.gamma = gamma;
      const auto result = train_demo(demo, global.seed);
      const auto& last = result.metrics.back();
      csv << gamma << ',' << last.train_loss << ',' << last.train_accuracy << ',' << last.model_sparsity;
      write_centroids(csv, last.centroids);
      csv << '\n';
    }
  }

  if (options.out) {
    std::ofstream file(*options.out, std::ios::binary);
    if (!file) throw Error("cannot open " + options.out->string() + " for writing");
    file << csv.str();
    if (!file) throw Error("failed writing " + options.out->string());
  } else {
    out << csv.str();
  }
  return 0;
}

int run_export(const GlobalOptions& global, const ExportOptions& options, std::ostream& out) {
  storage::ModelFile model;
  if (options.demo) {
    auto demo = options.demo_options;
    demo.gamma = options.gamma;
    demo.mode = options.mode;
    demo.threshold = options.threshold;
    const auto result = train_demo(demo, global.seed);
    for (const std::size_t l : result.model.quantized_layers()) {
      const auto& layer = result.model.layer(l);
      const auto dims = storage::LayerDims::fc(layer.latent.dim(0), layer.latent.dim(1));
      model.layers.push_back(
          {"fc" + std::to_string(l), storage::encode_ternary_layer(layer.assignment, layer.centroids, dims), {}});
    }
  } else {
    std::vector<Tensor> weights;
    std::vector<storage::LayerDims> dims;
    for (const auto& path : options.weights) {
      auto w = load_tensor(path);
      if (w.rank() == 4) {
        if (w.dim(2) != w.dim(3)) throw DimensionError(path.string() + ": conv kernels must be square");
        dims.push_back(storage::LayerDims::conv(w.dim(1), w.dim(2), w.dim(0), options.resolution));
      } else if (w.rank() == 2) {
        dims.push_back(storage::LayerDims::fc(w.dim(0), w.dim(1)));
      } else {
        throw DimensionError(path.string() + ": expected rank 2 (FC) or rank 4 (conv) weights");
      }
      weights.push_back(std::move(w));
    }
    const auto quantized =
        quantize_all(weights, options.gamma, quant::parse_mode(options.mode), options.threshold);
    for (std::size_t l = 0; l < weights.size(); ++l) {
      model.layers.push_back({options.weights[l].stem().string(),
                              storage::encode_ternary_layer(quantized[l].result.assignment,
                                                            quantized[l].centroids, dims[l]),
                              {}});
    }
  }

  storage::save_model(options.out, model);
  ordered_json layers = ordered_json::array();
  for (const auto& entry : model.layers) {
    layers.push_back({{"name", entry.name},
                      {"kind", to_string(entry.layer.dims.kind)},
                      {"elements", entry.layer.dims.elements()},
                      {"nonzeros", entry.layer.nonzeros()},
                      {"sparsity", 1.0 - entry.layer.density()}});
  }
  emit(out, {{"out", options.out.string()},
             {"bytes", storage::serialize_model(model).size()},
             {"layers", layers}});
  return 0;
}

int run_import(const GlobalOptions&, const ImportOptions& options, std::ostream& out) {
  const auto model = storage::load_model(options.model);
  if (options.out_dir) std::filesystem::create_directories(*options.out_dir);

  ordered_json layers = ordered_json::array();
  for (const auto& entry : model.layers) {
    const auto& layer = entry.layer;
    ordered_json item = {{"name", entry.name},
                         {"kind", to_string(layer.dims.kind)},
                         {"shape", layer.dims.weight_shape()},
                         {"centroids", {{"negative", layer.negative_value()}, {"positive", layer.positive_value()}}},
                         {"nonzeros", layer.nonzeros()},
                         {"sparsity", 1.0 - layer.density()},
                         {"effective_in", layer.effective_in},
                         {"effective_out", layer.effective_out},
                         {"batch_norm", entry.bn_bias.has_value()}};
    if (options.out_dir) {
      if (entry.name.empty() || entry.name.find_first_of("/\\") != std::string::npos || entry.name == "." ||
          entry.name == "..") {
        throw FormatError("layer name '" + entry.name + "' is not usable as a file name");
      }
      const auto path = *options.out_dir / (entry.name + ".ect-tensor");
      save_tensor(path, storage::decode_ternary_layer(layer));
      item["file"] = path.string();
    }
    layers.push_back(std::move(item));
  }
  emit(out, {{"model", options.model.string()}, {"layers", layers}});
  return 0;
}

int run_report(const GlobalOptions&, const ReportOptions& options, std::ostream& out) {
  const auto model = storage::load_model(options.model);
  const auto layers = report_layers(model);
  const auto report = accounting::model_report(layers, options.tree_adder);
  if (options.table) {
    print_table(out, report);
    return 0;
  }

  ordered_json rows = ordered_json::array();
  for (const auto& row : report.rows) {
    rows.push_back({{"name", row.name},
                    {"kind", to_string(row.kind)},
                    {"ternary", row.ternary},
                    {"ops", ops_json(row.ops)},
                    {"params", params_json(row.params)},
                    {"weights", row.weights},
                    {"zeros", row.zeros}});
  }
  emit(out, {{"model", options.model.string()},
             {"tree_adder", report.tree_adder},
             {"layers", rows},
             {"total", {{"ops", ops_json(report.ops)},
                        {"params", params_json(report.params)},
                        {"weights", report.weights},
                        {"zeros", report.zeros},
                        {"sparsity", report.sparsity()}}}});
  return 0;
}

int run_verify(const GlobalOptions& global, const VerifyOptions& options, std::ostream& out) {
  const auto bytes = storage::read_file_bytes(options.model);
  const auto checks = storage::verify_model(bytes, global.seed);
  bool passed = true;
  ordered_json items = ordered_json::array();
  for (const auto& check : checks) {
    passed = passed && check.passed;
    items.push_back({{"name", check.name}, {"passed", check.passed}, {"detail", check.detail}});
  }
  emit(out, {{"model", options.model.string()}, {"passed", passed}, {"checks", items}});
  return passed ? 0 : 1;
}

}  // namespace ec2t::cli
