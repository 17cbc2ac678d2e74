#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace ec2t::cli {

struct GlobalOptions {
  std::uint64_t seed = 1;
  bool json = false;
};

struct ScaleOptions {
  double phi = 1.0;
  bool fix_r = false;
  double grid_step = 0.01;
  std::string arch = "micronet";
  std::size_t classes = 10;
};

struct QuantizeOptions {
  std::filesystem::path weights;
  double gamma = 0.0;
  std::string mode = "ec2t";
  double threshold = 0.05;
};

struct DemoOptions {
  double gamma = 0.0;
  std::size_t epochs = 200;
  std::optional<std::size_t> warmup;  // default: three quarters of the epochs
  std::size_t samples = 512;
  double noise = 0.1;
  std::size_t batch = 32;
  double learning_rate = 0.05;
  double centroid_learning_rate = 0.005;
  std::string mode = "ec2t";
  double threshold = 0.05;
};

struct TrainDemoOptions {
  DemoOptions demo;
  std::vector<double> sweep;
  std::optional<std::filesystem::path> out;
};

struct ExportOptions {
  std::vector<std::filesystem::path> weights;
  bool demo = false;
  DemoOptions demo_options;
  double gamma = 0.0;
  std::string mode = "ec2t";
  double threshold = 0.05;
  std::size_t resolution = 1;
  std::filesystem::path out;
};

struct ImportOptions {
  std::filesystem::path model;
  std::optional<std::filesystem::path> out_dir;
};

struct ReportOptions {
  std::filesystem::path model;
  bool tree_adder = false;
  bool table = false;
};

struct VerifyOptions {
  std::filesystem::path model;
};

// Each returns an exit code; library errors propagate as exceptions.
int run_scale(const GlobalOptions& global, const ScaleOptions& options, std::ostream& out);
int run_quantize(const GlobalOptions& global, const QuantizeOptions& options, std::ostream& out);
int run_train_demo(const GlobalOptions& global, const TrainDemoOptions& options, std::ostream& out);
int run_export(const GlobalOptions& global, const ExportOptions& options, std::ostream& out);
int run_import(const GlobalOptions& global, const ImportOptions& options, std::ostream& out);
int run_report(const GlobalOptions& global, const ReportOptions& options, std::ostream& out);
int run_verify(const GlobalOptions& global, const VerifyOptions& options, std::ostream& out);

}  // namespace ec2t::cli
