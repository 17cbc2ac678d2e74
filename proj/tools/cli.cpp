#include "cli.hpp"

#include <algorithm>
#include <exception>
#include <ostream>

#include "CLI11.hpp"
#include "commands.hpp"
#include "ec2t/error.hpp"

namespace ec2t::cli {
namespace {

const std::vector<std::string> kModes = {"ec2t", "ttq", "ttq-threshold"};

void add_demo_options(CLI::App* sub, DemoOptions& demo, bool with_gamma) {
  if (with_gamma) {
    sub->add_option("--gamma", demo.gamma, "Sparsification intensity gamma >= 0")->check(CLI::NonNegativeNumber);
    sub->add_option("--mode", demo.mode, "Assignment rule")->check(CLI::IsMember(kModes));
    sub->add_option("--t", demo.threshold, "Threshold factor for --mode ttq")->check(CLI::Range(0.0, 1.0));
  }
  sub->add_option("--epochs", demo.epochs, "Training epochs")->check(CLI::PositiveNumber);
  sub->add_option("--warmup", demo.warmup, "Leading epochs trained at lambda = 0 (default: 3/4 of --epochs)");
  sub->add_option("--samples", demo.samples, "Two-moons sample count (even)")->check(CLI::PositiveNumber);
  sub->add_option("--noise", demo.noise, "Two-moons jitter standard deviation")->check(CLI::NonNegativeNumber);
  sub->add_option("--batch", demo.batch, "Mini-batch size")->check(CLI::PositiveNumber);
  sub->add_option("--lr", demo.learning_rate, "Latent weight and bias learning rate")->check(CLI::PositiveNumber);
  sub->add_option("--centroid-lr", demo.centroid_learning_rate, "Centroid learning rate")
      ->check(CLI::NonNegativeNumber);
}

}  // namespace

int dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Entropy-constrained trained ternarization toolkit", "ec2t"};
  app.require_subcommand(1, 1);

  GlobalOptions global;
  app.add_option("--seed", global.seed, "Seed for every randomized path")->capture_default_str();
  app.add_flag("--json", global.json, "JSON output (the default for every subcommand except train-demo)");

  ScaleOptions scale;
  auto* scale_cmd = app.add_subcommand("scale", "Solve a * b^2 * c^2 ~= 2 and scale the MicroNet descriptor");
  scale_cmd->add_option("--phi", scale.phi, "Compound coefficient phi")->required()->check(CLI::NonNegativeNumber);
  scale_cmd->add_flag("--fix-r", scale.fix_r, "Pin the resolution constant c to 1");
  scale_cmd->add_option("--grid-step", scale.grid_step, "Grid step over [1, 3]")->check(CLI::PositiveNumber);
  scale_cmd->add_option("--arch", scale.arch, "Architecture to scale")->check(CLI::IsMember({"micronet"}));
  scale_cmd->add_option("--classes", scale.classes, "Classifier outputs")->check(CLI::PositiveNumber);

  QuantizeOptions quantize;
  auto* quantize_cmd = app.add_subcommand("quantize", "Ternarize one .ect-tensor weight file");
  quantize_cmd->add_option("--weights", quantize.weights, "Input .ect-tensor file")->required();
  quantize_cmd->add_option("--gamma", quantize.gamma, "lambda = gamma * lambda_max")
      ->required()
      ->check(CLI::NonNegativeNumber);
  quantize_cmd->add_option("--mode", quantize.mode, "Assignment rule")->check(CLI::IsMember(kModes));
  quantize_cmd->add_option("--t", quantize.threshold, "Threshold factor for --mode ttq")->check(CLI::Range(0.0, 1.0));

  TrainDemoOptions train;
  auto* train_cmd = app.add_subcommand("train-demo", "Train the two-moons MLP and write CSV metrics");
  add_demo_options(train_cmd, train.demo, true);
  train_cmd->add_option("--sweep", train.sweep, "Comma-separated gamma values; one summary row each")
      ->delimiter(',')
      ->check(CLI::NonNegativeNumber);
  train_cmd->add_option("--out", train.out, "CSV destination (default: standard output)");

  ExportOptions exporter;
  auto* export_cmd = app.add_subcommand("export", "Ternarize weights and write a .ec2t model");
  export_cmd->add_option("--weights", exporter.weights, "Weight .ect-tensor file; rank 4 = conv, rank 2 = FC")
      ->check(CLI::ExistingFile);
  export_cmd->add_flag("--demo", exporter.demo, "Train the two-moons MLP and export its ternary layers");
  export_cmd->add_option("--gamma", exporter.gamma, "Sparsification intensity gamma >= 0")
      ->check(CLI::NonNegativeNumber);
  export_cmd->add_option("--mode", exporter.mode, "Assignment rule")->check(CLI::IsMember(kModes));
  export_cmd->add_option("--t", exporter.threshold, "Threshold factor for --mode ttq")->check(CLI::Range(0.0, 1.0));
  export_cmd->add_option("--resolution", exporter.resolution, "Output side of conv layers (operation counting)")
      ->check(CLI::PositiveNumber);
  export_cmd->add_option("--out", exporter.out, "Destination .ec2t file")->required();
  add_demo_options(export_cmd, exporter.demo_options, false);

  ImportOptions importer;
  auto* import_cmd = app.add_subcommand("import", "Decode a .ec2t model to dense .ect-tensor files");
  import_cmd->add_option("--model", importer.model, "Input .ec2t file")->required();
  import_cmd->add_option("--out-dir", importer.out_dir, "Directory receiving <layer>.ect-tensor files");

  ReportOptions report;
  auto* report_cmd = app.add_subcommand("report", "Parameter and operation counts of a .ec2t model");
  report_cmd->add_option("--model", report.model, "Input .ec2t file")->required();
  report_cmd->add_flag("--tree-adder", report.tree_adder, "Count n accumulated operands as n - 1 additions");
  report_cmd->add_flag("--table", report.table, "Human-readable table instead of JSON");

  VerifyOptions verify;
  auto* verify_cmd = app.add_subcommand("verify", "Integrity, round-trip and kernel-equivalence checks");
  verify_cmd->add_option("--model", verify.model, "Input .ec2t file")->required();

  for (auto* sub : app.get_subcommands({})) sub->fallthrough();

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
    if (report.table && global.json) throw CLI::ValidationError("--json and --table are mutually exclusive");
    if (export_cmd->parsed() && exporter.demo == !exporter.weights.empty()) {
      throw CLI::ValidationError("export needs either --demo or at least one --weights file");
    }
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n\n" << app.help();
    return kExitUsage;
  }

  try {
    if (scale_cmd->parsed()) return run_scale(global, scale, out);
    if (quantize_cmd->parsed()) return run_quantize(global, quantize, out);
    if (train_cmd->parsed()) return run_train_demo(global, train, out);
    if (export_cmd->parsed()) return run_export(global, exporter, out);
    if (import_cmd->parsed()) return run_import(global, importer, out);
    if (report_cmd->parsed()) return run_report(global, report, out);
    if (verify_cmd->parsed()) return run_verify(global, verify, out);
  } catch (const InfeasibleError& e) {
    err << "error: " << e.what() << " (best residual " << e.best_residual() << ")\n";
    return kExitRuntime;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitRuntime;
  }
  err << "error: no subcommand\n";
  return kExitUsage;
}

}  // namespace ec2t::cli
