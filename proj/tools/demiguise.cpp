// Copyright 2026 The Demiguise Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// demiguise: experiment runner for the perceptual-distance attack toolkit.

#include <CLI11.hpp>

#include <iostream>

#include "demiguise/dataset.hpp"
#include "demiguise/errors.hpp"
#include "demiguise/experiment.hpp"
#include "demiguise/plotting.hpp"
#include "demiguise/training.hpp"

namespace fs = std::filesystem;
using namespace demiguise;

namespace {

struct RunFlags {
  std::string config;
  std::string output;
  long long seed = -1;
  int workers = 0;
};

void add_run_flags(CLI::App* sub, RunFlags& f) {
  sub->add_option("--config", f.config, "Experiment config (JSON)")->required()->check(CLI::ExistingFile);
  sub->add_option("--output", f.output, "Output directory (overrides the config)");
  sub->add_option("--seed", f.seed, "Seed (overrides the config)")->check(CLI::NonNegativeNumber);
  sub->add_option("--workers", f.workers, "Worker threads (overrides the config)")->check(CLI::PositiveNumber);
}

int run_pipeline(cli::Pipeline pipeline, const RunFlags& f) {
  cli::Overrides o;
  if (!f.output.empty()) o.output = fs::absolute(f.output);
  if (f.seed >= 0) o.seed = static_cast<std::uint64_t>(f.seed);
  if (f.workers > 0) o.workers = f.workers;
  const cli::ExperimentConfig cfg = cli::load_config(f.config, pipeline, o);
  const auto report = cli::run_experiment(cfg, pipeline, &std::cerr);
  std::cout << cfg.experiment_id << ": fooling rate " << report.fooling_rate << "% over " << report.records.size()
            << " attacks\n";
  for (const auto& cell : report.aggregates) {
    std::cout << "  " << cell.table << " " << cell.row << " " << cell.column << " " << cell.value << "\n";
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Perceptual-distance adversarial attack toolkit"};
  app.require_subcommand(1);

  RunFlags attack_flags, transfer_flags, sweep_flags, semantics_flags;
  auto* attack = app.add_subcommand("attack", "Craft adversarial examples and report fooling rates");
  add_run_flags(attack, attack_flags);
  auto* transfer = app.add_subcommand("transfer", "Cross-model transfer matrix");
  add_run_flags(transfer, transfer_flags);
  auto* sweep = app.add_subcommand("defense-sweep", "Fooling rate under JPEG and bit-depth sweeps");
  add_run_flags(sweep, sweep_flags);
  auto* semantics = app.add_subcommand("semantics-test", "Classify rescaled perturbations alone");
  add_run_flags(semantics, semantics_flags);

  std::string report, kind, plot_out;
  auto* plot = app.add_subcommand("plot", "Render figures from a report");
  plot->add_option("--report", report, "Report JSON")->required()->check(CLI::ExistingFile);
  plot->add_option("--kind", kind, "bars, sweep_lines or image_grid")->required();
  plot->add_option("--output", plot_out, "Directory for PNGs (default: next to the report)");

  std::string zoo_out;
  training::ZooOptions zoo_opts;
  auto* train = app.add_subcommand("train-zoo", "Train the desk classifiers and perceptual network");
  train->add_option("--output", zoo_out, "Zoo directory")->required();
  train->add_option("--seed", zoo_opts.train.seed, "Weight-initialisation seed");
  train->add_option("--data-seed", zoo_opts.data_seed, "Dataset seed");
  train->add_option("--train-count", zoo_opts.train_count, "Training images")->check(CLI::PositiveNumber);
  train->add_option("--test-count", zoo_opts.test_count, "Test images")->check(CLI::PositiveNumber);
  train->add_option("--epochs", zoo_opts.train.epochs, "Epochs")->check(CLI::PositiveNumber);

  std::string data_out, split = "test";
  std::uint64_t data_seed = dataset::kDefaultSeed;
  int count = 1000;
  auto* make = app.add_subcommand("make-dataset", "Write a split of the synthetic desk dataset as PNGs");
  make->add_option("--output", data_out, "Dataset root")->required();
  make->add_option("--split", split, "Split name");
  make->add_option("--seed", data_seed, "Dataset seed");
  make->add_option("--count", count, "Images")->check(CLI::PositiveNumber);

  CLI11_PARSE(app, argc, argv);

  try {
    if (attack->parsed()) return run_pipeline(cli::Pipeline::attack, attack_flags);
    if (transfer->parsed()) return run_pipeline(cli::Pipeline::transfer, transfer_flags);
    if (sweep->parsed()) return run_pipeline(cli::Pipeline::defense_sweep, sweep_flags);
    if (semantics->parsed()) return run_pipeline(cli::Pipeline::semantics_test, semantics_flags);
    if (plot->parsed()) {
      const cli::PlotKind k = cli::parse_plot_kind(kind);
      const fs::path out = plot_out.empty() ? fs::path(report).parent_path() : fs::path(plot_out);
      for (const auto& p : cli::plot(report, k, out)) std::cout << p.string() << "\n";
      return 0;
    }
    if (train->parsed()) {
      training::train_zoo(zoo_out, zoo_opts, &std::cerr);
      return 0;
    }
    if (make->parsed()) {
      dataset::write_split(data_out, data_seed, split, count);
      std::cout << "wrote " << count << " images to " << (fs::path(data_out) / split).string() << "\n";
      return 0;
    }
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
