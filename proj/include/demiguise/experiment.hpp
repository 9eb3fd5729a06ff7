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

#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "demiguise/attacks.hpp"
#include "demiguise/classifiers.hpp"
#include "demiguise/defenses.hpp"
#include "demiguise/evaluation.hpp"

namespace demiguise::cli {

enum class Pipeline { attack, transfer, defense_sweep, semantics_test };

const char* pipeline_name(Pipeline p);

// Default distance weight of the demi_mifgsm attacks.
inline constexpr double kDemiMifgsmLambda = 1.0;

enum class Algorithm { cw, mifgsm, hsja };

// A named attack from the catalogue plus its resolved configuration.
struct AttackSpec {
  std::string name;
  Algorithm algorithm = Algorithm::cw;
  attacks::DistanceKind kind = attacks::DistanceKind::perceptual;
  bool perceptual = false;  // HSJA: D as the progress metric
  attacks::AttackConfig config;
};

// demi_cw, cw_l2, cw_psnr, cw_ssim, demi_mifgsm, mifgsm, demi_mifgsm_di,
// mifgsm_di, demi_hsja, hsja
const std::vector<std::string>& attack_catalogue();

struct Profile {
  std::string name;
  int resize_to = 0;
  int crop_to = 0;
  int sample_count = 0;
  attacks::AttackConfig cw, mifgsm, hsja;
};

Profile profile_defaults(const std::string& name);

// Attack defaults for a profile, before per-attack overrides.
AttackSpec make_attack(const std::string& name, const Profile& profile);

struct ExperimentConfig {
  std::string experiment_id;
  std::string profile = "desk";
  std::filesystem::path zoo;
  std::filesystem::path dataset;
  std::string split = "test";
  int sample_count = 0;
  std::vector<std::string> models;
  std::vector<AttackSpec> attacks;
  defenses::DefenseSpec defense;
  std::filesystem::path channel_weights;  // empty: unit weights
  std::filesystem::path output;
  std::uint64_t seed = 0;
  int workers = 1;
  int resize_to = 0;
  int crop_to = 0;

  // Fully resolved form; feeding it back to parse_config reproduces this config.
  nlohmann::ordered_json snapshot() const;
};

struct Overrides {
  std::optional<std::filesystem::path> output;
  std::optional<std::uint64_t> seed;
  std::optional<int> workers;
};

// Validates everything that can be checked without loading weights or images.
// Relative paths resolve against `base_dir`; DEMIGUISE_DATA_DIR fills a missing dataset.
ExperimentConfig parse_config(const nlohmann::ordered_json& doc, Pipeline pipeline,
                              const std::filesystem::path& base_dir, const Overrides& overrides = {});
ExperimentConfig load_config(const std::filesystem::path& path, Pipeline pipeline, const Overrides& overrides = {});

// Candidates are sorted by sample_id, filtered to those every model classifies
// correctly, then drawn by a seeded shuffle. The result is ordered by sample_id.
std::vector<imaging::LabeledImage> select_samples(std::vector<imaging::LabeledImage> candidates,
                                                  const std::vector<classifiers::Classifier>& models, int count,
                                                  std::uint64_t seed);

// Runs one attack on one sample against a fresh handle, so queries_used is per sample.
attacks::AttackResult run_attack(const AttackSpec& spec, const classifiers::Classifier& c,
                                 const attacks::PerceptualMetric* metric, const imaging::LabeledImage& x,
                                 std::uint64_t seed);

// Attacks every sample, in parallel when workers > 1. Output order follows input.
std::vector<attacks::AttackResult> run_batch(const AttackSpec& spec, const classifiers::Classifier& c,
                                             const attacks::PerceptualMetric* metric,
                                             const std::vector<imaging::LabeledImage>& samples, std::uint64_t seed,
                                             int workers);

// Runs a whole pipeline, writes report, CSVs and PNGs under config.output,
// and returns the report.
evaluation::ExperimentReport run_experiment(const ExperimentConfig& config, Pipeline pipeline,
                                            std::ostream* log = nullptr);

inline std::filesystem::path report_path(const std::filesystem::path& output, const std::string& experiment_id) {
  return output / (experiment_id + ".report.json");
}

}  // namespace demiguise::cli
