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
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "demiguise/attacks.hpp"
#include "demiguise/classifiers.hpp"
#include "demiguise/defenses.hpp"

namespace demiguise::evaluation {

using classifiers::Classifier;
using imaging::ImageTensor;
using imaging::LabeledImage;

inline constexpr int kReportSchemaVersion = 1;
inline constexpr const char* kToolkitVersion = "0.1.0";

// One attacked sample. Distances are NaN when not measured.
struct SampleRecord {
  std::string attack;
  std::string model;
  std::string defense = "none";
  std::string sample_id;
  int original_label = 0;
  int adversarial_label = 0;
  bool success = false;
  double perceptual = 0.0;
  double l2 = 0.0;
  double linf = 0.0;
  double final_distance = 0.0;
  std::uint64_t queries = 0;
  int iterations = 0;

  bool operator==(const SampleRecord&) const;
};

SampleRecord make_record(const std::string& attack, const std::string& model, const std::string& sample_id,
                         const attacks::AttackResult& r);

// 100 * successes / total. Throws PreconditionError on empty input.
double fooling_rate(const std::vector<bool>& successes);
double fooling_rate(const std::vector<SampleRecord>& records);

// Adversarial images crafted on one source model; labels are ground truth.
struct AdversarialSet {
  std::string source;
  std::vector<LabeledImage> images;
};

struct TransferMatrix {
  std::vector<std::string> sources;
  std::vector<std::string> targets;
  std::vector<std::vector<double>> rates;  // [source][target], percent

  // Mean over entries whose source and target names differ.
  double off_diagonal_mean() const;
};

// Success means predict() differs from the ground-truth label.
TransferMatrix transfer_matrix(const std::vector<AdversarialSet>& sets, const std::vector<Classifier>& targets);

struct Perturbation {
  ImageTensor clean;
  ImageTensor adversarial;
  int original_label = 0;
  int adversarial_label = 0;
};

// min-max rescaled x_adv - x; a constant difference becomes all 0.5.
ImageTensor perturbation_image(const ImageTensor& clean, const ImageTensor& adversarial);

// Percent of perturbation images classified as either the original or the adversarial label.
double semantics_rate(const std::vector<Perturbation>& perturbations, const Classifier& c);

struct CurvePoint {
  defenses::DefenseSpec spec;
  double rate = 0.0;
};

// The no-defense anchor comes first, then one point per spec.
std::vector<CurvePoint> defense_robustness(const std::vector<LabeledImage>& adversarials,
                                           const std::vector<defenses::DefenseSpec>& specs, const Classifier& c);

// One cell of an aggregate table (transfer matrix, defense curve, ...).
struct AggregateCell {
  std::string table;
  std::string row;
  std::string column;
  double value = 0.0;

  bool operator==(const AggregateCell&) const;  // NaN equals NaN
};

struct ExperimentReport {
  std::string experiment_id;
  std::string attack;
  std::string source_model;
  std::vector<std::string> target_models;
  defenses::DefenseSpec defense;
  std::vector<SampleRecord> records;
  double fooling_rate = 0.0;
  std::vector<AggregateCell> aggregates;
  nlohmann::ordered_json config;
  std::uint64_t seed = 0;
  std::string toolkit_version = kToolkitVersion;
  // Kept outside the hashed payload.
  std::string created_at;

  bool operator==(const ExperimentReport&) const;
};

// Deterministic serialisation of everything except created_at.
nlohmann::ordered_json report_payload(const ExperimentReport& r);
std::string payload_digest(const nlohmann::ordered_json& payload);

// Writes `path` (JSON) plus `<id>.records.csv` and `<id>.aggregates.csv`, where a
// trailing `.report` is dropped from the stem.
// Refuses to overwrite: a second persist of the same experiment id is an IoError.
void persist_report(const ExperimentReport& r, const std::filesystem::path& path);
// Throws SchemaError on a version or digest mismatch.
ExperimentReport load_report(const std::filesystem::path& path);

}  // namespace demiguise::evaluation
