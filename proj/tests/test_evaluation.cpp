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

#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "demiguise/errors.hpp"
#include "demiguise/evaluation.hpp"
#include "support.hpp"

using namespace demiguise;
using namespace demiguise::evaluation;
using classifiers::Classifier;
using imaging::ImageTensor;
using imaging::LabeledImage;
namespace fs = std::filesystem;

namespace {

Classifier stub(int classes, std::uint64_t seed, const std::string& name = "stub") {
  return Classifier(name, std::make_shared<testing::LinearBackend>(testing::small_shape(), classes, seed),
                    classifiers::Normalization::identity(3));
}

ExperimentReport sample_report() {
  ExperimentReport r;
  r.experiment_id = "exp1";
  r.attack = "demi_cw";
  r.source_model = "m";
  r.target_models = {"m", "n"};
  r.defense = defenses::DefenseSpec::jpeg(75);
  r.seed = 17;
  r.config = {{"k", 1}, {"nested", {{"a", "b"}}}};
  r.created_at = "2026-01-01T00:00:00Z";
  for (int i = 0; i < 4; ++i) {
    SampleRecord s;
    s.attack = "demi_cw";
    s.model = "m";
    s.sample_id = "id_" + std::to_string(i);
    s.original_label = i;
    s.adversarial_label = i + 1;
    s.success = i != 2;
    s.perceptual = i == 3 ? std::nan("") : 0.125 * i;
    s.l2 = 0.1 / 3.0 * i;
    s.linf = 1.0 / 7.0;
    s.final_distance = 1e-17 * i;
    s.queries = 100 + i;
    s.iterations = 7;
    r.records.push_back(s);
  }
  r.fooling_rate = fooling_rate(r.records);
  r.aggregates = {{"transfer:x", "m", "n", 33.333333333333336}, {"t", "r", "c", std::nan("")}};
  return r;
}

fs::path scratch(const std::string& name) {
  const fs::path d = fs::temp_directory_path() / ("demiguise_eval_" + name);
  fs::remove_all(d);
  fs::create_directories(d);
  return d;
}

}  // namespace

TEST_CASE("fooling rate arithmetic") {
  CHECK(fooling_rate(std::vector<bool>(10, true)) == 100.0);
  std::vector<bool> mixed(10, false);
  mixed[0] = mixed[4] = mixed[9] = true;
  CHECK(fooling_rate(mixed) == 30.0);
  CHECK_THROWS_AS(fooling_rate(std::vector<bool>{}), PreconditionError);
  CHECK(sample_report().fooling_rate == 75.0);
}

TEST_CASE("transfer matrix") {
  const Classifier a = stub(4, 90, "a"), b = stub(4, 91, "b");
  std::mt19937_64 rng(92);
  AdversarialSet clean_a{"a", {}}, clean_b{"b", {}};
  for (int i = 0; i < 30; ++i) {
    const ImageTensor x = testing::random_image(testing::small_shape(), rng);
    // Labels that both models agree with make clean images a zero-rate set.
    if (a.predict(x) == b.predict(x)) {
      clean_a.images.push_back({x, a.predict(x), std::to_string(i)});
      clean_b.images.push_back({x, a.predict(x), std::to_string(i)});
    }
  }
  REQUIRE(!clean_a.images.empty());
  const TransferMatrix m = transfer_matrix({clean_a, clean_b}, {a, b});
  for (const auto& row : m.rates) {
    for (double v : row) CHECK(v == 0.0);
  }
  CHECK(m.off_diagonal_mean() == 0.0);

  // The diagonal is the white-box rate computed the same way.
  AdversarialSet mixed{"a", {}};
  std::vector<bool> direct;
  for (int i = 0; i < 20; ++i) {
    const ImageTensor x = testing::random_image(testing::small_shape(), rng);
    mixed.images.push_back({x, i % 4, std::to_string(i)});
    direct.push_back(a.predict(x) != i % 4);
  }
  CHECK(transfer_matrix({mixed}, {a, b}).rates[0][0] == fooling_rate(direct));
  CHECK_THROWS_AS(transfer_matrix({mixed}, {a, stub(5, 93)}), PreconditionError);
}

TEST_CASE("semantics rate") {
  const Classifier c = stub(4, 94);
  std::mt19937_64 rng(95);
  const ImageTensor x = testing::random_image(testing::small_shape(), rng);
  const int gray_label = c.predict(ImageTensor::constant(testing::small_shape(), 0.5));
  // x_adv = x gives a constant delta, i.e. an all-gray image.
  CHECK(semantics_rate({{x, x, gray_label, (gray_label + 1) % 4}}, c) == 100.0);
  CHECK(semantics_rate({{x, x, (gray_label + 1) % 4, (gray_label + 2) % 4}}, c) == 0.0);
  CHECK_THROWS_AS(semantics_rate({}, c), PreconditionError);

  // Shifting delta by a constant does not change the rescaled image.
  const ImageTensor adv = testing::random_image(testing::small_shape(), rng);
  Tensor3 shifted = adv.tensor() - x.tensor();
  Tensor3 base = shifted;
  for (double& v : shifted.storage()) v += 0.37;
  const ImageTensor p1 = imaging::minmax_rescale(base), p2 = imaging::minmax_rescale(shifted);
  for (std::size_t i = 0; i < p1.size(); ++i) CHECK(p1[i] == doctest::Approx(p2[i]).epsilon(1e-12));
  CHECK(perturbation_image(x, adv) == p1);
}

TEST_CASE("defense robustness starts at the undefended rate") {
  const Classifier c = stub(4, 96);
  std::mt19937_64 rng(97);
  std::vector<LabeledImage> adv;
  std::vector<bool> direct;
  for (int i = 0; i < 12; ++i) {
    const ImageTensor x = testing::random_image(testing::small_shape(), rng);
    adv.push_back({x, i % 4, std::to_string(i)});
    direct.push_back(c.predict(x) != i % 4);
  }
  const auto curve = defense_robustness(adv, defenses::defense_sweep_specs(), c);
  REQUIRE(curve.size() == 15);
  CHECK(curve[0].spec == defenses::DefenseSpec::none());
  CHECK(curve[0].rate == fooling_rate(direct));
}

TEST_CASE("reports round trip and are append-only") {
  const fs::path dir = scratch("report");
  const ExperimentReport r = sample_report();
  persist_report(r, dir / "exp1.report.json");
  CHECK(load_report(dir / "exp1.report.json") == r);
  CHECK(fs::exists(dir / "exp1.records.csv"));
  CHECK(fs::exists(dir / "exp1.aggregates.csv"));
  CHECK_THROWS_AS(persist_report(r, dir / "exp1.report.json"), IoError);

  ExperimentReport later = r;
  later.created_at = "2027-05-05T00:00:00Z";
  CHECK(payload_digest(report_payload(later)) == payload_digest(report_payload(r)));

  ExperimentReport inconsistent = r;
  inconsistent.fooling_rate = 50.0;
  CHECK_THROWS_AS(persist_report(inconsistent, dir / "other.report.json"), PreconditionError);
  fs::remove_all(dir);
}

TEST_CASE("report schema errors") {
  const fs::path dir = scratch("schema");
  persist_report(sample_report(), dir / "a.report.json");
  std::ifstream in(dir / "a.report.json");
  nlohmann::ordered_json doc = nlohmann::ordered_json::parse(in);

  auto write = [&](const std::string& name, const nlohmann::ordered_json& j) {
    std::ofstream(dir / name) << j.dump();
    return dir / name;
  };
  nlohmann::ordered_json v2 = doc;
  v2["schema_version"] = 2;
  CHECK_THROWS_AS(load_report(write("v2.json", v2)), SchemaError);
  nlohmann::ordered_json tampered = doc;
  tampered["payload"]["seed"] = 18;
  CHECK_THROWS_AS(load_report(write("t.json", tampered)), SchemaError);
  nlohmann::ordered_json missing = doc;
  missing.erase("schema_version");
  CHECK_THROWS_AS(load_report(write("m.json", missing)), SchemaError);
  CHECK_THROWS_AS(load_report(dir / "absent.json"), IoError);
  fs::remove_all(dir);
}
