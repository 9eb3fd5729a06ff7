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

#include "demiguise/evaluation.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <memory>
#include <sstream>

#include "demiguise/errors.hpp"

namespace demiguise::evaluation {
namespace {

using nlohmann::ordered_json;

bool same_number(double a, double b) { return a == b || (std::isnan(a) && std::isnan(b)); }

ordered_json number(double v) { return std::isfinite(v) ? ordered_json(v) : ordered_json(nullptr); }

double read_number(const ordered_json& j) {
  return j.is_null() ? std::numeric_limits<double>::quiet_NaN() : j.get<double>();
}

std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char ch : s) {
    if (ch == '"') out += '"';
    out += ch;
  }
  return out + "\"";
}

// Exclusive create: fails when the file already exists.
void write_new_file(const std::filesystem::path& path, const std::string& text) {
  std::unique_ptr<std::FILE, int (*)(std::FILE*)> f(std::fopen(path.c_str(), "wx"), &std::fclose);
  if (!f) {
    if (std::filesystem::exists(path)) {
      throw IoError("report " + path.string() + " already exists; reports are append-only");
    }
    throw IoError("cannot create " + path.string());
  }
  if (std::fwrite(text.data(), 1, text.size(), f.get()) != text.size()) {
    throw IoError("short write to " + path.string());
  }
}

std::filesystem::path sibling(const std::filesystem::path& path, const std::string& suffix) {
  std::string stem = path.stem().string();
  const std::string tail = ".report";
  if (stem.size() > tail.size() && stem.compare(stem.size() - tail.size(), tail.size(), tail) == 0) {
    stem.resize(stem.size() - tail.size());
  }
  return path.parent_path() / (stem + suffix);
}

int check_label_sets(const std::vector<Classifier>& targets) {
  if (targets.empty()) throw PreconditionError("transfer_matrix needs at least one target");
  const int n = targets.front().num_classes();
  for (const Classifier& c : targets) {
    if (c.num_classes() != n) {
      throw PreconditionError("label-set mismatch: " + targets.front().name() + " has " + std::to_string(n) +
                              " classes, " + c.name() + " has " + std::to_string(c.num_classes()));
    }
  }
  return n;
}

}  // namespace

bool SampleRecord::operator==(const SampleRecord& o) const {
  return attack == o.attack && model == o.model && defense == o.defense && sample_id == o.sample_id &&
         original_label == o.original_label && adversarial_label == o.adversarial_label && success == o.success &&
         same_number(perceptual, o.perceptual) && same_number(l2, o.l2) && same_number(linf, o.linf) &&
         same_number(final_distance, o.final_distance) && queries == o.queries && iterations == o.iterations;
}

SampleRecord make_record(const std::string& attack, const std::string& model, const std::string& sample_id,
                         const attacks::AttackResult& r) {
  SampleRecord rec;
  rec.attack = attack;
  rec.model = model;
  rec.sample_id = sample_id;
  rec.original_label = r.original_label;
  rec.adversarial_label = r.adversarial_label;
  rec.success = r.success;
  rec.perceptual = r.final_distance_perceptual;
  rec.l2 = r.final_l2;
  rec.linf = r.final_linf;
  rec.final_distance = r.final_distance;
  rec.queries = r.queries_used;
  rec.iterations = r.iterations_used;
  return rec;
}

double fooling_rate(const std::vector<bool>& successes) {
  if (successes.empty()) throw PreconditionError("fooling rate of an empty record set");
  std::size_t hits = 0;
  for (bool s : successes) hits += s ? 1 : 0;
  return 100.0 * static_cast<double>(hits) / static_cast<double>(successes.size());
}

double fooling_rate(const std::vector<SampleRecord>& records) {
  std::vector<bool> flags;
  flags.reserve(records.size());
  for (const SampleRecord& r : records) flags.push_back(r.success);
  return fooling_rate(flags);
}

double TransferMatrix::off_diagonal_mean() const {
  double sum = 0.0;
  int count = 0;
  for (std::size_t s = 0; s < sources.size(); ++s) {
    for (std::size_t t = 0; t < targets.size(); ++t) {
      if (sources[s] == targets[t]) continue;
      sum += rates[s][t];
      ++count;
    }
  }
  if (count == 0) throw PreconditionError("transfer matrix has no off-diagonal entries");
  return sum / count;
}

TransferMatrix transfer_matrix(const std::vector<AdversarialSet>& sets, const std::vector<Classifier>& targets) {
  const int classes = check_label_sets(targets);
  TransferMatrix m;
  for (const Classifier& c : targets) m.targets.push_back(c.name());
  for (const AdversarialSet& set : sets) {
    for (const LabeledImage& x : set.images) {
      if (x.label < 0 || x.label >= classes) {
        throw PreconditionError("label-set mismatch: sample " + x.sample_id + " has label " +
                                std::to_string(x.label) + " outside " + std::to_string(classes) + " classes");
      }
    }
    m.sources.push_back(set.source);
    std::vector<double> row;
    for (const Classifier& c : targets) {
      std::vector<bool> fooled;
      for (const LabeledImage& x : set.images) fooled.push_back(c.predict(x.image) != x.label);
      row.push_back(fooling_rate(fooled));
    }
    m.rates.push_back(std::move(row));
  }
  return m;
}

ImageTensor perturbation_image(const ImageTensor& clean, const ImageTensor& adversarial) {
  return imaging::minmax_rescale(adversarial.tensor() - clean.tensor());
}

double semantics_rate(const std::vector<Perturbation>& perturbations, const Classifier& c) {
  if (perturbations.empty()) throw PreconditionError("semantics rate of an empty perturbation set");
  std::vector<bool> kept;
  for (const Perturbation& p : perturbations) {
    const int predicted = c.predict(perturbation_image(p.clean, p.adversarial));
    kept.push_back(predicted == p.original_label || predicted == p.adversarial_label);
  }
  return fooling_rate(kept);
}

std::vector<CurvePoint> defense_robustness(const std::vector<LabeledImage>& adversarials,
                                           const std::vector<defenses::DefenseSpec>& specs, const Classifier& c) {
  std::vector<defenses::DefenseSpec> all{defenses::DefenseSpec::none()};
  all.insert(all.end(), specs.begin(), specs.end());
  std::vector<CurvePoint> curve;
  for (const defenses::DefenseSpec& spec : all) {
    std::vector<bool> fooled;
    for (const LabeledImage& x : adversarials) {
      fooled.push_back(c.predict(defenses::apply_defense(spec, x.image)) != x.label);
    }
    curve.push_back({spec, fooling_rate(fooled)});
  }
  return curve;
}

bool AggregateCell::operator==(const AggregateCell& o) const {
  return table == o.table && row == o.row && column == o.column && same_number(value, o.value);
}

bool ExperimentReport::operator==(const ExperimentReport& o) const {
  return experiment_id == o.experiment_id && attack == o.attack && source_model == o.source_model &&
         target_models == o.target_models && defense == o.defense && records == o.records &&
         fooling_rate == o.fooling_rate && aggregates == o.aggregates && config == o.config && seed == o.seed &&
         toolkit_version == o.toolkit_version && created_at == o.created_at;
}

ordered_json report_payload(const ExperimentReport& r) {
  ordered_json records = ordered_json::array();
  for (const SampleRecord& s : r.records) {
    records.push_back({{"attack", s.attack},
                       {"model", s.model},
                       {"defense", s.defense},
                       {"sample_id", s.sample_id},
                       {"original_label", s.original_label},
                       {"adversarial_label", s.adversarial_label},
                       {"success", s.success},
                       {"perceptual", number(s.perceptual)},
                       {"l2", number(s.l2)},
                       {"linf", number(s.linf)},
                       {"final_distance", number(s.final_distance)},
                       {"queries", s.queries},
                       {"iterations", s.iterations}});
  }
  ordered_json aggregates = ordered_json::array();
  for (const AggregateCell& a : r.aggregates) {
    aggregates.push_back({{"table", a.table}, {"row", a.row}, {"column", a.column}, {"value", number(a.value)}});
  }
  return {{"experiment_id", r.experiment_id},
          {"attack", r.attack},
          {"source_model", r.source_model},
          {"target_models", r.target_models},
          {"defense", r.defense.label()},
          {"fooling_rate", number(r.fooling_rate)},
          {"seed", r.seed},
          {"toolkit_version", r.toolkit_version},
          {"config", r.config},
          {"aggregates", aggregates},
          {"records", records}};
}

std::string payload_digest(const ordered_json& payload) {
  const std::string text = payload.dump();
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : text) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  char buf[32];
  std::snprintf(buf, sizeof buf, "fnv1a64:%016llx", static_cast<unsigned long long>(h));
  return buf;
}

void persist_report(const ExperimentReport& r, const std::filesystem::path& path) {
  if (!r.records.empty() && fooling_rate(r.records) != r.fooling_rate) {
    throw PreconditionError("report aggregate does not match its per-sample records");
  }
  const ordered_json payload = report_payload(r);
  ordered_json doc = {{"schema_version", kReportSchemaVersion},
                      {"created_at", r.created_at},
                      {"payload_digest", payload_digest(payload)},
                      {"payload", payload}};

  std::ostringstream records;
  records << "attack,model,defense,sample_id,original_label,adversarial_label,success,perceptual,l2,linf,"
             "final_distance,queries,iterations\n";
  for (const SampleRecord& s : r.records) {
    records << csv_field(s.attack) << ',' << csv_field(s.model) << ',' << csv_field(s.defense) << ','
            << csv_field(s.sample_id) << ',' << s.original_label << ',' << s.adversarial_label << ','
            << (s.success ? 1 : 0) << ',' << format_double(s.perceptual) << ',' << format_double(s.l2) << ','
            << format_double(s.linf) << ',' << format_double(s.final_distance) << ',' << s.queries << ','
            << s.iterations << '\n';
  }
  std::ostringstream cells;
  cells << "table,row,column,value\n";
  for (const AggregateCell& a : r.aggregates) {
    cells << csv_field(a.table) << ',' << csv_field(a.row) << ',' << csv_field(a.column) << ','
          << format_double(a.value) << '\n';
  }

  if (!path.parent_path().empty()) {
    std::error_code ec;
    std::filesystem::create_directories(path.parent_path(), ec);
    if (ec) throw IoError("cannot create " + path.parent_path().string() + ": " + ec.message());
  }
  write_new_file(path, doc.dump(2) + "\n");
  write_new_file(sibling(path, ".records.csv"), records.str());
  write_new_file(sibling(path, ".aggregates.csv"), cells.str());
}

ExperimentReport load_report(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open report " + path.string());
  ordered_json doc;
  try {
    doc = ordered_json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw SchemaError("report " + path.string() + " is not valid JSON: " + e.what());
  }
  if (!doc.is_object() || !doc.contains("schema_version") || !doc["schema_version"].is_number_integer()) {
    throw SchemaError("report " + path.string() + " has no schema_version");
  }
  if (doc["schema_version"].get<int>() != kReportSchemaVersion) {
    throw SchemaError("report " + path.string() + " has schema_version " + doc["schema_version"].dump() +
                      ", expected " + std::to_string(kReportSchemaVersion));
  }
  try {
    const ordered_json& p = doc.at("payload");
    if (payload_digest(p) != doc.at("payload_digest").get<std::string>()) {
      throw SchemaError("report " + path.string() + " payload digest mismatch");
    }
    ExperimentReport r;
    r.created_at = doc.at("created_at").get<std::string>();
    r.experiment_id = p.at("experiment_id").get<std::string>();
    r.attack = p.at("attack").get<std::string>();
    r.source_model = p.at("source_model").get<std::string>();
    r.target_models = p.at("target_models").get<std::vector<std::string>>();
    r.defense = defenses::DefenseSpec::parse(p.at("defense").get<std::string>());
    r.fooling_rate = read_number(p.at("fooling_rate"));
    r.seed = p.at("seed").get<std::uint64_t>();
    r.toolkit_version = p.at("toolkit_version").get<std::string>();
    r.config = p.at("config");
    for (const auto& a : p.at("aggregates")) {
      r.aggregates.push_back({a.at("table").get<std::string>(), a.at("row").get<std::string>(),
                              a.at("column").get<std::string>(), read_number(a.at("value"))});
    }
    for (const auto& s : p.at("records")) {
      SampleRecord rec;
      rec.attack = s.at("attack").get<std::string>();
      rec.model = s.at("model").get<std::string>();
      rec.defense = s.at("defense").get<std::string>();
      rec.sample_id = s.at("sample_id").get<std::string>();
      rec.original_label = s.at("original_label").get<int>();
      rec.adversarial_label = s.at("adversarial_label").get<int>();
      rec.success = s.at("success").get<bool>();
      rec.perceptual = read_number(s.at("perceptual"));
      rec.l2 = read_number(s.at("l2"));
      rec.linf = read_number(s.at("linf"));
      rec.final_distance = read_number(s.at("final_distance"));
      rec.queries = s.at("queries").get<std::uint64_t>();
      rec.iterations = s.at("iterations").get<int>();
      r.records.push_back(std::move(rec));
    }
    return r;
  } catch (const nlohmann::json::exception& e) {
    throw SchemaError("report " + path.string() + " is malformed: " + e.what());
  } catch (const ConfigError& e) {
    throw SchemaError("report " + path.string() + " is malformed: " + e.what());
  }
}

}  // namespace demiguise::evaluation
