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

#include "demiguise/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cstdlib>
#include <ctime>
#include <exception>
#include <fstream>
#include <limits>
#include <map>
#include <random>
#include <set>
#include <thread>

#include "demiguise/dataset.hpp"
#include "demiguise/errors.hpp"
#include "demiguise/imaging.hpp"

namespace demiguise::cli {
namespace fs = std::filesystem;
using nlohmann::ordered_json;

namespace {

const std::set<std::string> kTopLevelKeys = {
    "experiment_id", "profile", "zoo", "dataset", "sample_count", "models", "attacks", "defense",
    "channel_weights", "output", "seed", "workers", "resize_to", "crop_to"};

const std::set<std::string> kAttackKeys = {
    "name", "lambda", "learning_rate", "max_iters", "epsilon", "decay", "query_budget", "targeted", "target",
    "di_probability", "confidence", "lambda_search", "early_stop"};

[[noreturn]] void bad(const std::string& field, const std::string& what) {
  throw ConfigError("config field '" + field + "': " + what);
}

void reject_unknown(const ordered_json& obj, const std::set<std::string>& known, const std::string& where) {
  for (const auto& [key, value] : obj.items()) {
    if (!known.count(key)) bad(where + key, "unknown key");
  }
}

template <typename T>
T get(const ordered_json& obj, const std::string& key, const std::string& field, T fallback) {
  if (!obj.contains(key)) return fallback;
  try {
    return obj.at(key).get<T>();
  } catch (const nlohmann::json::exception&) {
    bad(field, "has the wrong type (" + std::string(obj.at(key).type_name()) + ")");
  }
}

int get_int(const ordered_json& obj, const std::string& key, const std::string& field, int fallback) {
  if (!obj.contains(key)) return fallback;
  if (!obj.at(key).is_number_integer()) bad(field, "must be an integer");
  return obj.at(key).get<int>();
}

double get_number(const ordered_json& obj, const std::string& key, const std::string& field, double fallback) {
  if (!obj.contains(key)) return fallback;
  if (!obj.at(key).is_number()) bad(field, "must be a number");
  return obj.at(key).get<double>();
}

fs::path resolve(const fs::path& base, const fs::path& p) { return p.is_absolute() ? p : base / p; }

ordered_json attack_json(const AttackSpec& a) {
  const attacks::AttackConfig& c = a.config;
  ordered_json j = {{"name", a.name},
                    {"lambda", c.lambda},
                    {"learning_rate", c.learning_rate},
                    {"max_iters", c.max_iters},
                    {"epsilon", c.epsilon},
                    {"decay", c.decay},
                    {"query_budget", c.query_budget},
                    {"targeted", c.targeted},
                    {"di_probability", c.di_probability},
                    {"confidence", c.confidence},
                    {"lambda_search", c.lambda_search},
                    {"early_stop", {{"tolerance", c.early_stop.tolerance}, {"patience", c.early_stop.patience}}}};
  if (c.target) j["target"] = *c.target;
  return j;
}

AttackSpec parse_attack(const ordered_json& j, const Profile& profile, const std::string& field) {
  if (j.is_string()) {
    try {
      return make_attack(j.get<std::string>(), profile);
    } catch (const ConfigError& e) {
      bad(field, e.what());
    }
  }
  if (!j.is_object()) bad(field, "must be an attack name or an object");
  if (!j.contains("name") || !j["name"].is_string()) bad(field + ".name", "missing");
  reject_unknown(j, kAttackKeys, field + ".");
  AttackSpec spec;
  try {
    spec = make_attack(j["name"].get<std::string>(), profile);
  } catch (const ConfigError& e) {
    bad(field + ".name", e.what());
  }
  attacks::AttackConfig& c = spec.config;
  c.lambda = get_number(j, "lambda", field + ".lambda", c.lambda);
  c.learning_rate = get_number(j, "learning_rate", field + ".learning_rate", c.learning_rate);
  c.max_iters = get_int(j, "max_iters", field + ".max_iters", c.max_iters);
  c.epsilon = get_number(j, "epsilon", field + ".epsilon", c.epsilon);
  c.decay = get_number(j, "decay", field + ".decay", c.decay);
  c.query_budget = get_int(j, "query_budget", field + ".query_budget", c.query_budget);
  c.targeted = get<bool>(j, "targeted", field + ".targeted", c.targeted);
  if (j.contains("target")) c.target = get_int(j, "target", field + ".target", 0);
  c.di_probability = get_number(j, "di_probability", field + ".di_probability", c.di_probability);
  c.confidence = get_number(j, "confidence", field + ".confidence", c.confidence);
  c.lambda_search = get<bool>(j, "lambda_search", field + ".lambda_search", c.lambda_search);
  if (j.contains("early_stop")) {
    const ordered_json& e = j["early_stop"];
    if (!e.is_object()) bad(field + ".early_stop", "must be an object");
    reject_unknown(e, {"tolerance", "patience"}, field + ".early_stop.");
    c.early_stop.tolerance = get_number(e, "tolerance", field + ".early_stop.tolerance", c.early_stop.tolerance);
    c.early_stop.patience = get_int(e, "patience", field + ".early_stop.patience", c.early_stop.patience);
  }
  if (c.lambda > 0.0 && spec.algorithm == Algorithm::mifgsm && spec.name.rfind("demi_", 0) != 0) {
    bad(field + ".lambda", "baseline " + spec.name + " has no distance term; use demi_mifgsm");
  }
  return spec;
}

void validate_attack(const AttackSpec& spec, const std::string& field) {
  attacks::AttackConfig probe = spec.config;
  if (probe.targeted && !probe.target) probe.target = 0;
  try {
    probe.validate(-1, std::numeric_limits<int>::max());
  } catch (const Error& e) {
    bad(field, e.what());
  }
}

// Names in the zoo manifest by role, without loading any weights.
std::map<std::string, std::string> zoo_roles(const fs::path& zoo) {
  std::ifstream in(zoo);
  if (!in) bad("zoo", "cannot open " + zoo.string());
  std::map<std::string, std::string> roles;
  try {
    const auto doc = nlohmann::json::parse(in);
    for (const auto& m : doc.at("models")) roles[m.at("name").get<std::string>()] = m.at("role").get<std::string>();
  } catch (const nlohmann::json::exception& e) {
    bad("zoo", "malformed manifest " + zoo.string() + ": " + e.what());
  }
  return roles;
}

std::string utc_now() {
  const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

std::string join(const std::vector<std::string>& parts, const char* sep) {
  std::string out;
  for (std::size_t i = 0; i < parts.size(); ++i) out += (i ? sep : "") + parts[i];
  return out;
}

bool needs_perceptual(const AttackSpec& a) {
  switch (a.algorithm) {
    case Algorithm::cw:
      return a.kind == attacks::DistanceKind::perceptual;
    case Algorithm::mifgsm:
      return a.config.lambda > 0.0;
    case Algorithm::hsja:
      return a.perceptual;
  }
  return false;
}

double mean_of(const std::vector<double>& v) {
  if (v.empty()) return std::numeric_limits<double>::quiet_NaN();
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

}  // namespace

const char* pipeline_name(Pipeline p) {
  switch (p) {
    case Pipeline::attack:
      return "attack";
    case Pipeline::transfer:
      return "transfer";
    case Pipeline::defense_sweep:
      return "defense-sweep";
    case Pipeline::semantics_test:
      return "semantics-test";
  }
  return "unknown";
}

const std::vector<std::string>& attack_catalogue() {
  static const std::vector<std::string> names = {"demi_cw",        "cw_l2",      "cw_psnr",   "cw_ssim",
                                                 "demi_mifgsm",    "mifgsm",     "demi_mifgsm_di",
                                                 "mifgsm_di",      "demi_hsja",  "hsja"};
  return names;
}

Profile profile_defaults(const std::string& name) {
  Profile p;
  p.name = name;
  p.cw.lambda = 0.05;
  p.cw.learning_rate = 0.2;
  p.cw.max_iters = 1000;
  p.mifgsm.decay = 1.0;
  p.mifgsm.lambda = 0.0;
  p.hsja.query_budget = 2000;
  p.hsja.lambda = 0.0;
  if (name == "desk") {
    p.resize_to = dataset::kDeskResize;
    p.crop_to = dataset::kDeskCrop;
    p.sample_count = 100;
    p.mifgsm.epsilon = 0.1;
    p.mifgsm.max_iters = 40;
  } else if (name == "paper") {
    p.resize_to = 256;
    p.crop_to = 224;
    p.sample_count = 1000;
    p.mifgsm.epsilon = 0.4;
    p.mifgsm.max_iters = 70;
  } else {
    bad("profile", "must be 'desk' or 'paper', got '" + name + "'");
  }
  return p;
}

AttackSpec make_attack(const std::string& name, const Profile& profile) {
  AttackSpec s;
  s.name = name;
  using attacks::DistanceKind;
  if (name == "demi_cw" || name == "cw_l2" || name == "cw_psnr" || name == "cw_ssim") {
    s.algorithm = Algorithm::cw;
    s.config = profile.cw;
    s.kind = name == "demi_cw"   ? DistanceKind::perceptual
             : name == "cw_l2"   ? DistanceKind::l2
             : name == "cw_psnr" ? DistanceKind::neg_psnr
                                 : DistanceKind::one_minus_ssim;
  } else if (name == "demi_mifgsm" || name == "mifgsm" || name == "demi_mifgsm_di" || name == "mifgsm_di") {
    s.algorithm = Algorithm::mifgsm;
    s.config = profile.mifgsm;
    if (name.rfind("demi_", 0) == 0) s.config.lambda = kDemiMifgsmLambda;
    if (name.find("_di") != std::string::npos) s.config.di_probability = 0.5;
  } else if (name == "demi_hsja" || name == "hsja") {
    s.algorithm = Algorithm::hsja;
    s.config = profile.hsja;
    s.perceptual = name == "demi_hsja";
  } else {
    throw ConfigError("unknown attack '" + name + "' (known: " + join(attack_catalogue(), ", ") + ")");
  }
  return s;
}

ordered_json ExperimentConfig::snapshot() const {
  ordered_json attacks_json = ordered_json::array();
  for (const AttackSpec& a : attacks) attacks_json.push_back(attack_json(a));
  ordered_json j = {{"experiment_id", experiment_id},
                    {"profile", profile},
                    {"zoo", zoo.string()},
                    {"dataset", {{"path", dataset.string()}, {"split", split}}},
                    {"sample_count", sample_count},
                    {"models", models},
                    {"attacks", attacks_json},
                    {"defense", defense.label()},
                    {"channel_weights", channel_weights.string()},
                    {"seed", seed},
                    {"resize_to", resize_to},
                    {"crop_to", crop_to}};
  return j;
}

ExperimentConfig parse_config(const ordered_json& doc, Pipeline pipeline, const fs::path& base_dir,
                              const Overrides& overrides) {
  if (!doc.is_object()) throw ConfigError("config must be a JSON object");
  reject_unknown(doc, kTopLevelKeys, "");
  ExperimentConfig cfg;
  cfg.profile = get<std::string>(doc, "profile", "profile", "desk");
  const Profile profile = profile_defaults(cfg.profile);

  cfg.experiment_id = get<std::string>(doc, "experiment_id", "experiment_id", "");
  if (cfg.experiment_id.empty()) bad("experiment_id", "missing");
  if (cfg.experiment_id.find_first_of("/\\ ") != std::string::npos) bad("experiment_id", "must be a plain name");

  if (!doc.contains("zoo")) bad("zoo", "missing");
  cfg.zoo = resolve(base_dir, get<std::string>(doc, "zoo", "zoo", ""));

  std::string data;
  if (doc.contains("dataset")) {
    const ordered_json& d = doc["dataset"];
    if (d.is_string()) {
      data = d.get<std::string>();
    } else if (d.is_object()) {
      reject_unknown(d, {"path", "split"}, "dataset.");
      data = get<std::string>(d, "path", "dataset.path", "");
      cfg.split = get<std::string>(d, "split", "dataset.split", cfg.split);
    } else {
      bad("dataset", "must be a path or {path, split}");
    }
  }
  if (data.empty()) {
    const char* env = std::getenv("DEMIGUISE_DATA_DIR");
    if (env == nullptr || *env == '\0') bad("dataset", "missing and DEMIGUISE_DATA_DIR is not set");
    data = env;
  }
  cfg.dataset = resolve(base_dir, data);
  if (!fs::exists(cfg.dataset / cfg.split / "labels.csv")) {
    bad("dataset", "no " + (cfg.dataset / cfg.split / "labels.csv").string());
  }

  cfg.sample_count = get_int(doc, "sample_count", "sample_count", profile.sample_count);
  if (cfg.sample_count < 1) bad("sample_count", "must be >= 1");
  cfg.resize_to = get_int(doc, "resize_to", "resize_to", profile.resize_to);
  cfg.crop_to = get_int(doc, "crop_to", "crop_to", profile.crop_to);
  if (cfg.crop_to < 1 || cfg.resize_to < cfg.crop_to) bad("crop_to", "need 1 <= crop_to <= resize_to");

  if (!doc.contains("models") || !doc["models"].is_array() || doc["models"].empty()) {
    bad("models", "must be a non-empty list");
  }
  const auto roles = zoo_roles(cfg.zoo);
  for (std::size_t i = 0; i < doc["models"].size(); ++i) {
    const std::string field = "models[" + std::to_string(i) + "]";
    if (!doc["models"][i].is_string()) bad(field, "must be a string");
    const std::string name = doc["models"][i].get<std::string>();
    const auto it = roles.find(name);
    if (it == roles.end() || it->second != "classifier") bad(field, "'" + name + "' is not a classifier in the zoo");
    if (std::find(cfg.models.begin(), cfg.models.end(), name) != cfg.models.end()) bad(field, "duplicate model");
    cfg.models.push_back(name);
  }

  if (!doc.contains("attacks") || !doc["attacks"].is_array() || doc["attacks"].empty()) {
    bad("attacks", "must be a non-empty list");
  }
  for (std::size_t i = 0; i < doc["attacks"].size(); ++i) {
    const std::string field = "attacks[" + std::to_string(i) + "]";
    AttackSpec spec = parse_attack(doc["attacks"][i], profile, field);
    validate_attack(spec, field);
    for (const AttackSpec& other : cfg.attacks) {
      if (other.name == spec.name) bad(field, "duplicate attack '" + spec.name + "'");
    }
    cfg.attacks.push_back(std::move(spec));
  }
  const bool has_perceptual =
      std::any_of(roles.begin(), roles.end(), [](const auto& kv) { return kv.second == "perceptual"; });
  for (std::size_t i = 0; i < cfg.attacks.size(); ++i) {
    if (needs_perceptual(cfg.attacks[i]) && !has_perceptual) {
      bad("attacks[" + std::to_string(i) + "]", "needs a perceptual network but the zoo has none");
    }
  }

  try {
    cfg.defense = defenses::DefenseSpec::parse(get<std::string>(doc, "defense", "defense", "none"));
  } catch (const ConfigError& e) {
    bad("defense", e.what());
  }
  if (doc.contains("channel_weights")) {
    const std::string w = get<std::string>(doc, "channel_weights", "channel_weights", "");
    if (!w.empty()) cfg.channel_weights = resolve(base_dir, w);
    if (!cfg.channel_weights.empty() && !fs::exists(cfg.channel_weights)) {
      bad("channel_weights", "no such file " + cfg.channel_weights.string());
    }
  }

  cfg.output = resolve(base_dir, get<std::string>(doc, "output", "output", "out/" + cfg.experiment_id));
  if (overrides.output) cfg.output = *overrides.output;
  if (doc.contains("seed") && !(doc["seed"].is_number_unsigned() ||
                                (doc["seed"].is_number_integer() && doc["seed"].get<std::int64_t>() >= 0))) {
    bad("seed", "must be a non-negative integer");
  }
  cfg.seed = get<std::uint64_t>(doc, "seed", "seed", 0);
  if (overrides.seed) cfg.seed = *overrides.seed;
  cfg.workers = get_int(doc, "workers", "workers", 1);
  if (overrides.workers) cfg.workers = *overrides.workers;
  if (cfg.workers < 1) bad("workers", "must be >= 1");

  switch (pipeline) {
    case Pipeline::transfer:
      if (cfg.models.size() < 2) bad("models", "transfer needs at least two models");
      break;
    case Pipeline::defense_sweep:
      if (cfg.defense.kind != defenses::DefenseKind::none) bad("defense", "defense-sweep runs its own sweep");
      break;
    default:
      break;
  }
  if (fs::exists(report_path(cfg.output, cfg.experiment_id))) {
    bad("experiment_id", "a report for '" + cfg.experiment_id + "' already exists in " + cfg.output.string());
  }
  return cfg;
}

ExperimentConfig load_config(const fs::path& path, Pipeline pipeline, const Overrides& overrides) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path.string());
  ordered_json doc;
  try {
    doc = ordered_json::parse(in, nullptr, true, true);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("cannot parse config " + path.string() + ": " + e.what());
  }
  return parse_config(doc, pipeline, fs::absolute(path).parent_path(), overrides);
}

std::vector<imaging::LabeledImage> select_samples(std::vector<imaging::LabeledImage> candidates,
                                                  const std::vector<classifiers::Classifier>& models, int count,
                                                  std::uint64_t seed) {
  if (count < 1) throw PreconditionError("sample count must be >= 1");
  std::sort(candidates.begin(), candidates.end(),
            [](const auto& a, const auto& b) { return a.sample_id < b.sample_id; });
  std::vector<imaging::LabeledImage> correct;
  for (auto& x : candidates) {
    const bool ok = std::all_of(models.begin(), models.end(),
                                [&](const classifiers::Classifier& c) { return c.predict(x.image) == x.label; });
    if (ok) correct.push_back(std::move(x));
  }
  if (static_cast<int>(correct.size()) < count) {
    throw PreconditionError("only " + std::to_string(correct.size()) + " samples are classified correctly by every " +
                            "model, " + std::to_string(count) + " requested");
  }
  // Fisher-Yates with an explicit draw so the order does not depend on the standard library.
  std::mt19937_64 rng(dataset::mix_seed(seed, "select", 0));
  for (std::size_t i = correct.size() - 1; i > 0; --i) {
    const std::size_t j = static_cast<std::size_t>(rng() % (i + 1));
    std::swap(correct[i], correct[j]);
  }
  correct.resize(static_cast<std::size_t>(count));
  std::sort(correct.begin(), correct.end(), [](const auto& a, const auto& b) { return a.sample_id < b.sample_id; });
  return correct;
}

attacks::AttackResult run_attack(const AttackSpec& spec, const classifiers::Classifier& c,
                                 const attacks::PerceptualMetric* metric, const imaging::LabeledImage& x,
                                 std::uint64_t seed) {
  attacks::AttackConfig cfg = spec.config;
  cfg.seed = seed;
  if (cfg.targeted && !cfg.target) cfg.target = (x.label + 1) % c.num_classes();
  switch (spec.algorithm) {
    case Algorithm::cw:
      return attacks::cw_attack(c.with_tier(classifiers::AccessTier::white_box), metric, x, spec.kind, cfg);
    case Algorithm::mifgsm:
      return attacks::mifgsm_attack(c.with_tier(classifiers::AccessTier::white_box), metric, x, cfg);
    case Algorithm::hsja:
      return attacks::hsja_attack(c.with_tier(classifiers::AccessTier::decision_only), metric, x, spec.perceptual,
                                  cfg);
  }
  throw ConfigError("unknown algorithm");
}

std::vector<attacks::AttackResult> run_batch(const AttackSpec& spec, const classifiers::Classifier& c,
                                             const attacks::PerceptualMetric* metric,
                                             const std::vector<imaging::LabeledImage>& samples, std::uint64_t seed,
                                             int workers) {
  std::vector<attacks::AttackResult> results(samples.size());
  std::vector<std::exception_ptr> errors(samples.size());
  std::atomic<std::size_t> next{0};
  auto work = [&] {
    for (std::size_t i = next++; i < samples.size(); i = next++) {
      try {
        const std::uint64_t s = dataset::mix_seed(seed, spec.name + "/" + c.name(), i);
        results[i] = run_attack(spec, c, metric, samples[i], s);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  const int n = std::max(1, std::min<int>(workers, static_cast<int>(samples.size())));
  if (n == 1) {
    work();
  } else {
    std::vector<std::thread> pool;
    for (int t = 0; t < n; ++t) pool.emplace_back(work);
    for (auto& t : pool) t.join();
  }
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  return results;
}

evaluation::ExperimentReport run_experiment(const ExperimentConfig& config, Pipeline pipeline, std::ostream* log) {
  auto note = [&](const std::string& s) {
    if (log) *log << s << std::endl;
  };
  const fs::path report_file = report_path(config.output, config.experiment_id);
  if (fs::exists(report_file)) throw IoError("report " + report_file.string() + " already exists");

  classifiers::Zoo zoo = classifiers::load_zoo(config.zoo);
  std::vector<classifiers::Classifier> models;
  for (const std::string& name : config.models) models.push_back(zoo.classifier(name));
  std::optional<attacks::PerceptualMetric> metric;
  if (zoo.perceptual) {
    metric = attacks::PerceptualMetric::unit_weights(*zoo.perceptual);
    if (!config.channel_weights.empty()) {
      metric->weights = perceptual::ChannelWeights::load(config.channel_weights, *zoo.perceptual);
    }
  }
  const attacks::PerceptualMetric* m = metric ? &*metric : nullptr;

  note("loading " + (config.dataset / config.split).string());
  auto candidates = dataset::load_split(config.dataset, config.split, config.resize_to, config.crop_to);
  const auto samples = select_samples(std::move(candidates), models, config.sample_count, config.seed);
  note("selected " + std::to_string(samples.size()) + " samples");

  fs::create_directories(config.output / "clean");
  for (const auto& x : samples) imaging::save_image(x.image, config.output / "clean" / (x.sample_id + ".png"));

  evaluation::ExperimentReport report;
  report.experiment_id = config.experiment_id;
  std::vector<std::string> attack_names;
  for (const AttackSpec& a : config.attacks) attack_names.push_back(a.name);
  report.attack = join(attack_names, ",");
  report.source_model = config.models.size() == 1 ? config.models.front() : join(config.models, ",");
  report.target_models = config.models;
  report.defense = config.defense;
  report.seed = config.seed;
  report.config = config.snapshot();
  report.config["pipeline"] = pipeline_name(pipeline);

  for (const AttackSpec& spec : config.attacks) {
    std::vector<evaluation::AdversarialSet> sets;
    for (std::size_t mi = 0; mi < models.size(); ++mi) {
      const classifiers::Classifier& c = models[mi];
      note("running " + spec.name + " on " + c.name());
      const auto results = run_batch(spec, c, m, samples, config.seed, config.workers);
      const fs::path adv_dir = config.output / "adv" / spec.name / c.name();
      fs::create_directories(adv_dir);

      evaluation::AdversarialSet set{c.name(), {}};
      std::vector<double> perceptual, l2;
      std::vector<bool> defended;
      std::vector<evaluation::Perturbation> perturbations;
      for (std::size_t i = 0; i < samples.size(); ++i) {
        const auto& r = results[i];
        imaging::save_image(r.adversarial, adv_dir / (samples[i].sample_id + ".png"));
        auto rec = evaluation::make_record(spec.name, c.name(), samples[i].sample_id, r);
        if (pipeline == Pipeline::attack && config.defense.kind != defenses::DefenseKind::none) {
          // Success is re-judged on the defended input.
          const int label = c.predict(defenses::apply_defense(config.defense, r.adversarial));
          rec.defense = config.defense.label();
          const int target = spec.config.target.value_or((samples[i].label + 1) % c.num_classes());
          rec.success = spec.config.targeted ? label == target : label != samples[i].label;
        }
        if (rec.success) {
          perceptual.push_back(rec.perceptual);
          l2.push_back(rec.l2);
        }
        report.records.push_back(rec);
        set.images.push_back({r.adversarial, samples[i].label, samples[i].sample_id});
        perturbations.push_back({samples[i].image, r.adversarial, samples[i].label, r.adversarial_label});
      }
      std::vector<bool> flags;
      for (std::size_t i = report.records.size() - samples.size(); i < report.records.size(); ++i) {
        flags.push_back(report.records[i].success);
      }
      report.aggregates.push_back({"fooling_rate", spec.name, c.name(), evaluation::fooling_rate(flags)});
      report.aggregates.push_back({"mean_perceptual", spec.name, c.name(), mean_of(perceptual)});
      report.aggregates.push_back({"mean_l2", spec.name, c.name(), mean_of(l2)});

      if (pipeline == Pipeline::defense_sweep) {
        const auto curve = evaluation::defense_robustness(set.images, defenses::defense_sweep_specs(), c);
        for (const auto& p : curve) {
          report.aggregates.push_back({"sweep:" + c.name(), p.spec.label(), spec.name, p.rate});
        }
      }
      if (pipeline == Pipeline::semantics_test) {
        report.aggregates.push_back({"semantics", spec.name, c.name(), evaluation::semantics_rate(perturbations, c)});
      }
      sets.push_back(std::move(set));
    }

    if (pipeline == Pipeline::transfer) {
      const auto matrix = evaluation::transfer_matrix(sets, models);
      for (std::size_t s = 0; s < matrix.sources.size(); ++s) {
        for (std::size_t t = 0; t < matrix.targets.size(); ++t) {
          report.aggregates.push_back({"transfer:" + spec.name, matrix.sources[s], matrix.targets[t],
                                       matrix.rates[s][t]});
        }
      }
      for (std::size_t t = 0; t < matrix.targets.size(); ++t) {
        std::vector<double> col;
        for (std::size_t s = 0; s < matrix.sources.size(); ++s) {
          if (matrix.sources[s] != matrix.targets[t]) col.push_back(matrix.rates[s][t]);
        }
        report.aggregates.push_back({"transfer_to", spec.name, matrix.targets[t], mean_of(col)});
      }
      report.aggregates.push_back({"transfer_summary", spec.name, "off_diagonal_mean", matrix.off_diagonal_mean()});
    }
  }

  report.fooling_rate = evaluation::fooling_rate(report.records);
  report.created_at = utc_now();
  evaluation::persist_report(report, report_file);
  note("wrote " + report_file.string());
  return report;
}

}  // namespace demiguise::cli
