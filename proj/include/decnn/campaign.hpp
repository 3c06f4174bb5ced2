#pragma once

// Run configuration, seeded multi-run campaigns with per-run JSON records
// (resumable at run granularity), and the aggregate/comparison report.

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <memory>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "decnn/dataset_io.hpp"
#include "decnn/de_engine.hpp"
#include "decnn/errors.hpp"
#include "decnn/fitness.hpp"
#include "decnn/stats.hpp"

namespace decnn {

using json = nlohmann::json;
namespace fs = std::filesystem;

enum class EvaluatorKind { cnn, surrogate_target, surrogate_length };

inline const char* evaluator_name(EvaluatorKind k) {
  switch (k) {
    case EvaluatorKind::cnn: return "cnn";
    case EvaluatorKind::surrogate_target: return "surrogate_target";
    case EvaluatorKind::surrogate_length: return "surrogate_length";
  }
  return "cnn";
}

struct DataConfig {
  std::string dataset = "custom";  // label used in reports, e.g. "MB"
  std::string format = "amat";     // amat | idx
  std::string train;               // amat file, or IDX images
  std::string train_labels;        // IDX labels
  std::string test;
  std::string test_labels;
  std::size_t classes = 0;         // 0 = infer from labels
};

struct SurrogateConfig {
  std::vector<std::string> target{"8.0", "28.0", "8.0", "20.0"};
  std::size_t ideal_length = 4;
};

struct RunConfig {
  std::string name = "decnn";
  EvolutionConfig evolution;
  EvalConfig evaluation;
  EvaluatorKind evaluator = EvaluatorKind::cnn;
  SurrogateConfig surrogate;
  DataConfig data;
  std::size_t runs = 30;
  std::string output = "results";

  void validate() const {
    evolution.validate();
    evaluation.validate();
    if (runs < 1) throw ConfigError("runs must be >= 1");
    if (evaluator == EvaluatorKind::cnn && data.train.empty())
      throw ConfigError("cnn evaluator needs data.train");
    if (evaluator == EvaluatorKind::surrogate_target && surrogate.target.empty())
      throw ConfigError("surrogate.target must not be empty");
    if (evaluator == EvaluatorKind::surrogate_length && surrogate.ideal_length < 1)
      throw ConfigError("surrogate.ideal_length must be >= 1");
  }
};

// ---------------------------------------------------------------------------
// JSON mapping

inline json to_json(const RunConfig& c) {
  const auto& e = c.evolution;
  const auto& v = c.evaluation;
  return json{
      {"name", c.name},
      {"evaluator", evaluator_name(c.evaluator)},
      {"runs", c.runs},
      {"output", c.output},
      {"evolution",
       {{"population_size", e.population_size},
        {"generations", e.generations},
        {"F", e.F},
        {"Cr", e.Cr},
        {"mu", e.mu},
        {"sigma", e.sigma},
        {"rho", e.rho},
        {"min_length", e.min_length},
        {"seed", e.seed},
        {"workers", e.workers}}},
      {"evaluation",
       {{"epochs", v.epochs},
        {"fitness_fraction", v.fitness_fraction},
        {"batch_size", v.batch_size},
        {"learning_rate", v.learning_rate},
        {"train_subset", v.train_subset},
        {"test_subset", v.test_subset},
        {"max_macs", v.max_macs},
        {"activation", cnn::detail::activation_name(v.activation)}}},
      {"surrogate", {{"target", c.surrogate.target}, {"ideal_length", c.surrogate.ideal_length}}},
      {"data",
       {{"dataset", c.data.dataset},
        {"format", c.data.format},
        {"train", c.data.train},
        {"train_labels", c.data.train_labels},
        {"test", c.data.test},
        {"test_labels", c.data.test_labels},
        {"classes", c.data.classes}}},
  };
}

namespace detail {

template <class T>
void read_key(const json& obj, const char* key, T& out, const std::string& where) {
  if (!obj.contains(key)) return;
  try {
    out = obj.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ConfigError(where + "." + key + ": " + e.what());
  }
}

inline void reject_unknown(const json& obj, std::initializer_list<const char*> known, const std::string& where) {
  if (!obj.is_object()) throw ConfigError(where + " must be an object");
  for (const auto& [key, _] : obj.items()) {
    bool ok = false;
    for (const char* k : known) ok = ok || key == k;
    if (!ok) throw ConfigError("unknown config key " + (where.empty() ? key : where + "." + key));
  }
}

}  // namespace detail

/// Missing keys keep their defaults; unknown keys are rejected.
inline RunConfig run_config_from_json(const json& j) {
  using detail::read_key;
  using detail::reject_unknown;
  RunConfig c;
  reject_unknown(j, {"name", "evaluator", "runs", "output", "evolution", "evaluation", "surrogate", "data"}, "");
  read_key(j, "name", c.name, "");
  read_key(j, "runs", c.runs, "");
  read_key(j, "output", c.output, "");
  if (j.contains("evaluator")) {
    std::string kind;
    read_key(j, "evaluator", kind, "");
    if (kind == "cnn") c.evaluator = EvaluatorKind::cnn;
    else if (kind == "surrogate_target") c.evaluator = EvaluatorKind::surrogate_target;
    else if (kind == "surrogate_length") c.evaluator = EvaluatorKind::surrogate_length;
    else throw ConfigError("unknown evaluator '" + kind + "'");
  }
  if (j.contains("evolution")) {
    const auto& e = j.at("evolution");
    reject_unknown(e, {"population_size", "generations", "F", "Cr", "mu", "sigma", "rho", "min_length", "seed", "workers"},
                   "evolution");
    auto& d = c.evolution;
    read_key(e, "population_size", d.population_size, "evolution");
    read_key(e, "generations", d.generations, "evolution");
    read_key(e, "F", d.F, "evolution");
    read_key(e, "Cr", d.Cr, "evolution");
    read_key(e, "mu", d.mu, "evolution");
    read_key(e, "sigma", d.sigma, "evolution");
    read_key(e, "rho", d.rho, "evolution");
    read_key(e, "min_length", d.min_length, "evolution");
    read_key(e, "seed", d.seed, "evolution");
    read_key(e, "workers", d.workers, "evolution");
  }
  if (j.contains("evaluation")) {
    const auto& e = j.at("evaluation");
    reject_unknown(e, {"epochs", "fitness_fraction", "batch_size", "learning_rate", "train_subset", "test_subset",
                       "max_macs", "activation"},
                   "evaluation");
    auto& d = c.evaluation;
    read_key(e, "epochs", d.epochs, "evaluation");
    read_key(e, "fitness_fraction", d.fitness_fraction, "evaluation");
    read_key(e, "batch_size", d.batch_size, "evaluation");
    read_key(e, "learning_rate", d.learning_rate, "evaluation");
    read_key(e, "train_subset", d.train_subset, "evaluation");
    read_key(e, "test_subset", d.test_subset, "evaluation");
    read_key(e, "max_macs", d.max_macs, "evaluation");
    if (e.contains("activation")) {
      std::string a;
      read_key(e, "activation", a, "evaluation");
      if (a == "relu") d.activation = cnn::Activation::relu;
      else if (a == "tanh") d.activation = cnn::Activation::tanh;
      else throw ConfigError("evaluation.activation must be relu or tanh");
    }
  }
  if (j.contains("surrogate")) {
    const auto& s = j.at("surrogate");
    reject_unknown(s, {"target", "ideal_length"}, "surrogate");
    read_key(s, "target", c.surrogate.target, "surrogate");
    read_key(s, "ideal_length", c.surrogate.ideal_length, "surrogate");
  }
  if (j.contains("data")) {
    const auto& s = j.at("data");
    reject_unknown(s, {"dataset", "format", "train", "train_labels", "test", "test_labels", "classes"}, "data");
    read_key(s, "dataset", c.data.dataset, "data");
    read_key(s, "format", c.data.format, "data");
    read_key(s, "train", c.data.train, "data");
    read_key(s, "train_labels", c.data.train_labels, "data");
    read_key(s, "test", c.data.test, "data");
    read_key(s, "test_labels", c.data.test_labels, "data");
    read_key(s, "classes", c.data.classes, "data");
  }
  for (const auto& ip : c.surrogate.target) {
    try {
      parse_ip(ip);
    } catch (const ParseError& e) {
      throw ConfigError(std::string("surrogate.target: ") + e.what());
    }
  }
  return c;
}

/// Applies "a.b.c=value" on top of a config document. The value is read as
/// JSON when it parses as JSON, otherwise as a string.
inline void apply_override(json& doc, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0) throw ConfigError("override must look like key.path=value");
  const std::string path = assignment.substr(0, eq);
  const std::string text = assignment.substr(eq + 1);
  json value = json::parse(text, nullptr, false);
  if (value.is_discarded()) value = text;
  json* node = &doc;
  std::size_t start = 0;
  while (true) {
    const auto dot = path.find('.', start);
    const std::string key = path.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
    if (key.empty()) throw ConfigError("empty key in override '" + path + "'");
    if (dot == std::string::npos) {
      (*node)[key] = value;
      break;
    }
    node = &(*node)[key];
    start = dot + 1;
  }
}

inline json load_config_document(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path);
  json doc = json::parse(in, nullptr, false, true);
  if (doc.is_discarded()) throw ConfigError("config " + path + " is not valid JSON");
  return doc;
}

/// Relative data paths resolve against $DECNN_DATA_DIR when it is set.
inline std::string resolve_data_path(const std::string& path) {
  if (path.empty() || fs::path(path).is_absolute()) return path;
  if (const char* dir = std::getenv("DECNN_DATA_DIR"); dir && *dir) return (fs::path(dir) / path).string();
  return path;
}

/// Stable 64-bit FNV-1a over the settings that determine a run's outcome.
inline std::string config_fingerprint(const RunConfig& c) {
  json j = to_json(c);
  j.erase("runs");
  j.erase("output");
  j["evolution"].erase("workers");
  const std::string s = j.dump();
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char ch : s) {
    h ^= ch;
    h *= 1099511628211ull;
  }
  std::ostringstream out;
  out << std::hex << std::setw(16) << std::setfill('0') << h;
  return out.str();
}

// ---------------------------------------------------------------------------
// Records

inline json architecture_json(const std::vector<LayerGene>& layers) {
  json arr = json::array();
  for (const auto& layer : layers) arr.push_back({{"ip", format_ip(encode_layer(layer))}, {"layer", describe(layer)}});
  return arr;
}

inline json trace_json(const EvolutionTrace& trace) {
  json arr = json::array();
  for (const auto& r : trace.records)
    arr.push_back({{"generation", r.generation},
                   {"best_fitness", r.best_fitness},
                   {"mean_fitness", r.mean_fitness},
                   {"mean_length", r.mean_length},
                   {"best_genome", to_ip_list(r.best_genome)}});
  return arr;
}

struct RunRecord {
  std::size_t run = 0;
  std::uint64_t seed = 0;
  bool ok = false;
  std::string reason;
  double best_fitness = 0.0;
  double error_rate = 1.0;  // 1 - test accuracy (cnn) or 1 - best fitness (surrogates)
  json document;            // full persisted record
};

struct CampaignResult {
  std::string name;
  std::string dataset;
  std::vector<RunRecord> runs;
  std::size_t succeeded = 0;
  double mean_error = 0.0;
  double std_error = 0.0;
  double best_error = 0.0;
  std::size_t resumed = 0;
};

struct Aggregate {
  std::size_t count = 0;
  double mean = 0.0;
  double std = 0.0;  // sample (n - 1); 0 for a single run
  double best = 0.0;
};

inline Aggregate aggregate(std::span<const double> errors) {
  Aggregate a;
  a.count = errors.size();
  if (errors.empty()) return a;
  a.mean = stats::mean(errors);
  a.std = errors.size() > 1 ? stats::stddev(errors) : 0.0;
  a.best = *std::min_element(errors.begin(), errors.end());
  return a;
}

namespace detail {

inline void write_json_atomically(const fs::path& path, const json& doc) {
  const fs::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp);
    if (!out) throw std::runtime_error("cannot write " + tmp.string());
    out << doc.dump(2) << '\n';
    if (!out) throw std::runtime_error("failed writing " + tmp.string());
  }
  fs::rename(tmp, path);
}

inline std::string run_file_name(std::size_t run) {
  std::ostringstream s;
  s << "run_" << std::setw(4) << std::setfill('0') << run << ".json";
  return s.str();
}

}  // namespace detail

/// Loaded datasets shared by every run of a cnn campaign.
struct CampaignData {
  LabeledDataset train;
  LabeledDataset test;
};

inline CampaignData load_campaign_data(const DataConfig& cfg) {
  CampaignData data;
  const auto load = [&](const std::string& images, const std::string& labels) {
    if (cfg.format == "amat") return load_amat(resolve_data_path(images), cfg.classes);
    if (cfg.format == "idx")
      return load_idx(resolve_data_path(images), resolve_data_path(labels), cfg.classes ? cfg.classes : 10);
    throw ConfigError("data.format must be amat or idx");
  };
  data.train = load(cfg.train, cfg.train_labels);
  if (!cfg.test.empty()) {
    data.test = load(cfg.test, cfg.test_labels);
    const std::size_t classes = std::max(data.train.classes, data.test.classes);
    data.train.classes = data.test.classes = classes;
  }
  return data;
}

/// Executes one seeded evolution (and, for cnn, the test-set retraining of its
/// best individual). Throws on evaluator or data failure.
inline RunRecord execute_run(const RunConfig& config, std::size_t run, const CampaignData* data,
                             const GenerationObserver& observer = {}) {
  RunRecord rec;
  rec.run = run;
  rec.seed = config.evolution.seed + run;
  EvolutionConfig evo = config.evolution;
  evo.seed = rec.seed;

  json doc{{"run", run}, {"seed", rec.seed}, {"evaluator", evaluator_name(config.evaluator)}};
  EvolutionResult result;
  double error_rate = 1.0;

  if (config.evaluator == EvaluatorKind::cnn) {
    if (!data) throw ContractError("cnn run without data");
    EvalConfig eval = config.evaluation;
    eval.seed = rec.seed;
    auto split = std::make_shared<Split>(make_split(data->train, eval.fitness_fraction, eval.train_subset, rec.seed));
    if (!data->test.empty())
      split->test = stratified_sample(data->test, eval.test_subset ? eval.test_subset : data->test.size(), rec.seed);
    CnnEvaluator evaluator(split, eval);
    result = evolve(evo, evaluator, observer);

    const auto layers = decode_genome(result.best.genome);
    json retrain{{"train_size", split->train.size()}, {"fitness_size", split->fitness.size()},
                 {"test_size", split->test.size()}};
    if (!split->test.empty()) {
      const auto model = train_and_score(layers, split->train, split->test, eval,
                                         candidate_seed(rec.seed ^ 0x7e57ull, layers));
      retrain["test_accuracy"] = model.report.fitness;
      if (model.report.failure_reason) retrain["failure"] = *model.report.failure_reason;
      error_rate = 1.0 - model.report.fitness;
    } else {
      error_rate = 1.0 - *result.best.fitness;
    }
    doc["retrain"] = retrain;
  } else if (config.evaluator == EvaluatorKind::surrogate_target) {
    result = evolve(evo, TargetEvaluator(from_ip_list(config.surrogate.target)), observer);
    error_rate = 1.0 - *result.best.fitness;
  } else {
    result = evolve(evo, LengthEvaluator(config.surrogate.ideal_length), observer);
    error_rate = 1.0 - *result.best.fitness;
  }

  rec.ok = true;
  rec.best_fitness = *result.best.fitness;
  rec.error_rate = error_rate;
  doc["status"] = "ok";
  doc["best"] = {{"fitness", rec.best_fitness},
                 {"genome", to_ip_list(result.best.genome)},
                 {"architecture", architecture_json(decode_genome(result.best.genome))}};
  doc["error_rate"] = error_rate;
  doc["trace"] = trace_json(result.trace);
  rec.document = std::move(doc);
  return rec;
}

inline RunRecord run_record_from_json(const json& doc) {
  RunRecord rec;
  rec.run = doc.at("run").get<std::size_t>();
  rec.seed = doc.at("seed").get<std::uint64_t>();
  rec.ok = doc.at("status").get<std::string>() == "ok";
  if (rec.ok) {
    rec.best_fitness = doc.at("best").at("fitness").get<double>();
    rec.error_rate = doc.at("error_rate").get<double>();
  } else {
    rec.reason = doc.value("reason", "");
  }
  rec.document = doc;
  return rec;
}

using RunObserver = std::function<void(const RunRecord&, bool resumed)>;

/// Runs `config.runs` evolutions with seeds base, base+1, ... . Each finished
/// run is persisted before the next starts; existing records with a matching
/// fingerprint are reused. A failing run is recorded with its reason and the
/// campaign moves on.
inline CampaignResult run_campaign(const RunConfig& config, const RunObserver& on_run = {}) {
  config.validate();
  const fs::path dir(config.output);
  fs::create_directories(dir);
  const std::string fingerprint = config_fingerprint(config);

  std::optional<CampaignData> data;
  if (config.evaluator == EvaluatorKind::cnn) data = load_campaign_data(config.data);

  CampaignResult result;
  result.name = config.name;
  result.dataset = config.data.dataset;

  const auto write_index = [&] {
    std::vector<double> errors;
    json runs = json::array();
    for (const auto& r : result.runs) {
      json entry{{"run", r.run}, {"seed", r.seed}, {"status", r.ok ? "ok" : "failed"},
                 {"file", detail::run_file_name(r.run)}};
      if (r.ok) {
        entry["error_rate"] = r.error_rate;
        entry["best_fitness"] = r.best_fitness;
        errors.push_back(r.error_rate);
      } else {
        entry["reason"] = r.reason;
      }
      runs.push_back(entry);
    }
    const Aggregate agg = aggregate(errors);
    result.succeeded = agg.count;
    result.mean_error = agg.mean;
    result.std_error = agg.std;
    result.best_error = agg.best;
    json index{{"format", "decnn-campaign/1"},
               {"name", config.name},
               {"dataset", config.data.dataset},
               {"evaluator", evaluator_name(config.evaluator)},
               {"base_seed", config.evolution.seed},
               {"fingerprint", fingerprint},
               {"config", to_json(config)},
               {"runs", runs},
               {"aggregate", {{"count", agg.count}, {"mean", agg.mean}, {"std", agg.std}, {"best", agg.best}}}};
    detail::write_json_atomically(dir / "campaign.json", index);
  };

  for (std::size_t run = 0; run < config.runs; ++run) {
    const fs::path file = dir / detail::run_file_name(run);
    if (fs::exists(file)) {
      std::ifstream in(file);
      const json doc = json::parse(in, nullptr, false);
      if (!doc.is_discarded() && doc.value("fingerprint", "") == fingerprint) {
        result.runs.push_back(run_record_from_json(doc));
        ++result.resumed;
        if (on_run) on_run(result.runs.back(), true);
        continue;
      }
    }
    RunRecord rec;
    try {
      rec = execute_run(config, run, data ? &*data : nullptr);
    } catch (const std::exception& e) {
      rec.run = run;
      rec.seed = config.evolution.seed + run;
      rec.ok = false;
      rec.reason = e.what();
      rec.document = {{"run", run}, {"seed", rec.seed}, {"status", "failed"}, {"reason", rec.reason}};
    }
    rec.document["fingerprint"] = fingerprint;
    detail::write_json_atomically(file, rec.document);
    result.runs.push_back(rec);
    write_index();
    if (on_run) on_run(result.runs.back(), false);
  }
  write_index();
  return result;
}

// ---------------------------------------------------------------------------
// Report

struct CampaignSummary {
  std::string path;
  std::string name;
  std::string dataset;
  std::vector<double> errors;
  Aggregate stored;
  Aggregate recomputed;
  std::vector<std::string> warnings;
};

inline constexpr double kAggregateTolerance = 1e-12;

/// Reads a campaign index (file or directory containing campaign.json) and
/// cross-checks the stored aggregates against the per-run records.
inline CampaignSummary load_campaign_summary(const std::string& path) {
  fs::path file(path);
  if (fs::is_directory(file)) file /= "campaign.json";
  std::ifstream in(file);
  if (!in) throw FormatError("cannot open campaign file " + file.string());
  const json doc = json::parse(in, nullptr, false);
  if (doc.is_discarded()) throw FormatError(file.string() + ": not valid JSON");
  CampaignSummary s;
  s.path = file.string();
  try {
    if (doc.at("format").get<std::string>() != "decnn-campaign/1")
      throw FormatError(file.string() + ": unsupported campaign format");
    s.name = doc.at("name").get<std::string>();
    s.dataset = doc.at("dataset").get<std::string>();
    for (const auto& r : doc.at("runs"))
      if (r.at("status").get<std::string>() == "ok") s.errors.push_back(r.at("error_rate").get<double>());
    const auto& a = doc.at("aggregate");
    s.stored = {a.at("count").get<std::size_t>(), a.at("mean").get<double>(), a.at("std").get<double>(),
                a.at("best").get<double>()};
  } catch (const json::exception& e) {
    throw FormatError(file.string() + ": schema mismatch: " + e.what());
  }
  s.recomputed = aggregate(s.errors);
  const auto check = [&](const char* what, double stored, double fresh) {
    if (std::abs(stored - fresh) > kAggregateTolerance)
      s.warnings.push_back(file.string() + ": stored " + what + " " + std::to_string(stored) +
                           " differs from recomputed " + std::to_string(fresh));
  };
  if (s.stored.count != s.recomputed.count)
    s.warnings.push_back(file.string() + ": stored run count differs from per-run records");
  check("mean", s.stored.mean, s.recomputed.mean);
  check("std", s.stored.std, s.recomputed.std);
  check("best", s.stored.best, s.recomputed.best);
  return s;
}

struct ReportRow {
  std::string dataset;
  std::string name;
  Aggregate errors;                  // fractions
  std::optional<double> p_welch;     // vs the first campaign of the same dataset
  std::optional<double> p_reference; // one-sample test vs a reference error
};

struct Report {
  std::vector<ReportRow> rows;
  bool has_welch = false;
  bool has_reference = false;
  std::vector<std::string> warnings;

  [[nodiscard]] std::string text() const {
    std::ostringstream out;
    out << std::left << std::setw(10) << "dataset" << std::setw(20) << "campaign" << std::right << std::setw(6)
        << "runs" << std::setw(12) << "mean%" << std::setw(12) << "std%" << std::setw(12) << "best%";
    if (has_welch) out << std::setw(12) << "p(welch)";
    if (has_reference) out << std::setw(12) << "p(ref)";
    out << '\n';
    out << std::fixed;
    for (const auto& r : rows) {
      out << std::left << std::setw(10) << r.dataset << std::setw(20) << r.name << std::right << std::setw(6)
          << r.errors.count << std::setprecision(4) << std::setw(12) << 100.0 * r.errors.mean << std::setw(12)
          << 100.0 * r.errors.std << std::setw(12) << 100.0 * r.errors.best;
      const auto opt = [&](const std::optional<double>& p) {
        if (p) out << std::setw(12) << std::setprecision(6) << *p;
        else out << std::setw(12) << "-";
      };
      if (has_welch) opt(r.p_welch);
      if (has_reference) opt(r.p_reference);
      out << '\n';
    }
    return out.str();
  }

  [[nodiscard]] std::string csv() const {
    std::ostringstream out;
    out << "dataset,campaign,runs,mean_error,std_error,best_error";
    if (has_welch) out << ",p_welch";
    if (has_reference) out << ",p_reference";
    out << '\n' << std::setprecision(17);
    for (const auto& r : rows) {
      out << r.dataset << ',' << r.name << ',' << r.errors.count << ',' << r.errors.mean << ',' << r.errors.std
          << ',' << r.errors.best;
      if (has_welch) out << ',' << (r.p_welch ? std::to_string(*r.p_welch) : "");
      if (has_reference) out << ',' << (r.p_reference ? std::to_string(*r.p_reference) : "");
      out << '\n';
    }
    return out.str();
  }
};

/// One row per campaign. Within a dataset the first campaign is the reference
/// for Welch p-values; `reference_error` adds one-sample p-values.
inline Report make_report(const std::vector<CampaignSummary>& campaigns,
                          std::optional<double> reference_error = std::nullopt) {
  Report report;
  for (const auto& c : campaigns) {
    report.warnings.insert(report.warnings.end(), c.warnings.begin(), c.warnings.end());
    ReportRow row{c.dataset, c.name, c.recomputed, std::nullopt, std::nullopt};
    const auto first = std::find_if(campaigns.begin(), campaigns.end(),
                                    [&](const auto& o) { return o.dataset == c.dataset; });
    if (&*first != &c) {
      report.has_welch = true;
      try {
        row.p_welch = stats::welch_t(first->errors, c.errors).p;
      } catch (const ContractError& e) {
        report.warnings.push_back(c.path + ": no Welch p-value (" + e.what() + ")");
      }
    }
    if (reference_error) {
      report.has_reference = true;
      try {
        row.p_reference = stats::one_sample_t(c.errors, *reference_error).p;
      } catch (const ContractError& e) {
        report.warnings.push_back(c.path + ": no one-sample p-value (" + e.what() + ")");
      }
    }
    report.rows.push_back(std::move(row));
  }
  return report;
}

}  // namespace decnn
