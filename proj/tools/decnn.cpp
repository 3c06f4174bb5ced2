// decnn: command-line front end for evolving CNN architectures.
//
//   decnn evolve   --config run.json [--set key=value ...]
//   decnn campaign --config run.json [--runs N] [--output DIR]
//   decnn report   results/a results/b [--csv table.csv] [--reference-error 0.05]
//   decnn encode   conv:2,32,2 pool:3,2,max fc:1024
//   decnn decode   2.125 24.18 19.255
//
// Exit codes: 0 success, 1 config error, 2 data error, 3 runtime failure.

#include <CLI11.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "decnn/decnn.hpp"

namespace {

enum ExitCode { kOk = 0, kConfigError = 1, kDataError = 2, kRuntimeError = 3 };

struct ConfigOptions {
  std::string config_path;
  std::vector<std::string> overrides;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> runs;
  std::optional<std::string> output;
  std::optional<std::size_t> workers;
};

void add_config_options(CLI::App* cmd, ConfigOptions& opt) {
  cmd->add_option("-c,--config", opt.config_path, "JSON run configuration");
  cmd->add_option("-s,--set", opt.overrides, "Override a config key, e.g. evolution.F=0.5")->take_all();
  cmd->add_option("--seed", opt.seed, "Base seed (evolution.seed)");
  cmd->add_option("--workers", opt.workers, "Concurrent fitness evaluations (evolution.workers)");
}

decnn::RunConfig resolve_config(const ConfigOptions& opt) {
  decnn::json doc = opt.config_path.empty() ? decnn::json::object() : decnn::load_config_document(opt.config_path);
  for (const auto& o : opt.overrides) decnn::apply_override(doc, o);
  if (opt.seed) doc["evolution"]["seed"] = *opt.seed;
  if (opt.workers) doc["evolution"]["workers"] = *opt.workers;
  if (opt.runs) doc["runs"] = *opt.runs;
  if (opt.output) doc["output"] = *opt.output;
  decnn::RunConfig config = decnn::run_config_from_json(doc);
  config.validate();
  return config;
}

void print_generation(const decnn::GenerationRecord& r) {
  std::cerr << "gen " << r.generation << "  best " << r.best_fitness << "  mean " << r.mean_fitness
            << "  mean_len " << r.mean_length << '\n';
}

int cmd_evolve(const ConfigOptions& opt, bool verbose) {
  const decnn::RunConfig config = resolve_config(opt);
  std::optional<decnn::CampaignData> data;
  if (config.evaluator == decnn::EvaluatorKind::cnn) data = decnn::load_campaign_data(config.data);
  decnn::GenerationObserver observer;
  if (verbose) observer = print_generation;
  decnn::RunRecord rec = decnn::execute_run(config, 0, data ? &*data : nullptr, observer);
  rec.document["fingerprint"] = decnn::config_fingerprint(config);
  rec.document["config"] = decnn::to_json(config);

  std::cout << "best fitness " << rec.best_fitness << "  error rate " << rec.error_rate << '\n';
  for (const auto& layer : rec.document["best"]["architecture"])
    std::cout << "  " << layer["ip"].get<std::string>() << "  " << layer["layer"].get<std::string>() << '\n';
  if (opt.output) {
    std::ofstream out(*opt.output);
    if (!out) throw std::runtime_error("cannot write " + *opt.output);
    out << rec.document.dump(2) << '\n';
  }
  return kOk;
}

int cmd_campaign(const ConfigOptions& opt) {
  const decnn::RunConfig config = resolve_config(opt);
  const auto result = decnn::run_campaign(config, [&](const decnn::RunRecord& r, bool resumed) {
    std::cerr << "run " << r.run << " (seed " << r.seed << ")" << (resumed ? " [resumed]" : "") << ": ";
    if (r.ok) std::cerr << "error rate " << r.error_rate << '\n';
    else std::cerr << "FAILED " << r.reason << '\n';
  });
  std::cout << config.name << " [" << config.data.dataset << "] runs " << result.succeeded << "/" << result.runs.size()
            << "  mean error " << result.mean_error << "  std " << result.std_error << "  best " << result.best_error
            << '\n';
  return result.succeeded == 0 ? kRuntimeError : kOk;
}

int cmd_report(const std::vector<std::string>& paths, const std::string& csv_path,
               std::optional<double> reference_error) {
  std::vector<decnn::CampaignSummary> campaigns;
  for (const auto& p : paths) campaigns.push_back(decnn::load_campaign_summary(p));
  const decnn::Report report = decnn::make_report(campaigns, reference_error);
  for (const auto& w : report.warnings) std::cerr << "warning: " << w << '\n';
  std::cout << report.text();
  if (!csv_path.empty()) {
    std::ofstream out(csv_path);
    if (!out) throw std::runtime_error("cannot write " + csv_path);
    out << report.csv();
  }
  return kOk;
}

int cmd_encode(const std::vector<std::string>& layers) {
  for (const auto& text : layers) {
    const decnn::LayerGene gene = decnn::parse_layer(text);
    const decnn::InterfaceValue v = decnn::encode_layer(gene);
    std::cout << decnn::format_ip(v) << "  " << v.value() << "  " << decnn::describe(gene) << '\n';
  }
  return kOk;
}

int cmd_decode(const std::vector<std::string>& values) {
  for (const auto& text : values) {
    decnn::InterfaceValue v;
    if (text.find('.') != std::string::npos) {
      v = decnn::parse_ip(text);
    } else {
      try {
        v = decnn::InterfaceValue(std::stoi(text));
      } catch (const std::invalid_argument&) {
        throw decnn::ParseError("not an address or integer: " + text);
      }
    }
    const auto gene = decnn::decode_interface(v);
    std::cout << decnn::format_ip(v) << "  " << decnn::layer_type_name(decnn::subnet_of(v).layer_type) << "  "
              << decnn::describe(gene) << "  (canonical " << decnn::format_ip(decnn::canonicalize(v)) << ")\n";
  }
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Variable-length differential evolution of CNN architectures"};
  app.require_subcommand(1);
  bool verbose = false;
  app.add_flag("-v,--verbose", verbose, "Per-generation progress on stderr");

  ConfigOptions evolve_opt;
  auto* evolve = app.add_subcommand("evolve", "Run a single evolution");
  add_config_options(evolve, evolve_opt);
  evolve->add_option("-o,--output", evolve_opt.output, "Write the run record (JSON) here");

  ConfigOptions campaign_opt;
  auto* campaign = app.add_subcommand("campaign", "Run seeded independent evolutions");
  add_config_options(campaign, campaign_opt);
  campaign->add_option("-r,--runs", campaign_opt.runs, "Number of runs");
  campaign->add_option("-o,--output", campaign_opt.output, "Result directory");

  std::vector<std::string> report_paths;
  std::string csv_path;
  std::optional<double> reference_error;
  auto* report = app.add_subcommand("report", "Aggregate and compare campaign results");
  report->add_option("campaigns", report_paths, "Campaign directories or campaign.json files")->required();
  report->add_option("--csv", csv_path, "Also write the table as CSV");
  report->add_option("--reference-error", reference_error, "One-sample t-test against this error rate (fraction)");

  std::vector<std::string> encode_layers;
  auto* encode = app.add_subcommand("encode", "Layer descriptions to IP text (conv:f,m,s pool:k,s,max|avg fc:n)");
  encode->add_option("layers", encode_layers)->required();

  std::vector<std::string> decode_values;
  auto* decode = app.add_subcommand("decode", "IP text or integers to layer descriptions");
  decode->add_option("values", decode_values)->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kConfigError;
  }

  try {
    if (*evolve) return cmd_evolve(evolve_opt, verbose);
    if (*campaign) return cmd_campaign(campaign_opt);
    if (*report) return cmd_report(report_paths, csv_path, reference_error);
    if (*encode) return cmd_encode(encode_layers);
    if (*decode) return cmd_decode(decode_values);
  } catch (const decnn::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kConfigError;
  } catch (const decnn::RangeError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kConfigError;
  } catch (const decnn::ParseError& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return kDataError;
  } catch (const decnn::FormatError& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return kDataError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kRuntimeError;
  }
  return kOk;
}
