#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>

#include "decnn/campaign.hpp"

using namespace decnn;
namespace fs = std::filesystem;

namespace {

fs::path fresh_dir(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("decnn_campaign_" + name);
  fs::remove_all(p);
  return p;
}

RunConfig surrogate_config(const fs::path& out, std::size_t runs) {
  RunConfig c;
  c.name = "surrogate";
  c.evaluator = EvaluatorKind::surrogate_target;
  c.evolution.population_size = 10;
  c.evolution.generations = 5;
  c.runs = runs;
  c.output = out.string();
  return c;
}

}  // namespace

TEST(Config, JsonRoundtripKeepsEveryField) {
  RunConfig c;
  c.name = "x";
  c.evolution.F = 0.3;
  c.evolution.seed = 77;
  c.evaluation.max_macs = 123;
  c.evaluation.activation = cnn::Activation::tanh;
  c.evaluator = EvaluatorKind::surrogate_length;
  c.surrogate.ideal_length = 6;
  c.data.train = "t.amat";
  c.runs = 3;
  const RunConfig back = run_config_from_json(to_json(c));
  EXPECT_EQ(to_json(back), to_json(c));
}

TEST(Config, DefaultsFollowReferenceSettings) {
  const RunConfig c = run_config_from_json(json::object());
  EXPECT_EQ(c.evolution.population_size, 30u);
  EXPECT_EQ(c.evolution.generations, 20u);
  EXPECT_DOUBLE_EQ(c.evolution.F, 0.6);
  EXPECT_DOUBLE_EQ(c.evolution.Cr, 0.45);
  EXPECT_DOUBLE_EQ(c.evolution.rho, 2.0);
  EXPECT_DOUBLE_EQ(c.evolution.mu, 10.0);
  EXPECT_DOUBLE_EQ(c.evolution.sigma, 1.0);
  EXPECT_EQ(c.evaluation.epochs, 5u);
  EXPECT_DOUBLE_EQ(c.evaluation.fitness_fraction, 0.1);
  EXPECT_EQ(c.runs, 30u);
}

TEST(Config, RejectsUnknownKeysAndBadTypes) {
  EXPECT_THROW(run_config_from_json(json{{"bogus", 1}}), ConfigError);
  EXPECT_THROW(run_config_from_json(json{{"evolution", {{"f", 0.5}}}}), ConfigError);
  EXPECT_THROW(run_config_from_json(json{{"evolution", {{"F", "high"}}}}), ConfigError);
  EXPECT_THROW(run_config_from_json(json{{"evaluator", "magic"}}), ConfigError);
  EXPECT_THROW(run_config_from_json(json{{"evaluator", 3}}), ConfigError);
  EXPECT_THROW(run_config_from_json(json{{"surrogate", {{"target", {"40.0"}}}}}), ConfigError);
}

TEST(Config, Overrides) {
  json doc = json::object();
  apply_override(doc, "evolution.F=0.25");
  apply_override(doc, "name=my run");
  apply_override(doc, "evaluator=surrogate_length");
  const RunConfig c = run_config_from_json(doc);
  EXPECT_DOUBLE_EQ(c.evolution.F, 0.25);
  EXPECT_EQ(c.name, "my run");
  EXPECT_EQ(c.evaluator, EvaluatorKind::surrogate_length);
  EXPECT_THROW(apply_override(doc, "novalue"), ConfigError);
  EXPECT_THROW(apply_override(doc, "a..b=1"), ConfigError);
}

TEST(Config, Validation) {
  RunConfig c;
  EXPECT_THROW(c.validate(), ConfigError);  // cnn without data
  c.evaluator = EvaluatorKind::surrogate_length;
  EXPECT_NO_THROW(c.validate());
  c.runs = 0;
  EXPECT_THROW(c.validate(), ConfigError);
}

TEST(Config, FingerprintIgnoresRunCountOutputAndWorkers) {
  RunConfig a;
  RunConfig b = a;
  b.runs = 99;
  b.output = "elsewhere";
  b.evolution.workers = 8;
  EXPECT_EQ(config_fingerprint(a), config_fingerprint(b));
  b.evolution.seed = 2;
  EXPECT_NE(config_fingerprint(a), config_fingerprint(b));
}

TEST(Config, DataDirectoryEnvironment) {
  ::setenv("DECNN_DATA_DIR", "/data/root", 1);
  EXPECT_EQ(resolve_data_path("mb.amat"), "/data/root/mb.amat");
  EXPECT_EQ(resolve_data_path("/abs/mb.amat"), "/abs/mb.amat");
  ::unsetenv("DECNN_DATA_DIR");
  EXPECT_EQ(resolve_data_path("mb.amat"), "mb.amat");
}

TEST(Aggregate, Formulas) {
  const std::vector<double> e{0.1, 0.2, 0.3};
  const auto a = aggregate(e);
  EXPECT_EQ(a.count, 3u);
  EXPECT_NEAR(a.mean, 0.2, 1e-15);
  EXPECT_NEAR(a.std, 0.1, 1e-15);
  EXPECT_EQ(a.best, 0.1);
  const std::vector<double> one{0.4};
  const auto b = aggregate(one);
  EXPECT_EQ(b.mean, 0.4);
  EXPECT_EQ(b.best, 0.4);
  EXPECT_EQ(b.std, 0.0);
}

TEST(Campaign, SingleRunHasZeroStd) {
  const auto dir = fresh_dir("single");
  const auto r = run_campaign(surrogate_config(dir, 1));
  ASSERT_EQ(r.succeeded, 1u);
  EXPECT_EQ(r.std_error, 0.0);
  EXPECT_EQ(r.mean_error, r.best_error);
  fs::remove_all(dir);
}

TEST(Campaign, SeedsAndPersistence) {
  const auto dir = fresh_dir("persist");
  RunConfig c = surrogate_config(dir, 3);
  c.evolution.seed = 40;
  const auto r = run_campaign(c);
  ASSERT_EQ(r.runs.size(), 3u);
  for (std::size_t i = 0; i < 3; ++i) {
    EXPECT_EQ(r.runs[i].seed, 40 + i);
    EXPECT_TRUE(fs::exists(dir / detail::run_file_name(i)));
  }
  const auto summary = load_campaign_summary(dir.string());
  EXPECT_TRUE(summary.warnings.empty());
  EXPECT_EQ(summary.errors.size(), 3u);
  EXPECT_NEAR(summary.stored.mean, r.mean_error, 1e-15);
  fs::remove_all(dir);
}

TEST(Campaign, ResumeSkipsFinishedRuns) {
  const auto dir = fresh_dir("resume");
  RunConfig c = surrogate_config(dir, 3);
  const auto first = run_campaign(c);
  fs::remove(dir / detail::run_file_name(2));
  // Tamper with run 1 so a recomputation would be visible.
  json doc;
  {
    std::ifstream in(dir / detail::run_file_name(1));
    in >> doc;
  }
  doc["error_rate"] = 0.123;
  std::ofstream(dir / detail::run_file_name(1)) << doc.dump();

  c.runs = 5;
  int resumed = 0;
  const auto second = run_campaign(c, [&](const RunRecord&, bool r) { resumed += r; });
  EXPECT_EQ(resumed, 2);
  EXPECT_EQ(second.resumed, 2u);
  EXPECT_EQ(second.runs[1].error_rate, 0.123);
  EXPECT_EQ(second.runs[2].error_rate, first.runs[2].error_rate);
  EXPECT_EQ(second.runs.size(), 5u);

  // A changed configuration does not reuse old records.
  c.evolution.F = 0.5;
  const auto third = run_campaign(c);
  EXPECT_EQ(third.resumed, 0u);
  fs::remove_all(dir);
}

TEST(Campaign, SameConfigGivesIdenticalResults) {
  const auto d1 = fresh_dir("det1"), d2 = fresh_dir("det2");
  RunConfig c1 = surrogate_config(d1, 3), c2 = surrogate_config(d2, 3);
  c2.evolution.workers = 3;
  const auto a = run_campaign(c1), b = run_campaign(c2);
  for (std::size_t i = 0; i < 3; ++i) {
    EXPECT_EQ(a.runs[i].best_fitness, b.runs[i].best_fitness);
    EXPECT_EQ(a.runs[i].document["trace"], b.runs[i].document["trace"]);
  }
  fs::remove_all(d1);
  fs::remove_all(d2);
}

TEST(Campaign, FailingRunIsRecordedAndCampaignContinues) {
  const auto dir = fresh_dir("fail");
  const auto data = fresh_dir("fail_data");
  fs::create_directories(data);
  {
    std::ofstream out(data / "tiny.amat");
    for (int i = 0; i < 12; ++i) {
      for (int k = 0; k < 784; ++k) out << "0.5 ";
      out << i % 2 << "\n";
    }
  }
  RunConfig c;
  c.output = dir.string();
  c.runs = 2;
  c.evolution.population_size = 4;
  c.evolution.generations = 1;
  c.data.train = (data / "tiny.amat").string();
  c.evaluation.train_subset = 50;  // larger than the 12 rows: every run fails its split
  const auto r = run_campaign(c);
  ASSERT_EQ(r.runs.size(), 2u);
  EXPECT_FALSE(r.runs[0].ok);
  EXPECT_FALSE(r.runs[0].reason.empty());
  EXPECT_EQ(r.succeeded, 0u);
  fs::remove_all(dir);
  fs::remove_all(data);
}

TEST(CnnRun, SmallBlobsCampaignRetrainsOnTest) {
  const auto data_dir = fresh_dir("cnn_data");
  fs::create_directories(data_dir);
  const auto write = [&](const std::string& name, const LabeledDataset& d) {
    std::ofstream out(data_dir / name);
    for (std::size_t i = 0; i < d.size(); ++i) {
      for (double p : d.image(i)) out << p << ' ';
      out << d.labels[i] << '\n';
    }
  };
  write("train.amat", synth_blobs(3, 40, 1));
  write("test.amat", synth_blobs(3, 20, 2));
  RunConfig c;
  c.data.dataset = "BLOBS";
  c.data.train = (data_dir / "train.amat").string();
  c.data.test = (data_dir / "test.amat").string();
  c.evolution.population_size = 4;
  c.evolution.generations = 1;
  c.evolution.mu = 2;
  c.evaluation.epochs = 1;
  c.evaluation.train_subset = 0;
  c.evaluation.max_macs = 200000;
  const CampaignData data = load_campaign_data(c.data);
  const RunRecord rec = execute_run(c, 0, &data);
  EXPECT_TRUE(rec.ok);
  const auto& retrain = rec.document.at("retrain");
  EXPECT_EQ(retrain.at("train_size").get<std::size_t>() + retrain.at("fitness_size").get<std::size_t>(), 120u);
  EXPECT_EQ(retrain.at("test_size").get<std::size_t>(), 60u);
  EXPECT_NEAR(rec.error_rate, 1.0 - retrain.at("test_accuracy").get<double>(), 1e-15);
  EXPECT_EQ(rec.document.at("trace").size(), 2u);
  fs::remove_all(data_dir);
}

namespace {

fs::path write_index(const std::string& name, const std::string& dataset, const std::vector<double>& errors,
                     double stored_mean_shift = 0.0) {
  const fs::path dir = fresh_dir(name);
  fs::create_directories(dir);
  json runs = json::array();
  for (std::size_t i = 0; i < errors.size(); ++i) runs.push_back({{"run", i}, {"status", "ok"}, {"error_rate", errors[i]}});
  const auto a = aggregate(errors);
  json doc{{"format", "decnn-campaign/1"},
           {"name", name},
           {"dataset", dataset},
           {"runs", runs},
           {"aggregate", {{"count", a.count}, {"mean", a.mean + stored_mean_shift}, {"std", a.std}, {"best", a.best}}}};
  std::ofstream(dir / "campaign.json") << doc.dump();
  return dir;
}

}  // namespace

TEST(Report, SingleCampaignHasNoPValues) {
  const auto d = write_index("rep_single", "MB", {0.1, 0.2, 0.15});
  const auto rep = make_report({load_campaign_summary(d.string())});
  EXPECT_FALSE(rep.has_welch);
  EXPECT_EQ(rep.rows.size(), 1u);
  EXPECT_EQ(rep.text().find("p(welch)"), std::string::npos);
  EXPECT_EQ(rep.csv().find("p_welch"), std::string::npos);
  fs::remove_all(d);
}

TEST(Report, TwoCampaignsGetWelchColumn) {
  const auto a = write_index("rep_a", "MB", {0.10, 0.12, 0.11, 0.13});
  const auto b = write_index("rep_b", "MB", {0.20, 0.22, 0.21, 0.23});
  const auto rep = make_report({load_campaign_summary(a.string()), load_campaign_summary(b.string())}, 0.1);
  ASSERT_TRUE(rep.has_welch);
  EXPECT_FALSE(rep.rows[0].p_welch);
  ASSERT_TRUE(rep.rows[1].p_welch);
  EXPECT_LT(*rep.rows[1].p_welch, 0.05);
  ASSERT_TRUE(rep.rows[0].p_reference);
  EXPECT_NE(rep.text().find("p(welch)"), std::string::npos);
  EXPECT_NE(rep.csv().find("dataset,campaign,runs,mean_error,std_error,best_error,p_welch,p_reference"),
            std::string::npos);
  fs::remove_all(a);
  fs::remove_all(b);
}

TEST(Report, IntegrityWarningOnTamperedAggregate) {
  const auto d = write_index("rep_bad", "MB", {0.1, 0.2}, 1e-6);
  const auto s = load_campaign_summary(d.string());
  ASSERT_EQ(s.warnings.size(), 1u);
  EXPECT_NE(s.warnings[0].find("mean"), std::string::npos);
  EXPECT_EQ(make_report({s}).warnings.size(), 1u);
  fs::remove_all(d);
}

TEST(Report, SchemaMismatchNamesFile) {
  const auto d = fresh_dir("rep_schema");
  fs::create_directories(d);
  std::ofstream(d / "campaign.json") << R"({"format":"decnn-campaign/1","name":"x"})";
  try {
    load_campaign_summary(d.string());
    FAIL();
  } catch (const FormatError& e) {
    EXPECT_NE(std::string(e.what()).find("campaign.json"), std::string::npos);
  }
  EXPECT_THROW(load_campaign_summary((d / "missing").string()), FormatError);
  fs::remove_all(d);
}

TEST(Report, SeparatedSurrogateCampaigns) {
  // Same engine, two different optima: an easy short target and a long one.
  const auto da = fresh_dir("sep_a"), db = fresh_dir("sep_b");
  RunConfig a = surrogate_config(da, 6), b = surrogate_config(db, 6);
  a.data.dataset = b.data.dataset = "SURR";
  b.name = "long-target";
  b.surrogate.target = {"1.0", "3.7", "9.9", "20.1", "27.3", "16.0", "5.5", "30.2", "12.12", "22.0", "2.2", "7.77"};
  run_campaign(a);
  run_campaign(b);
  const auto rep = make_report({load_campaign_summary(da.string()), load_campaign_summary(db.string())});
  ASSERT_TRUE(rep.rows[1].p_welch);
  EXPECT_LT(*rep.rows[1].p_welch, 0.05);
  fs::remove_all(da);
  fs::remove_all(db);
}
