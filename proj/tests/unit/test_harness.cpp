#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>

#include "osep/harness.hpp"

using namespace osep;
namespace fs = std::filesystem;

namespace {

struct CliRun {
  int code = 0;
  std::string out, err;
};

CliRun cli(std::vector<std::string> args) {
  args.insert(args.begin(), "osep_cli");
  std::vector<char*> argv;
  for (auto& a : args) argv.push_back(a.data());
  std::ostringstream out, err;
  CliRun r;
  r.code = cli_main(int(argv.size()), argv.data(), out, err);
  r.out = out.str();
  r.err = err.str();
  return r;
}

fs::path scratch(const std::string& name) {
  fs::path dir = fs::temp_directory_path() / "osep_harness_test";
  fs::create_directories(dir);
  fs::path p = dir / name;
  fs::remove(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

ExperimentConfig lemma_config(std::vector<std::string> ids) {
  ExperimentConfig c;
  c.kind = "lemma";
  c.lemmas = std::move(ids);
  c.timing = false;
  c.threads = 1;
  return c;
}

}  // namespace

TEST(Dispatch, TableIdsAreUnique) {
  std::set<std::string> ids;
  for (const auto& e : check_table()) EXPECT_TRUE(ids.insert(e.id).second) << e.id;
  for (const char* id : {"L2.1", "L2.2", "L2.3", "L2.5", "L2.10", "L2.12", "T2.9", "L4.3", "L4.4", "L4.5", "L5.6",
                         "L5.8", "L5.10", "L5.11", "L6.11", "L6.12", "L7.12", "C6.8", "Eq68-choi-norm", "Eq153"})
    EXPECT_TRUE(ids.count(id)) << id;
  EXPECT_THROW(find_check("L9.99"), UsageError);
}

TEST(Dispatch, Examples) {
  LemmaCheckResult c68 = lemma_check("C6.8", {}, SeedPath(7).child("C6.8", 0));
  EXPECT_TRUE(c68.pass);
  EXPECT_EQ(c68.lemma_id, "C6.8");
  EXPECT_EQ(c68.seed, "7/C6.8=0");

  LemmaCheckResult eq = lemma_check("Eq68-choi-norm", {{"n", 3}}, SeedPath(7));
  EXPECT_NEAR(eq.lhs, 0.5, 1e-9);
  EXPECT_TRUE(eq.pass);
  EXPECT_EQ(eq.parameters.at("n"), 3);

  LemmaCheckResult rate = lemma_check("L2.12", {}, SeedPath(7));
  EXPECT_LE(rate.ratio, 4.0);
  EXPECT_TRUE(rate.pass);
  EXPECT_THROW(lemma_check("L2.12", {{"lambda", 1.5}}, SeedPath(7)), UsageError);
}

TEST(Experiment, EmptyLemmaListGivesNoResults) {
  Report r = run_experiment(lemma_config({}));
  EXPECT_TRUE(r.results.empty());
  EXPECT_TRUE(r.all_pass());
}

TEST(Experiment, UnknownIdIsUsageError) {
  EXPECT_THROW(run_experiment(lemma_config({"L0.0"})), UsageError);
  ExperimentConfig bad = lemma_config({"C6.8"});
  bad.backend = "quantum";
  EXPECT_THROW(run_experiment(bad), UsageError);
}

TEST(Experiment, JsonRoundTripAndCsv) {
  ExperimentConfig cfg = lemma_config({"C6.8", "Eq68-choi-norm", "L2.2"});
  Report r = run_experiment(cfg);
  ASSERT_EQ(r.results.size(), 3u);
  json j = r;
  Report back = j.get<Report>();
  EXPECT_EQ(json(back).dump(), j.dump());
  EXPECT_EQ(back.schema, kReportSchema);

  std::string csv = report_csv(r);
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), long(r.results.size() + 1));
  EXPECT_EQ(csv.rfind("kind,id,", 0), 0u);
}

TEST(Experiment, AttackResultRoundTrip) {
  ExperimentConfig cfg;
  cfg.kind = "attack";
  cfg.attack = "pru";
  cfg.timing = false;
  Report r = run_experiment(cfg);
  ASSERT_EQ(r.results.size(), 1u);
  const auto& a = std::get<AttackReport>(r.results[0]);
  EXPECT_GE(a.advantage, 0.9);
  Report back = json(r).get<Report>();
  EXPECT_EQ(std::get<AttackReport>(back.results[0]).advantage, a.advantage);
  EXPECT_TRUE(back.all_pass());
}

TEST(Experiment, NoTimingIsByteIdentical) {
  ExperimentConfig cfg = lemma_config({"L2.1", "L4.4", "Eq153"});
  cfg.threads = 2;
  std::string a = json(run_experiment(cfg)).dump();
  std::string b = json(run_experiment(cfg)).dump();
  EXPECT_EQ(a, b);
}

TEST(Experiment, SweepProducesPlotPoints) {
  ExperimentConfig cfg = lemma_config({"Eq68-choi-norm"});
  cfg.sweep = "n=1,2,3";
  Report r = run_experiment(cfg);
  ASSERT_EQ(r.sweep.size(), 3u);
  EXPECT_EQ(r.sweep_param, "n");
  EXPECT_EQ(r.sweep[2].x, 3);
  std::string plot = plot_csv(r);
  EXPECT_EQ(std::count(plot.begin(), plot.end(), '\n'), 4);
  EXPECT_THROW(parse_sweep("n="), UsageError);
  EXPECT_THROW(parse_sweep("n=1,x"), UsageError);
}

TEST(Config, FileRejectsUnknownKeys) {
  fs::path p = scratch("bad.json");
  std::ofstream(p) << R"({"kind":"lemma","lamda":3})";
  EXPECT_THROW(load_config_file(p.string()), UsageError);
  EXPECT_THROW(load_config_file((p.parent_path() / "missing.json").string()), std::exception);
}

TEST(Config, FlagsOverrideFileOverrideDefaults) {
  fs::path conf = scratch("conf.json");
  std::ofstream(conf) << R"({"seed": 11, "p": 30})";
  fs::path out = scratch("prec.json");
  CliRun r = cli({"--config", conf.string(), "--seed", "13", "--no-timing", "--quiet", "--out", out.string(), "lemma",
                  "C6.8"});
  ASSERT_EQ(r.code, 0) << r.err;
  json j = json::parse(slurp(out));
  EXPECT_EQ(j["config"]["seed"], 13);  // flag beats file
  EXPECT_EQ(j["config"]["p"], 30);     // file beats default
  EXPECT_EQ(j["config"]["keys"], 4);   // default
}

TEST(Cli, ExitCodes) {
  EXPECT_EQ(cli({"--quiet", "--no-timing", "lemma", "C6.8"}).code, 0);
  CliRun fail = cli({"--no-timing", "--param", "C=0.01", "lemma", "L2.12"});
  EXPECT_EQ(fail.code, 1);
  EXPECT_NE(fail.err.find("FAIL L2.12"), std::string::npos);
  EXPECT_EQ(cli({"frobnicate"}).code, 2);
  EXPECT_EQ(cli({"lemma", "L0.0"}).code, 2);
  EXPECT_EQ(cli({"--param", "C", "lemma", "C6.8"}).code, 2);
  EXPECT_EQ(cli({"--backend", "quantum", "lemma", "C6.8"}).code, 2);
  EXPECT_EQ(cli({"--lambda", "6", "--ell", "2", "attack", "pru"}).code, 2);  // sizing
  EXPECT_EQ(cli({"--out", "/nonexistent-dir/x/report.json", "lemma", "C6.8"}).code, 2);
  CliRun list = cli({"list"});
  EXPECT_EQ(list.code, 0);
  EXPECT_NE(list.out.find("Eq153"), std::string::npos);
}

TEST(Cli, WritesReportManifestAndPlot) {
  fs::path out = scratch("sweep.csv");
  fs::remove(out.string() + ".manifest.json");
  fs::remove(out.string() + ".plot.csv");
  CliRun r = cli({"--quiet", "--no-timing", "--format", "csv", "--sweep", "n=1,2", "--out", out.string(), "lemma",
                  "Eq68-choi-norm"});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_TRUE(r.out.empty());
  std::string csv = slurp(out);
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 3);
  json man = json::parse(slurp(out.string() + ".manifest.json"));
  EXPECT_EQ(man["master_seed"], 7);
  EXPECT_EQ(man["swap_family_seed"], "7/swap_family=0");
  EXPECT_TRUE(fs::exists(out.string() + ".plot.csv"));
  EXPECT_FALSE(fs::exists(out.string() + ".tmp"));
}

TEST(Cli, StdoutReportIsParseable) {
  CliRun r = cli({"--quiet", "--no-timing", "prfsg-game"});
  EXPECT_EQ(r.code, 0) << r.err;
  json j = json::parse(r.out);
  ASSERT_EQ(j["results"].size(), 2u);
  EXPECT_EQ(j["results"][0]["result"]["lemma_id"], "L4.3");
}

TEST(Suite, Complete) {
  EXPECT_NO_THROW(assert_suite_complete());
  auto fast = suite_items("fast");
  EXPECT_EQ(fast.size(), check_table().size() + 3);
  EXPECT_GT(suite_items("all").size(), fast.size());
}
