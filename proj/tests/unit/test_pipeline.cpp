#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "reg/error.hpp"
#include "reg/json_io.hpp"
#include "reg/pipeline.hpp"
#include "test_helpers.hpp"

namespace reg {
namespace {

namespace fs = std::filesystem;

std::string fresh_dir(const std::string& name) {
  auto p = fs::temp_directory_path() / ("reg_pipeline_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p.string();
}

PipelineConfig fixture_config(const std::string& work) {
  auto c = PipelineConfig::load(testing::data_path("fixture/config.json"));
  c.work_dir = work;
  return c;
}

void run_through(const PipelineConfig& c, const std::string& last) {
  std::ostringstream log;
  for (const auto& stage : stage_names()) {
    run_stage(stage, c, log);
    if (stage == last) break;
  }
}

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

TEST(PipelineConfig, CollectsEveryProblem) {
  auto j = nlohmann::json::parse(R"({"kg": "kg.tsv", "epochs": "many", "colour": 1, "also_unknown": true})");
  try {
    PipelineConfig::from_json(j, "/base");
    FAIL();
  } catch (const ConfigError& e) {
    std::string what = e.what();
    EXPECT_NE(what.find("epochs"), std::string::npos);
    EXPECT_NE(what.find("colour"), std::string::npos);
    EXPECT_NE(what.find("also_unknown"), std::string::npos);
  }
  auto ok = PipelineConfig::from_json(nlohmann::json::parse(R"({"kg": "kg.tsv"})"), "/base");
  EXPECT_EQ(ok.kg, "/base/kg.tsv");
  EXPECT_EQ(ok.effective_k(), 500u);
  ok.retrieval_level = "entity";
  EXPECT_EQ(ok.effective_k(), 700u);
  ok.k = 3;
  EXPECT_EQ(ok.effective_k(), 3u);
}

TEST(PipelineConfig, ViolationsPerStage) {
  PipelineConfig c;
  c.kg = "/does/not/exist.tsv";
  c.retrieval_level = "path";
  EXPECT_FALSE(c.violations("ingest").empty());
  EXPECT_FALSE(c.violations("retrieve").empty());
  EXPECT_THROW(require_valid(c, "ingest"), ConfigError);
  EXPECT_THROW(run_stage("bake", c, std::cout), ConfigError);
  auto good = fixture_config(fresh_dir("valid"));
  EXPECT_TRUE(good.violations("ingest").empty());
}

TEST(Pipeline, MissingUpstreamArtifactNamesProducer) {
  auto c = fixture_config(fresh_dir("missing"));
  std::ostringstream log;
  try {
    cmd_train(c, log);
    FAIL();
  } catch (const MissingArtifact& e) {
    EXPECT_EQ(e.stage(), "ingest");
  }
  cmd_ingest(c, log);
  try {
    cmd_train(c, log);
    FAIL();
  } catch (const MissingArtifact& e) {
    EXPECT_EQ(e.stage(), "refine");
    EXPECT_NE(std::string(e.what()).find("reg refine"), std::string::npos);
  }
}

TEST(Pipeline, FixtureRunAnswersEveryQuestion) {
  auto c = fixture_config(fresh_dir("full"));
  run_through(c, "evaluate");
  auto report = nlohmann::json::parse(slurp(c.artifact("report.json")));
  EXPECT_EQ(report["hit"], 1.0);
  EXPECT_GE(report["hit_at_1"].get<double>(), 10.0 / 12.0);
  EXPECT_TRUE(fs::exists(c.artifact("report.csv")));
}

TEST(Pipeline, ArtifactsAreReproducible) {
  auto a = fixture_config(fresh_dir("repro_a"));
  auto b = fixture_config(fresh_dir("repro_b"));
  b.workers = 3;
  run_through(a, "answer");
  run_through(b, "answer");
  for (const char* name : {"pools.jsonl", "supervision.jsonl", "model.json", "retrieval.jsonl", "chains.jsonl",
                           "predictions.jsonl"})
    EXPECT_EQ(slurp(a.artifact(name)), slurp(b.artifact(name))) << name;
}

TEST(Pipeline, FlatTriplePromptsDifferFromChains) {
  auto c = fixture_config(fresh_dir("flat"));
  c.dump_prompts = true;
  run_through(c, "answer");
  auto chains = slurp(c.artifact("prompts.jsonl"));
  c.no_reorganize = true;
  std::ostringstream log;
  cmd_answer(c, log);
  auto flat = slurp(c.artifact("prompts.jsonl"));
  EXPECT_NE(chains, flat);
  EXPECT_NE(flat.find("(Inception, release_year, 2010)"), std::string::npos);
  EXPECT_EQ(chains.find("(Inception, release_year, 2010)"), std::string::npos);
}

TEST(Pipeline, NoRefineWritesWeakSupervision) {
  auto c = fixture_config(fresh_dir("weak"));
  c.no_refine = true;
  run_through(c, "refine");
  auto records = json_io::read_jsonl_file(c.artifact("supervision.jsonl"));
  ASSERT_EQ(records.size(), 12u);
  for (const auto& r : records) EXPECT_EQ(r["refiner_tag"], "weak");
}

TEST(Pipeline, EntityLevelRuns) {
  auto c = fixture_config(fresh_dir("entity"));
  c.retrieval_level = "entity";
  c.epochs = 10;
  c.gnn_hidden = 8;
  c.gnn_layers = 2;
  run_through(c, "evaluate");
  auto retrieval = json_io::read_jsonl_file(c.artifact("retrieval.jsonl"));
  ASSERT_EQ(retrieval.size(), 12u);
  EXPECT_EQ(retrieval[0]["k"], 700);
}

TEST(Pipeline, SimulateWritesSummary) {
  auto dir = fresh_dir("sim");
  auto exp = dir + "/experiment.json";
  std::ofstream(exp) << R"({"N": 60, "K": 3, "s0": 1, "delta0": 0.1, "S": 10, "threshold": 0.1,
                            "max_rounds": 20000, "trials": 20, "seed": 3})";
  PipelineConfig c;
  c.work_dir = dir + "/work";
  c.simulation = exp;
  std::ostringstream log;
  run_stage("simulate", c, log);
  auto summary = nlohmann::json::parse(slurp(c.artifact("sim_summary.json")));
  EXPECT_EQ(summary["trials"], 20);
  EXPECT_TRUE(fs::exists(c.artifact("sim_trials.csv")));
}

int cli(const std::string& args) {
  int status = std::system((std::string(REG_CLI_PATH) + " " + args + " > /dev/null 2>&1").c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

TEST(Cli, ExitCodes) {
  auto dir = fresh_dir("cli");
  auto config = testing::data_path("fixture/config.json");
  EXPECT_EQ(cli("--config " + config + " --work-dir " + dir + " ingest"), 0);
  EXPECT_EQ(cli("--config " + config + " --work-dir " + dir + " retrieve"), 3);
  EXPECT_EQ(cli("--config /nonexistent.json ingest"), 2);
  EXPECT_EQ(cli("--bogus-flag ingest"), 2);
  EXPECT_EQ(cli("--config " + config + " --work-dir " + dir + " candidates"), 0);
  std::ofstream(dir + "/empty.jsonl").flush();
  EXPECT_EQ(cli("--config " + config + " --work-dir " + dir + " --llm replay --replay " + dir + "/empty.jsonl refine"),
            4);
}

}  // namespace
}  // namespace reg
