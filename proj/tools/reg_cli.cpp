// reg: command-line driver for the retrieval pipeline.

#include <CLI11.hpp>
#include <iostream>
#include <optional>
#include <string>

#include "reg/error.hpp"
#include "reg/pipeline.hpp"

namespace {

struct Overrides {
  std::optional<std::string> work_dir, llm, replay, level, experiment;
  std::optional<std::size_t> limit, workers, k, max_length, epochs;
  std::optional<std::uint64_t> seed;
  bool no_refine = false, no_reorganize = false, dump_prompts = false;

  void apply(reg::PipelineConfig& c) const {
    if (work_dir) c.work_dir = *work_dir;
    if (llm) c.llm = *llm;
    if (replay) c.replay_path = *replay;
    if (level) c.retrieval_level = *level;
    if (experiment) c.simulation = *experiment;
    if (limit) c.limit = *limit;
    if (workers) c.workers = *workers;
    if (k) c.k = *k;
    if (max_length) c.max_chain_length = *max_length;
    if (epochs) c.epochs = *epochs;
    if (seed) c.seed = *seed;
    c.no_refine = c.no_refine || no_refine;
    c.no_reorganize = c.no_reorganize || no_reorganize;
    c.dump_prompts = c.dump_prompts || dump_prompts;
  }
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Subgraph retrieval and evidence reorganization for KGQA"};
  app.require_subcommand(1);
  std::string config_path;
  Overrides ov;
  app.add_option("-c,--config", config_path, "pipeline config (JSON)");
  app.add_option("--work-dir", ov.work_dir, "artifact directory");
  app.add_option("--llm", ov.llm, "LLM backend")->check(CLI::IsMember({"mock", "replay", "remote"}));
  app.add_option("--replay", ov.replay, "replay store (JSONL)");
  app.add_option("--level", ov.level, "retrieval level")->check(CLI::IsMember({"triple", "entity"}));
  app.add_option("--experiment", ov.experiment, "simulation experiment config (JSON)");
  app.add_option("--limit", ov.limit, "refine only the first N training questions");
  app.add_option("--workers", ov.workers, "parallel workers per stage");
  app.add_option("-k,--top-k", ov.k, "retrieved triples per question");
  app.add_option("--max-length", ov.max_length, "evidence chain length cap, 0 for none");
  app.add_option("--epochs", ov.epochs, "training epochs");
  app.add_option("--seed", ov.seed, "training seed");
  app.add_flag("--no-refine", ov.no_refine, "train on shortest-path supervision");
  app.add_flag("--no-reorganize", ov.no_reorganize, "prompt with flat triples");
  app.add_flag("--dump-prompts", ov.dump_prompts, "write prompts.jsonl");

  std::vector<std::string> stages;
  for (const auto& name : reg::stage_names())
    app.add_subcommand(name, "run the " + name + " stage")->callback([&stages, name] { stages.push_back(name); });
  app.add_subcommand("run", "run every stage from ingest to evaluate")->callback([&stages] {
    for (const auto& name : reg::stage_names())
      if (name != "simulate") stages.push_back(name);
  });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    auto config = config_path.empty() ? reg::PipelineConfig{} : reg::PipelineConfig::load(config_path);
    ov.apply(config);
    for (const auto& stage : stages) reg::run_stage(stage, config, std::cerr);
    return 0;
  } catch (const reg::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 2;
  } catch (const reg::MissingArtifact& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 3;
  } catch (const reg::BackendError& e) {
    std::cerr << "backend error: " << e.what() << '\n';
    return 4;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
}
