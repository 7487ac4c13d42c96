#pragma once
// Stage orchestration over a shared working directory. Every stage reads the
// artifacts of its predecessors from disk and writes its own, so stages can
// be rerun independently.

#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <ostream>
#include <string>
#include <vector>

#include "reg/json_io.hpp"
#include "reg/llm_client.hpp"

namespace reg {

struct PipelineConfig {
  // Inputs. Relative paths resolve against the config file's directory.
  std::string kg;
  std::string kg_format = "tsv";
  std::string train_questions;
  std::string validation_questions;
  std::string test_questions;
  std::string work_dir = "work";
  std::string refine_demos;
  std::string qa_demos;
  std::string aliases;
  std::string simulation;  // blackbox experiment config

  // Retrieval.
  std::string retrieval_level = "triple";
  std::size_t k = 0;  // 0 picks the level default
  std::size_t dde_depth = 3;
  std::size_t anchor_slots = 3;
  std::size_t encoder_dim = 256;

  // Candidates and refinement.
  std::size_t path_cap = 256;
  std::size_t pool_limit = 137;
  std::string fallback = "weak_supervision";
  std::size_t limit = 0;  // 0 = all training questions
  bool no_refine = false;

  // Training.
  std::uint64_t seed = 42;
  std::size_t epochs = 80;
  double learning_rate = 0.05;
  std::vector<std::size_t> hidden = {256, 256};
  std::size_t gnn_hidden = 64;
  std::size_t gnn_layers = 3;
  std::size_t validation_k = 100;
  double max_positive_weight = 100.0;

  // Reorganization and answering.
  std::size_t max_chain_length = 2;  // 0 = unlimited
  bool no_reorganize = false;
  bool explanations = true;
  bool dump_prompts = false;

  // LLM access.
  std::string llm = "mock";
  std::string replay_path;
  double llm_temperature = 0.0;
  std::int64_t llm_seed = 42;

  std::size_t workers = 1;

  // Unknown keys and type errors are collected, then thrown as one
  // ConfigError.
  static PipelineConfig from_json(const json_io::json& j, const std::string& base_dir = "");
  static PipelineConfig load(const std::string& path);
  json_io::json to_json() const;

  // Every violation for running `stage`; empty when valid.
  std::vector<std::string> violations(const std::string& stage) const;

  std::size_t effective_k() const;
  std::string artifact(const std::string& name) const;  // work_dir/name
};

// Throws ConfigError listing all violations.
void require_valid(const PipelineConfig& config, const std::string& stage);

// Runs fn(i) for i in [0, n) on up to `workers` threads. The first exception
// is rethrown after all workers stop.
void parallel_for(std::size_t n, std::size_t workers, const std::function<void(std::size_t)>& fn);

std::unique_ptr<LlmClient> make_client(const PipelineConfig& config);

inline const std::vector<std::string>& stage_names() {
  static const std::vector<std::string> names{"ingest", "candidates", "refine", "train", "retrieve",
                                              "reorganize", "answer", "evaluate", "simulate"};
  return names;
}

void cmd_ingest(const PipelineConfig& config, std::ostream& log);
void cmd_candidates(const PipelineConfig& config, std::ostream& log);
void cmd_refine(const PipelineConfig& config, std::ostream& log, LlmClient* client = nullptr);
void cmd_train(const PipelineConfig& config, std::ostream& log);
void cmd_retrieve(const PipelineConfig& config, std::ostream& log);
void cmd_reorganize(const PipelineConfig& config, std::ostream& log);
void cmd_answer(const PipelineConfig& config, std::ostream& log, LlmClient* client = nullptr);
void cmd_evaluate(const PipelineConfig& config, std::ostream& log);
void cmd_simulate(const PipelineConfig& config, std::ostream& log);

// Dispatches by stage name after validation.
void run_stage(const std::string& stage, const PipelineConfig& config, std::ostream& log);

}  // namespace reg
