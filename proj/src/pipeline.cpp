#include "reg/pipeline.hpp"

#include <atomic>
#include <cstdlib>
#include <exception>
#include <filesystem>
#include <fstream>
#include <map>
#include <mutex>
#include <optional>
#include <sstream>
#include <thread>
#include <unordered_map>

#include "reg/blackbox_sim.hpp"
#include "reg/candidate_pool.hpp"
#include "reg/error.hpp"
#include "reg/evaluator.hpp"
#include "reg/kg_store.hpp"
#include "reg/refiner.hpp"
#include "reg/reorganizer.hpp"
#include "reg/retriever.hpp"
#include "reg/text_encoder.hpp"

namespace reg {

namespace fs = std::filesystem;
using json_io::json;

// ---------------------------------------------------------------------------
// Config

namespace {

std::string resolve(const std::string& base, const std::string& path) {
  if (path.empty() || base.empty() || fs::path(path).is_absolute()) return path;
  return (fs::path(base) / path).lexically_normal().string();
}

std::string join(const std::vector<std::string>& items, const std::string& sep) {
  std::string out;
  for (std::size_t i = 0; i < items.size(); ++i) out += (i ? sep : "") + items[i];
  return out;
}

}  // namespace

PipelineConfig PipelineConfig::from_json(const json& j, const std::string& base_dir) {
  PipelineConfig c;
  if (!j.is_object()) throw ConfigError("config must be a JSON object");
  std::vector<std::string> errors;

  std::map<std::string, std::function<void(const json&)>> fields;
  auto path_field = [&](const char* key, std::string& dst) {
    fields[key] = [&dst, &base_dir](const json& v) { dst = resolve(base_dir, v.get<std::string>()); };
  };
  auto field = [&](const char* key, auto& dst) {
    fields[key] = [&dst](const json& v) { v.get_to(dst); };
  };
  path_field("kg", c.kg);
  field("kg_format", c.kg_format);
  path_field("train_questions", c.train_questions);
  path_field("validation_questions", c.validation_questions);
  path_field("test_questions", c.test_questions);
  path_field("work_dir", c.work_dir);
  path_field("refine_demos", c.refine_demos);
  path_field("qa_demos", c.qa_demos);
  path_field("aliases", c.aliases);
  path_field("simulation", c.simulation);
  field("retrieval_level", c.retrieval_level);
  field("k", c.k);
  field("dde_depth", c.dde_depth);
  field("anchor_slots", c.anchor_slots);
  field("encoder_dim", c.encoder_dim);
  field("path_cap", c.path_cap);
  field("pool_limit", c.pool_limit);
  field("fallback", c.fallback);
  field("limit", c.limit);
  field("no_refine", c.no_refine);
  field("seed", c.seed);
  field("epochs", c.epochs);
  field("learning_rate", c.learning_rate);
  field("hidden", c.hidden);
  field("gnn_hidden", c.gnn_hidden);
  field("gnn_layers", c.gnn_layers);
  field("validation_k", c.validation_k);
  field("max_positive_weight", c.max_positive_weight);
  field("max_chain_length", c.max_chain_length);
  field("no_reorganize", c.no_reorganize);
  field("explanations", c.explanations);
  field("dump_prompts", c.dump_prompts);
  field("llm", c.llm);
  path_field("replay_path", c.replay_path);
  field("llm_temperature", c.llm_temperature);
  field("llm_seed", c.llm_seed);
  field("workers", c.workers);

  if (!j.contains("work_dir")) c.work_dir = resolve(base_dir, c.work_dir);
  for (auto it = j.begin(); it != j.end(); ++it) {
    auto f = fields.find(it.key());
    if (f == fields.end()) {
      errors.push_back("unknown key '" + it.key() + "'");
      continue;
    }
    try {
      f->second(it.value());
    } catch (const json::exception&) {
      errors.push_back("key '" + it.key() + "' has the wrong type");
    }
  }
  if (!errors.empty()) throw ConfigError("invalid config: " + join(errors, "; "));
  return c;
}

PipelineConfig PipelineConfig::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path);
  auto j = json::parse(in, nullptr, false);
  if (j.is_discarded()) throw ConfigError("config " + path + " is not valid JSON");
  return from_json(j, fs::path(path).parent_path().string());
}

json PipelineConfig::to_json() const {
  return {{"kg", kg},
          {"kg_format", kg_format},
          {"train_questions", train_questions},
          {"validation_questions", validation_questions},
          {"test_questions", test_questions},
          {"work_dir", work_dir},
          {"refine_demos", refine_demos},
          {"qa_demos", qa_demos},
          {"aliases", aliases},
          {"simulation", simulation},
          {"retrieval_level", retrieval_level},
          {"k", k},
          {"dde_depth", dde_depth},
          {"anchor_slots", anchor_slots},
          {"encoder_dim", encoder_dim},
          {"path_cap", path_cap},
          {"pool_limit", pool_limit},
          {"fallback", fallback},
          {"limit", limit},
          {"no_refine", no_refine},
          {"seed", seed},
          {"epochs", epochs},
          {"learning_rate", learning_rate},
          {"hidden", hidden},
          {"gnn_hidden", gnn_hidden},
          {"gnn_layers", gnn_layers},
          {"validation_k", validation_k},
          {"max_positive_weight", max_positive_weight},
          {"max_chain_length", max_chain_length},
          {"no_reorganize", no_reorganize},
          {"explanations", explanations},
          {"dump_prompts", dump_prompts},
          {"llm", llm},
          {"replay_path", replay_path},
          {"llm_temperature", llm_temperature},
          {"llm_seed", llm_seed},
          {"workers", workers}};
}

std::vector<std::string> PipelineConfig::violations(const std::string& stage) const {
  std::vector<std::string> v;
  auto one_of = [&](const char* key, const std::string& value, std::initializer_list<const char*> allowed) {
    for (auto a : allowed)
      if (value == a) return;
    std::vector<std::string> names(allowed.begin(), allowed.end());
    v.push_back(std::string(key) + " must be one of " + join(names, ", ") + " (got '" + value + "')");
  };
  auto at_least_one = [&](const char* key, std::size_t value) {
    if (value < 1) v.push_back(std::string(key) + " must be at least 1");
  };
  auto existing = [&](const char* key, const std::string& path, bool required) {
    if (path.empty()) {
      if (required) v.push_back(std::string(key) + " is required for `" + stage + "`");
      return;
    }
    if (!fs::exists(path)) v.push_back(std::string(key) + " " + path + " does not exist");
  };

  one_of("kg_format", kg_format, {"tsv", "jsonl"});
  one_of("retrieval_level", retrieval_level, {"triple", "entity"});
  one_of("fallback", fallback, {"weak_supervision", "empty", "fail"});
  one_of("llm", llm, {"mock", "replay", "remote"});
  at_least_one("dde_depth", dde_depth);
  at_least_one("anchor_slots", anchor_slots);
  at_least_one("encoder_dim", encoder_dim);
  at_least_one("path_cap", path_cap);
  at_least_one("pool_limit", pool_limit);
  at_least_one("epochs", epochs);
  at_least_one("gnn_hidden", gnn_hidden);
  at_least_one("gnn_layers", gnn_layers);
  at_least_one("validation_k", validation_k);
  at_least_one("workers", workers);
  if (!(learning_rate > 0)) v.push_back("learning_rate must be positive");
  if (!(max_positive_weight > 0)) v.push_back("max_positive_weight must be positive");
  if (llm_temperature < 0) v.push_back("llm_temperature must be non-negative");
  if (hidden.empty()) v.push_back("hidden must list at least one layer width");
  for (auto h : hidden)
    if (h == 0) v.push_back("hidden layer widths must be positive");

  bool uses_llm = (stage == "refine" && !no_refine) || stage == "answer";
  if (uses_llm && llm == "replay") existing("replay_path", replay_path, true);
  if (uses_llm && llm == "remote" && !std::getenv("REG_LLM_URL"))
    v.push_back("llm 'remote' needs REG_LLM_URL in the environment");

  if (stage == "ingest") existing("kg", kg, true);
  if (stage == "ingest" || stage == "candidates" || stage == "refine" || stage == "train") {
    existing("train_questions", train_questions, stage != "ingest");
    existing("validation_questions", validation_questions, false);
  }
  if (stage == "ingest" || stage == "retrieve" || stage == "reorganize" || stage == "answer" ||
      stage == "evaluate")
    existing("test_questions", test_questions, stage != "ingest");
  if (stage == "refine") existing("refine_demos", refine_demos, false);
  if (stage == "answer") existing("qa_demos", qa_demos, false);
  if (stage == "evaluate") existing("aliases", aliases, false);
  if (stage == "simulate") existing("simulation", simulation, true);
  return v;
}

std::size_t PipelineConfig::effective_k() const {
  if (k > 0) return k;
  return retrieval_level == "entity" ? kDefaultTripleK + kEntityKBonus : kDefaultTripleK;
}

std::string PipelineConfig::artifact(const std::string& name) const { return (fs::path(work_dir) / name).string(); }

void require_valid(const PipelineConfig& config, const std::string& stage) {
  auto v = config.violations(stage);
  if (!v.empty()) throw ConfigError("invalid config for `" + stage + "`: " + join(v, "; "));
}

// ---------------------------------------------------------------------------
// Helpers

void parallel_for(std::size_t n, std::size_t workers, const std::function<void(std::size_t)>& fn) {
  workers = std::max<std::size_t>(1, std::min(workers, n));
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::atomic<bool> failed{false};
  std::exception_ptr error;
  std::mutex error_mutex;
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w < workers; ++w)
    pool.emplace_back([&] {
      for (auto i = next++; i < n && !failed; i = next++) {
        try {
          fn(i);
        } catch (...) {
          std::lock_guard lock(error_mutex);
          if (!error) error = std::current_exception();
          failed = true;
        }
      }
    });
  for (auto& t : pool) t.join();
  if (error) std::rethrow_exception(error);
}

std::unique_ptr<LlmClient> make_client(const PipelineConfig& config) {
  if (config.llm == "mock") return std::make_unique<MockClient>();
  if (config.llm == "replay")
    return std::make_unique<ReplayClient>(std::make_shared<ReplayStore>(config.replay_path, false));
  if (config.llm == "remote") {
    auto remote = RemoteConfig::from_env();
    if (remote.url.empty()) throw ConfigError("llm 'remote' needs REG_LLM_URL in the environment");
    std::shared_ptr<ReplayStore> cache;
    if (!config.replay_path.empty()) cache = std::make_shared<ReplayStore>(config.replay_path, true);
    return std::make_unique<RemoteClient>(remote, make_http_transport(std::chrono::seconds(120)), cache);
  }
  throw ConfigError("unknown llm backend " + config.llm);
}

namespace {

constexpr const char* kGraphFile = "graph.jsonl";
constexpr const char* kIngestFile = "ingest.json";
constexpr const char* kPoolsFile = "pools.jsonl";
constexpr const char* kSupervisionFile = "supervision.jsonl";
constexpr const char* kModelFile = "model.json";
constexpr const char* kHistoryFile = "train_history.json";
constexpr const char* kRetrievalFile = "retrieval.jsonl";
constexpr const char* kChainsFile = "chains.jsonl";
constexpr const char* kPredictionsFile = "predictions.jsonl";
constexpr const char* kPromptsFile = "prompts.jsonl";
constexpr const char* kReportFile = "report.json";
constexpr const char* kReportCsv = "report.csv";
constexpr const char* kSimTrialsFile = "sim_trials.csv";
constexpr const char* kSimSummaryFile = "sim_summary.json";

std::string require_artifact(const PipelineConfig& c, const char* name, const char* stage) {
  auto path = c.artifact(name);
  if (!fs::exists(path)) throw MissingArtifact(path, stage);
  return path;
}

void ensure_work_dir(const PipelineConfig& c) { fs::create_directories(c.work_dir); }

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write " + path);
  out << text;
}

KnowledgeGraph load_graph(const PipelineConfig& c) {
  return KnowledgeGraph::load_file(require_artifact(c, kGraphFile, "ingest"), TripleFormat::jsonl);
}

std::vector<Question> load_question_file(const std::string& path, const KnowledgeGraph& graph,
                                         std::ostream& log) {
  if (path.empty()) return {};
  auto set = load_questions_file(path, graph);
  for (const auto& w : set.warnings) log << "warning: " << path << ": " << w << '\n';
  return std::move(set.questions);
}

std::unordered_map<std::string, json> records_by_id(const std::string& path, const char* key) {
  std::unordered_map<std::string, json> out;
  for (auto& r : json_io::read_jsonl_file(path)) {
    auto id = r.at(key).get<std::string>();
    out.emplace(std::move(id), std::move(r));
  }
  return out;
}

// Training and validation questions, the first `limit` training ones only
// when a limit is set.
std::pair<std::vector<Question>, std::vector<Question>> supervised_questions(const PipelineConfig& c,
                                                                             const KnowledgeGraph& graph,
                                                                             std::ostream& log, bool apply_limit) {
  auto train = load_question_file(c.train_questions, graph, log);
  if (apply_limit && c.limit > 0 && train.size() > c.limit) train.resize(c.limit);
  auto validation = load_question_file(c.validation_questions, graph, log);
  return {std::move(train), std::move(validation)};
}

FallbackPolicy parse_fallback(const std::string& name) {
  if (name == "empty") return FallbackPolicy::empty;
  if (name == "fail") return FallbackPolicy::fail;
  return FallbackPolicy::weak_supervision;
}

CompletionResult complete_checked(LlmClient& client, const CompletionRequest& req, const std::string& backend) {
  try {
    return client.complete(req);
  } catch (const BackendError&) {
    throw;
  } catch (const ConfigError&) {
    throw;
  } catch (const std::exception& e) {
    throw BackendError(backend, request_digest(req), e.what());
  }
}

}  // namespace

// ---------------------------------------------------------------------------
// Stages

void cmd_ingest(const PipelineConfig& c, std::ostream& log) {
  auto format = c.kg_format == "jsonl" ? TripleFormat::jsonl : TripleFormat::tsv;
  auto graph = KnowledgeGraph::load_file(c.kg, format);
  ensure_work_dir(c);
  std::vector<json> triples;
  triples.reserve(graph.size());
  for (TripleId id = 0; id < graph.size(); ++id) {
    auto labels = json_io::triple_labels(graph, id);
    triples.push_back({{"h", labels[0]}, {"r", labels[1]}, {"t", labels[2]}});
  }
  json_io::write_jsonl_file(c.artifact(kGraphFile), triples);

  json report{{"triples", graph.size()},
              {"entities", graph.entities().size()},
              {"relations", graph.relations().size()},
              {"duplicates_collapsed", graph.duplicates_collapsed()}};
  for (auto [key, path] : {std::pair{"train_questions", &c.train_questions},
                           std::pair{"validation_questions", &c.validation_questions},
                           std::pair{"test_questions", &c.test_questions}}) {
    if (path->empty()) continue;
    auto set = load_questions_file(*path, graph);
    for (const auto& w : set.warnings) log << "warning: " << *path << ": " << w << '\n';
    report[key] = {{"questions", set.questions.size()}, {"warnings", set.warnings}};
  }
  write_text(c.artifact(kIngestFile), report.dump(2) + "\n");
  log << "ingest: " << graph.size() << " triples, " << graph.entities().size() << " entities, "
      << graph.relations().size() << " relations (" << graph.duplicates_collapsed() << " duplicates collapsed)\n";
}

void cmd_candidates(const PipelineConfig& c, std::ostream& log) {
  auto graph = load_graph(c);
  auto [train, validation] = supervised_questions(c, graph, log, false);
  std::vector<Question> questions = std::move(train);
  questions.insert(questions.end(), validation.begin(), validation.end());

  std::vector<json> records(questions.size());
  std::vector<std::size_t> sizes(questions.size());
  parallel_for(questions.size(), c.workers, [&](std::size_t i) {
    const auto& q = questions[i];
    auto pool = build_pool(working_graph(graph, q), q, c.path_cap);
    sizes[i] = pool.size();
    records[i] = pool_to_json(graph, q.id, pool);
  });
  ensure_work_dir(c);
  json_io::write_jsonl_file(c.artifact(kPoolsFile), records);
  std::size_t total = 0;
  for (auto s : sizes) total += s;
  log << "candidates: " << questions.size() << " questions, " << total << " pooled paths\n";
}

void cmd_refine(const PipelineConfig& c, std::ostream& log, LlmClient* client) {
  auto graph = load_graph(c);
  auto [train, validation] = supervised_questions(c, graph, log, true);
  std::vector<Question> questions = std::move(train);
  questions.insert(questions.end(), validation.begin(), validation.end());
  std::vector<json> records(questions.size());

  if (c.no_refine) {
    parallel_for(questions.size(), c.workers, [&](std::size_t i) {
      const auto& q = questions[i];
      RefinedSupervision sup;
      sup.question_id = q.id;
      sup.refiner_tag = "weak";
      sup.positive_triples = weak_supervision(working_graph(graph, q), q, c.path_cap);
      records[i] = supervision_to_json(graph, sup);
    });
  } else {
    auto pools = records_by_id(require_artifact(c, kPoolsFile, "candidates"), "id");
    std::unique_ptr<LlmClient> owned;
    if (!client) {
      owned = make_client(c);
      client = owned.get();
    }
    RefineOptions options;
    if (!c.refine_demos.empty()) options.demos = load_refine_demos(c.refine_demos);
    options.fallback = parse_fallback(c.fallback);
    options.pool_limit = c.pool_limit;
    options.refiner_tag = c.llm;
    std::atomic<std::size_t> fallbacks{0};
    parallel_for(questions.size(), c.workers, [&](std::size_t i) {
      const auto& q = questions[i];
      auto it = pools.find(q.id);
      if (it == pools.end())
        throw MissingArtifact(c.artifact(kPoolsFile) + " record for " + q.id, "candidates");
      auto pool = pool_from_json(graph, it->second);
      RefinedSupervision sup;
      if (pool.empty()) {
        sup.question_id = q.id;
        sup.refiner_tag = options.refiner_tag;
        sup.used_fallback = true;
      } else {
        try {
          sup = refine(q, pool, graph, *client, options);
        } catch (const BackendError&) {
          throw;
        } catch (const ConfigError&) {
          throw;
        } catch (const std::exception& e) {
          throw BackendError(c.llm, "", "refinement of " + q.id + " failed: " + e.what());
        }
      }
      if (sup.used_fallback) ++fallbacks;
      records[i] = supervision_to_json(graph, sup);
    });
    log << "refine: " << fallbacks.load() << " of " << questions.size() << " questions used the fallback\n";
  }
  ensure_work_dir(c);
  json_io::write_jsonl_file(c.artifact(kSupervisionFile), records);
  log << "refine: wrote supervision for " << questions.size() << " questions\n";
}

void cmd_train(const PipelineConfig& c, std::ostream& log) {
  auto graph = load_graph(c);
  auto supervision = records_by_id(require_artifact(c, kSupervisionFile, "refine"), "question_id");
  auto [train_q, validation_q] = supervised_questions(c, graph, log, false);

  std::size_t skipped = 0;
  auto samples = [&](const std::vector<Question>& questions) {
    std::vector<TrainingSample> out;
    for (const auto& q : questions) {
      auto it = supervision.find(q.id);
      if (it == supervision.end()) {
        ++skipped;
        continue;
      }
      auto sup = supervision_from_json(graph, it->second);
      if (sup.positive_triples.empty()) {
        ++skipped;
        continue;
      }
      out.push_back({q, working_graph(graph, q), std::move(sup.positive_triples)});
    }
    return out;
  };
  auto train = samples(train_q);
  auto validation = samples(validation_q);
  if (train.empty()) throw TrainingError("no training question has supervision with positive triples");

  HashingEncoder encoder(c.encoder_dim);
  Featurizer featurizer(graph, encoder, {c.dde_depth, c.anchor_slots});
  TrainConfig tc;
  tc.seed = c.seed;
  tc.epochs = c.epochs;
  tc.learning_rate = c.learning_rate;
  tc.hidden = c.hidden;
  tc.gnn_hidden = c.gnn_hidden;
  tc.gnn_layers = c.gnn_layers;
  tc.validation_k = c.validation_k;
  tc.max_positive_weight = c.max_positive_weight;

  json model;
  std::vector<EpochStats> history;
  std::size_t selected = 0;
  if (parse_level(c.retrieval_level) == RetrievalLevel::triple) {
    auto result = train_triple_scorer(train, validation, featurizer, tc);
    model = result.model.to_json();
    history = std::move(result.history);
    selected = result.selected_epoch;
  } else {
    auto result = train_entity_scorer(train, validation, featurizer, tc);
    model = result.model.to_json();
    history = std::move(result.history);
    selected = result.selected_epoch;
  }
  ensure_work_dir(c);
  save_model(c.artifact(kModelFile), model);

  json epochs = json::array();
  for (const auto& h : history) {
    json e{{"epoch", h.epoch}, {"loss", h.loss}};
    if (h.validation_recall) e["validation_recall"] = *h.validation_recall;
    epochs.push_back(std::move(e));
  }
  write_text(c.artifact(kHistoryFile), json{{"selected_epoch", selected}, {"epochs", epochs}}.dump(2) + "\n");
  log << "train: " << c.retrieval_level << " scorer on " << train.size() << " questions (" << validation.size()
      << " validation, " << skipped << " skipped), selected epoch " << selected << ", final loss "
      << (history.empty() ? 0.0 : history.back().loss) << '\n';
}

void cmd_retrieve(const PipelineConfig& c, std::ostream& log) {
  auto graph = load_graph(c);
  HashingEncoder encoder(c.encoder_dim);
  auto model_json = load_model_json(require_artifact(c, kModelFile, "train"), encoder);
  auto questions = load_question_file(c.test_questions, graph, log);
  auto kind = model_json.value("kind", std::string{});
  FeatureConfig features{model_json.at("dde_depth").get<std::size_t>(),
                         model_json.at("anchor_slots").get<std::size_t>()};
  Featurizer featurizer(graph, encoder, features);
  const auto k = c.effective_k();

  std::optional<TripleScorer> triple_model;
  std::optional<EntityScorer> entity_model;
  if (kind == "triple")
    triple_model = TripleScorer::from_json(model_json);
  else
    entity_model = EntityScorer::from_json(model_json);

  std::vector<json> records(questions.size());
  parallel_for(questions.size(), c.workers, [&](std::size_t i) {
    const auto& q = questions[i];
    auto view = working_graph(graph, q);
    std::vector<ScoredTriple> scored;
    if (triple_model)
      scored = score_triples(*triple_model, featurizer, q, view);
    else
      scored = entity_to_triple_scores(score_entities(*entity_model, featurizer, q, view), view);
    records[i] = retrieval_to_json(graph, q.id, top_k(std::move(scored), k));
  });
  ensure_work_dir(c);
  json_io::write_jsonl_file(c.artifact(kRetrievalFile), records);
  log << "retrieve: " << kind << " scorer, top " << k << " triples for " << questions.size() << " questions\n";
}

void cmd_reorganize(const PipelineConfig& c, std::ostream& log) {
  auto graph = load_graph(c);
  auto retrieval = records_by_id(require_artifact(c, kRetrievalFile, "retrieve"), "question_id");
  auto questions = load_question_file(c.test_questions, graph, log);
  std::vector<json> records(questions.size());
  std::vector<std::size_t> counts(questions.size());
  parallel_for(questions.size(), c.workers, [&](std::size_t i) {
    const auto& q = questions[i];
    RetrievedSubgraph sg;
    if (auto it = retrieval.find(q.id); it != retrieval.end()) sg = retrieval_from_json(graph, it->second);
    auto overrides = merged_relation_labels(graph, sg.triples);
    auto chains = reorganize(working_graph(graph, q), sg, q, {c.max_chain_length, kDefaultMaxChains});
    counts[i] = chains.size();
    records[i] = chains_to_json(graph, q.id, chains, &overrides);
  });
  ensure_work_dir(c);
  json_io::write_jsonl_file(c.artifact(kChainsFile), records);
  std::size_t total = 0;
  for (auto n : counts) total += n;
  log << "reorganize: " << total << " evidence chains for " << questions.size() << " questions\n";
}

void cmd_answer(const PipelineConfig& c, std::ostream& log, LlmClient* client) {
  auto graph = load_graph(c);
  auto questions = load_question_file(c.test_questions, graph, log);
  std::unordered_map<std::string, json> upstream =
      c.no_reorganize ? records_by_id(require_artifact(c, kRetrievalFile, "retrieve"), "question_id")
                      : records_by_id(require_artifact(c, kChainsFile, "reorganize"), "question_id");
  std::vector<QaDemo> demos;
  if (!c.qa_demos.empty()) demos = load_qa_demos(c.qa_demos);
  std::unique_ptr<LlmClient> owned;
  if (!client) {
    owned = make_client(c);
    client = owned.get();
  }

  std::vector<json> predictions(questions.size());
  std::vector<json> prompts(questions.size());
  parallel_for(questions.size(), c.workers, [&](std::size_t i) {
    const auto& q = questions[i];
    std::vector<std::string> evidence;
    if (auto it = upstream.find(q.id); it != upstream.end()) {
      if (c.no_reorganize) {
        auto sg = retrieval_from_json(graph, it->second);
        auto overrides = merged_relation_labels(graph, sg.triples);
        for (const auto& st : sg.triples) evidence.push_back(render_triple(st.id, graph, &overrides));
      } else {
        auto rec = chains_from_json(graph, it->second);
        for (const auto& chain : rec.chains) evidence.push_back(render_chain(chain, graph, &rec.relation_labels));
      }
    }
    auto req = build_qa_prompt(q, evidence, demos, {c.explanations});
    req.temperature = c.llm_temperature;
    req.seed = c.llm_seed;
    auto digest = request_digest(req);
    auto result = complete_checked(*client, req, c.llm);
    predictions[i] = {{"question_id", q.id},
                      {"answers", extract_answers(result.text)},
                      {"response", result.text},
                      {"digest", digest}};
    prompts[i] = {{"question_id", q.id}, {"digest", digest}, {"system", req.system_text}, {"user", req.user_text}};
  });
  ensure_work_dir(c);
  json_io::write_jsonl_file(c.artifact(kPredictionsFile), predictions);
  if (c.dump_prompts) json_io::write_jsonl_file(c.artifact(kPromptsFile), prompts);
  log << "answer: " << questions.size() << " questions answered with the " << c.llm << " backend ("
      << (c.no_reorganize ? "flat triples" : "evidence chains") << ")\n";
}

void cmd_evaluate(const PipelineConfig& c, std::ostream& log) {
  auto graph = load_graph(c);
  auto predicted = records_by_id(require_artifact(c, kPredictionsFile, "answer"), "question_id");
  auto questions = load_question_file(c.test_questions, graph, log);
  std::map<std::string, std::vector<std::string>> gold;
  std::vector<Prediction> preds;
  for (const auto& q : questions) {
    auto labels = q.answer_labels;
    if (labels.empty())
      for (auto a : q.answer_entities) labels.push_back(graph.entity_label(a));
    gold[q.id] = labels;
    Prediction p{q.id, {}};
    if (auto it = predicted.find(q.id); it != predicted.end())
      p.answers = it->second.at("answers").get<std::vector<std::string>>();
    preds.push_back(std::move(p));
  }
  AliasTable aliases;
  if (!c.aliases.empty()) aliases = load_aliases(c.aliases);
  auto report = evaluate(preds, gold, c.aliases.empty() ? nullptr : &aliases);
  ensure_work_dir(c);
  write_text(c.artifact(kReportFile), report_to_json(report).dump(2) + "\n");
  std::ostringstream csv;
  write_report_csv(csv, report);
  write_text(c.artifact(kReportCsv), csv.str());
  log << "evaluate: macro_f1=" << report.macro_f1 << " micro_f1=" << report.micro_f1 << " hit=" << report.hit
      << " hit@1=" << report.hit_at_1 << " over " << report.per_question.size() << " questions\n";
}

void cmd_simulate(const PipelineConfig& c, std::ostream& log) {
  std::ifstream in(c.simulation);
  if (!in) throw ConfigError("cannot open simulation config " + c.simulation);
  auto j = json::parse(in, nullptr, false);
  if (j.is_discarded()) throw ConfigError("simulation config " + c.simulation + " is not valid JSON");
  auto exp = experiment_from_json(j);
  auto warnings = validate(exp.instance, exp.search);
  for (const auto& w : warnings) log << "warning: " << w << '\n';
  auto summary = estimate_recovery_rounds(exp.instance, exp.search, exp.trials, c.workers);
  ensure_work_dir(c);
  std::ostringstream csv;
  write_trials_csv(csv, summary);
  write_text(c.artifact(kSimTrialsFile), csv.str());
  auto out = summary_to_json(summary);
  out["config"] = experiment_to_json(exp);
  out["warnings"] = warnings;
  write_text(c.artifact(kSimSummaryFile), out.dump(2) + "\n");
  log << "simulate: mean rounds " << summary.mean_rounds << " (median " << summary.median_rounds << ", "
      << summary.censored << " of " << summary.trials << " censored), acceptance rate " << summary.acceptance_rate
      << " vs closed form " << summary.closed_form_acceptance << '\n';
}

void run_stage(const std::string& stage, const PipelineConfig& config, std::ostream& log) {
  require_valid(config, stage);
  if (stage == "ingest") return cmd_ingest(config, log);
  if (stage == "candidates") return cmd_candidates(config, log);
  if (stage == "refine") return cmd_refine(config, log);
  if (stage == "train") return cmd_train(config, log);
  if (stage == "retrieve") return cmd_retrieve(config, log);
  if (stage == "reorganize") return cmd_reorganize(config, log);
  if (stage == "answer") return cmd_answer(config, log);
  if (stage == "evaluate") return cmd_evaluate(config, log);
  if (stage == "simulate") return cmd_simulate(config, log);
  throw ConfigError("unknown stage " + stage);
}

}  // namespace reg
