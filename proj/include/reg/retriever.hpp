#pragma once
// Trainable subgraph retrievers.
//
// Triple level: a feedforward classifier over [query, head, relation, tail]
// text embeddings concatenated with directional distance codes.
// Entity level: a degree-scaled multi-aggregator message-passing network
// over the working graph; entity scores become triple scores as
// s(h, r, t) = p(h) + p(t) with parallel relations merged.
//
// Both are trained with class-weighted binary cross-entropy and plain SGD.
// Training is single-threaded and bitwise reproducible for a given seed.

#include <Eigen/Dense>
#include <cstddef>
#include <cstdint>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "reg/json_io.hpp"
#include "reg/kg_store.hpp"
#include "reg/text_encoder.hpp"

namespace reg {

enum class RetrievalLevel { triple, entity };
const char* level_name(RetrievalLevel level);
RetrievalLevel parse_level(const std::string& name);

inline constexpr std::size_t kDefaultTripleK = 500;
inline constexpr std::size_t kEntityKBonus = 200;

struct FeatureConfig {
  std::size_t dde_depth = 3;
  std::size_t anchor_slots = 3;
};

// Per-question design matrices. Rows follow the view's triple (or entity)
// order.
struct TripleBatch {
  std::vector<TripleId> ids;
  Eigen::MatrixXd features;  // rows: triples
  Eigen::VectorXd labels;    // 1 for positives
  double positive_weight = 1.0;
};

struct EntityBatch {
  std::vector<EntityId> ids;
  Eigen::MatrixXd features;                     // rows: entities
  std::vector<std::vector<int>> neighbors;      // row indices, multiset over incident triples
  Eigen::VectorXd amplification;                // log(d + 1) / delta
  Eigen::VectorXd attenuation;                  // delta / log(d + 1), 0 when d = 0
  Eigen::VectorXd labels;
  double positive_weight = 1.0;
};

// Builds model inputs. Label embeddings are cached; safe to share across
// threads.
class Featurizer {
 public:
  Featurizer(const KnowledgeGraph& graph, const TextEncoder& encoder, FeatureConfig config = {});

  std::size_t triple_dim() const;
  std::size_t entity_dim() const;
  const FeatureConfig& config() const noexcept { return config_; }
  const TextEncoder& encoder() const noexcept { return encoder_; }

  TripleBatch triples(const Question& q, const GraphView& view,
                      std::span<const TripleId> positives = {}, double max_positive_weight = 100.0) const;
  EntityBatch entities(const Question& q, const GraphView& view,
                       std::span<const EntityId> positives = {},
                       double max_positive_weight = 100.0) const;

 private:
  const Eigen::VectorXd& entity_embedding(EntityId e) const;
  const Eigen::VectorXd& relation_embedding(RelationId r) const;

  const KnowledgeGraph& graph_;
  const TextEncoder& encoder_;
  FeatureConfig config_;
  mutable std::mutex mutex_;
  mutable std::unordered_map<EntityId, Eigen::VectorXd> entity_cache_;
  mutable std::unordered_map<RelationId, Eigen::VectorXd> relation_cache_;
};

// Metadata stored alongside the weights.
struct ModelInfo {
  std::string encoder_tag;
  std::size_t encoder_dim = 0;
  FeatureConfig features;
  std::uint64_t seed = 0;
};

// Named parameter tensors with flat indexing, shared by both scorers.
class ParameterSet {
 public:
  std::size_t add(std::string name, Eigen::MatrixXd value);
  std::size_t size() const noexcept;  // total scalar count
  double get(std::size_t flat) const;
  void set(std::size_t flat, double value);
  Eigen::MatrixXd& tensor(std::size_t i) { return tensors_[i]; }
  const Eigen::MatrixXd& tensor(std::size_t i) const { return tensors_[i]; }
  std::size_t tensor_count() const noexcept { return tensors_.size(); }
  // Gradient buffers shaped like the tensors, zero-filled.
  std::vector<Eigen::MatrixXd> zeros_like() const;
  void sgd_step(const std::vector<Eigen::MatrixXd>& grads, double learning_rate);
  Eigen::VectorXd flatten(const std::vector<Eigen::MatrixXd>& grads) const;

  json_io::json to_json() const;
  void load_json(const json_io::json& j);  // shapes must match
  friend bool operator==(const ParameterSet&, const ParameterSet&);

 private:
  std::pair<std::size_t, Eigen::Index> locate(std::size_t flat) const;
  std::vector<std::string> names_;
  std::vector<Eigen::MatrixXd> tensors_;
};

class TripleScorer {
 public:
  // Hidden layers use Xavier-uniform init and tanh; the output layer starts
  // at zero so an untrained model scores 0.5 everywhere.
  TripleScorer(std::size_t input_dim, std::vector<std::size_t> hidden, ModelInfo info);

  std::size_t input_dim() const noexcept { return input_dim_; }
  const std::vector<std::size_t>& hidden() const noexcept { return hidden_; }
  const ModelInfo& info() const noexcept { return info_; }
  ParameterSet& parameters() noexcept { return params_; }
  const ParameterSet& parameters() const noexcept { return params_; }

  Eigen::VectorXd logits(const Eigen::MatrixXd& features) const;
  Eigen::VectorXd predict(const Eigen::MatrixXd& features) const;  // sigmoid scores

  // Mean class-weighted BCE over the batch; accumulates d(loss)/d(params)
  // into grads when given.
  double loss(const TripleBatch& batch, std::vector<Eigen::MatrixXd>* grads = nullptr) const;

  json_io::json to_json() const;
  static TripleScorer from_json(const json_io::json& j);

 private:
  std::size_t input_dim_;
  std::vector<std::size_t> hidden_;
  ModelInfo info_;
  ParameterSet params_;
};

class EntityScorer {
 public:
  EntityScorer(std::size_t input_dim, std::size_t hidden, std::size_t layers, ModelInfo info);

  std::size_t input_dim() const noexcept { return input_dim_; }
  std::size_t hidden() const noexcept { return hidden_; }
  std::size_t layers() const noexcept { return layers_; }
  const ModelInfo& info() const noexcept { return info_; }
  ParameterSet& parameters() noexcept { return params_; }
  const ParameterSet& parameters() const noexcept { return params_; }

  Eigen::VectorXd logits(const EntityBatch& batch) const;
  Eigen::VectorXd predict(const EntityBatch& batch) const;
  double loss(const EntityBatch& batch, std::vector<Eigen::MatrixXd>* grads = nullptr) const;

  json_io::json to_json() const;
  static EntityScorer from_json(const json_io::json& j);

 private:
  struct Trace;
  Eigen::VectorXd forward(const EntityBatch& batch, Trace* trace) const;

  std::size_t input_dim_;
  std::size_t hidden_;
  std::size_t layers_;
  ModelInfo info_;
  ParameterSet params_;
};

struct TrainingSample {
  Question question;
  GraphView view;
  std::vector<TripleId> positives;  // the refined supervision triples
};

// Entities appearing in any of the given triples, ascending.
std::vector<EntityId> entities_of(const KnowledgeGraph& graph, std::span<const TripleId> triples);

struct TrainConfig {
  std::uint64_t seed = 42;
  std::size_t epochs = 80;
  double learning_rate = 0.05;
  std::vector<std::size_t> hidden = {256, 256};  // triple scorer
  std::size_t gnn_hidden = 64;
  std::size_t gnn_layers = 3;
  double max_positive_weight = 100.0;
  std::size_t validation_k = 100;  // recall@K used for checkpoint selection
};

struct EpochStats {
  std::size_t epoch = 0;             // 1-based
  double loss = 0.0;                 // mean training loss after the epoch
  std::optional<double> validation_recall;
};

template <typename Model>
struct TrainResult {
  Model model;
  std::vector<EpochStats> history;
  std::size_t selected_epoch = 0;  // 0 = initialization
};

// Throws TrainingError on a sample without positives or a non-finite loss.
// With a validation set the checkpoint with the highest recall@K is kept
// (earliest on ties); otherwise the final epoch.
TrainResult<TripleScorer> train_triple_scorer(const std::vector<TrainingSample>& train,
                                              const std::vector<TrainingSample>& validation,
                                              const Featurizer& featurizer, const TrainConfig& config);
TrainResult<EntityScorer> train_entity_scorer(const std::vector<TrainingSample>& train,
                                              const std::vector<TrainingSample>& validation,
                                              const Featurizer& featurizer, const TrainConfig& config);

struct ScoredTriple {
  TripleId id = 0;
  double score = 0.0;
  // Parallel triples folded into this one (same head and tail), including
  // id itself. Empty for an unmerged triple.
  std::vector<TripleId> members;

  friend bool operator==(const ScoredTriple&, const ScoredTriple&) = default;
};

struct RetrievedSubgraph {
  std::vector<ScoredTriple> triples;  // score descending, then id ascending
  std::size_t k = 0;
};

// One score per triple of the view, in view order. Throws Error when the
// featurizer does not match the model's input dimension.
std::vector<ScoredTriple> score_triples(const TripleScorer& model, const Featurizer& featurizer,
                                        const Question& q, const GraphView& view);
std::vector<std::pair<EntityId, double>> score_entities(const EntityScorer& model,
                                                        const Featurizer& featurizer,
                                                        const Question& q, const GraphView& view);

// s(h, r, t) = p(h) + p(t) after merging triples that share (head, tail);
// the merged unit keeps the smallest member id. Entities without a score
// count as 0.
std::vector<ScoredTriple> entity_to_triple_scores(
    const std::vector<std::pair<EntityId, double>>& entity_scores, const GraphView& view);

// Joined relation labels "r1 | r2" for merged units.
std::unordered_map<TripleId, std::string> merged_relation_labels(
    const KnowledgeGraph& graph, const std::vector<ScoredTriple>& triples);

RetrievedSubgraph top_k(std::vector<ScoredTriple> scored, std::size_t k);

// |top-k ∩ positives| / |positives| over a ranked list.
double recall_at_k(const std::vector<ScoredTriple>& ranked, std::span<const TripleId> positives,
                   std::size_t k);

// Model file: JSON with kind, architecture, encoder tag, DDE settings and
// weights. load refuses a model whose encoder tag differs from `encoder`.
void save_model(const std::string& path, const json_io::json& model);
json_io::json load_model_json(const std::string& path, const TextEncoder& encoder);

json_io::json retrieval_to_json(const KnowledgeGraph& graph, const std::string& question_id,
                                const RetrievedSubgraph& subgraph);
RetrievedSubgraph retrieval_from_json(const KnowledgeGraph& graph, const json_io::json& j);

}  // namespace reg
