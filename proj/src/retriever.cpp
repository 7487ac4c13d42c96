#include "reg/retriever.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <map>

#include "reg/dde.hpp"
#include "reg/error.hpp"

namespace reg {

using json_io::json;

const char* level_name(RetrievalLevel level) {
  return level == RetrievalLevel::triple ? "triple" : "entity";
}

RetrievalLevel parse_level(const std::string& name) {
  if (name == "triple") return RetrievalLevel::triple;
  if (name == "entity") return RetrievalLevel::entity;
  throw ConfigError("retrieval level must be triple or entity, got " + name);
}

// ---------------------------------------------------------------------------
// Featurizer

namespace {

double class_weight(std::size_t positives, std::size_t negatives, double cap) {
  if (positives == 0 || negatives == 0) return 1.0;
  return std::min(static_cast<double>(negatives) / static_cast<double>(positives), cap);
}

std::vector<std::unordered_map<EntityId, DirectionalDistance>> slot_codes(
    const GraphView& view, const Question& q, const FeatureConfig& config) {
  std::vector<std::unordered_map<EntityId, DirectionalDistance>> codes;
  for (const auto& anchors : anchor_slots(q.query_entities, config.anchor_slots))
    codes.push_back(compute_dde(view, anchors, config.dde_depth));
  return codes;
}

DirectionalDistance lookup(const std::unordered_map<EntityId, DirectionalDistance>& codes, EntityId e,
                           std::size_t depth) {
  auto it = codes.find(e);
  if (it != codes.end()) return it->second;
  auto u = static_cast<std::uint32_t>(depth + 1);
  return {u, u};
}

}  // namespace

Featurizer::Featurizer(const KnowledgeGraph& graph, const TextEncoder& encoder, FeatureConfig config)
    : graph_(graph), encoder_(encoder), config_(config) {
  if (config_.dde_depth < 1) throw ConfigError("DDE depth must be at least 1");
  if (config_.anchor_slots < 1) throw ConfigError("anchor slot count must be at least 1");
}

std::size_t Featurizer::triple_dim() const {
  return 4 * encoder_.dim() + 4 * dde_block(config_.dde_depth) * config_.anchor_slots;
}

std::size_t Featurizer::entity_dim() const {
  return 2 * encoder_.dim() + 2 * dde_block(config_.dde_depth) * config_.anchor_slots;
}

const Eigen::VectorXd& Featurizer::entity_embedding(EntityId e) const {
  std::lock_guard lock(mutex_);
  auto it = entity_cache_.find(e);
  if (it == entity_cache_.end()) it = entity_cache_.emplace(e, encoder_.encode(graph_.entity_label(e))).first;
  return it->second;
}

const Eigen::VectorXd& Featurizer::relation_embedding(RelationId r) const {
  std::lock_guard lock(mutex_);
  auto it = relation_cache_.find(r);
  if (it == relation_cache_.end())
    it = relation_cache_.emplace(r, encoder_.encode(graph_.relation_label(r))).first;
  return it->second;
}

TripleBatch Featurizer::triples(const Question& q, const GraphView& view,
                                std::span<const TripleId> positives, double max_positive_weight) const {
  const auto dim = static_cast<Eigen::Index>(encoder_.dim());
  const auto block = dde_block(config_.dde_depth);
  const auto n = static_cast<Eigen::Index>(view.size());

  TripleBatch batch;
  batch.ids.assign(view.triple_ids().begin(), view.triple_ids().end());
  batch.features.resize(n, static_cast<Eigen::Index>(triple_dim()));
  batch.labels = Eigen::VectorXd::Zero(n);

  std::vector<TripleId> pos(positives.begin(), positives.end());
  std::sort(pos.begin(), pos.end());
  auto query = encoder_.encode(q.text);
  auto codes = slot_codes(view, q, config_);

  std::vector<double> dde(4 * block * config_.anchor_slots);
  std::size_t n_pos = 0;
  for (Eigen::Index i = 0; i < n; ++i) {
    auto id = batch.ids[static_cast<std::size_t>(i)];
    const auto& t = view.triple(id);
    auto row = batch.features.row(i);
    row.segment(0, dim) = query.transpose();
    row.segment(dim, dim) = entity_embedding(t.head).transpose();
    row.segment(2 * dim, dim) = relation_embedding(t.relation).transpose();
    row.segment(3 * dim, dim) = entity_embedding(t.tail).transpose();
    for (std::size_t s = 0; s < codes.size(); ++s) {
      auto h = lookup(codes[s], t.head, config_.dde_depth);
      auto tl = lookup(codes[s], t.tail, config_.dde_depth);
      double* out = dde.data() + 4 * block * s;
      write_one_hot(h.forward, config_.dde_depth, out);
      write_one_hot(h.backward, config_.dde_depth, out + block);
      write_one_hot(tl.forward, config_.dde_depth, out + 2 * block);
      write_one_hot(tl.backward, config_.dde_depth, out + 3 * block);
    }
    for (std::size_t k = 0; k < dde.size(); ++k) row[4 * dim + static_cast<Eigen::Index>(k)] = dde[k];
    if (std::binary_search(pos.begin(), pos.end(), id)) {
      batch.labels[i] = 1.0;
      ++n_pos;
    }
  }
  batch.positive_weight = class_weight(n_pos, view.size() - n_pos, max_positive_weight);
  return batch;
}

EntityBatch Featurizer::entities(const Question& q, const GraphView& view,
                                 std::span<const EntityId> positives, double max_positive_weight) const {
  const auto dim = static_cast<Eigen::Index>(encoder_.dim());
  const auto block = dde_block(config_.dde_depth);

  EntityBatch batch;
  batch.ids = view.entities();
  batch.ids.insert(batch.ids.end(), q.query_entities.begin(), q.query_entities.end());
  std::sort(batch.ids.begin(), batch.ids.end());
  batch.ids.erase(std::unique(batch.ids.begin(), batch.ids.end()), batch.ids.end());
  const auto n = static_cast<Eigen::Index>(batch.ids.size());

  std::unordered_map<EntityId, int> row_of;
  for (std::size_t i = 0; i < batch.ids.size(); ++i) row_of[batch.ids[i]] = static_cast<int>(i);

  batch.features.resize(n, static_cast<Eigen::Index>(entity_dim()));
  batch.labels = Eigen::VectorXd::Zero(n);
  std::vector<EntityId> pos(positives.begin(), positives.end());
  std::sort(pos.begin(), pos.end());

  auto query = encoder_.encode(q.text);
  auto codes = slot_codes(view, q, config_);
  std::vector<double> dde(2 * block * config_.anchor_slots);
  std::size_t n_pos = 0;
  for (Eigen::Index i = 0; i < n; ++i) {
    auto e = batch.ids[static_cast<std::size_t>(i)];
    auto row = batch.features.row(i);
    row.segment(0, dim) = query.transpose();
    row.segment(dim, dim) = entity_embedding(e).transpose();
    for (std::size_t s = 0; s < codes.size(); ++s) {
      auto c = lookup(codes[s], e, config_.dde_depth);
      write_one_hot(c.forward, config_.dde_depth, dde.data() + 2 * block * s);
      write_one_hot(c.backward, config_.dde_depth, dde.data() + 2 * block * s + block);
    }
    for (std::size_t k = 0; k < dde.size(); ++k) row[2 * dim + static_cast<Eigen::Index>(k)] = dde[k];
    if (std::binary_search(pos.begin(), pos.end(), e)) {
      batch.labels[i] = 1.0;
      ++n_pos;
    }
  }

  batch.neighbors.assign(batch.ids.size(), {});
  for (auto id : view.triple_ids()) {
    const auto& t = view.triple(id);
    int h = row_of.at(t.head);
    int tl = row_of.at(t.tail);
    batch.neighbors[static_cast<std::size_t>(h)].push_back(tl);
    if (h != tl) batch.neighbors[static_cast<std::size_t>(tl)].push_back(h);
  }
  Eigen::VectorXd log_degree(n);
  for (Eigen::Index i = 0; i < n; ++i)
    log_degree[i] = std::log(static_cast<double>(batch.neighbors[static_cast<std::size_t>(i)].size()) + 1.0);
  double delta = n > 0 ? log_degree.mean() : 0.0;
  if (delta <= 0) delta = 1.0;
  batch.amplification = log_degree / delta;
  batch.attenuation.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) batch.attenuation[i] = log_degree[i] > 0 ? delta / log_degree[i] : 0.0;

  batch.positive_weight = class_weight(n_pos, batch.ids.size() - n_pos, max_positive_weight);
  return batch;
}

// ---------------------------------------------------------------------------
// ParameterSet

std::size_t ParameterSet::add(std::string name, Eigen::MatrixXd value) {
  names_.push_back(std::move(name));
  tensors_.push_back(std::move(value));
  return tensors_.size() - 1;
}

std::size_t ParameterSet::size() const noexcept {
  std::size_t n = 0;
  for (const auto& t : tensors_) n += static_cast<std::size_t>(t.size());
  return n;
}

std::pair<std::size_t, Eigen::Index> ParameterSet::locate(std::size_t flat) const {
  for (std::size_t i = 0; i < tensors_.size(); ++i) {
    auto n = static_cast<std::size_t>(tensors_[i].size());
    if (flat < n) return {i, static_cast<Eigen::Index>(flat)};
    flat -= n;
  }
  throw LookupError("parameter index out of range");
}

double ParameterSet::get(std::size_t flat) const {
  auto [t, i] = locate(flat);
  return tensors_[t].data()[i];
}

void ParameterSet::set(std::size_t flat, double value) {
  auto [t, i] = locate(flat);
  tensors_[t].data()[i] = value;
}

std::vector<Eigen::MatrixXd> ParameterSet::zeros_like() const {
  std::vector<Eigen::MatrixXd> z;
  z.reserve(tensors_.size());
  for (const auto& t : tensors_) z.push_back(Eigen::MatrixXd::Zero(t.rows(), t.cols()));
  return z;
}

void ParameterSet::sgd_step(const std::vector<Eigen::MatrixXd>& grads, double learning_rate) {
  for (std::size_t i = 0; i < tensors_.size(); ++i) tensors_[i] -= learning_rate * grads[i];
}

Eigen::VectorXd ParameterSet::flatten(const std::vector<Eigen::MatrixXd>& grads) const {
  Eigen::VectorXd flat(static_cast<Eigen::Index>(size()));
  Eigen::Index offset = 0;
  for (const auto& g : grads) {
    flat.segment(offset, g.size()) = Eigen::Map<const Eigen::VectorXd>(g.data(), g.size());
    offset += g.size();
  }
  return flat;
}

json ParameterSet::to_json() const {
  json tensors = json::array();
  for (std::size_t i = 0; i < tensors_.size(); ++i) {
    const auto& t = tensors_[i];
    std::vector<double> data(t.data(), t.data() + t.size());  // column-major
    tensors.push_back({{"name", names_[i]}, {"rows", t.rows()}, {"cols", t.cols()}, {"data", data}});
  }
  return tensors;
}

void ParameterSet::load_json(const json& j) {
  if (!j.is_array() || j.size() != tensors_.size()) throw Error("model tensor count mismatch");
  for (std::size_t i = 0; i < tensors_.size(); ++i) {
    const auto& t = j[i];
    if (t.at("name").get<std::string>() != names_[i] || t.at("rows").get<Eigen::Index>() != tensors_[i].rows() ||
        t.at("cols").get<Eigen::Index>() != tensors_[i].cols())
      throw Error("model tensor " + names_[i] + " has an unexpected shape");
    auto data = t.at("data").get<std::vector<double>>();
    if (static_cast<Eigen::Index>(data.size()) != tensors_[i].size()) throw Error("model tensor size mismatch");
    std::copy(data.begin(), data.end(), tensors_[i].data());
  }
}

bool operator==(const ParameterSet& a, const ParameterSet& b) {
  if (a.names_ != b.names_) return false;
  for (std::size_t i = 0; i < a.tensors_.size(); ++i) {
    const auto& x = a.tensors_[i];
    const auto& y = b.tensors_[i];
    if (x.rows() != y.rows() || x.cols() != y.cols()) return false;
    // Bitwise comparison: training determinism is a bit-for-bit contract.
    if (!std::equal(x.data(), x.data() + x.size(), y.data(), [](double p, double q) {
          return std::memcmp(&p, &q, sizeof(double)) == 0;
        }))
      return false;
  }
  return true;
}

// ---------------------------------------------------------------------------
// Scoring

std::vector<EntityId> entities_of(const KnowledgeGraph& graph, std::span<const TripleId> triples) {
  std::vector<EntityId> ents;
  for (auto id : triples) {
    const auto& t = graph.triple(id);
    ents.push_back(t.head);
    ents.push_back(t.tail);
  }
  std::sort(ents.begin(), ents.end());
  ents.erase(std::unique(ents.begin(), ents.end()), ents.end());
  return ents;
}

namespace {

void check_compatible(const ModelInfo& info, std::size_t model_dim, const Featurizer& f,
                      std::size_t feature_dim) {
  if (info.encoder_tag != f.encoder().tag())
    throw Error("model encoder tag " + info.encoder_tag + " does not match " + f.encoder().tag());
  if (model_dim != feature_dim || info.features.dde_depth != f.config().dde_depth ||
      info.features.anchor_slots != f.config().anchor_slots)
    throw Error("feature dimension mismatch: model expects " + std::to_string(model_dim) +
                ", featurizer produces " + std::to_string(feature_dim));
}

}  // namespace

std::vector<ScoredTriple> score_triples(const TripleScorer& model, const Featurizer& featurizer,
                                        const Question& q, const GraphView& view) {
  check_compatible(model.info(), model.input_dim(), featurizer, featurizer.triple_dim());
  std::vector<ScoredTriple> out;
  if (view.empty()) return out;
  auto batch = featurizer.triples(q, view);
  auto scores = model.predict(batch.features);
  out.reserve(batch.ids.size());
  for (std::size_t i = 0; i < batch.ids.size(); ++i)
    out.push_back({batch.ids[i], scores[static_cast<Eigen::Index>(i)], {}});
  return out;
}

std::vector<std::pair<EntityId, double>> score_entities(const EntityScorer& model,
                                                        const Featurizer& featurizer,
                                                        const Question& q, const GraphView& view) {
  check_compatible(model.info(), model.input_dim(), featurizer, featurizer.entity_dim());
  std::vector<std::pair<EntityId, double>> out;
  if (view.empty()) return out;
  auto batch = featurizer.entities(q, view);
  auto scores = model.predict(batch);
  for (std::size_t i = 0; i < batch.ids.size(); ++i)
    out.emplace_back(batch.ids[i], scores[static_cast<Eigen::Index>(i)]);
  return out;
}

std::vector<ScoredTriple> entity_to_triple_scores(
    const std::vector<std::pair<EntityId, double>>& entity_scores, const GraphView& view) {
  std::unordered_map<EntityId, double> p(entity_scores.begin(), entity_scores.end());
  auto score_of = [&](EntityId e) {
    auto it = p.find(e);
    return it == p.end() ? 0.0 : it->second;
  };
  std::map<std::pair<EntityId, EntityId>, std::size_t> unit_of;
  std::vector<ScoredTriple> out;
  for (auto id : view.triple_ids()) {
    const auto& t = view.triple(id);
    auto [it, inserted] = unit_of.try_emplace({t.head, t.tail}, out.size());
    if (inserted) {
      out.push_back({id, score_of(t.head) + score_of(t.tail), {}});
      continue;
    }
    auto& unit = out[it->second];
    if (unit.members.empty()) unit.members.push_back(unit.id);
    unit.members.push_back(id);
  }
  return out;
}

std::unordered_map<TripleId, std::string> merged_relation_labels(
    const KnowledgeGraph& graph, const std::vector<ScoredTriple>& triples) {
  std::unordered_map<TripleId, std::string> labels;
  for (const auto& st : triples) {
    if (st.members.size() < 2) continue;
    std::string joined;
    for (std::size_t i = 0; i < st.members.size(); ++i) {
      if (i) joined += " | ";
      joined += graph.relation_label(graph.triple(st.members[i]).relation);
    }
    labels.emplace(st.id, std::move(joined));
  }
  return labels;
}

RetrievedSubgraph top_k(std::vector<ScoredTriple> scored, std::size_t k) {
  if (k < 1) throw ConfigError("K must be at least 1");
  std::sort(scored.begin(), scored.end(), [](const ScoredTriple& a, const ScoredTriple& b) {
    if (a.score != b.score) return a.score > b.score;
    return a.id < b.id;
  });
  if (scored.size() > k) scored.resize(k);
  return {std::move(scored), k};
}

double recall_at_k(const std::vector<ScoredTriple>& ranked, std::span<const TripleId> positives,
                   std::size_t k) {
  if (positives.empty()) return 1.0;
  std::vector<TripleId> pos(positives.begin(), positives.end());
  std::sort(pos.begin(), pos.end());
  pos.erase(std::unique(pos.begin(), pos.end()), pos.end());
  std::vector<TripleId> hit;
  for (std::size_t i = 0; i < std::min(k, ranked.size()); ++i) {
    if (ranked[i].members.empty()) {
      hit.push_back(ranked[i].id);
    } else {
      hit.insert(hit.end(), ranked[i].members.begin(), ranked[i].members.end());
    }
  }
  std::sort(hit.begin(), hit.end());
  std::size_t found = 0;
  for (auto id : pos)
    if (std::binary_search(hit.begin(), hit.end(), id)) ++found;
  return static_cast<double>(found) / static_cast<double>(pos.size());
}

// ---------------------------------------------------------------------------
// Files

void save_model(const std::string& path, const json& model) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write " + path);
  out << model.dump() << '\n';
}

json load_model_json(const std::string& path, const TextEncoder& encoder) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open " + path);
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ParseError(0, path + ": " + e.what());
  }
  if (j.value("format", std::string{}) != "reg-scorer") throw Error(path + " is not a scorer model file");
  if (j.value("version", 0) != 1) throw Error(path + ": unsupported model version");
  auto tag = j.value("encoder_tag", std::string{});
  if (tag != encoder.tag())
    throw Error(path + ": model was trained with encoder " + tag + ", not " + encoder.tag());
  return j;
}

json retrieval_to_json(const KnowledgeGraph& graph, const std::string& question_id,
                       const RetrievedSubgraph& subgraph) {
  json triples = json::array();
  for (const auto& st : subgraph.triples) {
    json rec{{"triple", json_io::triple_labels(graph, st.id)}, {"score", st.score}};
    if (!st.members.empty()) {
      json members = json::array();
      for (auto m : st.members) members.push_back(json_io::triple_labels(graph, m));
      rec["members"] = std::move(members);
    }
    triples.push_back(std::move(rec));
  }
  return {{"question_id", question_id}, {"k", subgraph.k}, {"triples", std::move(triples)}};
}

RetrievedSubgraph retrieval_from_json(const KnowledgeGraph& graph, const json& j) {
  RetrievedSubgraph sg;
  sg.k = j.at("k").get<std::size_t>();
  for (const auto& rec : j.at("triples")) {
    ScoredTriple st;
    st.id = json_io::resolve_triple(graph, rec.at("triple"));
    st.score = rec.at("score").get<double>();
    if (rec.contains("members"))
      for (const auto& m : rec["members"]) st.members.push_back(json_io::resolve_triple(graph, m));
    sg.triples.push_back(std::move(st));
  }
  return sg;
}

}  // namespace reg
