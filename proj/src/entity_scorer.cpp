#include <random>

#include "reg/error.hpp"
#include "reg/retriever.hpp"
#include "training.hpp"

namespace reg {

using json_io::json;

namespace {

constexpr Eigen::Index kBlocks = 9;  // {mean, max, min} x {identity, amplification, attenuation}

std::size_t self_index(std::size_t l) { return 2 + 3 * l; }
std::size_t agg_index(std::size_t l) { return 3 + 3 * l; }
std::size_t bias_index(std::size_t l) { return 4 + 3 * l; }

}  // namespace

struct EntityScorer::Trace {
  std::vector<Eigen::MatrixXd> h;        // layer inputs/outputs, h[0] after input projection
  std::vector<Eigen::MatrixXd> agg;      // aggregated messages per layer
  std::vector<Eigen::MatrixXi> arg_max;  // neighbor row chosen by max, -1 if isolated
  std::vector<Eigen::MatrixXi> arg_min;
};

EntityScorer::EntityScorer(std::size_t input_dim, std::size_t hidden, std::size_t layers, ModelInfo info)
    : input_dim_(input_dim), hidden_(hidden), layers_(layers), info_(std::move(info)) {
  if (input_dim_ == 0 || hidden_ == 0) throw ConfigError("scorer dimensions must be positive");
  std::mt19937_64 rng(info_.seed);
  const auto h = static_cast<Eigen::Index>(hidden_);
  params_.add("W_in", detail::xavier_matrix(hidden_, input_dim_, rng));
  params_.add("b_in", Eigen::MatrixXd::Zero(h, 1));
  for (std::size_t l = 0; l < layers_; ++l) {
    params_.add("W_self" + std::to_string(l), detail::xavier_matrix(hidden_, hidden_, rng));
    params_.add("W_agg" + std::to_string(l), detail::xavier_matrix(hidden_, static_cast<std::size_t>(kBlocks) * hidden_, rng));
    params_.add("b" + std::to_string(l), Eigen::MatrixXd::Zero(h, 1));
  }
  params_.add("W_out", Eigen::MatrixXd::Zero(1, h));
  params_.add("b_out", Eigen::MatrixXd::Zero(1, 1));
}

Eigen::VectorXd EntityScorer::forward(const EntityBatch& batch, Trace* trace) const {
  if (static_cast<std::size_t>(batch.features.cols()) != input_dim_)
    throw Error("feature dimension mismatch: model expects " + std::to_string(input_dim_) + ", got " +
                std::to_string(batch.features.cols()));
  const auto n = batch.features.rows();
  const auto hd = static_cast<Eigen::Index>(hidden_);

  Eigen::MatrixXd h =
      ((batch.features * params_.tensor(0).transpose()).rowwise() + params_.tensor(1).col(0).transpose())
          .array()
          .tanh()
          .matrix();
  if (trace) trace->h.push_back(h);

  for (std::size_t l = 0; l < layers_; ++l) {
    Eigen::MatrixXd agg = Eigen::MatrixXd::Zero(n, kBlocks * hd);
    Eigen::MatrixXi amax = Eigen::MatrixXi::Constant(n, hd, -1);
    Eigen::MatrixXi amin = Eigen::MatrixXi::Constant(n, hd, -1);
    for (Eigen::Index v = 0; v < n; ++v) {
      const auto& nb = batch.neighbors[static_cast<std::size_t>(v)];
      if (nb.empty()) continue;
      Eigen::RowVectorXd mean = Eigen::RowVectorXd::Zero(hd);
      Eigen::RowVectorXd mx = h.row(nb[0]);
      Eigen::RowVectorXd mn = h.row(nb[0]);
      amax.row(v).setConstant(nb[0]);
      amin.row(v).setConstant(nb[0]);
      for (std::size_t k = 0; k < nb.size(); ++k) {
        int u = nb[k];
        mean += h.row(u);
        if (k == 0) continue;
        for (Eigen::Index c = 0; c < hd; ++c) {
          if (h(u, c) > mx[c]) {
            mx[c] = h(u, c);
            amax(v, c) = u;
          }
          if (h(u, c) < mn[c]) {
            mn[c] = h(u, c);
            amin(v, c) = u;
          }
        }
      }
      mean /= static_cast<double>(nb.size());
      const double scale[3] = {1.0, batch.amplification[v], batch.attenuation[v]};
      for (int s = 0; s < 3; ++s) {
        agg.block(v, (3 * s + 0) * hd, 1, hd) = mean * scale[s];
        agg.block(v, (3 * s + 1) * hd, 1, hd) = mx * scale[s];
        agg.block(v, (3 * s + 2) * hd, 1, hd) = mn * scale[s];
      }
    }
    Eigen::MatrixXd pre = h * params_.tensor(self_index(l)).transpose() +
                          agg * params_.tensor(agg_index(l)).transpose();
    pre.rowwise() += params_.tensor(bias_index(l)).col(0).transpose();
    h = pre.array().tanh().matrix();
    if (trace) {
      trace->agg.push_back(std::move(agg));
      trace->arg_max.push_back(std::move(amax));
      trace->arg_min.push_back(std::move(amin));
      trace->h.push_back(h);
    }
  }
  const auto out = params_.tensor_count() - 2;
  return (h * params_.tensor(out).transpose()).col(0).array() + params_.tensor(out + 1)(0, 0);
}

Eigen::VectorXd EntityScorer::logits(const EntityBatch& batch) const { return forward(batch, nullptr); }

Eigen::VectorXd EntityScorer::predict(const EntityBatch& batch) const {
  return logits(batch).unaryExpr([](double z) { return detail::sigmoid(z); });
}

double EntityScorer::loss(const EntityBatch& batch, std::vector<Eigen::MatrixXd>* grads) const {
  if (!grads) return detail::weighted_bce(logits(batch), batch.labels, batch.positive_weight, nullptr);

  Trace trace;
  Eigen::VectorXd z = forward(batch, &trace);
  Eigen::VectorXd dz;
  double value = detail::weighted_bce(z, batch.labels, batch.positive_weight, &dz);

  auto& g = *grads;
  const auto n = batch.features.rows();
  const auto hd = static_cast<Eigen::Index>(hidden_);
  const auto out = params_.tensor_count() - 2;
  g[out] += dz.transpose() * trace.h.back();
  g[out + 1](0, 0) += dz.sum();
  Eigen::MatrixXd dh = dz * params_.tensor(out);

  for (std::size_t l = layers_; l-- > 0;) {
    const auto& h_out = trace.h[l + 1];
    const auto& h_in = trace.h[l];
    Eigen::MatrixXd dpre = (dh.array() * (1.0 - h_out.array().square())).matrix();
    g[self_index(l)] += dpre.transpose() * h_in;
    g[agg_index(l)] += dpre.transpose() * trace.agg[l];
    g[bias_index(l)] += dpre.colwise().sum().transpose();

    Eigen::MatrixXd dprev = dpre * params_.tensor(self_index(l));
    Eigen::MatrixXd dagg = dpre * params_.tensor(agg_index(l));
    for (Eigen::Index v = 0; v < n; ++v) {
      const auto& nb = batch.neighbors[static_cast<std::size_t>(v)];
      if (nb.empty()) continue;
      const double scale[3] = {1.0, batch.amplification[v], batch.attenuation[v]};
      Eigen::RowVectorXd dmean = Eigen::RowVectorXd::Zero(hd);
      Eigen::RowVectorXd dmax = Eigen::RowVectorXd::Zero(hd);
      Eigen::RowVectorXd dmin = Eigen::RowVectorXd::Zero(hd);
      for (int s = 0; s < 3; ++s) {
        dmean += scale[s] * dagg.block(v, (3 * s + 0) * hd, 1, hd);
        dmax += scale[s] * dagg.block(v, (3 * s + 1) * hd, 1, hd);
        dmin += scale[s] * dagg.block(v, (3 * s + 2) * hd, 1, hd);
      }
      dmean /= static_cast<double>(nb.size());
      for (int u : nb) dprev.row(u) += dmean;
      for (Eigen::Index c = 0; c < hd; ++c) {
        dprev(trace.arg_max[l](v, c), c) += dmax[c];
        dprev(trace.arg_min[l](v, c), c) += dmin[c];
      }
    }
    dh = std::move(dprev);
  }
  Eigen::MatrixXd dpre0 = (dh.array() * (1.0 - trace.h[0].array().square())).matrix();
  g[0] += dpre0.transpose() * batch.features;
  g[1] += dpre0.colwise().sum().transpose();
  return value;
}

json EntityScorer::to_json() const {
  json j;
  detail::write_info(info_, j);
  j["kind"] = "entity";
  j["input_dim"] = input_dim_;
  j["hidden"] = hidden_;
  j["layers"] = layers_;
  j["parameters"] = params_.to_json();
  return j;
}

EntityScorer EntityScorer::from_json(const json& j) {
  if (j.value("kind", std::string{}) != "entity") throw Error("model file does not hold an entity scorer");
  EntityScorer m(j.at("input_dim").get<std::size_t>(), j.at("hidden").get<std::size_t>(),
                 j.at("layers").get<std::size_t>(), detail::read_info(j));
  m.params_.load_json(j.at("parameters"));
  return m;
}

TrainResult<EntityScorer> train_entity_scorer(const std::vector<TrainingSample>& train,
                                              const std::vector<TrainingSample>& validation,
                                              const Featurizer& featurizer, const TrainConfig& config) {
  std::vector<EntityBatch> batches;
  for (const auto& s : train) {
    detail::require_positives(s);
    auto pos = entities_of(s.view.graph(), s.positives);
    batches.push_back(featurizer.entities(s.question, s.view, pos, config.max_positive_weight));
  }
  std::vector<EntityBatch> val_batches;
  std::vector<std::vector<EntityId>> val_positives;
  for (const auto& s : validation) {
    val_batches.push_back(featurizer.entities(s.question, s.view));
    val_positives.push_back(entities_of(s.view.graph(), s.positives));
  }

  ModelInfo info{featurizer.encoder().tag(), featurizer.encoder().dim(), featurizer.config(), config.seed};
  EntityScorer model(featurizer.entity_dim(), config.gnn_hidden, config.gnn_layers, info);

  std::function<std::optional<double>(const EntityScorer&)> validate =
      [&](const EntityScorer& m) -> std::optional<double> {
    double total = 0.0;
    std::size_t counted = 0;
    for (std::size_t i = 0; i < val_batches.size(); ++i) {
      if (val_positives[i].empty() || val_batches[i].ids.empty()) continue;
      auto scores = m.predict(val_batches[i]);
      std::vector<ScoredTriple> scored;
      for (std::size_t r = 0; r < val_batches[i].ids.size(); ++r)
        scored.push_back({val_batches[i].ids[r], scores[static_cast<Eigen::Index>(r)], {}});
      auto ranked = top_k(std::move(scored), config.validation_k);
      total += recall_at_k(ranked.triples, val_positives[i], config.validation_k);
      ++counted;
    }
    if (counted == 0) return std::nullopt;
    return total / static_cast<double>(counted);
  };
  return detail::sgd_train(std::move(model), batches, validate, config);
}

}  // namespace reg
