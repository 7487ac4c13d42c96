#include <random>

#include "reg/error.hpp"
#include "reg/retriever.hpp"
#include "training.hpp"

namespace reg {

using json_io::json;

TripleScorer::TripleScorer(std::size_t input_dim, std::vector<std::size_t> hidden, ModelInfo info)
    : input_dim_(input_dim), hidden_(std::move(hidden)), info_(std::move(info)) {
  if (input_dim_ == 0) throw ConfigError("scorer input dimension must be positive");
  std::mt19937_64 rng(info_.seed);
  std::size_t in = input_dim_;
  for (std::size_t l = 0; l < hidden_.size(); ++l) {
    if (hidden_[l] == 0) throw ConfigError("hidden layer width must be positive");
    params_.add("W" + std::to_string(l), detail::xavier_matrix(hidden_[l], in, rng));
    params_.add("b" + std::to_string(l), Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(hidden_[l]), 1));
    in = hidden_[l];
  }
  params_.add("W_out", Eigen::MatrixXd::Zero(1, static_cast<Eigen::Index>(in)));
  params_.add("b_out", Eigen::MatrixXd::Zero(1, 1));
}

Eigen::VectorXd TripleScorer::logits(const Eigen::MatrixXd& features) const {
  if (static_cast<std::size_t>(features.cols()) != input_dim_)
    throw Error("feature dimension mismatch: model expects " + std::to_string(input_dim_) + ", got " +
                std::to_string(features.cols()));
  Eigen::MatrixXd a = features;
  for (std::size_t l = 0; l < hidden_.size(); ++l) {
    const auto& w = params_.tensor(2 * l);
    const auto& b = params_.tensor(2 * l + 1);
    a = ((a * w.transpose()).rowwise() + b.col(0).transpose()).array().tanh().matrix();
  }
  const auto& w = params_.tensor(2 * hidden_.size());
  const auto& b = params_.tensor(2 * hidden_.size() + 1);
  return (a * w.transpose()).col(0).array() + b(0, 0);
}

Eigen::VectorXd TripleScorer::predict(const Eigen::MatrixXd& features) const {
  return logits(features).unaryExpr([](double z) { return detail::sigmoid(z); });
}

double TripleScorer::loss(const TripleBatch& batch, std::vector<Eigen::MatrixXd>* grads) const {
  if (!grads) return detail::weighted_bce(logits(batch.features), batch.labels, batch.positive_weight, nullptr);
  if (static_cast<std::size_t>(batch.features.cols()) != input_dim_)
    throw Error("feature dimension mismatch: model expects " + std::to_string(input_dim_) + ", got " +
                std::to_string(batch.features.cols()));

  const std::size_t depth = hidden_.size();
  std::vector<Eigen::MatrixXd> acts{batch.features};
  for (std::size_t l = 0; l < depth; ++l) {
    const auto& w = params_.tensor(2 * l);
    const auto& b = params_.tensor(2 * l + 1);
    acts.push_back(((acts.back() * w.transpose()).rowwise() + b.col(0).transpose()).array().tanh().matrix());
  }
  const auto& w_out = params_.tensor(2 * depth);
  Eigen::VectorXd z = (acts.back() * w_out.transpose()).col(0).array() + params_.tensor(2 * depth + 1)(0, 0);

  Eigen::VectorXd dz;
  double value = detail::weighted_bce(z, batch.labels, batch.positive_weight, &dz);
  auto& g = *grads;
  g[2 * depth] += dz.transpose() * acts.back();
  g[2 * depth + 1](0, 0) += dz.sum();
  Eigen::MatrixXd da = dz * w_out;
  for (std::size_t k = depth; k-- > 0;) {
    const auto& a = acts[k + 1];
    Eigen::MatrixXd dpre = (da.array() * (1.0 - a.array().square())).matrix();
    g[2 * k] += dpre.transpose() * acts[k];
    g[2 * k + 1] += dpre.colwise().sum().transpose();
    if (k > 0) da = dpre * params_.tensor(2 * k);
  }
  return value;
}

json TripleScorer::to_json() const {
  json j;
  detail::write_info(info_, j);
  j["kind"] = "triple";
  j["input_dim"] = input_dim_;
  j["hidden"] = hidden_;
  j["parameters"] = params_.to_json();
  return j;
}

TripleScorer TripleScorer::from_json(const json& j) {
  if (j.value("kind", std::string{}) != "triple") throw Error("model file does not hold a triple scorer");
  TripleScorer m(j.at("input_dim").get<std::size_t>(), j.at("hidden").get<std::vector<std::size_t>>(),
                 detail::read_info(j));
  m.params_.load_json(j.at("parameters"));
  return m;
}

TrainResult<TripleScorer> train_triple_scorer(const std::vector<TrainingSample>& train,
                                              const std::vector<TrainingSample>& validation,
                                              const Featurizer& featurizer, const TrainConfig& config) {
  std::vector<TripleBatch> batches;
  for (const auto& s : train) {
    detail::require_positives(s);
    batches.push_back(featurizer.triples(s.question, s.view, s.positives, config.max_positive_weight));
  }
  std::vector<TripleBatch> val_batches;
  for (const auto& s : validation) val_batches.push_back(featurizer.triples(s.question, s.view));

  ModelInfo info{featurizer.encoder().tag(), featurizer.encoder().dim(), featurizer.config(), config.seed};
  TripleScorer model(featurizer.triple_dim(), config.hidden, info);

  std::function<std::optional<double>(const TripleScorer&)> validate =
      [&](const TripleScorer& m) -> std::optional<double> {
    double total = 0.0;
    std::size_t counted = 0;
    for (std::size_t i = 0; i < validation.size(); ++i) {
      if (validation[i].positives.empty() || val_batches[i].ids.empty()) continue;
      auto scores = m.predict(val_batches[i].features);
      std::vector<ScoredTriple> scored;
      for (std::size_t r = 0; r < val_batches[i].ids.size(); ++r)
        scored.push_back({val_batches[i].ids[r], scores[static_cast<Eigen::Index>(r)], {}});
      auto ranked = top_k(std::move(scored), config.validation_k);
      total += recall_at_k(ranked.triples, validation[i].positives, config.validation_k);
      ++counted;
    }
    if (counted == 0) return std::nullopt;
    return total / static_cast<double>(counted);
  };
  return detail::sgd_train(std::move(model), batches, validate, config);
}

}  // namespace reg
