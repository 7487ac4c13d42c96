#pragma once
// Shared SGD loop for the two scorers.

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "reg/error.hpp"
#include "reg/retriever.hpp"

namespace reg::detail {

inline double sigmoid(double z) {
  if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
  double e = std::exp(z);
  return e / (1.0 + e);
}

// Weighted BCE with logits: returns the mean loss and writes d(loss)/dz.
inline double weighted_bce(const Eigen::VectorXd& z, const Eigen::VectorXd& y, double positive_weight,
                           Eigen::VectorXd* dz) {
  const auto n = z.size();
  if (n == 0) {
    if (dz) dz->resize(0);
    return 0.0;
  }
  double total = 0.0;
  if (dz) dz->resize(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    double w = y[i] > 0.5 ? positive_weight : 1.0;
    double l = std::max(z[i], 0.0) - z[i] * y[i] + std::log1p(std::exp(-std::abs(z[i])));
    total += w * l;
    if (dz) (*dz)[i] = w * (sigmoid(z[i]) - y[i]) / static_cast<double>(n);
  }
  return total / static_cast<double>(n);
}

inline std::vector<double> xavier(std::size_t fan_in, std::size_t fan_out, std::size_t count,
                                  std::mt19937_64& rng) {
  double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  std::uniform_real_distribution<double> dist(-limit, limit);
  std::vector<double> v(count);
  for (auto& x : v) x = dist(rng);
  return v;
}

inline Eigen::MatrixXd xavier_matrix(std::size_t rows, std::size_t cols, std::mt19937_64& rng) {
  auto v = xavier(cols, rows, rows * cols, rng);
  Eigen::MatrixXd m(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
  std::copy(v.begin(), v.end(), m.data());
  return m;
}

template <typename Model, typename Batch>
TrainResult<Model> sgd_train(Model model, const std::vector<Batch>& batches,
                             const std::function<std::optional<double>(const Model&)>& validate,
                             const TrainConfig& config) {
  if (batches.empty()) throw TrainingError("no training samples");
  if (config.learning_rate <= 0) throw ConfigError("learning rate must be positive");

  TrainResult<Model> result{model, {}, 0};
  std::optional<double> best = validate(model);
  std::mt19937_64 rng(config.seed ^ 0x9e3779b97f4a7c15ULL);
  std::vector<std::size_t> order(batches.size());
  std::iota(order.begin(), order.end(), 0);

  for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    for (auto i : order) {
      auto grads = model.parameters().zeros_like();
      double l = model.loss(batches[i], &grads);
      if (!std::isfinite(l)) throw TrainingError("non-finite loss in epoch " + std::to_string(epoch));
      model.parameters().sgd_step(grads, config.learning_rate);
    }
    double total = 0.0;
    for (const auto& b : batches) total += model.loss(b);
    double mean = total / static_cast<double>(batches.size());
    if (!std::isfinite(mean)) throw TrainingError("non-finite loss in epoch " + std::to_string(epoch));

    EpochStats stats{epoch, mean, validate(model)};
    if (stats.validation_recall && (!best || *stats.validation_recall > *best)) {
      best = stats.validation_recall;
      result.model = model;
      result.selected_epoch = epoch;
    }
    result.history.push_back(stats);
  }
  if (!best) {
    result.model = model;
    result.selected_epoch = config.epochs;
  }
  return result;
}

inline void write_info(const ModelInfo& info, json_io::json& j) {
  j["format"] = "reg-scorer";
  j["version"] = 1;
  j["encoder_tag"] = info.encoder_tag;
  j["encoder_dim"] = info.encoder_dim;
  j["dde_depth"] = info.features.dde_depth;
  j["anchor_slots"] = info.features.anchor_slots;
  j["seed"] = info.seed;
}

inline ModelInfo read_info(const json_io::json& j) {
  ModelInfo info;
  info.encoder_tag = j.at("encoder_tag").get<std::string>();
  info.encoder_dim = j.at("encoder_dim").get<std::size_t>();
  info.features.dde_depth = j.at("dde_depth").get<std::size_t>();
  info.features.anchor_slots = j.at("anchor_slots").get<std::size_t>();
  info.seed = j.at("seed").get<std::uint64_t>();
  return info;
}

inline void require_positives(const TrainingSample& s) {
  if (s.positives.empty())
    throw TrainingError("training sample " + s.question.id + " has no positive triples");
}

}  // namespace reg::detail
