#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

#include "reg/blackbox_sim.hpp"
#include "reg/error.hpp"

namespace reg {
namespace {

// Exact binomial coefficient as a long double via the multiplicative formula.
long double choose(std::size_t n, std::size_t k) {
  if (k > n) return 0;
  long double c = 1;
  for (std::size_t i = 1; i <= k; ++i) c = c * static_cast<long double>(n - k + i) / static_cast<long double>(i);
  return c;
}

TEST(BlackboxSim, RewardHandCases) {
  auto inst = OracleInstance::make(10, 3, 1.0, 0.5);
  EXPECT_EQ(reward_global({0, 1, 2}, inst), 1.0);
  EXPECT_EQ(reward_global({0, 1}, inst), 2.0 / 3.0);
  EXPECT_EQ(reward_global({0, 1, 2, 5}, inst), (3.0 - 0.5) / 3.0);
  EXPECT_EQ(reward_global({}, inst), 0.0);
  EXPECT_EQ(reward_subset_normalized({0, 7}, inst), (1.0 - 0.5) / 2.0);
  EXPECT_THROW(reward_subset_normalized({}, inst), ConfigError);
  EXPECT_EQ(reward_from_count(1, 2, 1.0, 0.5), reward_subset_normalized({0, 7}, inst));
}

TEST(BlackboxSim, MinimumAcceptingCountMatchesDirectRewardTest) {
  for (double tau : {-0.2, 0.0, 0.1, 0.23, 0.3, 0.5, 0.9}) {
    for (double delta : {0.0, 0.1, 0.5, 2.0}) {
      for (std::size_t s : {1u, 3u, 10u, 17u}) {
        auto inst = OracleInstance::make(40, 5, 1.0, delta);
        SearchConfig cfg;
        cfg.subset_size = s;
        cfg.threshold = tau;
        std::size_t first = s + 1;
        for (std::size_t k = 0; k <= s; ++k)
          if (reward_from_count(k, s, 1.0, delta) > tau) {
            first = k;
            break;
          }
        EXPECT_EQ(min_accepting_count(inst, cfg), first) << tau << " " << delta << " " << s;
      }
    }
  }
  EXPECT_DOUBLE_EQ(acceptance_theta(0.1, 1.0, 0.1), 0.2 / 1.1);
}

TEST(BlackboxSim, HypergeometricTailMatchesExactCounts) {
  EXPECT_NEAR(hypergeometric_tail(10, 5, 2, 2), 10.0 / 45.0, 1e-15);
  for (std::size_t n : {5u, 12u, 30u}) {
    for (std::size_t k = 0; k <= n; k += 3) {
      for (std::size_t s = 1; s <= n; s += 4) {
        for (std::size_t m = 0; m <= s + 1; ++m) {
          long double num = 0;
          for (std::size_t x = m; x <= std::min(k, s); ++x) num += choose(k, x) * choose(n - k, s - x);
          double exact = static_cast<double>(num / choose(n, s));
          EXPECT_NEAR(hypergeometric_tail(n, k, s, m), exact, 1e-12 + 1e-10 * exact) << n << k << s << m;
        }
      }
    }
  }
}

TEST(BlackboxSim, ValidationErrorsAndWarnings) {
  auto inst = OracleInstance::make(200, 3, 1.0, 0.1);
  SearchConfig cfg;
  cfg.subset_size = 10;
  cfg.threshold = 0.1;
  EXPECT_TRUE(validate(inst, cfg).empty());
  cfg.threshold = 1.5;
  EXPECT_EQ(validate(inst, cfg).size(), 1u);
  cfg.subset_size = 0;
  EXPECT_THROW(validate(inst, cfg), ConfigError);
  cfg.subset_size = 201;
  EXPECT_THROW(validate(inst, cfg), ConfigError);
  EXPECT_THROW(OracleInstance::make(10, 11, 1.0, 0.0), ConfigError);
  auto dense = OracleInstance::make(10, 5, 1.0, 0.1);
  cfg.subset_size = 2;
  cfg.threshold = 0.1;
  EXPECT_FALSE(validate(dense, cfg).empty());
}

TEST(BlackboxSim, SearchIsSeededAndRecoveryCoversOracle) {
  auto inst = OracleInstance::make(50, 3, 1.0, 0.1);
  SearchConfig cfg;
  cfg.subset_size = 8;
  cfg.threshold = 0.1;
  cfg.max_rounds = 100000;
  auto a = run_subset_search(inst, cfg);
  auto b = run_subset_search(inst, cfg);
  EXPECT_EQ(a.rewards, b.rewards);
  ASSERT_TRUE(a.recovered);
  EXPECT_EQ(*a.recovery_round, a.rounds_executed);
  EXPECT_EQ(a.rewards.size(), a.rounds_executed);
  for (auto o : inst.oracle_set)
    EXPECT_TRUE(std::binary_search(a.accepted_items.begin(), a.accepted_items.end(), o));
  std::size_t accepted = 0;
  for (double r : a.rewards) accepted += r > cfg.threshold;
  EXPECT_EQ(accepted, a.accepted_rounds);

  cfg.stop_on_recovery = false;
  cfg.max_rounds = 500;
  cfg.record_rewards = false;
  auto full = run_subset_search(inst, cfg);
  EXPECT_EQ(full.rounds_executed, 500u);
  EXPECT_TRUE(full.rewards.empty());
}

TEST(BlackboxSim, UnreachableThresholdIsCensored) {
  auto inst = OracleInstance::make(200, 3, 1.0, 0.1);
  SearchConfig cfg;
  cfg.subset_size = 10;
  cfg.threshold = 0.3;
  cfg.max_rounds = 300;
  EXPECT_EQ(min_accepting_count(inst, cfg), 4u);  // more than the 3 oracle items
  auto t = run_subset_search(inst, cfg);
  EXPECT_FALSE(t.recovered);
  EXPECT_EQ(t.accepted_rounds, 0u);
  EXPECT_EQ(hypergeometric_tail(200, 3, 10, 4), 0.0);
}

TEST(BlackboxSim, RecoveryEstimateIndependentOfWorkers) {
  auto inst = OracleInstance::make(60, 3, 1.0, 0.1);
  SearchConfig cfg;
  cfg.subset_size = 10;
  cfg.threshold = 0.1;
  cfg.max_rounds = 20000;
  auto one = estimate_recovery_rounds(inst, cfg, 40, 1);
  auto three = estimate_recovery_rounds(inst, cfg, 40, 3);
  EXPECT_EQ(one.mean_rounds, three.mean_rounds);
  EXPECT_EQ(one.per_trial.size(), 40u);
  EXPECT_EQ(one.per_trial[7].seed, trial_seed(cfg.seed, 7));
  EXPECT_NE(trial_seed(1, 0), trial_seed(1, 1));
  EXPECT_LE(one.q10, one.median_rounds);
  EXPECT_LE(one.median_rounds, one.q90);
  EXPECT_GT(one.search_bound, 0.0);
  EXPECT_GT(one.information_bound, 0.0);
  std::ostringstream csv;
  write_trials_csv(csv, one);
  auto text = csv.str();
  EXPECT_EQ(std::count(text.begin(), text.end(), '\n'), 41);
}

TEST(BlackboxSim, ExperimentJsonRoundTrip) {
  auto j = nlohmann::json::parse(R"({"N": 200, "K": 3, "s0": 1, "delta0": 0.1, "S": 10, "threshold": 0.1,
                                     "max_rounds": 5000, "trials": 7, "seed": 9})");
  auto cfg = experiment_from_json(j);
  EXPECT_EQ(cfg.instance.universe_size, 200u);
  EXPECT_EQ(cfg.search.seed, 9u);
  EXPECT_EQ(experiment_to_json(experiment_from_json(experiment_to_json(cfg))), experiment_to_json(cfg));
  EXPECT_THROW(experiment_from_json(nlohmann::json::parse(R"({"N": 10})")), ConfigError);
}

}  // namespace
}  // namespace reg
