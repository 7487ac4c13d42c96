#pragma once
// Simulation of black-box subgraph search: an unknown sparse oracle set
// inside a universe of N items, scored by uniform-weight rewards, recovered
// by randomly drawing subsets and keeping those whose reward clears a
// threshold.

#include <cstddef>
#include <cstdint>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "reg/json_io.hpp"

namespace reg {

struct OracleInstance {
  std::size_t universe_size = 0;          // N; items are 0..N-1
  std::vector<std::uint32_t> oracle_set;  // sorted, unique
  double s0 = 1.0;                        // per-item gain
  double delta0 = 0.0;                    // per-item penalty

  std::size_t oracle_size() const noexcept { return oracle_set.size(); }
  // Oracle = items 0..K-1.
  static OracleInstance make(std::size_t n, std::size_t k, double s0, double delta0);
};

struct SearchConfig {
  std::size_t subset_size = 1;  // S
  double threshold = 0.0;       // accept when reward > threshold
  std::size_t max_rounds = 1000;
  std::uint64_t seed = 42;
  bool stop_on_recovery = true;
  bool record_rewards = true;
};

struct SearchTrace {
  std::size_t rounds_executed = 0;
  std::size_t accepted_rounds = 0;
  bool recovered = false;
  std::optional<std::size_t> recovery_round;  // 1-based
  std::vector<double> rewards;                // per round, when recorded
  std::vector<std::uint32_t> accepted_items;  // union of accepted subsets, ascending
};

// (|A ∩ O| s0 - |A \ O| δ0) / (|O| s0) for a selected item set A.
double reward_global(const std::vector<std::uint32_t>& selected, const OracleInstance& inst);

// (|S ∩ O| s0 - |S \ O| δ0) / (|S| s0). Throws ConfigError on an empty S.
double reward_subset_normalized(const std::vector<std::uint32_t>& selected, const OracleInstance& inst);

// Same reward from counts alone.
double reward_from_count(std::size_t hits, std::size_t subset_size, double s0, double delta0);

// θ = (τ s0 + δ0) / (s0 + δ0): a draw is accepted exactly when K_S > S θ.
double acceptance_theta(double threshold, double s0, double delta0);

// Smallest oracle count a draw needs to be accepted; S + 1 when no draw of
// size S can be.
std::size_t min_accepting_count(const OracleInstance& inst, const SearchConfig& cfg);

// Throws ConfigError on invalid settings; returns soft warnings (threshold
// outside (r0, 1), oracle not sparse).
std::vector<std::string> validate(const OracleInstance& inst, const SearchConfig& cfg);

SearchTrace run_subset_search(const OracleInstance& inst, const SearchConfig& cfg);

// P(X >= min_count) for X ~ Hypergeometric(N, K, S).
double hypergeometric_tail(std::size_t n, std::size_t k, std::size_t s, std::size_t min_count);

// Per-trial generator seed derived from the base seed and the trial index.
std::uint64_t trial_seed(std::uint64_t base, std::size_t trial);

struct TrialResult {
  std::size_t trial = 0;
  std::uint64_t seed = 0;
  std::size_t rounds = 0;  // rounds executed; max_rounds when censored
  bool recovered = false;
  std::size_t accepted_rounds = 0;
};

struct RecoverySummary {
  std::size_t trials = 0;
  std::size_t recovered = 0;
  std::size_t censored = 0;
  double mean_rounds = 0;  // censored trials count at max_rounds
  double median_rounds = 0;
  double q10 = 0, q90 = 0;
  double acceptance_rate = 0;  // accepted / executed rounds, pooled
  double closed_form_acceptance = 0;
  double theta = 0;
  double search_bound = 0;  // e^{2τ²S} N/S log(1/ε), constants dropped
  double information_bound = 0;  // (1-ε) N / log N
  std::vector<TrialResult> per_trial;
};

inline constexpr double kDefaultEpsilon = 0.05;

// Trials are independent and may run on several workers; results do not
// depend on the worker count.
RecoverySummary estimate_recovery_rounds(const OracleInstance& inst, const SearchConfig& cfg,
                                         std::size_t trials, std::size_t workers = 1,
                                         double epsilon = kDefaultEpsilon);

struct AcceptanceEstimate {
  std::size_t rounds = 0;
  std::size_t accepted = 0;
  double rate = 0;
  double closed_form = 0;
  double standard_error = 0;  // binomial, at the closed-form rate
};

// Runs `rounds` draws without stopping at recovery.
AcceptanceEstimate estimate_acceptance_rate(const OracleInstance& inst, SearchConfig cfg, std::size_t rounds);

struct ExperimentConfig {
  OracleInstance instance;
  SearchConfig search;
  std::size_t trials = 1000;
};

// JSON {N, K, s0, delta0, S, threshold, max_rounds, trials, seed}.
ExperimentConfig experiment_from_json(const json_io::json& j);
json_io::json experiment_to_json(const ExperimentConfig& cfg);
json_io::json summary_to_json(const RecoverySummary& summary);
void write_trials_csv(std::ostream& out, const RecoverySummary& summary);

}  // namespace reg
