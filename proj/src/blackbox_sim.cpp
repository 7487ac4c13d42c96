#include "reg/blackbox_sim.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <numeric>
#include <random>
#include <thread>

#include "reg/error.hpp"

namespace reg {

using json_io::json;

namespace {
void check_instance(const OracleInstance& inst);
}  // namespace

OracleInstance OracleInstance::make(std::size_t n, std::size_t k, double s0, double delta0) {
  OracleInstance inst;
  inst.universe_size = n;
  inst.oracle_set.resize(k);
  std::iota(inst.oracle_set.begin(), inst.oracle_set.end(), 0u);
  inst.s0 = s0;
  inst.delta0 = delta0;
  check_instance(inst);
  return inst;
}

namespace {

std::size_t count_hits(const std::vector<std::uint32_t>& selected, const OracleInstance& inst) {
  std::size_t hits = 0;
  for (auto x : selected)
    if (std::binary_search(inst.oracle_set.begin(), inst.oracle_set.end(), x)) ++hits;
  return hits;
}

void check_instance(const OracleInstance& inst) {
  if (inst.oracle_set.empty()) throw ConfigError("oracle set must not be empty");
  if (inst.oracle_size() > inst.universe_size) throw ConfigError("oracle set larger than the universe");
  if (!(inst.s0 > 0)) throw ConfigError("s0 must be positive");
  if (inst.delta0 < 0) throw ConfigError("delta0 must be non-negative");
  if (inst.oracle_set.back() >= inst.universe_size) throw ConfigError("oracle item outside the universe");
}

}  // namespace

double reward_global(const std::vector<std::uint32_t>& selected, const OracleInstance& inst) {
  if (inst.oracle_set.empty()) throw ConfigError("oracle set must not be empty");
  auto hits = count_hits(selected, inst);
  auto misses = selected.size() - hits;
  return (static_cast<double>(hits) * inst.s0 - static_cast<double>(misses) * inst.delta0) /
         (static_cast<double>(inst.oracle_size()) * inst.s0);
}

double reward_from_count(std::size_t hits, std::size_t subset_size, double s0, double delta0) {
  return (static_cast<double>(hits) * s0 - static_cast<double>(subset_size - hits) * delta0) /
         (static_cast<double>(subset_size) * s0);
}

double reward_subset_normalized(const std::vector<std::uint32_t>& selected, const OracleInstance& inst) {
  if (selected.empty()) throw ConfigError("subset reward needs a non-empty subset");
  return reward_from_count(count_hits(selected, inst), selected.size(), inst.s0, inst.delta0);
}

double acceptance_theta(double threshold, double s0, double delta0) {
  return (threshold * s0 + delta0) / (s0 + delta0);
}

std::size_t min_accepting_count(const OracleInstance& inst, const SearchConfig& cfg) {
  const auto s = cfg.subset_size;
  double bound = static_cast<double>(s) * acceptance_theta(cfg.threshold, inst.s0, inst.delta0);
  std::size_t k = bound < 0 ? 0 : std::min(s + 1, static_cast<std::size_t>(std::floor(bound)) + 1);
  // The search accepts on reward > threshold, so settle rounding at the
  // boundary with the same comparison. s + 1 means nothing is accepted.
  auto accepts = [&](std::size_t hits) { return reward_from_count(hits, s, inst.s0, inst.delta0) > cfg.threshold; };
  while (k > 0 && accepts(k - 1)) --k;
  while (k <= s && !accepts(k)) ++k;
  return k;
}

std::vector<std::string> validate(const OracleInstance& inst, const SearchConfig& cfg) {
  check_instance(inst);
  if (cfg.subset_size < 1 || cfg.subset_size > inst.universe_size)
    throw ConfigError("subset size must lie in [1, N]");
  if (cfg.max_rounds < 1) throw ConfigError("max_rounds must be at least 1");
  std::vector<std::string> warnings;
  double r0 = reward_from_count(inst.oracle_size(), inst.universe_size, inst.s0, inst.delta0);
  if (!(cfg.threshold > r0 && cfg.threshold < 1.0))
    warnings.push_back("threshold " + std::to_string(cfg.threshold) + " lies outside (r0, 1) with r0 = " +
                       std::to_string(r0));
  if (inst.oracle_size() * 10 > inst.universe_size)
    warnings.push_back("oracle set is not sparse (K > N/10)");
  return warnings;
}

SearchTrace run_subset_search(const OracleInstance& inst, const SearchConfig& cfg) {
  validate(inst, cfg);
  const auto n = inst.universe_size;
  const auto s = cfg.subset_size;
  std::mt19937_64 rng(cfg.seed);
  std::vector<std::uint32_t> perm(n);
  std::iota(perm.begin(), perm.end(), 0u);
  std::vector<char> is_oracle(n, 0);
  for (auto x : inst.oracle_set) is_oracle[x] = 1;
  std::vector<char> taken(n, 0);
  std::size_t covered = 0;

  SearchTrace trace;
  if (cfg.record_rewards) trace.rewards.reserve(std::min<std::size_t>(cfg.max_rounds, 1u << 20));
  for (std::size_t round = 1; round <= cfg.max_rounds; ++round) {
    std::size_t hits = 0;
    for (std::size_t i = 0; i < s; ++i) {
      std::uniform_int_distribution<std::size_t> pick(i, n - 1);
      std::swap(perm[i], perm[pick(rng)]);
      hits += static_cast<std::size_t>(is_oracle[perm[i]]);
    }
    double r = reward_from_count(hits, s, inst.s0, inst.delta0);
    if (cfg.record_rewards) trace.rewards.push_back(r);
    trace.rounds_executed = round;
    if (r > cfg.threshold) {
      ++trace.accepted_rounds;
      for (std::size_t i = 0; i < s; ++i) {
        auto x = perm[i];
        if (taken[x]) continue;
        taken[x] = 1;
        covered += static_cast<std::size_t>(is_oracle[x]);
      }
      if (!trace.recovered && covered == inst.oracle_size()) {
        trace.recovered = true;
        trace.recovery_round = round;
        if (cfg.stop_on_recovery) break;
      }
    }
  }
  for (std::size_t x = 0; x < n; ++x)
    if (taken[x]) trace.accepted_items.push_back(static_cast<std::uint32_t>(x));
  return trace;
}

double hypergeometric_tail(std::size_t n, std::size_t k, std::size_t s, std::size_t min_count) {
  if (k > n || s > n) throw ConfigError("hypergeometric parameters need K <= N and S <= N");
  if (min_count == 0) return 1.0;
  auto log_choose = [](double a, double b) {
    return std::lgamma(a + 1) - std::lgamma(b + 1) - std::lgamma(a - b + 1);
  };
  std::size_t lo = std::max(min_count, s > n - k ? s - (n - k) : std::size_t{0});
  std::size_t hi = std::min(k, s);
  if (lo > hi) return 0.0;
  double denom = log_choose(static_cast<double>(n), static_cast<double>(s));
  double total = 0.0;
  for (std::size_t x = lo; x <= hi; ++x)
    total += std::exp(log_choose(static_cast<double>(k), static_cast<double>(x)) +
                      log_choose(static_cast<double>(n - k), static_cast<double>(s - x)) - denom);
  return std::min(total, 1.0);
}

std::uint64_t trial_seed(std::uint64_t base, std::size_t trial) {
  // splitmix64 finalizer over base + index
  std::uint64_t z = base + 0x9e3779b97f4a7c15ULL * (static_cast<std::uint64_t>(trial) + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

namespace {

double quantile(std::vector<double> sorted, double q) {
  if (sorted.empty()) return 0.0;
  double pos = q * static_cast<double>(sorted.size() - 1);
  auto lo = static_cast<std::size_t>(std::floor(pos));
  auto hi = std::min(lo + 1, sorted.size() - 1);
  double frac = pos - static_cast<double>(lo);
  return sorted[lo] + frac * (sorted[hi] - sorted[lo]);
}

}  // namespace

RecoverySummary estimate_recovery_rounds(const OracleInstance& inst, const SearchConfig& cfg,
                                         std::size_t trials, std::size_t workers, double epsilon) {
  validate(inst, cfg);
  if (trials == 0) throw ConfigError("trials must be at least 1");
  RecoverySummary sum;
  sum.trials = trials;
  sum.per_trial.resize(trials);

  auto run_trial = [&](std::size_t t) {
    SearchConfig c = cfg;
    c.seed = trial_seed(cfg.seed, t);
    c.stop_on_recovery = true;
    c.record_rewards = false;
    auto trace = run_subset_search(inst, c);
    sum.per_trial[t] = {t, c.seed, trace.rounds_executed, trace.recovered, trace.accepted_rounds};
  };
  workers = std::max<std::size_t>(1, std::min(workers, trials));
  if (workers == 1) {
    for (std::size_t t = 0; t < trials; ++t) run_trial(t);
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w)
      pool.emplace_back([&] {
        for (auto t = next++; t < trials; t = next++) run_trial(t);
      });
    for (auto& th : pool) th.join();
  }

  std::vector<double> rounds;
  std::size_t executed = 0, accepted = 0;
  for (const auto& r : sum.per_trial) {
    rounds.push_back(static_cast<double>(r.rounds));
    executed += r.rounds;
    accepted += r.accepted_rounds;
    if (r.recovered) ++sum.recovered;
  }
  sum.censored = trials - sum.recovered;
  sum.mean_rounds = std::accumulate(rounds.begin(), rounds.end(), 0.0) / static_cast<double>(trials);
  std::sort(rounds.begin(), rounds.end());
  sum.median_rounds = quantile(rounds, 0.5);
  sum.q10 = quantile(rounds, 0.1);
  sum.q90 = quantile(rounds, 0.9);
  sum.acceptance_rate = executed ? static_cast<double>(accepted) / static_cast<double>(executed) : 0.0;
  sum.theta = acceptance_theta(cfg.threshold, inst.s0, inst.delta0);
  sum.closed_form_acceptance =
      hypergeometric_tail(inst.universe_size, inst.oracle_size(), cfg.subset_size, min_accepting_count(inst, cfg));
  const double n = static_cast<double>(inst.universe_size);
  const double s = static_cast<double>(cfg.subset_size);
  sum.search_bound = std::exp(2 * cfg.threshold * cfg.threshold * s) * n / s * std::log(1.0 / epsilon);
  sum.information_bound = n > 1 ? (1.0 - epsilon) * n / std::log(n) : 0.0;
  return sum;
}

AcceptanceEstimate estimate_acceptance_rate(const OracleInstance& inst, SearchConfig cfg, std::size_t rounds) {
  cfg.max_rounds = rounds;
  cfg.stop_on_recovery = false;
  cfg.record_rewards = false;
  auto trace = run_subset_search(inst, cfg);
  AcceptanceEstimate est;
  est.rounds = trace.rounds_executed;
  est.accepted = trace.accepted_rounds;
  est.rate = static_cast<double>(est.accepted) / static_cast<double>(est.rounds);
  est.closed_form =
      hypergeometric_tail(inst.universe_size, inst.oracle_size(), cfg.subset_size, min_accepting_count(inst, cfg));
  est.standard_error = std::sqrt(est.closed_form * (1 - est.closed_form) / static_cast<double>(est.rounds));
  return est;
}

ExperimentConfig experiment_from_json(const json& j) {
  ExperimentConfig cfg;
  try {
    cfg.instance = OracleInstance::make(j.at("N").get<std::size_t>(), j.at("K").get<std::size_t>(),
                                        j.value("s0", 1.0), j.value("delta0", 0.0));
    cfg.search.subset_size = j.at("S").get<std::size_t>();
    cfg.search.threshold = j.at("threshold").get<double>();
    cfg.search.max_rounds = j.value("max_rounds", std::size_t{10000});
    cfg.search.seed = j.value("seed", std::uint64_t{42});
    cfg.trials = j.value("trials", std::size_t{1000});
  } catch (const json::exception& e) {
    throw ConfigError(std::string("experiment config: ") + e.what());
  }
  return cfg;
}

json experiment_to_json(const ExperimentConfig& cfg) {
  return {{"N", cfg.instance.universe_size},       {"K", cfg.instance.oracle_size()},
          {"s0", cfg.instance.s0},                 {"delta0", cfg.instance.delta0},
          {"S", cfg.search.subset_size},           {"threshold", cfg.search.threshold},
          {"max_rounds", cfg.search.max_rounds},   {"trials", cfg.trials},
          {"seed", cfg.search.seed}};
}

json summary_to_json(const RecoverySummary& s) {
  return {{"trials", s.trials},
          {"recovered", s.recovered},
          {"censored", s.censored},
          {"mean_rounds", s.mean_rounds},
          {"median_rounds", s.median_rounds},
          {"q10_rounds", s.q10},
          {"q90_rounds", s.q90},
          {"acceptance_rate", s.acceptance_rate},
          {"closed_form_acceptance", s.closed_form_acceptance},
          {"theta", s.theta},
          {"search_bound", s.search_bound},
          {"information_bound", s.information_bound}};
}

void write_trials_csv(std::ostream& out, const RecoverySummary& summary) {
  out << "trial,seed,rounds,recovered,accepted_rounds\n";
  for (const auto& t : summary.per_trial)
    out << t.trial << ',' << t.seed << ',' << t.rounds << ',' << (t.recovered ? 1 : 0) << ',' << t.accepted_rounds
        << '\n';
}

}  // namespace reg
