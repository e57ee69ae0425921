/// @file harness.hpp
/// @brief Experiment orchestration: exact-vs-learned comparison reports,
///        the per-bond reward tables, plot-data emission, and the JSON
///        experiment spec consumed by the command-line tool.
#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "rfqmm/actor_critic.hpp"
#include "rfqmm/model.hpp"
#include "rfqmm/tabular.hpp"

namespace rfqmm {

/// Declarative experiment request; JSON round-trippable so runs can be
/// replayed from the artifact directory.
struct ExperimentSpec {
  std::string market_path;  ///< empty = bundled 20-bond data set
  std::string mode;  ///< solve-fd|solve-vi|evaluate-policy|train|compare
  std::vector<int> bonds;
  std::string preset;
  std::string out_dir;
  uint64_t seed = 1;

  std::string to_json() const;
  static ExperimentSpec from_json(const std::string& text);
  void validate() const;
};

/// Median over the trailing window of up to 40 points ending at each index
/// (the reporting smoother for learning curves).
std::vector<double> moving_median40(const std::vector<double>& values);

struct CompareReport {
  std::string csv;  ///< one row per (state, bond, admissible side)
  double max_prob_gap = 0.0;
  double mean_prob_gap = 0.0;
  double exact_reward = 0.0;    ///< stationary-distribution value
  double learned_reward = 0.0;  ///< 1e6-event rollout estimate
  double learned_reward_se = 0.0;  ///< batch-means standard error
  std::string summary;             ///< human-readable digest of the above
};

/// Exact solve (value iteration) against a trained policy on the same
/// market: per-grid-point quotes/probabilities/values plus reward summary.
/// The learned value column is the critic aligned to the exact value by a
/// fitted additive level (the critic is only defined up to translation).
/// Throws for d > 2 (exact side would be intractable).
CompareReport run_compare(const MarketSpec& market, const TrainResult& trained,
                          uint64_t seed, double vi_tol = 1e-2);

/// Average reward per RFQ of a policy bundle from a single 10^6-event
/// evaluation rollout (no exploration noise), with a batch-means standard
/// error over 100 consecutive blocks.
struct RolloutEstimate {
  double reward = 0.0;
  double se = 0.0;
};
RolloutEstimate rollout_reward(const MarketSpec& market,
                               const ActorBundle& bundle, uint64_t seed,
                               int64_t events = 1'000'000);

struct RewardTableRow {
  int bond = 0;  ///< index into the base market
  bool ok = false;
  double reward = 0.0;
  std::string error;
};

/// Per-bond exact average reward per RFQ (value iteration + greedy policy +
/// stationary distribution) on single-bond restrictions of the base market.
/// Solver failures are recorded per row and the run continues.
std::vector<RewardTableRow> run_reward_table(const MarketSpec& base,
                                             PenaltySpec penalty,
                                             double discount, int max_units,
                                             double vi_tol = 1e-2);
std::string reward_table_csv(const std::vector<RewardTableRow>& rows);

/// Plot-data emitters (schemas documented in the README).
std::string plot_learning_curve(const std::vector<CurvePoint>& curve);
std::string plot_policy_surface(const MarketSpec& market,
                                const PolicyTable& policy);
std::string plot_value_surface(const MarketSpec& market,
                               const ValueTable& value);
std::string plot_value_difference(const ValueTable& a, const ValueTable& b);

}  // namespace rfqmm
