/// @file actor_critic.hpp
/// @brief Model-based actor-critic training: supervised pre-training from
///        exact single-bond solutions, rollout generation, semi-gradient TD
///        learning of the critic, and noise-driven policy improvement of the
///        per-bond actors.
#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "rfqmm/model.hpp"
#include "rfqmm/neural.hpp"
#include "rfqmm/rng.hpp"
#include "rfqmm/simulator.hpp"
#include "rfqmm/tabular.hpp"

namespace rfqmm {

/// MultiNet: one probability network per bond, each reading the full
/// normalized inventory. SingleNetOneHot: one shared network reading the
/// normalized inventory concatenated with a one-hot bond selector.
enum class ActorVariant { MultiNet, SingleNetOneHot };

/// Risk-limit growth schedule ("reverse Matryoshka dolls"): limits start at
/// initial_units and gain one trade-size unit every grow_every steps, capped
/// at the market's max_units. Empty initial_units means the limits sit at
/// max_units from the start.
struct MatryoshkaSchedule {
  std::vector<int> initial_units;  ///< per bond; empty = max from step 0
  int64_t grow_every = 0;          ///< 0 = never grow

  std::vector<int> limits_at(const MarketSpec& market, int64_t step) const;
  void validate(const MarketSpec& market) const;
};

struct TrainConfig {
  int64_t steps = 500;
  int64_t rollout_length = 10'000;   ///< long rollout from flat inventory
  int64_t n_additional = 100;        ///< extra rollouts from random starts
  int64_t additional_length = 100;
  double critic_rate = 5e-8;         ///< eta
  int64_t critic_batch = 70;         ///< K
  double actor_rate = 1e-2;          ///< eta tilde
  int64_t actor_batch = 50;          ///< L
  NoiseSpec noise{};                 ///< exploration amplitude and prob floor
  ActorVariant variant = ActorVariant::MultiNet;
  std::vector<int> actor_hidden = {12, 12};
  std::vector<int> critic_hidden = {12, 12};
  MatryoshkaSchedule matryoshka{};

  /// Supervised pre-training budgets. The critic fit standardizes its
  /// target (value levels sit far beyond a fresh Glorot init's reach) and
  /// keeps the best of several restarts.
  PretrainConfig critic_pretrain{
      {{30'000, 3e-3}, {30'000, 3e-4}, {20'000, 3e-5}},
      /*batch_size=*/0, /*restarts=*/6, /*standardize_target=*/true};
  PretrainConfig actor_pretrain{{{4'000, 1e-3}}, /*batch_size=*/64};
  /// Pre-training evaluates targets on the full product grid up to this many
  /// points; larger grids fall back to pretrain_samples sampled states.
  int64_t pretrain_max_grid = 20'000;
  int64_t pretrain_samples = 4'096;
  double pretrain_vi_tol = 1e-2;  ///< single-bond solves feeding the targets

  int64_t checkpoint_every = 100;  ///< steps between checkpoints (0 = off)
  std::string checkpoint_dir;      ///< empty = no checkpoints written

  void validate(const MarketSpec& market) const;
};

/// Trained probability networks with the bid/ask symmetry p_ask(q) =
/// p_bid(-q): ask-side queries evaluate the bid network at the negated
/// inventory. Inputs are inventories in trade-size units normalized by
/// max_units (independent of the currently active limits).
struct ActorBundle {
  ActorVariant variant = ActorVariant::MultiNet;
  std::vector<int> max_units;        ///< per-bond normalization
  std::vector<FeedForwardNet> nets;  ///< d nets (MultiNet) or 1 shared

  int dim() const { return static_cast<int>(max_units.size()); }
  int net_input_dim() const;

  /// Raw network probability in (0, 1); no floor applied.
  double prob(std::span<const int16_t> units, int bond, int side) const;
  double prob(std::span<const int> units, int bond, int side) const;
  /// Writes the network input for (units, bond, side); returns the index of
  /// the net to evaluate.
  int make_input(std::span<const int16_t> units, int bond, int side,
                 std::span<double> x) const;
  int make_input(std::span<const int> units, int bond, int side,
                 std::span<double> x) const;

  std::string to_json() const;
  static ActorBundle from_json(const std::string& text);
};

/// Rollout adapter: bundle probabilities clamped into [nu, 1-nu] so the
/// played quotes stay finite and exploration noise has room on both sides.
class BundlePolicy : public QuotePolicy {
 public:
  BundlePolicy(const ActorBundle& bundle, double nu);
  double prob(std::span<const int16_t> units, std::span<const int> limits,
              int bond, int side) const override;

 private:
  const ActorBundle* bundle_;
  double nu_;
};

/// Exact policy table induced by the bundle on the full market grid, for
/// evaluation through the linear solvers (probabilities clipped away from
/// {0,1} only to keep quotes finite; blocked sides hold NaN).
PolicyTable bundle_policy_table(const MarketSpec& market,
                                const ActorBundle& bundle);

/// Expected-fill TD target for record `index` under the frozen critic:
///   p [Delta delta - psi(t)/(r+Lambda) + gamma_RL theta(t)]
///   + (1-p) [-psi(q)/(r+Lambda) + gamma_RL theta(q)] - r_mean,
/// with t the post-fill state; blocked records keep only the stay branch.
double td_target(const MarketSpec& market, const FeedForwardNet& critic,
                 const RolloutBatch& records, int64_t index, double r_mean);

/// One TD pass: floor(size/batch_size) mini-batch semi-gradient steps in
/// record order, each moving the parameters by
/// rate * (1/K) sum_k grad theta(q_k) (td_target_k - theta(q_k))
/// with targets frozen within the mini-batch.
void critic_td_update(const MarketSpec& market, FeedForwardNet& critic,
                      const RolloutBatch& records, double r_mean,
                      int64_t batch_size, double rate);

/// Raw exploration advantages dV = v(delta_eps) - v(delta) under the
/// one-step model and the given critic, with dp = p_eps - p; blocked
/// records contribute zeros.
struct AdvantageData {
  std::vector<double> adv;
  std::vector<double> dp;
};
AdvantageData exploration_advantages(const MarketSpec& market,
                                     const FeedForwardNet& critic,
                                     const RolloutBatch& records);

/// Ascent step on the actor probabilities: records split by bond,
/// advantages normalized by their bond's population standard deviation,
/// mini-batches of `batch_size` applied per bond in record order
/// (sequentially per net for MultiNet, round-robin across bonds for the
/// shared SingleNetOneHot net).
void actor_probability_update(const MarketSpec& market, ActorBundle& actor,
                              const RolloutBatch& records,
                              const AdvantageData& advantages,
                              int64_t batch_size, double rate);

struct CurvePoint {
  int64_t step = 0;   ///< 0-based; measures the policy before this update
  double r_mean = 0;  ///< average reward per RFQ from the long rollout
  std::vector<int> active_limits;
};

/// step,r_mean,active_limits rows; limits joined with '|'.
std::string learning_curve_csv(const std::vector<CurvePoint>& curve);

struct TrainResult {
  ActorBundle actor;
  FeedForwardNet critic;
  std::vector<CurvePoint> curve;
  PretrainResult critic_fit;
  std::vector<PretrainResult> actor_fits;  ///< per network
};

/// Runs pre-training and the full learning loop. Every random draw comes
/// from a stream derived from (seed, purpose, step), so seed plus step index
/// is the complete RNG state: checkpoints need no engine dump and resumed
/// runs replay the exact draw sequence.
TrainResult train(const MarketSpec& market, const TrainConfig& config,
                  uint64_t seed);

/// Continues a checkpointed run to config.steps. The checkpoint must come
/// from the same market, config, and seed; the returned curve contains the
/// pre-checkpoint rows followed by the freshly computed ones.
TrainResult resume(const MarketSpec& market, const TrainConfig& config,
                   const std::string& checkpoint_json);

/// Checkpoint payload written every checkpoint_every steps (and produced by
/// resume() for its final state).
std::string checkpoint_json(const TrainResult& partial, uint64_t seed,
                            int64_t next_step);

}  // namespace rfqmm
