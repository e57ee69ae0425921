/// @file simulator.hpp
/// @brief Discrete-time rollout engine for the RFQ decision process:
///        samples (bond, side), applies the noise-perturbed policy, samples
///        fills, steps inventory, and records everything the trainer needs.
#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "rfqmm/model.hpp"
#include "rfqmm/rng.hpp"

namespace rfqmm {

/// Exploration noise: epsilon uniform on [-amplitude, amplitude] added to
/// the fill probability, clamped into [floor_nu, 1 - floor_nu]. Amplitude 0
/// disables exploration (evaluation rollouts play the policy as-is).
struct NoiseSpec {
  double amplitude = 0.05;
  double floor_nu = 0.005;

  void validate() const;
};

/// (p_eps, delta_eps) from perturbing the quote's fill probability by eps
/// and mapping back through the curve. A nonpositive input probability
/// (side quoted away) is passed through unperturbed.
struct PerturbedQuote {
  double prob_eps = 0.0;
  double quote_eps = 0.0;
};
PerturbedQuote perturbed_policy(const SuJohnsonCurve& curve, double delta,
                                double eps, double nu);

/// Quoted fill probability per (state, bond, side); the simulator derives
/// quotes through the curve. Implementations: trained actor bundles and
/// exact policy tables.
class QuotePolicy {
 public:
  virtual ~QuotePolicy() = default;
  /// Probability in [0, 1); called only on admissible sides. `units` holds
  /// the inventory in trade-size units, `limits` the active per-bond caps.
  virtual double prob(std::span<const int16_t> units,
                      std::span<const int> limits, int bond,
                      int side) const = 0;
};

/// Rollout records in struct-of-arrays form. Every event consumes exactly
/// three RNG draws (event selection, noise, fill) whether or not the drawn
/// side is admissible, so streams stay aligned across policies. Blocked
/// events record probability 0 and NaN quotes and never fill; the post-event
/// state then equals the pre-event state.
struct RolloutBatch {
  int dim = 0;
  std::vector<int> limits;        // active limits during the batch
  std::vector<int16_t> units;     // n x dim, pre-event inventory
  std::vector<int32_t> bond;      // drawn bond I
  std::vector<int8_t> side;       // drawn side s (kBid/kAsk)
  std::vector<double> prob;       // unperturbed fill probability p
  std::vector<double> quote;      // unperturbed quote delta
  std::vector<double> prob_eps;   // played (perturbed) probability
  std::vector<double> quote_eps;  // played quote
  std::vector<uint8_t> fill;      // 1 if the RFQ traded

  int64_t size() const { return static_cast<int64_t>(bond.size()); }
  std::span<const int16_t> state(int64_t i) const {
    return {units.data() + i * dim, static_cast<size_t>(dim)};
  }
  /// Post-event inventory (pre-event plus the fill move, if any).
  std::vector<int16_t> next_state(int64_t i) const;
  bool blocked(int64_t i) const;

  /// Appends another batch recorded under identical dim and limits.
  void append(const RolloutBatch& other);
};

/// Simulates `length` RFQ events from `start` under the perturbed policy.
/// Event (bond, side) pairs follow rfq_event_distribution(market); fills
/// occur with probability prob_eps; inventory respects the active limits in
/// `start` throughout.
RolloutBatch rollout(const MarketSpec& market, const QuotePolicy& policy,
                     const InventoryState& start, int64_t length,
                     const NoiseSpec& noise, Rng& rng);

/// Average reward per RFQ over the records in expected-fill form,
/// p * Delta * delta - psi(q)/Lambda, with the unperturbed quotes.
double estimate_r_mean(const MarketSpec& market, const RolloutBatch& records);

/// Uniform random permutation of the records (all arrays moved together).
void shuffle(RolloutBatch& records, Rng& rng);

/// Debug dump, one record per row.
std::string rollout_csv(const RolloutBatch& records);

}  // namespace rfqmm
