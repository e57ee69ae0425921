/// @file tabular.hpp
/// @brief Exact grid solvers: policy evaluation, value iteration, greedy
///        policies, stationary distributions, ergodic average reward.
#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "rfqmm/grid.hpp"
#include "rfqmm/model.hpp"

namespace rfqmm {

enum class ValueFlavor { AtAnyTime, AtRfq };

/// Value function on the full inventory grid.
struct ValueTable {
  InventoryGrid grid;
  ValueFlavor flavor = ValueFlavor::AtAnyTime;
  std::vector<double> v;

  ValueTable(InventoryGrid g, ValueFlavor fl)
      : grid(std::move(g)), flavor(fl), v(grid.size(), 0.0) {}
  ValueTable(InventoryGrid g, ValueFlavor fl, std::vector<double> values);

  double range() const;  // max - min
};

/// Fill probabilities per (state, bond, side). Blocked entries hold NaN.
/// A probability of exactly 0 means the side is quoted away (no trade).
struct PolicyTable {
  InventoryGrid grid;
  std::vector<double> p;  // size() * 2 dim(), indexed s * 2d + 2 bond + side

  explicit PolicyTable(InventoryGrid g);

  double prob(int64_t s, int bond, int side) const {
    return p[static_cast<size_t>(s) * 2 * grid.dim() + 2 * bond + side];
  }
  void set_prob(int64_t s, int bond, int side, double value) {
    p[static_cast<size_t>(s) * 2 * grid.dim() + 2 * bond + side] = value;
  }
  /// Quote with the stored fill probability; requires prob in (0, 1).
  double quote(const MarketSpec& market, int64_t s, int bond, int side) const;
};

/// Full grid at the market's max_units limits.
InventoryGrid market_grid(const MarketSpec& market);

/// Per-bond Hamiltonian shapes g_i(p) = Delta_i sup_delta f_i(delta)(delta-p),
/// side intensities excluded so one table serves both sides. The memoized
/// mode watches the first calls per bond, then freezes a Hermite table over
/// the observed p-range (exact fallback outside). Not thread-safe while
/// memoizing.
class HamiltonianOracle {
 public:
  enum class Mode { Exact, Memoized };

  explicit HamiltonianOracle(const MarketSpec& market,
                             Mode mode = Mode::Exact);

  double value(int bond, double p) const;
  double derivative(int bond, double p) const;  // -Delta_i f_i(delta*(p))
  double argmax(int bond, double p) const;      // always exact

 private:
  struct PerBond {
    SuJohnsonCurve curve;
    double trade_size = 0.0;
    int64_t calls = 0;
    double lo = 0.0, hi = 0.0;
    std::optional<HamiltonianTable> table;
  };
  void observe(PerBond& b, double p) const;

  Mode mode_;
  mutable std::vector<PerBond> bonds_;
};

/// theta_tilde solving the linear Bellman equation of the given policy.
/// Sparse direct solve for grids up to 1e4 points, damped fixed point above.
ValueTable policy_evaluation(const MarketSpec& market,
                             const PolicyTable& policy);

/// Flavor coupling theta_tilde = -psi/(r+Lambda) + gamma_RL theta.
ValueTable to_rfq_value(const MarketSpec& market, const ValueTable& anytime);
ValueTable to_anytime_value(const MarketSpec& market, const ValueTable& atrfq);

/// One application of Gamma_2 o Gamma_1 (a gamma_RL contraction).
ValueTable bellman_operator(const MarketSpec& market, const ValueTable& atrfq,
                            const HamiltonianOracle& oracle);

struct ViResult {
  ValueTable table;  // AtRfq
  int64_t iterations = 0;
  double final_diff = 0.0;
};

/// Iterates the Bellman operator from 0 until
/// |theta_{k+1} - theta_k|_inf < tol (1 - gamma_RL), which bounds the
/// fixed-point error by about tol. Also stops once updates stall at the
/// rounding noise of the value level (8 eps |theta|_inf for 4 iterations),
/// since a tighter tol is then unreachable in double precision.
ViResult value_iteration(const MarketSpec& market, double tol,
                         const HamiltonianOracle& oracle,
                         int64_t max_iter = 100'000'000);

/// Greedy quotes at p = (theta_tilde(q) - theta_tilde(q'))/Delta_i.
/// Accepts either flavor, converting internally.
PolicyTable greedy_policy(const MarketSpec& market, const ValueTable& table);

/// Stationary distribution of the RFQ-time inventory chain.
/// A policy with no trading at all yields the uniform distribution (every
/// distribution is stationary); other reducible chains raise, reporting the
/// closed classes.
std::vector<double> stationary_distribution(const MarketSpec& market,
                                            const PolicyTable& policy);

/// Exact ergodic average reward per RFQ under the policy.
double average_reward_per_rfq(const MarketSpec& market,
                              const PolicyTable& policy);

std::string value_table_csv(const ValueTable& table);
std::string policy_table_csv(const MarketSpec& market,
                             const PolicyTable& policy);

}  // namespace rfqmm
