/// @file model.hpp
/// @brief Market specification, inventory state, penalties, RFQ distribution.
#pragma once

#include <span>
#include <string>
#include <vector>

#include "rfqmm/intensity.hpp"

namespace rfqmm {

struct BondSpec {
  std::string id;
  double lambda_bid = 0.0;   // RFQ arrival rate per unit time
  double lambda_ask = 0.0;
  double rfq_size = 0.0;     // numeraire amount per RFQ
  double trade_size = 0.0;   // units of bonds, rfq_size / 100 (bonds at par)
  SuJohnsonCurve curve;
  int max_units = 1;         // risk limit in trade-size units

  void validate() const;
};

enum class PenaltyKind { StdDev, Variance };

struct PenaltySpec {
  PenaltyKind kind = PenaltyKind::StdDev;
  double gamma = 0.0;
};

/// Sides of a quote; bid fills add inventory, ask fills remove it.
inline constexpr int kBid = 0;
inline constexpr int kAsk = 1;

class MarketSpec {
 public:
  /// covariance is d*d row-major. Validates symmetry (1e-12), clamps
  /// eigenvalues in [-1e-10, 0) to 0, rejects anything below.
  MarketSpec(std::vector<BondSpec> bonds, std::vector<double> covariance,
             PenaltySpec penalty, double discount);

  static MarketSpec from_json(const std::string& text);
  static MarketSpec from_json_file(const std::string& path);
  /// The bundled 20-bond data set.
  static MarketSpec default_market20();
  std::string to_json() const;

  int dim() const { return static_cast<int>(bonds_.size()); }
  const BondSpec& bond(int i) const { return bonds_[i]; }
  const std::vector<BondSpec>& bonds() const { return bonds_; }
  double covariance(int i, int j) const { return cov_[i * dim() + j]; }
  const PenaltySpec& penalty() const { return penalty_; }
  double discount() const { return discount_; }

  /// Lambda, the total RFQ intensity over bonds and sides.
  double total_intensity() const;

  /// Sub-market on the given bond indices (order preserved as given).
  MarketSpec restricted(const std::vector<int>& indices) const;
  MarketSpec with_penalty(PenaltySpec penalty) const;
  MarketSpec with_discount(double discount) const;
  MarketSpec with_max_units(const std::vector<int>& max_units) const;

 private:
  std::vector<BondSpec> bonds_;
  std::vector<double> cov_;
  PenaltySpec penalty_;
  double discount_ = 0.0;
};

/// Inventory in trade-size units with the currently active risk limits.
/// Limits only ever grow (reverse Matryoshka schedule) and stay within
/// each bond's max_units.
struct InventoryState {
  std::vector<int> units;
  std::vector<int> limit;

  static InventoryState flat(const MarketSpec& market);
  static InventoryState flat(std::vector<int> limits);

  bool in_bounds() const;
  /// Whether a fill on (bond, side) is admissible at the current state.
  bool admissible(int bond, int side) const;
  void apply_fill(int bond, int side);
  void raise_limits(const std::vector<int>& new_limits);
};

/// psi(q) with q_i = units[i] * trade_size_i.
double penalty_eval(const MarketSpec& market, std::span<const int> units);
double penalty_eval(const MarketSpec& market, std::span<const int16_t> units);
inline double penalty_eval(const MarketSpec& market, const InventoryState& s) {
  return penalty_eval(market, std::span<const int>(s.units));
}

/// Discrete-time discount gamma_RL = Lambda / (r + Lambda).
double gamma_rl(const MarketSpec& market);

/// P(I = i, side = s) = lambda^{i,s} / Lambda, indexed 2 i + side.
std::vector<double> rfq_event_distribution(const MarketSpec& market);

/// Stationary per-RFQ reward contribution f(delta) Delta delta - psi/Lambda;
/// a blocked side contributes -psi/Lambda with fill probability 0.
double expected_step_reward(const MarketSpec& market, const InventoryState& s,
                            int bond, int side, double delta);

}  // namespace rfqmm
