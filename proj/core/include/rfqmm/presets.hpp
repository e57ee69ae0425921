/// @file presets.hpp
/// @brief Named experiment presets: bond subsets of the bundled market with
///        the trainer hyperparameters used in the reference experiments,
///        plus reduced variants sized for test-suite budgets.
#pragma once

#include <string>
#include <vector>

#include "rfqmm/actor_critic.hpp"
#include "rfqmm/model.hpp"

namespace rfqmm {

struct Preset {
  std::string name;
  std::string description;
  /// Bond indices into the base market; empty = caller supplies the subset
  /// (single-bond template) or the full market.
  std::vector<int> bonds;
  PenaltySpec penalty{PenaltyKind::StdDev, 5e-2};
  double discount = 1e-4;
  /// Risk limits per selected bond, in trade-size units; empty = keep the
  /// base market's limits.
  std::vector<int> max_units;
  TrainConfig config;
};

const std::vector<Preset>& all_presets();

/// Throws std::invalid_argument with the list of known names on a miss.
const Preset& find_preset(const std::string& name);

/// base restricted to the preset's bonds (or `bonds` when the preset leaves
/// the subset open) with penalty, discount, and limits applied.
MarketSpec preset_market(const Preset& preset, const MarketSpec& base,
                         const std::vector<int>& bonds = {});

}  // namespace rfqmm
