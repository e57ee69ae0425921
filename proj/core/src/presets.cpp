#include "rfqmm/presets.hpp"

#include <stdexcept>

namespace rfqmm {

namespace {

TrainConfig base_config(int64_t steps, std::vector<int> hidden) {
  TrainConfig c;
  c.steps = steps;
  c.actor_hidden = hidden;
  c.critic_hidden = std::move(hidden);
  return c;
}

/// Lighter critic fit for the wide-grid presets: the supervised target is
/// only a starting point, so sampled minibatches and two restarts suffice.
PretrainConfig sampled_critic_fit() {
  PretrainConfig c;
  c.schedule = {{30'000, 1e-3}, {20'000, 1e-4}};
  c.batch_size = 64;
  c.restarts = 2;
  c.standardize_target = true;
  return c;
}

const Preset& by_name(const std::vector<Preset>& built,
                      const std::string& name) {
  for (const Preset& p : built) {
    if (p.name == name) return p;
  }
  throw std::logic_error("preset bootstrap order broken: " + name);
}

std::vector<Preset> build() {
  std::vector<Preset> out;

  {
    Preset p;
    p.name = "single-bond";
    p.description =
        "Single-bond training template (pass --bonds to pick the bond): "
        "myopic pre-training, 50 steps, 2x10 networks.";
    p.config = base_config(50, {10, 10});
    out.push_back(std::move(p));
  }

  {
    Preset p;
    p.name = "two-bond";
    p.description =
        "BOND.1 + BOND.6 multi-network reference run: 500 steps, 2x12 "
        "networks, risk limits fixed at 5 units.";
    p.bonds = {0, 5};
    p.max_units = {5, 5};
    p.config = base_config(500, {12, 12});
    out.push_back(std::move(p));
  }

  {
    Preset p = by_name(out, "two-bond");
    p.name = "two-bond-reduced";
    p.description =
        "BOND.1 + BOND.6 at test-suite scale: 200 steps, long rollouts "
        "shortened to 2000 events.";
    p.config.steps = 200;
    p.config.rollout_length = 2000;
    out.push_back(std::move(p));
  }

  {
    Preset p;
    p.name = "two-bond-null";
    p.description =
        "BOND.18 + BOND.20 null case (tight quotes, nothing to hedge): "
        "reduced scale, expected to show no improvement.";
    p.bonds = {17, 19};
    p.max_units = {5, 5};
    p.config = base_config(200, {12, 12});
    p.config.rollout_length = 2000;
    out.push_back(std::move(p));
  }

  {
    Preset p = by_name(out, "two-bond");
    p.name = "two-bond-singlenet";
    p.description =
        "BOND.1 + BOND.6 with the shared one-hot network variant.";
    p.config.variant = ActorVariant::SingleNetOneHot;
    out.push_back(std::move(p));
  }

  {
    Preset p;
    p.name = "eight-bond";
    p.description =
        "The eight most volatile bonds (BOND.5/7/8/12/14/15/18/19): 3000 "
        "steps, 2x18 networks, critic minibatch 50, limits growing 5 -> 10 "
        "every 500 steps (BOND.5 capped at 5).";
    p.bonds = {4, 6, 7, 11, 13, 14, 17, 18};
    p.max_units = {5, 10, 10, 10, 10, 10, 10, 10};
    p.config = base_config(3000, {18, 18});
    p.config.critic_batch = 50;
    p.config.matryoshka.initial_units = {5, 5, 5, 5, 5, 5, 5, 5};
    p.config.matryoshka.grow_every = 500;
    p.config.critic_pretrain = sampled_critic_fit();
    out.push_back(std::move(p));
  }

  {
    Preset p = by_name(out, "eight-bond");
    p.name = "eight-bond-truncated";
    p.description = "Eight-bond run truncated to 300 steps for the test "
                    "suite (limits stay at their initial 5 units).";
    p.config.steps = 300;
    out.push_back(std::move(p));
  }

  {
    Preset p;
    p.name = "twenty-bond";
    p.description =
        "Full 20-bond market: 5000 steps, 2x30 networks, limits growing "
        "5 -> 10 every 500 steps (BOND.5 capped at 5).";
    p.max_units = std::vector<int>(20, 10);
    p.max_units[4] = 5;
    p.config = base_config(5000, {30, 30});
    p.config.matryoshka.initial_units = std::vector<int>(20, 5);
    p.config.matryoshka.grow_every = 500;
    p.config.critic_pretrain = sampled_critic_fit();
    out.push_back(std::move(p));
  }

  {
    Preset p = by_name(out, "twenty-bond");
    p.name = "twenty-bond-smoke";
    p.description = "20-step smoke run of the 20-bond preset for the "
                    "invariant suites.";
    p.config.steps = 20;
    p.config.critic_pretrain.schedule = {{15'000, 1e-3}, {10'000, 1e-4}};
    p.config.critic_pretrain.restarts = 1;
    out.push_back(std::move(p));
  }

  {
    Preset p;
    p.name = "twenty-bond-singlenet";
    p.description =
        "Full 20-bond market with the shared one-hot network: 20000 steps, "
        "actor 2x300, critic 2x30, rollout 5000 + 100x50, actor rate 5e-4, "
        "limits growing 5 -> 10 every 200 steps (BOND.5 capped at 5).";
    p.max_units = std::vector<int>(20, 10);
    p.max_units[4] = 5;
    p.config = base_config(20'000, {300, 300});
    p.config.critic_hidden = {30, 30};
    p.config.variant = ActorVariant::SingleNetOneHot;
    p.config.rollout_length = 5000;
    p.config.additional_length = 50;
    p.config.critic_batch = 50;
    p.config.actor_rate = 5e-4;
    p.config.matryoshka.initial_units = std::vector<int>(20, 5);
    p.config.matryoshka.grow_every = 200;
    p.config.critic_pretrain = sampled_critic_fit();
    out.push_back(std::move(p));
  }

  return out;
}

}  // namespace

const std::vector<Preset>& all_presets() {
  static const std::vector<Preset> presets = build();
  return presets;
}

const Preset& find_preset(const std::string& name) {
  for (const Preset& p : all_presets()) {
    if (p.name == name) return p;
  }
  std::string known;
  for (const Preset& p : all_presets()) {
    if (!known.empty()) known += ", ";
    known += p.name;
  }
  throw std::invalid_argument("unknown preset '" + name + "' (known: " +
                              known + ")");
}

MarketSpec preset_market(const Preset& preset, const MarketSpec& base,
                         const std::vector<int>& bonds) {
  const std::vector<int>& subset =
      !preset.bonds.empty() ? preset.bonds : bonds;
  MarketSpec market = subset.empty() ? base : base.restricted(subset);
  market = market.with_penalty(preset.penalty).with_discount(preset.discount);
  if (!preset.max_units.empty()) {
    market = market.with_max_units(preset.max_units);
  }
  return market;
}

}  // namespace rfqmm
