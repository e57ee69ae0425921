#include "rfqmm/actor_critic.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <stdexcept>
#include <utility>

#include <nlohmann/json.hpp>

#include "rfqmm/csv.hpp"
#include "rfqmm/intensity.hpp"

namespace rfqmm {

namespace {

using nlohmann::json;

template <typename Int>
int make_input_impl(const ActorBundle& b, std::span<const Int> units, int bond,
                    int side, std::span<double> x) {
  const int d = b.dim();
  const double sign = side == kBid ? 1.0 : -1.0;
  for (int i = 0; i < d; ++i) {
    x[i] = sign * static_cast<double>(units[i]) / b.max_units[i];
  }
  if (b.variant == ActorVariant::SingleNetOneHot) {
    for (int i = 0; i < d; ++i) x[d + i] = i == bond ? 1.0 : 0.0;
    return 0;
  }
  return bond;
}

void sgd_step(FeedForwardNet& net, std::span<const double> direction,
              double rate) {
  auto params = net.params();
  for (size_t k = 0; k < params.size(); ++k) params[k] += rate * direction[k];
}

json pretrain_result_json(const PretrainResult& r) {
  return json{{"held_out_mse", r.held_out_mse},
              {"train_mse", r.train_mse},
              {"target_variance", r.target_variance},
              {"reached", r.reached},
              {"warning", r.warning}};
}

PretrainResult pretrain_result_from_json(const json& j) {
  PretrainResult r;
  r.held_out_mse = j.at("held_out_mse").get<double>();
  r.train_mse = j.at("train_mse").get<double>();
  r.target_variance = j.at("target_variance").get<double>();
  r.reached = j.at("reached").get<bool>();
  r.warning = j.at("warning").get<std::string>();
  return r;
}

/// Per-bond ingredients for pre-training, indexed by n + max_units.
struct SingleBondSolution {
  std::vector<double> bid_prob;     ///< initial-strategy bid fill probability
  std::vector<double> theta_tilde;  ///< value of the initial strategy
  std::vector<double> psi;          ///< single-bond penalty
};

SingleBondSolution solve_single_bond(const MarketSpec& market, int bond,
                                     double vi_tol, bool myopic) {
  const MarketSpec sub = market.dim() == 1 ? market : market.restricted({bond});
  const InventoryGrid grid = market_grid(sub);
  const int64_t n = grid.size();
  SingleBondSolution out;
  out.bid_prob.resize(n);
  out.theta_tilde.resize(n);
  out.psi.resize(n);

  PolicyTable policy(grid);
  if (myopic) {
    const double p = f_eval(sub.bond(0).curve, myopic_quote(sub.bond(0).curve));
    for (int64_t s = 0; s < n; ++s) {
      for (int side : {kBid, kAsk}) {
        policy.set_prob(s, 0, side,
                        grid.neighbor(s, 0, side) >= 0
                            ? p
                            : std::numeric_limits<double>::quiet_NaN());
      }
    }
    const ValueTable value = policy_evaluation(sub, policy);
    for (int64_t s = 0; s < n; ++s) out.theta_tilde[s] = value.v[s];
  } else {
    const HamiltonianOracle oracle(sub);
    const ViResult vi = value_iteration(sub, vi_tol, oracle);
    policy = greedy_policy(sub, vi.table);
    for (int64_t s = 0; s < n; ++s) out.theta_tilde[s] = vi.table.v[s];
  }

  for (int64_t s = 0; s < n; ++s) {
    const int units = grid.unit_at(s, 0);
    out.psi[s] = penalty_eval(sub, std::span<const int>(&units, 1));
    // The bid is blocked only at the upper bound; reuse the last admissible
    // probability there so the fitted surface stays flat at the edge.
    out.bid_prob[s] = grid.neighbor(s, 0, kBid) >= 0
                          ? policy.prob(s, 0, kBid)
                          : out.bid_prob[s - 1];
  }
  return out;
}

/// States feeding the supervised pre-training fits: the full product grid
/// when small enough, otherwise uniform samples.
std::vector<std::vector<int>> pretrain_states(const MarketSpec& market,
                                              const TrainConfig& config,
                                              uint64_t seed) {
  const int d = market.dim();
  double grid_size = 1.0;
  for (int i = 0; i < d; ++i) grid_size *= 2.0 * market.bond(i).max_units + 1;

  std::vector<std::vector<int>> states;
  if (grid_size <= static_cast<double>(config.pretrain_max_grid)) {
    const InventoryGrid grid = market_grid(market);
    states.resize(grid.size(), std::vector<int>(d));
    for (int64_t s = 0; s < grid.size(); ++s) grid.units(s, states[s]);
  } else {
    Rng rng = Rng::stream(seed, "pretrain-grid");
    states.resize(config.pretrain_samples, std::vector<int>(d));
    for (auto& q : states) {
      for (int i = 0; i < d; ++i) {
        const int m = market.bond(i).max_units;
        q[i] = -m + static_cast<int>(rng.below(2 * m + 1));
      }
    }
  }
  return states;
}

struct TrainerState {
  TrainerState(const MarketSpec& m, const TrainConfig& c, uint64_t s,
               ActorBundle a, FeedForwardNet cr)
      : market(m),
        config(c),
        seed(s),
        d(m.dim()),
        denom(m.discount() + m.total_intensity()),
        grl(gamma_rl(m)),
        actor(std::move(a)),
        critic(std::move(cr)) {}

  const MarketSpec& market;
  const TrainConfig& config;
  uint64_t seed;
  int d;
  double denom;     // r + Lambda
  double grl;       // gamma_RL
  ActorBundle actor;
  FeedForwardNet critic;
  std::vector<CurvePoint> curve;
  PretrainResult critic_fit;
  std::vector<PretrainResult> actor_fits;

  std::vector<double> inv_max;  // 1 / max_units per bond
};

TrainerState make_state(const MarketSpec& market, const TrainConfig& config,
                        uint64_t seed) {
  const int d = market.dim();
  ActorBundle actor;
  actor.variant = config.variant;
  actor.max_units.resize(d);
  for (int i = 0; i < d; ++i) actor.max_units[i] = market.bond(i).max_units;

  std::vector<int> actor_layers;
  actor_layers.push_back(actor.variant == ActorVariant::SingleNetOneHot ? 2 * d
                                                                        : d);
  for (int h : config.actor_hidden) actor_layers.push_back(h);
  actor_layers.push_back(1);
  const int n_nets = actor.variant == ActorVariant::SingleNetOneHot ? 1 : d;
  for (int i = 0; i < n_nets; ++i) {
    actor.nets.emplace_back(actor_layers, OutputHead::Logistic);
  }

  std::vector<int> critic_layers;
  critic_layers.push_back(d);
  for (int h : config.critic_hidden) critic_layers.push_back(h);
  critic_layers.push_back(1);

  TrainerState st(market, config, seed, std::move(actor),
                  FeedForwardNet(critic_layers, OutputHead::Affine));
  st.inv_max.resize(d);
  for (int i = 0; i < d; ++i) st.inv_max[i] = 1.0 / st.actor.max_units[i];
  return st;
}

void pretrain(TrainerState& st) {
  const MarketSpec& market = st.market;
  const TrainConfig& config = st.config;
  const int d = st.d;
  const bool myopic = d == 1;

  std::vector<SingleBondSolution> single(d);
  for (int i = 0; i < d; ++i) {
    single[i] = solve_single_bond(market, i, config.pretrain_vi_tol, myopic);
  }

  const auto states = pretrain_states(market, config, st.seed);
  const int64_t n = static_cast<int64_t>(states.size());

  // Critic target: separable sum of the single-bond values, converted to the
  // at-any-time form with the full market's discounting, then zero-meaned.
  std::vector<double> critic_x(n * d), critic_y(n);
  double mean = 0.0;
  for (int64_t s = 0; s < n; ++s) {
    double y = 0.0;
    for (int i = 0; i < d; ++i) {
      const int k = states[s][i] + st.actor.max_units[i];
      y += (single[i].theta_tilde[k] + single[i].psi[k] / st.denom) / st.grl;
      critic_x[s * d + i] = states[s][i] * st.inv_max[i];
    }
    critic_y[s] = y;
    mean += y / n;
  }
  for (double& y : critic_y) y -= mean;

  Rng critic_rng = Rng::stream(st.seed, "pretrain-critic");
  st.critic_fit = pretrain_supervised(st.critic, critic_x, critic_y,
                                      config.critic_pretrain, critic_rng);

  // Actor targets: the initial strategy's bid probability, a function of the
  // own coordinate alone, fitted over the same states (the ask side follows
  // from the sign symmetry of the inputs).
  if (st.actor.variant == ActorVariant::MultiNet) {
    for (int i = 0; i < d; ++i) {
      std::vector<double> y(n);
      for (int64_t s = 0; s < n; ++s) {
        y[s] = single[i].bid_prob[states[s][i] + st.actor.max_units[i]];
      }
      Rng rng = Rng::stream(st.seed, "pretrain-actor", i);
      st.actor_fits.push_back(pretrain_supervised(
          st.actor.nets[i], critic_x, y, config.actor_pretrain, rng));
    }
  } else {
    std::vector<double> x(n * d * 2 * d), y(n * d);
    int64_t row = 0;
    for (int i = 0; i < d; ++i) {
      for (int64_t s = 0; s < n; ++s, ++row) {
        double* xr = x.data() + row * 2 * d;
        for (int l = 0; l < d; ++l) {
          xr[l] = states[s][l] * st.inv_max[l];
          xr[d + l] = l == i ? 1.0 : 0.0;
        }
        y[row] = single[i].bid_prob[states[s][i] + st.actor.max_units[i]];
      }
    }
    Rng rng = Rng::stream(st.seed, "pretrain-actor", 0);
    st.actor_fits.push_back(pretrain_supervised(st.actor.nets[0], x, y,
                                                config.actor_pretrain, rng));
  }
}

/// Scratch for the per-record state loads shared by the update operations.
struct UpdateBuffers {
  NetWorkspace ws;
  std::vector<double> xq, xt;
  std::vector<int16_t> tbuf;
  std::vector<double> inv_max;

  explicit UpdateBuffers(const MarketSpec& market)
      : xq(static_cast<size_t>(market.dim())),
        xt(static_cast<size_t>(market.dim())),
        tbuf(static_cast<size_t>(market.dim())),
        inv_max(static_cast<size_t>(market.dim())) {
    for (int i = 0; i < market.dim(); ++i) {
      inv_max[static_cast<size_t>(i)] = 1.0 / market.bond(i).max_units;
    }
  }
};

/// Normalized pre-event state into xq; normalized post-event state into xt.
/// Returns psi of the post-event state.
double load_states(const MarketSpec& market, const RolloutBatch& batch,
                   int64_t j, std::span<const int16_t> s, bool blocked,
                   UpdateBuffers& b) {
  const int d = batch.dim;
  for (int i = 0; i < d; ++i) b.xq[i] = s[i] * b.inv_max[i];
  std::copy(s.begin(), s.end(), b.tbuf.begin());
  if (!blocked) {
    b.tbuf[batch.bond[j]] +=
        static_cast<int16_t>(batch.side[j] == kBid ? 1 : -1);
  }
  for (int i = 0; i < d; ++i) b.xt[i] = b.tbuf[i] * b.inv_max[i];
  return penalty_eval(market, std::span<const int16_t>(b.tbuf));
}

/// Single implementation behind td_target and critic_td_update; leaves the
/// record's normalized pre-event state in b.xq for the gradient call.
double td_target_impl(const MarketSpec& market, const FeedForwardNet& critic,
                      const RolloutBatch& batch, int64_t j, double r_mean,
                      double denom, double grl, UpdateBuffers& b,
                      double* theta_q_out) {
  const auto s = batch.state(j);
  const bool blocked = batch.blocked(j);
  const double psi_t = load_states(market, batch, j, s, blocked, b);
  const double theta_q = critic.forward(b.xq, b.ws);
  if (theta_q_out) *theta_q_out = theta_q;
  if (blocked) return -psi_t / denom + grl * theta_q - r_mean;
  const double theta_t = critic.forward(b.xt, b.ws);
  const double psi_s = penalty_eval(market, s);
  const double p = batch.prob[j];
  const double fill = market.bond(batch.bond[j]).trade_size * batch.quote[j] -
                      psi_t / denom + grl * theta_t;
  const double stay = -psi_s / denom + grl * theta_q;
  return p * fill + (1.0 - p) * stay - r_mean;
}

TrainResult pack_result(TrainerState& st) {
  return TrainResult{std::move(st.actor), std::move(st.critic),
                     std::move(st.curve), st.critic_fit,
                     std::move(st.actor_fits)};
}

void maybe_checkpoint(const TrainerState& st, int64_t next_step) {
  if (st.config.checkpoint_every <= 0 || st.config.checkpoint_dir.empty()) {
    return;
  }
  if (next_step % st.config.checkpoint_every != 0) return;
  TrainResult snapshot{st.actor, st.critic, st.curve, st.critic_fit,
                       st.actor_fits};
  char name[64];
  std::snprintf(name, sizeof(name), "checkpoint-%06lld.json",
                static_cast<long long>(next_step));
  const std::filesystem::path path =
      std::filesystem::path(st.config.checkpoint_dir) / name;
  std::ofstream out(path);
  if (!out) {
    throw std::runtime_error("cannot write checkpoint: " + path.string());
  }
  out << checkpoint_json(snapshot, st.seed, next_step) << '\n';
}

void run_steps(TrainerState& st, int64_t from_step) {
  for (int64_t step = from_step; step < st.config.steps; ++step) {
    const std::vector<int> limits =
        st.config.matryoshka.limits_at(st.market, step);
    const BundlePolicy policy(st.actor, st.config.noise.floor_nu);

    Rng rollout_rng = Rng::stream(st.seed, "rollout", step);
    RolloutBatch batch =
        rollout(st.market, policy, InventoryState::flat(limits),
                st.config.rollout_length, st.config.noise, rollout_rng);
    const double r_mean = estimate_r_mean(st.market, batch);
    st.curve.push_back({step, r_mean, limits});

    Rng starts_rng = Rng::stream(st.seed, "starts", step);
    Rng additional_rng = Rng::stream(st.seed, "rollout-add", step);
    InventoryState start;
    start.limit = limits;
    start.units.resize(st.d);
    for (int64_t k = 0; k < st.config.n_additional; ++k) {
      for (int i = 0; i < st.d; ++i) {
        start.units[i] =
            -limits[i] + static_cast<int>(starts_rng.below(2 * limits[i] + 1));
      }
      batch.append(rollout(st.market, policy, start,
                           st.config.additional_length, st.config.noise,
                           additional_rng));
    }

    Rng shuffle_rng = Rng::stream(st.seed, "shuffle", step);
    shuffle(batch, shuffle_rng);

    critic_td_update(st.market, st.critic, batch, r_mean,
                     st.config.critic_batch, st.config.critic_rate);
    const AdvantageData advantages =
        exploration_advantages(st.market, st.critic, batch);
    actor_probability_update(st.market, st.actor, batch, advantages,
                             st.config.actor_batch, st.config.actor_rate);
    maybe_checkpoint(st, step + 1);
  }
}

}  // namespace

double td_target(const MarketSpec& market, const FeedForwardNet& critic,
                 const RolloutBatch& records, int64_t index, double r_mean) {
  UpdateBuffers b(market);
  const double denom = market.discount() + market.total_intensity();
  const double grl = gamma_rl(market);
  return td_target_impl(market, critic, records, index, r_mean, denom, grl, b,
                        nullptr);
}

void critic_td_update(const MarketSpec& market, FeedForwardNet& critic,
                      const RolloutBatch& records, double r_mean,
                      int64_t batch_size, double rate) {
  UpdateBuffers b(market);
  const double denom = market.discount() + market.total_intensity();
  const double grl = gamma_rl(market);
  const int64_t n_batches = records.size() / batch_size;
  std::vector<double> acc(critic.param_count());
  for (int64_t m = 0; m < n_batches; ++m) {
    std::fill(acc.begin(), acc.end(), 0.0);
    for (int64_t j = m * batch_size; j < (m + 1) * batch_size; ++j) {
      double theta_q = 0.0;
      const double target = td_target_impl(market, critic, records, j, r_mean,
                                           denom, grl, b, &theta_q);
      critic.grad_params(b.xq, (target - theta_q) / batch_size, acc, b.ws);
    }
    sgd_step(critic, acc, rate);
  }
}

AdvantageData exploration_advantages(const MarketSpec& market,
                                     const FeedForwardNet& critic,
                                     const RolloutBatch& records) {
  const double denom = market.discount() + market.total_intensity();
  const double grl = gamma_rl(market);
  const int64_t n = records.size();
  AdvantageData out;
  out.adv.assign(n, 0.0);
  out.dp.assign(n, 0.0);
  UpdateBuffers b(market);
  for (int64_t j = 0; j < n; ++j) {
    if (records.blocked(j)) continue;
    const auto s = records.state(j);
    const double psi_t = load_states(market, records, j, s, false, b);
    const double theta_q = critic.forward(b.xq, b.ws);
    const double theta_t = critic.forward(b.xt, b.ws);
    const double psi_s = penalty_eval(market, s);
    const double stay = -psi_s / denom + grl * theta_q;
    const double common = -psi_t / denom + grl * theta_t;
    const double size = market.bond(records.bond[j]).trade_size;
    const double pe = records.prob_eps[j];
    const double pu = records.prob[j];
    const double v_eps =
        pe * (size * records.quote_eps[j] + common) + (1.0 - pe) * stay;
    const double v_un =
        pu * (size * records.quote[j] + common) + (1.0 - pu) * stay;
    out.adv[j] = v_eps - v_un;
    out.dp[j] = pe - pu;
  }
  return out;
}

void actor_probability_update(const MarketSpec& market, ActorBundle& actor,
                              const RolloutBatch& records,
                              const AdvantageData& advantages,
                              int64_t batch_size, double rate) {
  const int64_t L = batch_size;
  const int d = market.dim();

  std::vector<std::vector<int64_t>> by_bond(d);
  for (int64_t j = 0; j < records.size(); ++j) {
    by_bond[records.bond[j]].push_back(j);
  }
  // Per-bond normalization: population standard deviation of the advantage
  // over that bond's records (blocked zeros included).
  std::vector<double> inv_std(d, 0.0);
  for (int i = 0; i < d; ++i) {
    if (by_bond[i].empty()) continue;
    double mean = 0.0;
    for (int64_t j : by_bond[i]) mean += advantages.adv[j];
    mean /= static_cast<double>(by_bond[i].size());
    double var = 0.0;
    for (int64_t j : by_bond[i]) {
      var += (advantages.adv[j] - mean) * (advantages.adv[j] - mean);
    }
    var /= static_cast<double>(by_bond[i].size());
    inv_std[i] = var > 0.0 ? 1.0 / std::sqrt(var) : 0.0;
  }

  NetWorkspace ws;
  std::vector<double> acc;
  std::vector<double> x(static_cast<size_t>(actor.net_input_dim()));
  auto apply_minibatch = [&](FeedForwardNet& net, int bond, int64_t m) {
    acc.resize(net.param_count());
    std::fill(acc.begin(), acc.end(), 0.0);
    for (int64_t l = m * L; l < (m + 1) * L; ++l) {
      const int64_t j = by_bond[bond][l];
      const double coeff = advantages.adv[j] * inv_std[bond] *
                           advantages.dp[j] / L;
      if (coeff == 0.0) continue;
      actor.make_input(records.state(j), bond, records.side[j], x);
      net.grad_params(x, coeff, acc, ws);
    }
    sgd_step(net, acc, rate);
  };

  if (actor.variant == ActorVariant::MultiNet) {
    for (int i = 0; i < d; ++i) {
      const int64_t n_batches = static_cast<int64_t>(by_bond[i].size()) / L;
      for (int64_t m = 0; m < n_batches; ++m) {
        apply_minibatch(actor.nets[i], i, m);
      }
    }
  } else {
    // Round-robin over bonds so no bond's updates dominate the shared net.
    int64_t max_batches = 0;
    for (int i = 0; i < d; ++i) {
      max_batches =
          std::max(max_batches, static_cast<int64_t>(by_bond[i].size()) / L);
    }
    for (int64_t m = 0; m < max_batches; ++m) {
      for (int i = 0; i < d; ++i) {
        if (m < static_cast<int64_t>(by_bond[i].size()) / L) {
          apply_minibatch(actor.nets[0], i, m);
        }
      }
    }
  }
}

std::vector<int> MatryoshkaSchedule::limits_at(const MarketSpec& market,
                                               int64_t step) const {
  const int d = market.dim();
  std::vector<int> limits(d);
  const int64_t grown = grow_every > 0 ? step / grow_every : 0;
  for (int i = 0; i < d; ++i) {
    const int cap = market.bond(i).max_units;
    limits[i] = initial_units.empty()
                    ? cap
                    : static_cast<int>(std::min<int64_t>(
                          cap, initial_units[i] + grown));
  }
  return limits;
}

void MatryoshkaSchedule::validate(const MarketSpec& market) const {
  if (initial_units.empty()) return;
  if (static_cast<int>(initial_units.size()) != market.dim()) {
    throw std::invalid_argument(
        "matryoshka initial_units must match the market dimension");
  }
  for (int i = 0; i < market.dim(); ++i) {
    if (initial_units[i] < 1 || initial_units[i] > market.bond(i).max_units) {
      throw std::invalid_argument(
          "matryoshka initial limit out of [1, max_units] for bond " +
          std::to_string(i));
    }
  }
  if (grow_every < 0) {
    throw std::invalid_argument("matryoshka grow_every must be >= 0");
  }
}

void TrainConfig::validate(const MarketSpec& market) const {
  if (steps < 1) throw std::invalid_argument("steps must be >= 1");
  if (rollout_length < 1) {
    throw std::invalid_argument("rollout_length must be >= 1");
  }
  if (n_additional < 0 || (n_additional > 0 && additional_length < 1)) {
    throw std::invalid_argument("invalid additional rollout settings");
  }
  if (critic_batch < 1 || actor_batch < 1) {
    throw std::invalid_argument("minibatch sizes must be >= 1");
  }
  if (!(critic_rate > 0.0) || !(actor_rate > 0.0)) {
    throw std::invalid_argument("learning rates must be positive");
  }
  noise.validate();
  matryoshka.validate(market);
  if (pretrain_max_grid < 1 || pretrain_samples < 1) {
    throw std::invalid_argument("pretrain sampling sizes must be >= 1");
  }
  if (!(pretrain_vi_tol > 0.0)) {
    throw std::invalid_argument("pretrain_vi_tol must be positive");
  }
  if (checkpoint_every < 0) {
    throw std::invalid_argument("checkpoint_every must be >= 0");
  }
}

int ActorBundle::net_input_dim() const {
  return variant == ActorVariant::SingleNetOneHot ? 2 * dim() : dim();
}

int ActorBundle::make_input(std::span<const int16_t> units, int bond, int side,
                            std::span<double> x) const {
  return make_input_impl(*this, units, bond, side, x);
}

int ActorBundle::make_input(std::span<const int> units, int bond, int side,
                            std::span<double> x) const {
  return make_input_impl(*this, units, bond, side, x);
}

double ActorBundle::prob(std::span<const int16_t> units, int bond,
                         int side) const {
  std::vector<double> x(net_input_dim());
  const int net = make_input(units, bond, side, x);
  return nets[net].forward(x);
}

double ActorBundle::prob(std::span<const int> units, int bond,
                         int side) const {
  std::vector<double> x(net_input_dim());
  const int net = make_input(units, bond, side, x);
  return nets[net].forward(x);
}

std::string ActorBundle::to_json() const {
  json j;
  j["variant"] =
      variant == ActorVariant::SingleNetOneHot ? "single_onehot" : "multi";
  j["max_units"] = max_units;
  json net_list = json::array();
  for (const auto& net : nets) net_list.push_back(json::parse(net.to_json()));
  j["nets"] = std::move(net_list);
  return j.dump();
}

ActorBundle ActorBundle::from_json(const std::string& text) {
  const json j = json::parse(text);
  ActorBundle out;
  const std::string variant = j.at("variant").get<std::string>();
  if (variant == "multi") {
    out.variant = ActorVariant::MultiNet;
  } else if (variant == "single_onehot") {
    out.variant = ActorVariant::SingleNetOneHot;
  } else {
    throw std::invalid_argument("unknown actor variant: " + variant);
  }
  out.max_units = j.at("max_units").get<std::vector<int>>();
  for (const auto& net : j.at("nets")) {
    out.nets.push_back(FeedForwardNet::from_json(net.dump()));
  }
  const size_t expected =
      out.variant == ActorVariant::SingleNetOneHot ? 1 : out.max_units.size();
  if (out.nets.size() != expected) {
    throw std::invalid_argument("actor bundle net count mismatch");
  }
  return out;
}

BundlePolicy::BundlePolicy(const ActorBundle& bundle, double nu)
    : bundle_(&bundle), nu_(nu) {}

double BundlePolicy::prob(std::span<const int16_t> units,
                          std::span<const int> /*limits*/, int bond,
                          int side) const {
  return std::clamp(bundle_->prob(units, bond, side), nu_, 1.0 - nu_);
}

PolicyTable bundle_policy_table(const MarketSpec& market,
                                const ActorBundle& bundle) {
  const InventoryGrid grid = market_grid(market);
  PolicyTable table(grid);
  std::vector<int> units(grid.dim());
  for (int64_t s = 0; s < grid.size(); ++s) {
    grid.units(s, units);
    for (int bond = 0; bond < grid.dim(); ++bond) {
      for (int side : {kBid, kAsk}) {
        const double p =
            grid.neighbor(s, bond, side) < 0
                ? std::numeric_limits<double>::quiet_NaN()
                : std::clamp(bundle.prob(std::span<const int>(units), bond,
                                         side),
                             1e-12, 1.0 - 1e-12);
        table.set_prob(s, bond, side, p);
      }
    }
  }
  return table;
}

std::string learning_curve_csv(const std::vector<CurvePoint>& curve) {
  std::string out = "step,r_mean,active_limits\n";
  for (const CurvePoint& point : curve) {
    out += std::to_string(point.step);
    out += ',';
    append_double(out, point.r_mean);
    out += ',';
    for (size_t i = 0; i < point.active_limits.size(); ++i) {
      if (i > 0) out += '|';
      out += std::to_string(point.active_limits[i]);
    }
    out += '\n';
  }
  return out;
}

TrainResult train(const MarketSpec& market, const TrainConfig& config,
                  uint64_t seed) {
  config.validate(market);
  TrainerState st = make_state(market, config, seed);
  pretrain(st);
  run_steps(st, 0);
  return pack_result(st);
}

TrainResult resume(const MarketSpec& market, const TrainConfig& config,
                   const std::string& checkpoint) {
  config.validate(market);
  const json j = json::parse(checkpoint);
  if (j.at("format").get<std::string>() != "rfqmm-checkpoint-v1") {
    throw std::invalid_argument("unrecognized checkpoint format");
  }
  const uint64_t seed = j.at("seed").get<uint64_t>();
  const int64_t next_step = j.at("next_step").get<int64_t>();

  TrainerState st = make_state(market, config, seed);
  st.actor = ActorBundle::from_json(j.at("actor").dump());
  st.critic = FeedForwardNet::from_json(j.at("critic").dump());
  if (st.actor.dim() != market.dim()) {
    throw std::invalid_argument("checkpoint dimension mismatch");
  }
  st.critic_fit = pretrain_result_from_json(j.at("critic_fit"));
  for (const auto& fit : j.at("actor_fits")) {
    st.actor_fits.push_back(pretrain_result_from_json(fit));
  }
  for (const auto& row : j.at("curve")) {
    st.curve.push_back(CurvePoint{row.at("step").get<int64_t>(),
                                  row.at("r_mean").get<double>(),
                                  row.at("limits").get<std::vector<int>>()});
  }
  run_steps(st, next_step);
  return pack_result(st);
}

std::string checkpoint_json(const TrainResult& partial, uint64_t seed,
                            int64_t next_step) {
  json j;
  j["format"] = "rfqmm-checkpoint-v1";
  j["seed"] = seed;
  j["next_step"] = next_step;
  // Streams are derived from (seed, purpose, step), so the pair above is the
  // complete RNG state.
  j["rng"] = {{"scheme", "per-step-derived-streams"},
              {"master_seed", seed},
              {"next_step", next_step}};
  j["actor"] = json::parse(partial.actor.to_json());
  j["critic"] = json::parse(partial.critic.to_json());
  json curve = json::array();
  for (const CurvePoint& point : partial.curve) {
    curve.push_back(json{{"step", point.step},
                         {"r_mean", point.r_mean},
                         {"limits", point.active_limits}});
  }
  j["curve"] = std::move(curve);
  j["critic_fit"] = pretrain_result_json(partial.critic_fit);
  json fits = json::array();
  for (const PretrainResult& fit : partial.actor_fits) {
    fits.push_back(pretrain_result_json(fit));
  }
  j["actor_fits"] = std::move(fits);
  return j.dump();
}

}  // namespace rfqmm
