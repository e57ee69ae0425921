#include "rfqmm/harness.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <set>
#include <stdexcept>
#include <vector>

#include <nlohmann/json.hpp>

#include "rfqmm/csv.hpp"
#include "rfqmm/rng.hpp"
#include "rfqmm/simulator.hpp"

namespace rfqmm {

namespace {

const std::set<std::string>& known_modes() {
  static const std::set<std::string> modes = {
      "solve-fd", "solve-vi", "evaluate-policy", "train", "compare"};
  return modes;
}

void append_units(std::string& out, std::span<const int> units) {
  for (size_t i = 0; i < units.size(); ++i) {
    if (i) out += '|';
    out += std::to_string(units[i]);
  }
}

/// RFC-4180 quoting for free-text CSV fields.
std::string csv_escape(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  out += '"';
  return out;
}

double window_median(std::vector<double>& scratch) {
  const size_t n = scratch.size();
  auto mid = scratch.begin() + static_cast<ptrdiff_t>(n / 2);
  std::nth_element(scratch.begin(), mid, scratch.end());
  if (n % 2 == 1) return *mid;
  const double hi = *mid;
  const double lo = *std::max_element(scratch.begin(), mid);
  return 0.5 * (lo + hi);
}

}  // namespace

std::string ExperimentSpec::to_json() const {
  nlohmann::json j;
  j["market_path"] = market_path;
  j["mode"] = mode;
  j["bonds"] = bonds;
  j["preset"] = preset;
  j["out_dir"] = out_dir;
  j["seed"] = seed;
  return j.dump(2);
}

ExperimentSpec ExperimentSpec::from_json(const std::string& text) {
  const nlohmann::json j = nlohmann::json::parse(text);
  ExperimentSpec spec;
  spec.market_path = j.value("market_path", std::string());
  spec.mode = j.at("mode").get<std::string>();
  if (j.contains("bonds")) spec.bonds = j.at("bonds").get<std::vector<int>>();
  spec.preset = j.value("preset", std::string());
  spec.out_dir = j.value("out_dir", std::string());
  spec.seed = j.value("seed", uint64_t{1});
  return spec;
}

void ExperimentSpec::validate() const {
  if (!known_modes().count(mode)) {
    std::string msg = "unknown mode '" + mode + "'; expected one of";
    for (const auto& m : known_modes()) msg += " " + m;
    throw std::invalid_argument(msg);
  }
  for (int b : bonds) {
    if (b < 0) throw std::invalid_argument("bond indices must be >= 0");
  }
}

std::vector<double> moving_median40(const std::vector<double>& values) {
  std::vector<double> out(values.size());
  std::vector<double> scratch;
  for (size_t i = 0; i < values.size(); ++i) {
    const size_t start = i >= 39 ? i - 39 : 0;
    scratch.assign(values.begin() + static_cast<ptrdiff_t>(start),
                   values.begin() + static_cast<ptrdiff_t>(i + 1));
    out[i] = window_median(scratch);
  }
  return out;
}

RolloutEstimate rollout_reward(const MarketSpec& market,
                               const ActorBundle& bundle, uint64_t seed,
                               int64_t events) {
  if (events <= 0) throw std::invalid_argument("events must be positive");
  constexpr int64_t kBlocks = 100;
  const int64_t block_len = std::max<int64_t>(1, events / kBlocks);
  const BundlePolicy policy(bundle, 1e-12);
  const NoiseSpec noise{0.0, 1e-12};
  InventoryState state = InventoryState::flat(market);

  std::vector<double> block_means;
  block_means.reserve(kBlocks);
  for (int64_t b = 0; b < kBlocks; ++b) {
    Rng rng = Rng::stream(seed, "evaluate", static_cast<uint64_t>(b));
    const RolloutBatch batch =
        rollout(market, policy, state, block_len, noise, rng);
    block_means.push_back(estimate_r_mean(market, batch));
    const auto last = batch.next_state(batch.size() - 1);
    for (int i = 0; i < batch.dim; ++i) state.units[i] = last[i];
  }

  RolloutEstimate est;
  for (double m : block_means) est.reward += m;
  est.reward /= static_cast<double>(block_means.size());
  double var = 0.0;
  for (double m : block_means) var += (m - est.reward) * (m - est.reward);
  var /= static_cast<double>(block_means.size() - 1);
  est.se = std::sqrt(var / static_cast<double>(block_means.size()));
  return est;
}

CompareReport run_compare(const MarketSpec& market, const TrainResult& trained,
                          uint64_t seed, double vi_tol) {
  if (market.dim() > 2) {
    throw std::invalid_argument(
        "compare requires dim <= 2 (exact solve is grid-based)");
  }
  const HamiltonianOracle oracle(market, HamiltonianOracle::Mode::Memoized);
  const ViResult vi = value_iteration(market, vi_tol, oracle);
  const PolicyTable exact_policy = greedy_policy(market, vi.table);
  const ValueTable exact_value = to_anytime_value(market, vi.table);
  const PolicyTable learned_policy = bundle_policy_table(market, trained.actor);

  const InventoryGrid& grid = exact_value.grid;
  const int d = grid.dim();

  // Critic values over the grid, then the single additive level that
  // minimizes the squared gap to the exact value (values are only defined
  // up to translation).
  std::vector<double> learned_value(static_cast<size_t>(grid.size()));
  {
    std::vector<double> x(static_cast<size_t>(d));
    std::vector<int> units(static_cast<size_t>(d));
    for (int64_t s = 0; s < grid.size(); ++s) {
      grid.units(s, units);
      for (int i = 0; i < d; ++i) {
        x[static_cast<size_t>(i)] = static_cast<double>(units[i]) /
                                    market.bond(i).max_units;
      }
      learned_value[static_cast<size_t>(s)] = trained.critic.forward(x);
    }
    double shift = 0.0;
    for (int64_t s = 0; s < grid.size(); ++s) {
      shift += exact_value.v[static_cast<size_t>(s)] -
               learned_value[static_cast<size_t>(s)];
    }
    shift /= static_cast<double>(grid.size());
    for (double& v : learned_value) v += shift;
  }

  CompareReport report;
  report.csv =
      "state,bond,side,exact_quote,learned_quote,exact_prob,learned_prob,"
      "exact_value,learned_value\n";
  double gap_sum = 0.0;
  int64_t gap_count = 0;
  std::vector<int> units(static_cast<size_t>(d));
  for (int64_t s = 0; s < grid.size(); ++s) {
    grid.units(s, units);
    for (int bond = 0; bond < d; ++bond) {
      for (int side : {kBid, kAsk}) {
        if (grid.neighbor(s, bond, side) < 0) continue;  // blocked side
        const double pe = exact_policy.prob(s, bond, side);
        const double pl = learned_policy.prob(s, bond, side);
        const double gap = std::abs(pe - pl);
        report.max_prob_gap = std::max(report.max_prob_gap, gap);
        gap_sum += gap;
        ++gap_count;
        append_units(report.csv, units);
        report.csv += ',';
        report.csv += std::to_string(bond);
        report.csv += ',';
        report.csv += side == kBid ? "bid" : "ask";
        report.csv += ',';
        append_double(report.csv, exact_policy.quote(market, s, bond, side));
        report.csv += ',';
        append_double(report.csv, learned_policy.quote(market, s, bond, side));
        report.csv += ',';
        append_double(report.csv, pe);
        report.csv += ',';
        append_double(report.csv, pl);
        report.csv += ',';
        append_double(report.csv, exact_value.v[static_cast<size_t>(s)]);
        report.csv += ',';
        append_double(report.csv, learned_value[static_cast<size_t>(s)]);
        report.csv += '\n';
      }
    }
  }
  report.mean_prob_gap =
      gap_count > 0 ? gap_sum / static_cast<double>(gap_count) : 0.0;

  report.exact_reward = average_reward_per_rfq(market, exact_policy);
  const RolloutEstimate est = rollout_reward(market, trained.actor, seed);
  report.learned_reward = est.reward;
  report.learned_reward_se = est.se;

  report.summary = "max_prob_gap " + format_double(report.max_prob_gap) +
                   "\nmean_prob_gap " + format_double(report.mean_prob_gap) +
                   "\nexact_reward_per_rfq " +
                   format_double(report.exact_reward) +
                   "\nlearned_reward_per_rfq " +
                   format_double(report.learned_reward) + " (se " +
                   format_double(report.learned_reward_se) + ")\n";
  return report;
}

std::vector<RewardTableRow> run_reward_table(const MarketSpec& base,
                                             PenaltySpec penalty,
                                             double discount, int max_units,
                                             double vi_tol) {
  std::vector<RewardTableRow> rows;
  rows.reserve(static_cast<size_t>(base.dim()));
  for (int i = 0; i < base.dim(); ++i) {
    RewardTableRow row;
    row.bond = i;
    try {
      const MarketSpec m = base.restricted({i})
                               .with_penalty(penalty)
                               .with_discount(discount)
                               .with_max_units({max_units});
      const HamiltonianOracle oracle(m, HamiltonianOracle::Mode::Memoized);
      const ViResult vi = value_iteration(m, vi_tol, oracle);
      const PolicyTable policy = greedy_policy(m, vi.table);
      row.reward = average_reward_per_rfq(m, policy);
      row.ok = true;
    } catch (const std::exception& e) {
      row.error = e.what();
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

std::string reward_table_csv(const std::vector<RewardTableRow>& rows) {
  std::string out = "bond,avg_reward_per_rfq,status\n";
  for (const auto& row : rows) {
    out += std::to_string(row.bond);
    out += ',';
    if (row.ok) append_double(out, row.reward);
    out += ',';
    out += row.ok ? "ok" : csv_escape(row.error);
    out += '\n';
  }
  return out;
}

std::string plot_learning_curve(const std::vector<CurvePoint>& curve) {
  std::vector<double> r(curve.size());
  for (size_t i = 0; i < curve.size(); ++i) r[i] = curve[i].r_mean;
  const std::vector<double> med = moving_median40(r);
  std::string out = "step,r_mean,med40,active_limits\n";
  for (size_t i = 0; i < curve.size(); ++i) {
    out += std::to_string(curve[i].step);
    out += ',';
    append_double(out, curve[i].r_mean);
    out += ',';
    append_double(out, med[i]);
    out += ',';
    for (size_t k = 0; k < curve[i].active_limits.size(); ++k) {
      if (k) out += '|';
      out += std::to_string(curve[i].active_limits[k]);
    }
    out += '\n';
  }
  return out;
}

std::string plot_policy_surface(const MarketSpec& market,
                                const PolicyTable& policy) {
  const InventoryGrid& grid = policy.grid;
  const int d = grid.dim();
  std::string out;
  for (int i = 0; i < d; ++i) out += "q" + std::to_string(i) + ",";
  for (int i = 0; i < d; ++i) {
    const std::string b = std::to_string(i);
    out += "bond" + b + "_bid_quote,bond" + b + "_bid_prob,bond" + b +
           "_ask_quote,bond" + b + "_ask_prob";
    out += i + 1 < d ? "," : "\n";
  }
  std::vector<int> units(static_cast<size_t>(d));
  for (int64_t s = 0; s < grid.size(); ++s) {
    grid.units(s, units);
    for (int i = 0; i < d; ++i) {
      out += std::to_string(units[static_cast<size_t>(i)]);
      out += ',';
    }
    for (int bond = 0; bond < d; ++bond) {
      for (int side : {kBid, kAsk}) {
        const double p = policy.prob(s, bond, side);
        // Blocked sides (NaN) and quoted-away sides (p == 0) have no quote.
        if (p > 0.0 && p < 1.0) {
          append_double(out, policy.quote(market, s, bond, side));
        }
        out += ',';
        if (!std::isnan(p)) append_double(out, p);
        const bool last = bond + 1 == d && side == kAsk;
        out += last ? '\n' : ',';
      }
    }
  }
  return out;
}

std::string plot_value_surface(const MarketSpec& market,
                               const ValueTable& value) {
  (void)market;
  const InventoryGrid& grid = value.grid;
  const int d = grid.dim();
  std::string out;
  for (int i = 0; i < d; ++i) out += "q" + std::to_string(i) + ",";
  out += "value\n";
  std::vector<int> units(static_cast<size_t>(d));
  for (int64_t s = 0; s < grid.size(); ++s) {
    grid.units(s, units);
    for (int i = 0; i < d; ++i) {
      out += std::to_string(units[static_cast<size_t>(i)]);
      out += ',';
    }
    append_double(out, value.v[static_cast<size_t>(s)]);
    out += '\n';
  }
  return out;
}

std::string plot_value_difference(const ValueTable& a, const ValueTable& b) {
  if (a.grid.limits() != b.grid.limits()) {
    throw std::invalid_argument("value tables live on different grids");
  }
  const InventoryGrid& grid = a.grid;
  const int d = grid.dim();
  std::string out;
  for (int i = 0; i < d; ++i) out += "q" + std::to_string(i) + ",";
  out += "difference\n";
  std::vector<int> units(static_cast<size_t>(d));
  for (int64_t s = 0; s < grid.size(); ++s) {
    grid.units(s, units);
    for (int i = 0; i < d; ++i) {
      out += std::to_string(units[static_cast<size_t>(i)]);
      out += ',';
    }
    append_double(out,
                  a.v[static_cast<size_t>(s)] - b.v[static_cast<size_t>(s)]);
    out += '\n';
  }
  return out;
}

}  // namespace rfqmm
