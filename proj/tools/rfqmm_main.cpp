/// @file rfqmm_main.cpp
/// @brief Command-line front end: exact solvers, trainer, policy evaluation,
///        comparison reports, reward tables, and plot-data emission.

#include <cmath>
#include <cstdint>
#include <exception>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "rfqmm/actor_critic.hpp"
#include "rfqmm/csv.hpp"
#include "rfqmm/fd.hpp"
#include "rfqmm/harness.hpp"
#include "rfqmm/model.hpp"
#include "rfqmm/presets.hpp"
#include "rfqmm/tabular.hpp"

namespace {

namespace fs = std::filesystem;
using nlohmann::json;

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const fs::path& path, const std::string& content) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << content;
}

/// Options shared by every subcommand that needs a market.
struct CommonOpts {
  std::string config_path;
  std::vector<int> bonds;
  std::string preset_name;
  uint64_t seed = 1;
  std::string out_dir = "out";
  std::string penalty_kind;
  double gamma = std::numeric_limits<double>::quiet_NaN();
  double discount = std::numeric_limits<double>::quiet_NaN();
};

void add_common(CLI::App* cmd, CommonOpts& o, bool with_seed = true) {
  cmd->add_option("--config", o.config_path,
                  "market JSON file (default: bundled 20-bond market)");
  cmd->add_option("--bonds", o.bonds,
                  "bond indices into the base market (comma separated)")
      ->delimiter(',');
  cmd->add_option("--preset", o.preset_name, "named experiment preset");
  if (with_seed) cmd->add_option("--seed", o.seed, "master random seed");
  cmd->add_option("--out", o.out_dir, "output directory (default: out)");
  cmd->add_option("--penalty", o.penalty_kind, "risk penalty form")
      ->check(CLI::IsMember({"stddev", "variance"}));
  cmd->add_option("--gamma", o.gamma, "risk aversion coefficient");
  cmd->add_option("--discount", o.discount, "continuous discount rate r");
}

rfqmm::PenaltyKind parse_kind(const std::string& s) {
  return s == "variance" ? rfqmm::PenaltyKind::Variance
                         : rfqmm::PenaltyKind::StdDev;
}

/// Base market -> preset/subset restriction -> penalty/discount overrides.
rfqmm::MarketSpec resolve_market(const CommonOpts& o,
                                 const rfqmm::Preset** preset_out = nullptr) {
  rfqmm::MarketSpec market =
      o.config_path.empty() ? rfqmm::MarketSpec::default_market20()
                            : rfqmm::MarketSpec::from_json_file(o.config_path);
  if (!o.preset_name.empty()) {
    const rfqmm::Preset& preset = rfqmm::find_preset(o.preset_name);
    if (preset_out) *preset_out = &preset;
    market = rfqmm::preset_market(preset, market, o.bonds);
  } else {
    if (preset_out) *preset_out = nullptr;
    if (!o.bonds.empty()) market = market.restricted(o.bonds);
  }
  if (!o.penalty_kind.empty() || !std::isnan(o.gamma)) {
    rfqmm::PenaltySpec p = market.penalty();
    if (!o.penalty_kind.empty()) p.kind = parse_kind(o.penalty_kind);
    if (!std::isnan(o.gamma)) p.gamma = o.gamma;
    market = market.with_penalty(p);
  }
  if (!std::isnan(o.discount)) market = market.with_discount(o.discount);
  return market;
}

/// Critic evaluated over the market grid (inputs normalized by max_units).
rfqmm::ValueTable critic_table(const rfqmm::MarketSpec& market,
                               const rfqmm::FeedForwardNet& critic) {
  rfqmm::ValueTable table(rfqmm::market_grid(market),
                          rfqmm::ValueFlavor::AtAnyTime);
  const int d = table.grid.dim();
  std::vector<double> x(static_cast<size_t>(d));
  std::vector<int> units(static_cast<size_t>(d));
  for (int64_t s = 0; s < table.grid.size(); ++s) {
    table.grid.units(s, units);
    for (int i = 0; i < d; ++i) {
      x[static_cast<size_t>(i)] =
          static_cast<double>(units[i]) / market.bond(i).max_units;
    }
    table.v[static_cast<size_t>(s)] = critic.forward(x);
  }
  return table;
}

json curve_summary(const std::vector<rfqmm::CurvePoint>& curve) {
  json j;
  j["points"] = curve.size();
  if (!curve.empty()) {
    std::vector<double> r(curve.size());
    for (size_t i = 0; i < curve.size(); ++i) r[i] = curve[i].r_mean;
    const auto med = rfqmm::moving_median40(r);
    j["first_r_mean"] = r.front();
    j["last_r_mean"] = r.back();
    j["med40_first"] = med.front();
    j["med40_last"] = med.back();
  }
  return j;
}

void write_train_artifacts(const fs::path& out,
                           const rfqmm::TrainResult& result) {
  write_file(out / "curve.csv", rfqmm::learning_curve_csv(result.curve));
  write_file(out / "learning_curve.csv",
             rfqmm::plot_learning_curve(result.curve));
  write_file(out / "bundle.json", result.actor.to_json());
  write_file(out / "critic.json", result.critic.to_json());
}

int cmd_solve_vi(const CommonOpts& o, double tol) {
  const rfqmm::MarketSpec market = resolve_market(o);
  const rfqmm::HamiltonianOracle oracle(
      market, rfqmm::HamiltonianOracle::Mode::Memoized);
  const rfqmm::ViResult vi = rfqmm::value_iteration(market, tol, oracle);
  const rfqmm::PolicyTable policy = rfqmm::greedy_policy(market, vi.table);
  const rfqmm::ValueTable anytime = rfqmm::to_anytime_value(market, vi.table);

  const fs::path out(o.out_dir);
  write_file(out / "value_rfq.csv", rfqmm::value_table_csv(vi.table));
  write_file(out / "value_anytime.csv", rfqmm::value_table_csv(anytime));
  write_file(out / "policy.csv", rfqmm::policy_table_csv(market, policy));

  json j;
  j["mode"] = "solve-vi";
  j["iterations"] = vi.iterations;
  j["final_diff"] = vi.final_diff;
  j["value_range"] = vi.table.range();
  j["avg_reward_per_rfq"] = rfqmm::average_reward_per_rfq(market, policy);
  j["out"] = out.string();
  std::cout << j.dump(2) << "\n";
  return 0;
}

int cmd_solve_fd(const CommonOpts& o, const rfqmm::FdConfig& config) {
  const rfqmm::MarketSpec market = resolve_market(o);
  const rfqmm::HamiltonianOracle oracle(
      market, rfqmm::HamiltonianOracle::Mode::Memoized);
  const rfqmm::FdResult fd = rfqmm::solve_stationary(market, config, oracle);
  const rfqmm::PolicyTable policy = rfqmm::greedy_policy(market, fd.table);

  const fs::path out(o.out_dir);
  write_file(out / "value_anytime.csv", rfqmm::value_table_csv(fd.table));
  write_file(out / "policy.csv", rfqmm::policy_table_csv(market, policy));

  json j;
  j["mode"] = "solve-fd";
  j["steps"] = fd.steps;
  j["stop_reason"] = fd.stop_reason == rfqmm::FdStopReason::Stationarity
                         ? "stationarity"
                         : "horizon-exhausted";
  j["final_diff_rate"] = fd.final_diff_rate;
  j["hjb_residual_sup"] = fd.hjb_residual_sup;
  j["recenter_shift"] = fd.recenter_shift;
  j["tau_retries"] = fd.tau_retries;
  j["value_range"] = fd.table.range();
  j["avg_reward_per_rfq"] = rfqmm::average_reward_per_rfq(market, policy);
  j["out"] = out.string();
  std::cout << j.dump(2) << "\n";
  return 0;
}

int cmd_train(const CommonOpts& o, int64_t steps_override,
              const std::string& resume_path) {
  const rfqmm::Preset* preset = nullptr;
  const rfqmm::MarketSpec market = resolve_market(o, &preset);
  if (!preset) {
    throw std::invalid_argument("train requires --preset (see `rfqmm list`)");
  }
  rfqmm::TrainConfig config = preset->config;
  if (steps_override > 0) config.steps = steps_override;
  const fs::path out(o.out_dir);
  fs::create_directories(out / "checkpoints");
  config.checkpoint_dir = (out / "checkpoints").string();

  const rfqmm::TrainResult result =
      resume_path.empty()
          ? rfqmm::train(market, config, o.seed)
          : rfqmm::resume(market, config, read_file(resume_path));
  write_train_artifacts(out, result);

  json j;
  j["mode"] = "train";
  j["preset"] = preset->name;
  j["seed"] = o.seed;
  j["steps"] = config.steps;
  j["curve"] = curve_summary(result.curve);
  j["critic_pretrain_mse"] = result.critic_fit.held_out_mse;
  j["out"] = out.string();
  std::cout << j.dump(2) << "\n";
  return 0;
}

int cmd_evaluate(const CommonOpts& o, const std::string& bundle_path,
                 int64_t events) {
  const rfqmm::MarketSpec market = resolve_market(o);
  const rfqmm::ActorBundle bundle =
      rfqmm::ActorBundle::from_json(read_file(bundle_path));
  if (bundle.dim() != market.dim()) {
    throw std::invalid_argument("bundle dimension " +
                                std::to_string(bundle.dim()) +
                                " does not match market dimension " +
                                std::to_string(market.dim()));
  }
  const rfqmm::RolloutEstimate est =
      rfqmm::rollout_reward(market, bundle, o.seed, events);

  json j;
  j["mode"] = "evaluate";
  j["events"] = events;
  j["reward_per_rfq"] = est.reward;
  j["reward_se"] = est.se;
  if (market.dim() <= 2) {
    const rfqmm::PolicyTable table = rfqmm::bundle_policy_table(market, bundle);
    j["exact_reward_per_rfq"] = rfqmm::average_reward_per_rfq(market, table);
  }
  std::cout << j.dump(2) << "\n";
  return 0;
}

int cmd_compare(const CommonOpts& o, int64_t steps_override, double tol) {
  const rfqmm::Preset* preset = nullptr;
  const rfqmm::MarketSpec market = resolve_market(o, &preset);
  if (!preset) {
    throw std::invalid_argument("compare requires --preset");
  }
  rfqmm::TrainConfig config = preset->config;
  if (steps_override > 0) config.steps = steps_override;

  const rfqmm::TrainResult result = rfqmm::train(market, config, o.seed);
  const rfqmm::CompareReport report =
      rfqmm::run_compare(market, result, o.seed, tol);

  const fs::path out(o.out_dir);
  write_train_artifacts(out, result);
  write_file(out / "compare.csv", report.csv);
  write_file(out / "summary.txt", report.summary);

  json j;
  j["mode"] = "compare";
  j["preset"] = preset->name;
  j["seed"] = o.seed;
  j["max_prob_gap"] = report.max_prob_gap;
  j["mean_prob_gap"] = report.mean_prob_gap;
  j["exact_reward_per_rfq"] = report.exact_reward;
  j["learned_reward_per_rfq"] = report.learned_reward;
  j["learned_reward_se"] = report.learned_reward_se;
  j["curve"] = curve_summary(result.curve);
  j["out"] = out.string();
  std::cout << j.dump(2) << "\n";
  return 0;
}

int cmd_table4(const CommonOpts& o, int max_units, double tol) {
  rfqmm::MarketSpec base =
      o.config_path.empty() ? rfqmm::MarketSpec::default_market20()
                            : rfqmm::MarketSpec::from_json_file(o.config_path);
  if (!o.bonds.empty()) base = base.restricted(o.bonds);

  rfqmm::PenaltySpec penalty;
  penalty.kind =
      o.penalty_kind.empty() ? rfqmm::PenaltyKind::StdDev
                             : parse_kind(o.penalty_kind);
  // Reference coefficients: 5e-2 for the std-dev form, 2e-5 for variance.
  penalty.gamma = !std::isnan(o.gamma) ? o.gamma
                  : penalty.kind == rfqmm::PenaltyKind::StdDev ? 5e-2
                                                               : 2e-5;
  const double discount = std::isnan(o.discount) ? 1e-4 : o.discount;

  const auto rows =
      rfqmm::run_reward_table(base, penalty, discount, max_units, tol);
  const std::string csv = rfqmm::reward_table_csv(rows);
  write_file(fs::path(o.out_dir) / "table.csv", csv);
  std::cout << csv;
  return std::all_of(rows.begin(), rows.end(),
                     [](const auto& r) { return r.ok; })
             ? 0
             : 1;
}

std::vector<rfqmm::CurvePoint> parse_curve_csv(const std::string& text) {
  std::vector<rfqmm::CurvePoint> curve;
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line)) return curve;  // header
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    rfqmm::CurvePoint pt;
    std::istringstream row(line);
    std::string field;
    std::getline(row, field, ',');
    pt.step = std::stoll(field);
    std::getline(row, field, ',');
    pt.r_mean = std::stod(field);
    if (std::getline(row, field, ',')) {
      std::istringstream lim(field);
      std::string part;
      while (std::getline(lim, part, '|')) {
        if (!part.empty()) pt.active_limits.push_back(std::stoi(part));
      }
    }
    curve.push_back(std::move(pt));
  }
  return curve;
}

int cmd_plotdata(const CommonOpts& o, const std::string& kind,
                 const std::string& curve_path, const std::string& bundle_path,
                 const std::string& critic_path, double tol) {
  const fs::path out(o.out_dir);
  if (kind == "learning-curve") {
    if (curve_path.empty()) {
      throw std::invalid_argument("learning-curve needs --curve <curve.csv>");
    }
    const auto curve = parse_curve_csv(read_file(curve_path));
    write_file(out / "learning_curve.csv", rfqmm::plot_learning_curve(curve));
    std::cout << (out / "learning_curve.csv").string() << "\n";
    return 0;
  }

  const rfqmm::MarketSpec market = resolve_market(o);
  if (kind == "quote-surface") {
    rfqmm::PolicyTable policy = [&] {
      if (!bundle_path.empty()) {
        const auto bundle = rfqmm::ActorBundle::from_json(read_file(bundle_path));
        return rfqmm::bundle_policy_table(market, bundle);
      }
      const rfqmm::HamiltonianOracle oracle(
          market, rfqmm::HamiltonianOracle::Mode::Memoized);
      return rfqmm::greedy_policy(
          market, rfqmm::value_iteration(market, tol, oracle).table);
    }();
    write_file(out / "quote_surface.csv",
               rfqmm::plot_policy_surface(market, policy));
    std::cout << (out / "quote_surface.csv").string() << "\n";
    return 0;
  }
  if (kind == "value-surface") {
    rfqmm::ValueTable value = [&] {
      if (!critic_path.empty()) {
        return critic_table(
            market, rfqmm::FeedForwardNet::from_json(read_file(critic_path)));
      }
      const rfqmm::HamiltonianOracle oracle(
          market, rfqmm::HamiltonianOracle::Mode::Memoized);
      return rfqmm::to_anytime_value(
          market, rfqmm::value_iteration(market, tol, oracle).table);
    }();
    write_file(out / "value_surface.csv",
               rfqmm::plot_value_surface(market, value));
    std::cout << (out / "value_surface.csv").string() << "\n";
    return 0;
  }
  if (kind == "value-diff") {
    if (critic_path.empty()) {
      throw std::invalid_argument("value-diff needs --critic <critic.json>");
    }
    const rfqmm::HamiltonianOracle oracle(
        market, rfqmm::HamiltonianOracle::Mode::Memoized);
    const rfqmm::ValueTable exact = rfqmm::to_anytime_value(
        market, rfqmm::value_iteration(market, tol, oracle).table);
    rfqmm::ValueTable learned = critic_table(
        market, rfqmm::FeedForwardNet::from_json(read_file(critic_path)));
    double shift = 0.0;  // critic is defined up to translation
    for (size_t s = 0; s < learned.v.size(); ++s) {
      shift += exact.v[s] - learned.v[s];
    }
    shift /= static_cast<double>(learned.v.size());
    for (double& v : learned.v) v += shift;
    write_file(out / "value_diff.csv",
               rfqmm::plot_value_difference(exact, learned));
    std::cout << (out / "value_diff.csv").string() << "\n";
    return 0;
  }
  throw std::invalid_argument("unknown plot kind '" + kind + "'");
}

int cmd_list() {
  json j = json::array();
  for (const auto& p : rfqmm::all_presets()) {
    json e;
    e["name"] = p.name;
    e["description"] = p.description;
    e["bonds"] = p.bonds;
    e["steps"] = p.config.steps;
    j.push_back(e);
  }
  std::cout << j.dump(2) << "\n";
  return 0;
}

int error_exit(const std::string& type, const std::string& message) {
  json j;
  j["error"]["type"] = type;
  j["error"]["message"] = message;
  std::cerr << j.dump(2) << "\n";
  return 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{
      "rfqmm: optimal RFQ market-making quotes via exact grid solvers and "
      "model-based actor-critic learning"};
  app.require_subcommand(1);

  CommonOpts o;
  double vi_tol = 1e-2;
  rfqmm::FdConfig fd_config;
  int64_t steps_override = 0;
  int64_t events = 1'000'000;
  int table_max_units = 5;
  std::string bundle_path, critic_path, curve_path, resume_path, plot_kind;

  auto* vi = app.add_subcommand("solve-vi",
                                "exact value iteration on the inventory grid");
  add_common(vi, o, /*with_seed=*/false);
  vi->add_option("--tol", vi_tol, "fixed-point tolerance (value units)");

  auto* fd = app.add_subcommand(
      "solve-fd", "implicit finite-difference solve of the stationary HJB");
  add_common(fd, o, /*with_seed=*/false);
  fd->add_option("--tau", fd_config.tau, "time step");
  fd->add_option("--horizon", fd_config.horizon, "backward horizon (0 = 20/r)");
  fd->add_option("--stationarity-tol", fd_config.stationarity_tol,
                 "stop when per-unit-time change drops below this (0 = auto)");

  auto* train = app.add_subcommand("train", "actor-critic training run");
  add_common(train, o);
  train->add_option("--steps", steps_override, "override the preset's steps");
  train->add_option("--resume", resume_path, "checkpoint JSON to continue");

  auto* evaluate = app.add_subcommand(
      "evaluate", "rollout evaluation of a stored policy bundle");
  add_common(evaluate, o);
  evaluate->add_option("--bundle", bundle_path, "bundle.json path")->required();
  evaluate->add_option("--events", events, "rollout length");

  auto* compare = app.add_subcommand(
      "compare", "train, then compare against the exact solution (dim <= 2)");
  add_common(compare, o);
  compare->add_option("--steps", steps_override, "override the preset's steps");
  compare->add_option("--tol", vi_tol, "exact-solve tolerance");

  auto* table4 = app.add_subcommand(
      "table4", "per-bond exact average reward per RFQ table");
  add_common(table4, o, /*with_seed=*/false);
  table4->add_option("--max-units", table_max_units, "risk limit per bond");
  table4->add_option("--tol", vi_tol, "exact-solve tolerance");

  auto* plotdata = app.add_subcommand("plotdata", "emit plot-ready CSV data");
  add_common(plotdata, o, /*with_seed=*/false);
  plotdata
      ->add_option("--kind", plot_kind,
                   "learning-curve | quote-surface | value-surface | "
                   "value-diff")
      ->required();
  plotdata->add_option("--curve", curve_path, "curve.csv from a training run");
  plotdata->add_option("--bundle", bundle_path, "bundle.json for learned data");
  plotdata->add_option("--critic", critic_path, "critic.json for learned data");
  plotdata->add_option("--tol", vi_tol, "exact-solve tolerance");

  app.add_subcommand("list", "list the named presets");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    json j;
    j["error"]["type"] = "usage";
    j["error"]["message"] = e.what();
    std::cerr << j.dump(2) << "\n";
    return e.get_exit_code() == 0 ? 1 : e.get_exit_code();
  }

  try {
    if (vi->parsed()) return cmd_solve_vi(o, vi_tol);
    if (fd->parsed()) return cmd_solve_fd(o, fd_config);
    if (train->parsed()) return cmd_train(o, steps_override, resume_path);
    if (evaluate->parsed()) return cmd_evaluate(o, bundle_path, events);
    if (compare->parsed()) return cmd_compare(o, steps_override, vi_tol);
    if (table4->parsed()) return cmd_table4(o, table_max_units, vi_tol);
    if (plotdata->parsed()) {
      return cmd_plotdata(o, plot_kind, curve_path, bundle_path, critic_path,
                          vi_tol);
    }
    return cmd_list();
  } catch (const std::invalid_argument& e) {
    return error_exit("invalid_argument", e.what());
  } catch (const std::exception& e) {
    return error_exit("runtime_error", e.what());
  }
}
