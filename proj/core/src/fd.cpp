#include "rfqmm/fd.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

namespace rfqmm {

namespace {

std::vector<double> penalties_on_grid(const MarketSpec& market,
                                      const InventoryGrid& grid) {
  std::vector<double> psi(grid.size());
  std::vector<int> u(grid.dim());
  for (int64_t s = 0; s < grid.size(); ++s) {
    grid.units(s, u);
    psi[s] = penalty_eval(market, std::span<const int>(u));
  }
  return psi;
}

struct StageContext {
  const MarketSpec* market;
  const InventoryGrid* grid;
  const HamiltonianOracle* oracle;
  const FdConfig* config;
};

// Residual of the stage-i equation at one state, with neighbors frozen:
//   F(x) = (y_prev - x)/tau + sum_adm lambda^{i,s} * Delta_i * g((x - nbr)/Delta_i)
double stage_residual(const StageContext& ctx, int bond, double tau,
                      double y_prev, double x, const double* nbr,
                      const bool* adm) {
  const BondSpec& b = ctx.market->bond(bond);
  double acc = (y_prev - x) / tau;
  if (adm[kBid]) {
    acc += b.lambda_bid * ctx.oracle->value(bond, (x - nbr[kBid]) / b.trade_size);
  }
  if (adm[kAsk]) {
    acc += b.lambda_ask * ctx.oracle->value(bond, (x - nbr[kAsk]) / b.trade_size);
  }
  return acc;
}

double stage_residual_prime(const StageContext& ctx, int bond, double tau,
                            double x, const double* nbr, const bool* adm) {
  const BondSpec& b = ctx.market->bond(bond);
  double acc = -1.0 / tau;
  if (adm[kBid]) {
    acc += b.lambda_bid *
           ctx.oracle->derivative(bond, (x - nbr[kBid]) / b.trade_size) /
           b.trade_size;
  }
  if (adm[kAsk]) {
    acc += b.lambda_ask *
           ctx.oracle->derivative(bond, (x - nbr[kAsk]) / b.trade_size) /
           b.trade_size;
  }
  return acc;
}

// Safeguarded Newton for the strictly decreasing F; returns false when the
// iteration budget runs out before |F| < tol.
bool newton_state(const StageContext& ctx, int bond, double tau, double y_prev,
                  const double* nbr, const bool* adm, double tol, double& x) {
  double lo = -std::numeric_limits<double>::infinity();
  double hi = std::numeric_limits<double>::infinity();
  for (int it = 0; it < ctx.config->newton_max_iter; ++it) {
    double f = stage_residual(ctx, bond, tau, y_prev, x, nbr, adm);
    if (std::abs(f) < tol) return true;
    if (f > 0.0) {
      lo = std::max(lo, x);
    } else {
      hi = std::min(hi, x);
    }
    double fp = stage_residual_prime(ctx, bond, tau, x, nbr, adm);
    double next = x - f / fp;
    if (!(next > lo && next < hi)) {
      if (std::isfinite(lo) && std::isfinite(hi)) {
        next = 0.5 * (lo + hi);
      } else if (std::isfinite(lo)) {
        next = lo + std::max(1.0, std::abs(lo));
      } else {
        next = hi - std::max(1.0, std::abs(hi));
      }
    }
    x = next;
  }
  return false;
}

// One splitting step at the given tau; returns false on Newton or sweep
// non-convergence (the caller decides whether to retry at tau/2).
//
// The step is exactly shift-equivariant: adding a constant c to theta_next
// adds c/(1 + r tau) to the output (the Hamiltonian sees only differences).
// With discount rates near zero the level grows to reward/r, where absolute
// Newton tolerances drown in rounding noise, so the level is peeled off
// here and the stages run on numbers of the value-range scale.
bool try_step(const StageContext& ctx, const std::vector<double>& psi,
              const std::vector<double>& theta_next, double tau,
              std::vector<double>& out, std::string& diag) {
  const InventoryGrid& grid = *ctx.grid;
  const MarketSpec& market = *ctx.market;
  int64_t S = grid.size();
  int d = grid.dim();
  double r = market.discount();
  double tol = ctx.config->newton_tol;

  double level = 0.0;
  for (int64_t s = 0; s < S; ++s) level += theta_next[s];
  level /= static_cast<double>(S);

  std::vector<double> y(S);
  for (int64_t s = 0; s < S; ++s) {
    y[s] = (theta_next[s] - level - tau * psi[s]) / (1.0 + r * tau);
  }

  constexpr int kMaxSweeps = 1000;
  std::vector<double> y_prev(S);
  for (int bond = 0; bond < d; ++bond) {
    y_prev = y;
    bool converged = false;
    for (int sweep = 0; sweep < kMaxSweeps && !converged; ++sweep) {
      for (int64_t s = 0; s < S; ++s) {
        double nbr[2] = {0.0, 0.0};
        bool adm[2] = {false, false};
        for (int side = 0; side < 2; ++side) {
          int64_t t = grid.neighbor(s, bond, side);
          if (t >= 0) {
            adm[side] = true;
            nbr[side] = y[t];
          }
        }
        double x = y[s];
        if (!newton_state(ctx, bond, tau, y_prev[s], nbr, adm, 0.1 * tol, x)) {
          diag = "Newton stalled at state " + std::to_string(s) + ", bond " +
                 std::to_string(bond);
          return false;
        }
        y[s] = x;
      }
      // verify with final neighbor values
      double worst = 0.0;
      for (int64_t s = 0; s < S; ++s) {
        double nbr[2] = {0.0, 0.0};
        bool adm[2] = {false, false};
        for (int side = 0; side < 2; ++side) {
          int64_t t = grid.neighbor(s, bond, side);
          if (t >= 0) {
            adm[side] = true;
            nbr[side] = y[t];
          }
        }
        worst = std::max(worst, std::abs(stage_residual(ctx, bond, tau,
                                                        y_prev[s], y[s], nbr,
                                                        adm)));
      }
      converged = worst < tol;
    }
    if (!converged) {
      diag = "Gauss-Seidel sweeps stalled on bond " + std::to_string(bond);
      return false;
    }
  }
  double level_back = level / (1.0 + r * tau);
  for (int64_t s = 0; s < S; ++s) y[s] += level_back;
  out = std::move(y);
  return true;
}

// Full step with the halve-tau-retry-once policy.
std::vector<double> step_with_retry(const StageContext& ctx,
                                    const std::vector<double>& psi,
                                    const std::vector<double>& theta_next,
                                    double tau, int64_t* retries) {
  std::vector<double> out;
  std::string diag;
  if (try_step(ctx, psi, theta_next, tau, out, diag)) return out;
  if (retries) ++*retries;
  std::vector<double> half;
  std::string diag2;
  if (!try_step(ctx, psi, theta_next, 0.5 * tau, half, diag2) ||
      !try_step(ctx, psi, half, 0.5 * tau, out, diag2)) {
    throw std::runtime_error(
        "splitting_step: not converged at tau and tau/2; first failure: " +
        diag + "; retry failure: " + diag2);
  }
  return out;
}

double resolve_horizon(const MarketSpec& market, const FdConfig& config) {
  if (config.horizon > 0.0) return config.horizon;
  return 20.0 / market.discount();
}

double resolve_stat_tol(const MarketSpec& market, const FdConfig& config) {
  if (config.stationarity_tol > 0.0) return config.stationarity_tol;
  return default_stationarity_tol(market);
}

void validate(const FdConfig& config) {
  if (!(config.tau > 0.0)) throw std::invalid_argument("FdConfig: tau <= 0");
  if (!(config.newton_tol > 0.0)) {
    throw std::invalid_argument("FdConfig: newton_tol <= 0");
  }
  if (config.newton_max_iter <= 0) {
    throw std::invalid_argument("FdConfig: newton_max_iter <= 0");
  }
  if (config.horizon < 0.0 || config.stationarity_tol < 0.0) {
    throw std::invalid_argument("FdConfig: negative horizon or tolerance");
  }
}

}  // namespace

double default_stationarity_tol(const MarketSpec& market) {
  InventoryGrid grid = market_grid(market);
  std::vector<double> psi = penalties_on_grid(market, grid);
  double max_psi = 0.0;
  for (double p : psi) max_psi = std::max(max_psi, std::abs(p));
  double h0 = 0.0;
  for (int i = 0; i < market.dim(); ++i) {
    const BondSpec& b = market.bond(i);
    h0 += hamiltonian(b.curve, b.lambda_bid + b.lambda_ask, b.trade_size, 0.0);
  }
  return 1e-6 * (max_psi + h0) / market.discount();
}

ValueTable splitting_step(const MarketSpec& market, const ValueTable& theta_next,
                          const FdConfig& config,
                          const HamiltonianOracle& oracle) {
  validate(config);
  if (theta_next.flavor != ValueFlavor::AtAnyTime) {
    throw std::invalid_argument("splitting_step: input must be AtAnyTime");
  }
  StageContext ctx{&market, &theta_next.grid, &oracle, &config};
  std::vector<double> psi = penalties_on_grid(market, theta_next.grid);
  std::vector<double> out =
      step_with_retry(ctx, psi, theta_next.v, config.tau, nullptr);
  return ValueTable(theta_next.grid, ValueFlavor::AtAnyTime, std::move(out));
}

FdResult solve_stationary(const MarketSpec& market, const FdConfig& config,
                          const HamiltonianOracle& oracle,
                          const std::vector<double>* terminal) {
  validate(config);
  InventoryGrid grid = market_grid(market);
  int64_t S = grid.size();
  if (terminal && static_cast<int64_t>(terminal->size()) != S) {
    throw std::invalid_argument("solve_stationary: terminal size mismatch");
  }
  double horizon = resolve_horizon(market, config);
  double stat_tol = resolve_stat_tol(market, config);
  double tau = config.tau;
  auto steps_total = static_cast<int64_t>(std::ceil(horizon / tau));

  StageContext ctx{&market, &grid, &oracle, &config};
  std::vector<double> psi = penalties_on_grid(market, grid);
  std::vector<double> theta =
      terminal ? *terminal : std::vector<double>(S, 0.0);

  FdResult res{ValueTable(grid, ValueFlavor::AtAnyTime),
               FdStopReason::HorizonExhausted,
               0,
               0.0,
               0.0,
               0.0,
               0};
  for (int64_t k = 0; k < steps_total; ++k) {
    std::vector<double> next =
        step_with_retry(ctx, psi, theta, tau, &res.tau_retries);
    double diff = 0.0;
    for (int64_t s = 0; s < S; ++s) {
      diff = std::max(diff, std::abs(next[s] - theta[s]));
    }
    theta = std::move(next);
    res.steps = k + 1;
    res.final_diff_rate = diff / tau;
    if (res.final_diff_rate < stat_tol) {
      res.stop_reason = FdStopReason::Stationarity;
      break;
    }
  }

  // The constant mode of the backward iteration decays at rate r only, so
  // the table stops with an almost uniform level offset. The offset shows
  // up one-to-one in the HJB residual rho = -r theta - psi + sum H, and a
  // shift of mean(rho)/r removes it. The mean must be taken under the
  // stationary distribution of the table's own greedy policy: for those
  // weights the residual's flux part (fill rate times value differences)
  // sums to zero by flow balance, so the tiny shape residual cannot leak
  // into the level with a 1/r amplification the way it does under uniform
  // weights.
  ValueTable table(grid, ValueFlavor::AtAnyTime, std::move(theta));
  double r = market.discount();
  int d = market.dim();
  std::vector<double> rho(S);
  for (int64_t s = 0; s < S; ++s) {
    double acc = -r * table.v[s] - psi[s];
    for (int bond = 0; bond < d; ++bond) {
      const BondSpec& b = market.bond(bond);
      for (int side = 0; side < 2; ++side) {
        int64_t t = grid.neighbor(s, bond, side);
        if (t < 0) continue;
        double lam = side == kBid ? b.lambda_bid : b.lambda_ask;
        double p = (table.v[s] - table.v[t]) / b.trade_size;
        acc += lam * oracle.value(bond, p);
      }
    }
    rho[s] = acc;
  }
  std::vector<double> weights;
  try {
    PolicyTable greedy = greedy_policy(market, table);
    weights = stationary_distribution(market, greedy);
  } catch (const std::exception&) {
    weights.assign(S, 1.0 / static_cast<double>(S));
  }
  double mean_rho = 0.0;
  for (int64_t s = 0; s < S; ++s) mean_rho += weights[s] * rho[s];
  res.recenter_shift = mean_rho / r;
  double sup = 0.0;
  for (int64_t s = 0; s < S; ++s) {
    table.v[s] += res.recenter_shift;
    sup = std::max(sup, std::abs(rho[s] - mean_rho));
  }
  res.hjb_residual_sup = sup;
  res.table = std::move(table);
  return res;
}

double hjb_residual_sup(const MarketSpec& market, const ValueTable& anytime,
                        const HamiltonianOracle& oracle) {
  if (anytime.flavor != ValueFlavor::AtAnyTime) {
    throw std::invalid_argument("hjb_residual_sup: input must be AtAnyTime");
  }
  const InventoryGrid& grid = anytime.grid;
  std::vector<double> psi = penalties_on_grid(market, grid);
  double r = market.discount();
  double sup = 0.0;
  for (int64_t s = 0; s < grid.size(); ++s) {
    double acc = -r * anytime.v[s] - psi[s];
    for (int bond = 0; bond < market.dim(); ++bond) {
      const BondSpec& b = market.bond(bond);
      for (int side = 0; side < 2; ++side) {
        int64_t t = grid.neighbor(s, bond, side);
        if (t < 0) continue;
        double lam = side == kBid ? b.lambda_bid : b.lambda_ask;
        acc += lam * oracle.value(bond, (anytime.v[s] - anytime.v[t]) / b.trade_size);
      }
    }
    sup = std::max(sup, std::abs(acc));
  }
  return sup;
}

}  // namespace rfqmm
