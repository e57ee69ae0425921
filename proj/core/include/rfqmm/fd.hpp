/// \file fd.hpp
/// \brief Implicit operator-splitting finite-difference solver for the
///        stationary HJB equation on the inventory grid.
///
/// The backward-in-time scheme advances an AtAnyTime value table through a
/// closed-form linear stage followed by one implicit nonlinear stage per
/// bond, each solved to residual tolerance by Gauss-Seidel sweeps with a
/// safeguarded scalar Newton iteration per grid point (the per-state
/// equation is strictly decreasing in the unknown, so the root is unique).

#pragma once

#include <cstdint>
#include <vector>

#include "rfqmm/model.hpp"
#include "rfqmm/tabular.hpp"

namespace rfqmm {

/// Discretization and tolerance knobs for the finite-difference solver.
/// Zero-valued horizon/stationarity_tol request the scale-aware defaults
/// (20/r and default_stationarity_tol respectively).
struct FdConfig {
  double horizon = 0.0;
  double tau = 0.5;
  double newton_tol = 1e-9;
  int newton_max_iter = 100;
  double stationarity_tol = 0.0;
};

/// Default stationarity tolerance: 1e-6 * (max |psi| + sum of zero-argument
/// Hamiltonians) / r. The second term keeps the tolerance positive for
/// penalty-free markets, where the value scale is set by the spread income
/// rather than by the inventory penalty.
double default_stationarity_tol(const MarketSpec& market);

/// One backward time step of the splitting scheme.
/// Stage 0 is closed-form: y0 = (theta_next - tau*psi) / (1 + r*tau).
/// Stage i solves, at every grid point, the implicit equation coupling
/// y_i(q) with its own i-axis neighbors; Newton failures trigger one retry
/// of the step as two tau/2 sub-steps before aborting with diagnostics.
ValueTable splitting_step(const MarketSpec& market, const ValueTable& theta_next,
                          const FdConfig& config, const HamiltonianOracle& oracle);

enum class FdStopReason { Stationarity, HorizonExhausted };

/// Outcome of a stationary solve. The table is recentered so that the HJB
/// residual vanishes in mean under the stationary distribution of the
/// table's greedy policy (those weights keep the residual's flux part out
/// of the level); hjb_residual_sup is the remaining sup-norm residual of
/// the recentered table.
struct FdResult {
  ValueTable table;
  FdStopReason stop_reason;
  int64_t steps = 0;
  double final_diff_rate = 0.0;
  double hjb_residual_sup = 0.0;
  double recenter_shift = 0.0;
  int64_t tau_retries = 0;
};

/// Iterates splitting_step backward from the terminal condition (all zeros
/// unless `terminal` is given) until the per-unit-time sup-norm change
/// drops below the stationarity tolerance or the horizon runs out.
FdResult solve_stationary(const MarketSpec& market, const FdConfig& config,
                          const HamiltonianOracle& oracle,
                          const std::vector<double>* terminal = nullptr);

/// Sup-norm of the stationary HJB residual
///   rho(q) = -r*theta(q) - psi(q) + sum over admissible (i,s) of H^{i,s}
/// evaluated on an AtAnyTime table.
double hjb_residual_sup(const MarketSpec& market, const ValueTable& anytime,
                        const HamiltonianOracle& oracle);

}  // namespace rfqmm
