/// @file intensity.hpp
/// @brief SU Johnson fill-probability curves, myopic quotes, Hamiltonians.
#pragma once

#include <cstdint>
#include <vector>

#include "rfqmm/math.hpp"

namespace rfqmm {

/// Fill-probability curve f(delta) = 1 - Phi(alpha + beta asinh((delta-mu)/sigma)).
struct SuJohnsonCurve {
  double alpha = 0.0;
  double beta = 1.0;   // > 0
  double mu = 0.0;
  double sigma = 1.0;  // > 0

  void validate() const;
};

/// Output clamp keeping quote<->probability conversions finite.
inline constexpr double kProbFloor = 1e-15;
inline constexpr double kProbCeil = 1.0 - 1e-15;

/// Fill probability at quote delta, clamped to [kProbFloor, kProbCeil].
double f_eval(const SuJohnsonCurve& curve, double delta);

/// First and second derivative of the (unclamped) curve, closed form.
double f_prime(const SuJohnsonCurve& curve, double delta);
double f_second(const SuJohnsonCurve& curve, double delta);

/// Quote with fill probability p: delta = mu + sigma sinh((Phi^-1(1-p) - alpha)/beta).
double f_inverse(const SuJohnsonCurve& curve, double p);

struct ConditionReport {
  double max_ratio = 0.0;  // sup of f f'' / f'^2 over the grid
  double argmax_delta = 0.0;
  bool satisfied = false;  // max_ratio < 2
};

/// Evaluates the quasiconcavity condition sup f f''/(f')^2 < 2 on a quote grid.
ConditionReport check_condition(const SuJohnsonCurve& curve,
                                const std::vector<double>& delta_grid);

/// Convenience grid mapping z in [z_lo, z_hi] to quotes mu + sigma sinh-free
/// linear spacing in z, i.e. delta = mu + sigma z.
std::vector<double> condition_grid(const SuJohnsonCurve& curve, double z_lo,
                                   double z_hi, int n_points);

/// Argmax of delta f(delta), bracketing + golden section to 1e-8.
/// Throws if bracket expansion passes delta = 1e4.
double myopic_quote(const SuJohnsonCurve& curve);

/// Maximizer of f(delta) (delta - p); strictly increasing in p.
double hamiltonian_argmax(const SuJohnsonCurve& curve, double p);

/// H(p) = trade_size * lambda_rfq * sup_delta f(delta)(delta - p).
double hamiltonian(const SuJohnsonCurve& curve, double lambda_rfq,
                   double trade_size, double p);

/// Memoized Hamiltonian on [p_lo, p_hi]: piecewise cubic Hermite through
/// exact node values with envelope derivatives H'(p) = -scale f(delta*(p)).
/// Construction self-checks against direct evaluation at 1000 random points
/// (tolerance 1e-6 relative to scale) and throws on failure. Queries outside
/// the range fall back to exact evaluation.
class HamiltonianTable {
 public:
  HamiltonianTable(const SuJohnsonCurve& curve, double lambda_rfq,
                   double trade_size, double p_lo, double p_hi, int n_nodes,
                   uint64_t check_seed = 929);

  double value(double p) const;
  /// dH/dp = -scale f(delta*(p)), from the interpolant inside the range.
  double derivative(double p) const;
  bool covers(double p) const { return table_.covers(p); }
  double max_check_error() const { return max_check_error_; }

 private:
  SuJohnsonCurve curve_;
  double scale_;
  HermiteTable table_;
  double max_check_error_ = 0.0;
};

}  // namespace rfqmm
