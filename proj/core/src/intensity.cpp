#include "rfqmm/intensity.hpp"

#include <algorithm>
#include <limits>
#include <stdexcept>

#include "rfqmm/rng.hpp"

namespace rfqmm {

namespace {

constexpr double kBracketLimit = 1e4;
constexpr double kArgmaxTol = 1e-9;

double objective(const SuJohnsonCurve& c, double p, double delta) {
  return f_eval(c, delta) * (delta - p);
}

}  // namespace

void SuJohnsonCurve::validate() const {
  if (!(beta > 0.0) || !(sigma > 0.0)) {
    throw std::invalid_argument("SuJohnsonCurve: beta and sigma must be > 0");
  }
}

double f_eval(const SuJohnsonCurve& c, double delta) {
  double g = c.alpha + c.beta * std::asinh((delta - c.mu) / c.sigma);
  double p = 1.0 - norm_cdf(g);
  return std::clamp(p, kProbFloor, kProbCeil);
}

double f_prime(const SuJohnsonCurve& c, double delta) {
  double u = (delta - c.mu) / c.sigma;
  double g = c.alpha + c.beta * std::asinh(u);
  double gp = c.beta / (c.sigma * std::sqrt(1.0 + u * u));
  return -norm_pdf(g) * gp;
}

double f_second(const SuJohnsonCurve& c, double delta) {
  double u = (delta - c.mu) / c.sigma;
  double s2 = 1.0 + u * u;
  double g = c.alpha + c.beta * std::asinh(u);
  double gp = c.beta / (c.sigma * std::sqrt(s2));
  double gpp = -c.beta * u / (c.sigma * c.sigma * s2 * std::sqrt(s2));
  // phi'(g) = -g phi(g), so f'' = phi(g) (g gp^2 - gpp).
  return norm_pdf(g) * (g * gp * gp - gpp);
}

double f_inverse(const SuJohnsonCurve& c, double p) {
  if (!(p > 0.0 && p < 1.0)) {
    throw std::invalid_argument("f_inverse: p must lie in (0, 1)");
  }
  return c.mu + c.sigma * std::sinh((norm_ppf(1.0 - p) - c.alpha) / c.beta);
}

ConditionReport check_condition(const SuJohnsonCurve& curve,
                                const std::vector<double>& delta_grid) {
  if (delta_grid.empty()) {
    throw std::invalid_argument("check_condition: empty grid");
  }
  ConditionReport rep;
  rep.max_ratio = -std::numeric_limits<double>::infinity();
  for (double d : delta_grid) {
    double fp = f_prime(curve, d);
    if (fp == 0.0) continue;
    double g = curve.alpha + curve.beta * std::asinh((d - curve.mu) / curve.sigma);
    double f = 1.0 - norm_cdf(g);
    double ratio = f * f_second(curve, d) / (fp * fp);
    if (ratio > rep.max_ratio) {
      rep.max_ratio = ratio;
      rep.argmax_delta = d;
    }
  }
  rep.satisfied = rep.max_ratio < 2.0;
  return rep;
}

std::vector<double> condition_grid(const SuJohnsonCurve& curve, double z_lo,
                                   double z_hi, int n_points) {
  if (n_points < 2) throw std::invalid_argument("condition_grid: n_points < 2");
  std::vector<double> g(n_points);
  for (int i = 0; i < n_points; ++i) {
    double z = z_lo + (z_hi - z_lo) * i / (n_points - 1);
    g[i] = curve.mu + curve.sigma * z;
  }
  return g;
}

double hamiltonian_argmax(const SuJohnsonCurve& c, double p) {
  c.validate();
  if (!std::isfinite(p)) {
    throw std::invalid_argument("hamiltonian_argmax: p must be finite");
  }
  // The objective f(delta)(delta - p) is positive only for delta > p and
  // unimodal there. Expand to the right of a myopic-quote guess until the
  // objective turns down, which brackets the peak for every p.
  double dm_guess = c.mu + c.sigma * std::sinh((1.0 - c.alpha) / c.beta);
  double lo = p;
  double a = std::max(p, dm_guess);
  double w = std::max(c.sigma, 1e-3);
  double prev = objective(c, p, a);
  double hi = a + w;
  double cur = objective(c, p, hi);
  while (cur > prev) {
    if (hi > kBracketLimit) {
      throw std::runtime_error("hamiltonian_argmax: bracket exceeded 1e4");
    }
    prev = cur;
    w *= 2.0;
    hi += w;
    cur = objective(c, p, hi);
  }
  GoldenResult r =
      golden_max([&](double d) { return objective(c, p, d); }, lo, hi,
                 kArgmaxTol);
  return r.x;
}

double myopic_quote(const SuJohnsonCurve& curve) {
  return hamiltonian_argmax(curve, 0.0);
}

double hamiltonian(const SuJohnsonCurve& curve, double lambda_rfq,
                   double trade_size, double p) {
  double dstar = hamiltonian_argmax(curve, p);
  return lambda_rfq * trade_size * objective(curve, p, dstar);
}

HamiltonianTable::HamiltonianTable(const SuJohnsonCurve& curve,
                                   double lambda_rfq, double trade_size,
                                   double p_lo, double p_hi, int n_nodes,
                                   uint64_t check_seed)
    : curve_(curve), scale_(lambda_rfq * trade_size) {
  if (n_nodes < 2) throw std::invalid_argument("HamiltonianTable: n_nodes < 2");
  if (!(p_hi > p_lo)) {
    throw std::invalid_argument("HamiltonianTable: empty p-range");
  }
  std::vector<double> v(n_nodes), d(n_nodes);
  for (int i = 0; i < n_nodes; ++i) {
    double p = p_lo + (p_hi - p_lo) * i / (n_nodes - 1);
    double dstar = hamiltonian_argmax(curve_, p);
    v[i] = scale_ * objective(curve_, p, dstar);
    d[i] = -scale_ * f_eval(curve_, dstar);  // envelope theorem
  }
  table_ = HermiteTable(p_lo, p_hi, std::move(v), std::move(d));

  Rng rng(check_seed);
  constexpr double tol = 1e-6;
  for (int i = 0; i < 1000; ++i) {
    double p = rng.uniform(p_lo, p_hi);
    double err = std::abs(table_.value(p) -
                          hamiltonian(curve_, lambda_rfq, trade_size, p));
    max_check_error_ = std::max(max_check_error_, err);
  }
  if (max_check_error_ > tol) {
    throw std::runtime_error("HamiltonianTable: self-check exceeded tolerance");
  }
}

double HamiltonianTable::value(double p) const {
  if (table_.covers(p)) return table_.value(p);
  return scale_ * objective(curve_, p, hamiltonian_argmax(curve_, p));
}

double HamiltonianTable::derivative(double p) const {
  if (table_.covers(p)) return table_.derivative(p);
  return -scale_ * f_eval(curve_, hamiltonian_argmax(curve_, p));
}

}  // namespace rfqmm
