/// @file math.hpp
/// @brief Normal distribution helpers, golden-section search, Hermite tables.
#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <utility>
#include <vector>

namespace rfqmm {

/// Standard normal density.
inline double norm_pdf(double x) {
  static constexpr double kInvSqrt2Pi = 0.3989422804014326779;
  return kInvSqrt2Pi * std::exp(-0.5 * x * x);
}

/// Standard normal cdf via erfc, accurate in both tails.
inline double norm_cdf(double x) {
  static constexpr double kInvSqrt2 = 0.7071067811865475244;
  return 0.5 * std::erfc(-x * kInvSqrt2);
}

/// Inverse standard normal cdf. Acklam's rational approximation refined by
/// one Newton step; |norm_cdf(norm_ppf(p)) - p| <= 1e-12 on [1e-12, 1-1e-12].
double norm_ppf(double p);

struct GoldenResult {
  double x = 0.0;
  double value = 0.0;
  int evals = 0;
};

/// Golden-section maximization of a unimodal function on [lo, hi].
template <class F>
GoldenResult golden_max(F&& f, double lo, double hi, double xtol) {
  static constexpr double kInvPhi = 0.6180339887498948482;
  GoldenResult out;
  double a = lo, b = hi;
  double x1 = b - kInvPhi * (b - a);
  double x2 = a + kInvPhi * (b - a);
  double f1 = f(x1), f2 = f(x2);
  out.evals = 2;
  while (b - a > xtol) {
    if (f1 < f2) {
      a = x1;
      x1 = x2;
      f1 = f2;
      x2 = a + kInvPhi * (b - a);
      f2 = f(x2);
    } else {
      b = x2;
      x2 = x1;
      f2 = f1;
      x1 = b - kInvPhi * (b - a);
      f1 = f(x1);
    }
    ++out.evals;
  }
  if (f1 < f2) {
    out.x = x2;
    out.value = f2;
  } else {
    out.x = x1;
    out.value = f1;
  }
  return out;
}

/// Piecewise cubic Hermite interpolant on a uniform grid, built from exact
/// node values and derivatives.
class HermiteTable {
 public:
  HermiteTable() = default;
  HermiteTable(double lo, double hi, std::vector<double> values,
               std::vector<double> derivatives);

  bool covers(double x) const { return x >= lo_ && x <= hi_; }
  double lo() const { return lo_; }
  double hi() const { return hi_; }

  /// Interpolated value; precondition covers(x).
  double value(double x) const;
  /// Derivative of the interpolant; precondition covers(x).
  double derivative(double x) const;

 private:
  int segment(double x, double& t) const;

  double lo_ = 0.0;
  double hi_ = 1.0;
  double dx_ = 1.0;
  std::vector<double> v_;
  std::vector<double> d_;
};

}  // namespace rfqmm
