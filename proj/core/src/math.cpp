#include "rfqmm/math.hpp"

#include <algorithm>

namespace rfqmm {

namespace {

// Acklam's coefficients for the inverse normal cdf.
constexpr double kA[] = {-3.969683028665376e+01, 2.209460984245205e+02,
                         -2.759285104469687e+02, 1.383577518672690e+02,
                         -3.066479806614716e+01, 2.506628277459239e+00};
constexpr double kB[] = {-5.447609879822406e+01, 1.615858368580409e+02,
                         -1.556989798598866e+02, 6.680131188771972e+01,
                         -1.328068155288572e+01};
constexpr double kC[] = {-7.784894002430293e-03, -3.223964580411365e-01,
                         -2.400758277161838e+00, -2.549732539343734e+00,
                         4.374664141464968e+00, 2.938163982698783e+00};
constexpr double kD[] = {7.784695709041462e-03, 3.224671290700398e-01,
                         2.445134137142996e+00, 3.754408661907416e+00};
constexpr double kPLow = 0.02425;

double acklam(double p) {
  if (p < kPLow) {
    double q = std::sqrt(-2.0 * std::log(p));
    return (((((kC[0] * q + kC[1]) * q + kC[2]) * q + kC[3]) * q + kC[4]) * q +
            kC[5]) /
           ((((kD[0] * q + kD[1]) * q + kD[2]) * q + kD[3]) * q + 1.0);
  }
  double q = p - 0.5;
  double r = q * q;
  return (((((kA[0] * r + kA[1]) * r + kA[2]) * r + kA[3]) * r + kA[4]) * r +
          kA[5]) *
         q /
         (((((kB[0] * r + kB[1]) * r + kB[2]) * r + kB[3]) * r + kB[4]) * r +
          1.0);
}

}  // namespace

double norm_ppf(double p) {
  if (!(p > 0.0 && p < 1.0)) {
    throw std::invalid_argument("norm_ppf: p must lie in (0, 1)");
  }
  // Work in the lower half so the Newton residual norm_cdf(x) - p does not
  // cancel against 1.
  if (p > 0.5) return -norm_ppf(1.0 - p);
  double x = acklam(p);
  // One Newton refinement pushes the rational approximation below 1e-12.
  double e = norm_cdf(x) - p;
  x -= e / norm_pdf(x);
  return x;
}

HermiteTable::HermiteTable(double lo, double hi, std::vector<double> values,
                           std::vector<double> derivatives)
    : lo_(lo), hi_(hi), v_(std::move(values)), d_(std::move(derivatives)) {
  if (v_.size() < 2 || v_.size() != d_.size()) {
    throw std::invalid_argument("HermiteTable: need >= 2 matching nodes");
  }
  if (!(hi_ > lo_)) {
    throw std::invalid_argument("HermiteTable: empty range");
  }
  dx_ = (hi_ - lo_) / static_cast<double>(v_.size() - 1);
}

int HermiteTable::segment(double x, double& t) const {
  int n = static_cast<int>(v_.size()) - 1;
  int k = static_cast<int>((x - lo_) / dx_);
  k = std::clamp(k, 0, n - 1);
  t = (x - (lo_ + k * dx_)) / dx_;
  return k;
}

double HermiteTable::value(double x) const {
  double t;
  int k = segment(x, t);
  double h00 = (1.0 + 2.0 * t) * (1.0 - t) * (1.0 - t);
  double h10 = t * (1.0 - t) * (1.0 - t);
  double h01 = t * t * (3.0 - 2.0 * t);
  double h11 = t * t * (t - 1.0);
  return h00 * v_[k] + h10 * dx_ * d_[k] + h01 * v_[k + 1] +
         h11 * dx_ * d_[k + 1];
}

double HermiteTable::derivative(double x) const {
  double t;
  int k = segment(x, t);
  double g00 = 6.0 * t * (t - 1.0);
  double g10 = (1.0 - t) * (1.0 - 3.0 * t);
  double g01 = -g00;
  double g11 = t * (3.0 * t - 2.0);
  return (g00 * v_[k] + g01 * v_[k + 1]) / dx_ + g10 * d_[k] + g11 * d_[k + 1];
}

}  // namespace rfqmm
