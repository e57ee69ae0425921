#include "rfqmm/model.hpp"

#include <Eigen/Dense>
#include <cmath>
#include <fstream>
#include <nlohmann/json.hpp>
#include <sstream>
#include <stdexcept>

#include "default_market.inc"

namespace rfqmm {

using nlohmann::json;

void BondSpec::validate() const {
  curve.validate();
  if (!(lambda_bid > 0.0) || !(lambda_ask > 0.0)) {
    throw std::invalid_argument("BondSpec " + id + ": intensities must be > 0");
  }
  if (!(trade_size > 0.0)) {
    throw std::invalid_argument("BondSpec " + id + ": trade_size must be > 0");
  }
  if (max_units < 1) {
    throw std::invalid_argument("BondSpec " + id + ": max_units must be >= 1");
  }
}

MarketSpec::MarketSpec(std::vector<BondSpec> bonds,
                       std::vector<double> covariance, PenaltySpec penalty,
                       double discount)
    : bonds_(std::move(bonds)),
      cov_(std::move(covariance)),
      penalty_(penalty),
      discount_(discount) {
  int d = dim();
  if (d == 0) throw std::invalid_argument("MarketSpec: no bonds");
  for (const auto& b : bonds_) b.validate();
  if (cov_.size() != static_cast<size_t>(d) * d) {
    throw std::invalid_argument("MarketSpec: covariance must be d x d");
  }
  if (!(discount_ > 0.0)) {
    throw std::invalid_argument("MarketSpec: discount must be > 0");
  }
  if (!(penalty_.gamma > 0.0)) {
    throw std::invalid_argument("MarketSpec: penalty gamma must be > 0");
  }
  for (int i = 0; i < d; ++i) {
    for (int j = 0; j < i; ++j) {
      if (std::abs(cov_[i * d + j] - cov_[j * d + i]) > 1e-12) {
        throw std::invalid_argument("MarketSpec: covariance not symmetric");
      }
    }
  }
  Eigen::Map<const Eigen::MatrixXd> m(cov_.data(), d, d);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(m);
  Eigen::VectorXd ev = es.eigenvalues();
  bool clamped = false;
  for (int i = 0; i < d; ++i) {
    if (ev[i] < -1e-10) {
      throw std::invalid_argument("MarketSpec: covariance not PSD");
    }
    if (ev[i] < 0.0) {
      ev[i] = 0.0;
      clamped = true;
    }
  }
  if (clamped) {
    Eigen::MatrixXd fixed =
        es.eigenvectors() * ev.asDiagonal() * es.eigenvectors().transpose();
    for (int i = 0; i < d; ++i) {
      for (int j = 0; j < d; ++j) {
        cov_[i * d + j] = 0.5 * (fixed(i, j) + fixed(j, i));
      }
    }
  }
}

double MarketSpec::total_intensity() const {
  double s = 0.0;
  for (const auto& b : bonds_) s += b.lambda_bid + b.lambda_ask;
  return s;
}

MarketSpec MarketSpec::restricted(const std::vector<int>& indices) const {
  int d = dim();
  std::vector<BondSpec> bs;
  bs.reserve(indices.size());
  for (int i : indices) {
    if (i < 0 || i >= d) {
      throw std::invalid_argument("MarketSpec::restricted: bad index");
    }
    bs.push_back(bonds_[i]);
  }
  int nd = static_cast<int>(indices.size());
  std::vector<double> cov(static_cast<size_t>(nd) * nd);
  for (int a = 0; a < nd; ++a) {
    for (int b = 0; b < nd; ++b) {
      cov[a * nd + b] = cov_[indices[a] * d + indices[b]];
    }
  }
  return MarketSpec(std::move(bs), std::move(cov), penalty_, discount_);
}

MarketSpec MarketSpec::with_penalty(PenaltySpec penalty) const {
  return MarketSpec(bonds_, cov_, penalty, discount_);
}

MarketSpec MarketSpec::with_discount(double discount) const {
  return MarketSpec(bonds_, cov_, penalty_, discount);
}

MarketSpec MarketSpec::with_max_units(const std::vector<int>& max_units) const {
  if (max_units.size() != bonds_.size()) {
    throw std::invalid_argument("with_max_units: wrong length");
  }
  std::vector<BondSpec> bs = bonds_;
  for (size_t i = 0; i < bs.size(); ++i) bs[i].max_units = max_units[i];
  return MarketSpec(std::move(bs), cov_, penalty_, discount_);
}

namespace {

PenaltyKind penalty_kind_from(const std::string& s) {
  if (s == "stddev") return PenaltyKind::StdDev;
  if (s == "variance") return PenaltyKind::Variance;
  throw std::invalid_argument("penalty kind must be 'stddev' or 'variance'");
}

std::string penalty_kind_name(PenaltyKind k) {
  return k == PenaltyKind::StdDev ? "stddev" : "variance";
}

}  // namespace

MarketSpec MarketSpec::from_json(const std::string& text) {
  json doc = json::parse(text);
  std::vector<BondSpec> bonds;
  for (const auto& jb : doc.at("bonds")) {
    BondSpec b;
    b.id = jb.at("id").get<std::string>();
    b.lambda_bid = jb.at("lambda_bid").get<double>();
    b.lambda_ask = jb.at("lambda_ask").get<double>();
    b.rfq_size = jb.at("rfq_size").get<double>();
    b.trade_size = b.rfq_size / 100.0;
    const auto& jc = jb.at("curve");
    b.curve.alpha = jc.at("alpha").get<double>();
    b.curve.beta = jc.at("beta").get<double>();
    b.curve.mu = jc.at("mu").get<double>();
    b.curve.sigma = jc.at("sigma").get<double>();
    b.max_units = jb.at("max_units").get<int>();
    bonds.push_back(std::move(b));
  }
  size_t d = bonds.size();
  std::vector<double> cov;
  cov.reserve(d * d);
  const auto& jcov = doc.at("covariance");
  if (jcov.size() != d) {
    throw std::invalid_argument("market json: covariance rows != bonds");
  }
  for (const auto& row : jcov) {
    if (row.size() != d) {
      throw std::invalid_argument("market json: covariance not square");
    }
    for (const auto& x : row) cov.push_back(x.get<double>());
  }
  PenaltySpec pen;
  pen.kind = penalty_kind_from(doc.at("penalty").at("kind").get<std::string>());
  pen.gamma = doc.at("penalty").at("gamma").get<double>();
  double r = doc.at("discount").get<double>();
  return MarketSpec(std::move(bonds), std::move(cov), pen, r);
}

MarketSpec MarketSpec::from_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open market file: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return from_json(ss.str());
}

MarketSpec MarketSpec::default_market20() {
  return from_json(kDefaultMarketJson);
}

std::string MarketSpec::to_json() const {
  json doc;
  for (const auto& b : bonds_) {
    json jb;
    jb["id"] = b.id;
    jb["lambda_bid"] = b.lambda_bid;
    jb["lambda_ask"] = b.lambda_ask;
    jb["rfq_size"] = b.rfq_size;
    jb["curve"] = {{"alpha", b.curve.alpha},
                   {"beta", b.curve.beta},
                   {"mu", b.curve.mu},
                   {"sigma", b.curve.sigma}};
    jb["max_units"] = b.max_units;
    doc["bonds"].push_back(jb);
  }
  int d = dim();
  for (int i = 0; i < d; ++i) {
    json row = json::array();
    for (int j = 0; j < d; ++j) row.push_back(cov_[i * d + j]);
    doc["covariance"].push_back(row);
  }
  doc["penalty"] = {{"kind", penalty_kind_name(penalty_.kind)},
                    {"gamma", penalty_.gamma}};
  doc["discount"] = discount_;
  return doc.dump(2) + "\n";
}

InventoryState InventoryState::flat(const MarketSpec& market) {
  InventoryState s;
  s.units.assign(market.dim(), 0);
  s.limit.reserve(market.dim());
  for (const auto& b : market.bonds()) s.limit.push_back(b.max_units);
  return s;
}

InventoryState InventoryState::flat(std::vector<int> limits) {
  InventoryState s;
  s.units.assign(limits.size(), 0);
  s.limit = std::move(limits);
  return s;
}

bool InventoryState::in_bounds() const {
  for (size_t i = 0; i < units.size(); ++i) {
    if (units[i] < -limit[i] || units[i] > limit[i]) return false;
  }
  return true;
}

bool InventoryState::admissible(int bond, int side) const {
  return side == kBid ? units[bond] < limit[bond] : units[bond] > -limit[bond];
}

void InventoryState::apply_fill(int bond, int side) {
  if (!admissible(bond, side)) {
    throw std::logic_error("InventoryState::apply_fill: blocked move");
  }
  units[bond] += side == kBid ? 1 : -1;
}

void InventoryState::raise_limits(const std::vector<int>& new_limits) {
  if (new_limits.size() != limit.size()) {
    throw std::invalid_argument("raise_limits: wrong length");
  }
  for (size_t i = 0; i < limit.size(); ++i) {
    if (new_limits[i] < limit[i]) {
      throw std::invalid_argument("raise_limits: limits may only grow");
    }
    limit[i] = new_limits[i];
  }
}

namespace {

template <class Int>
double penalty_impl(const MarketSpec& market, std::span<const Int> units) {
  int d = market.dim();
  double quad = 0.0;
  for (int i = 0; i < d; ++i) {
    if (units[i] == 0) continue;
    double qi = units[i] * market.bond(i).trade_size;
    for (int j = 0; j < d; ++j) {
      if (units[j] == 0) continue;
      quad += qi * market.covariance(i, j) * units[j] * market.bond(j).trade_size;
    }
  }
  quad = std::max(quad, 0.0);
  const PenaltySpec& pen = market.penalty();
  if (pen.kind == PenaltyKind::StdDev) {
    return 0.5 * pen.gamma * std::sqrt(quad);
  }
  return 0.5 * pen.gamma * quad;
}

}  // namespace

double penalty_eval(const MarketSpec& market, std::span<const int> units) {
  return penalty_impl(market, units);
}

double penalty_eval(const MarketSpec& market, std::span<const int16_t> units) {
  return penalty_impl(market, units);
}

double gamma_rl(const MarketSpec& market) {
  double lam = market.total_intensity();
  return lam / (market.discount() + lam);
}

std::vector<double> rfq_event_distribution(const MarketSpec& market) {
  double lam = market.total_intensity();
  std::vector<double> p;
  p.reserve(2 * market.dim());
  for (const auto& b : market.bonds()) {
    p.push_back(b.lambda_bid / lam);
    p.push_back(b.lambda_ask / lam);
  }
  return p;
}

double expected_step_reward(const MarketSpec& market, const InventoryState& s,
                            int bond, int side, double delta) {
  if (!s.in_bounds()) {
    throw std::invalid_argument("expected_step_reward: state out of bounds");
  }
  double base = -penalty_eval(market, s) / market.total_intensity();
  if (!s.admissible(bond, side)) return base;
  const BondSpec& b = market.bond(bond);
  return f_eval(b.curve, delta) * b.trade_size * delta + base;
}

}  // namespace rfqmm
