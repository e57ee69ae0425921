#include "rfqmm/tabular.hpp"

#include <Eigen/Sparse>
#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "rfqmm/csv.hpp"

namespace rfqmm {

namespace {

constexpr int64_t kDirectSolveMax = 10'000;
constexpr double kNan = std::numeric_limits<double>::quiet_NaN();

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

double lambda_of(const MarketSpec& market, int bond, int side) {
  const BondSpec& b = market.bond(bond);
  return side == kBid ? b.lambda_bid : b.lambda_ask;
}

}  // namespace

ValueTable::ValueTable(InventoryGrid g, ValueFlavor fl,
                       std::vector<double> values)
    : grid(std::move(g)), flavor(fl), v(std::move(values)) {
  if (static_cast<int64_t>(v.size()) != grid.size()) {
    throw std::invalid_argument("ValueTable: size mismatch");
  }
}

double ValueTable::range() const {
  auto [lo, hi] = std::minmax_element(v.begin(), v.end());
  return *hi - *lo;
}

PolicyTable::PolicyTable(InventoryGrid g)
    : grid(std::move(g)),
      p(static_cast<size_t>(grid.size()) * 2 * grid.dim(), kNan) {}

double PolicyTable::quote(const MarketSpec& market, int64_t s, int bond,
                          int side) const {
  double pr = prob(s, bond, side);
  if (!(pr > 0.0 && pr < 1.0)) {
    throw std::domain_error("PolicyTable::quote: probability outside (0,1)");
  }
  return f_inverse(market.bond(bond).curve, pr);
}

InventoryGrid market_grid(const MarketSpec& market) {
  std::vector<int> limits;
  limits.reserve(market.dim());
  for (const auto& b : market.bonds()) limits.push_back(b.max_units);
  return InventoryGrid(std::move(limits));
}

HamiltonianOracle::HamiltonianOracle(const MarketSpec& market, Mode mode)
    : mode_(mode) {
  bonds_.reserve(market.dim());
  for (const auto& b : market.bonds()) {
    PerBond pb;
    pb.curve = b.curve;
    pb.trade_size = b.trade_size;
    pb.lo = std::numeric_limits<double>::infinity();
    pb.hi = -std::numeric_limits<double>::infinity();
    bonds_.push_back(std::move(pb));
  }
}

void HamiltonianOracle::observe(PerBond& b, double p) const {
  constexpr int64_t kWarmupCalls = 2000;
  b.lo = std::min(b.lo, p);
  b.hi = std::max(b.hi, p);
  if (++b.calls < kWarmupCalls) return;
  double span = b.hi - b.lo;
  double pad = 0.5 * span + 4.0 * b.curve.sigma;
  double lo = b.lo - pad;
  double hi = b.hi + pad;
  int n = static_cast<int>((hi - lo) / (b.curve.sigma / 200.0)) + 2;
  n = std::clamp(n, 101, 8001);
  b.table.emplace(b.curve, 1.0, b.trade_size, lo, hi, n);
}

double HamiltonianOracle::value(int bond, double p) const {
  PerBond& b = bonds_[bond];
  if (b.table && b.table->covers(p)) return b.table->value(p);
  if (mode_ == Mode::Memoized && !b.table) observe(b, p);
  return hamiltonian(b.curve, 1.0, b.trade_size, p);
}

double HamiltonianOracle::derivative(int bond, double p) const {
  PerBond& b = bonds_[bond];
  if (b.table && b.table->covers(p)) return b.table->derivative(p);
  return -b.trade_size * f_eval(b.curve, hamiltonian_argmax(b.curve, p));
}

double HamiltonianOracle::argmax(int bond, double p) const {
  return hamiltonian_argmax(bonds_[bond].curve, p);
}

ValueTable policy_evaluation(const MarketSpec& market,
                             const PolicyTable& policy) {
  const InventoryGrid& grid = policy.grid;
  int d = grid.dim();
  int64_t S = grid.size();
  if (d != market.dim()) {
    throw std::invalid_argument("policy_evaluation: dimension mismatch");
  }
  double r = market.discount();
  std::vector<double> psi = penalties_on_grid(market, grid);

  // rows: (r + sum lam f) theta(s) - sum lam f theta(s') = -psi + sum lam f d Delta
  std::vector<double> diag(S, r);
  std::vector<double> b(S);
  struct Off {
    int64_t t;
    double w;
  };
  std::vector<std::vector<Off>> off(S);
  for (int64_t s = 0; s < S; ++s) {
    b[s] = -psi[s];
    for (int k = 0; k < d; ++k) {
      for (int side = 0; side < 2; ++side) {
        int64_t t = grid.neighbor(s, k, side);
        if (t < 0) continue;
        double pr = policy.prob(s, k, side);
        if (std::isnan(pr)) {
          throw std::invalid_argument(
              "policy_evaluation: policy undefined on admissible move");
        }
        if (pr <= 0.0) continue;
        const BondSpec& bd = market.bond(k);
        double rate = lambda_of(market, k, side) * pr;
        double delta = f_inverse(bd.curve, pr);
        diag[s] += rate;
        off[s].push_back({t, rate});
        b[s] += rate * delta * bd.trade_size;
      }
    }
  }

  std::vector<double> theta(S, 0.0);
  if (S <= kDirectSolveMax) {
    Eigen::SparseMatrix<double> A(S, S);
    std::vector<Eigen::Triplet<double>> trips;
    for (int64_t s = 0; s < S; ++s) {
      trips.emplace_back(s, s, diag[s]);
      for (const Off& o : off[s]) trips.emplace_back(s, o.t, -o.w);
    }
    A.setFromTriplets(trips.begin(), trips.end());
    Eigen::SparseLU<Eigen::SparseMatrix<double>> lu(A);
    if (lu.info() != Eigen::Success) {
      throw std::runtime_error("policy_evaluation: factorization failed");
    }
    Eigen::Map<const Eigen::VectorXd> bv(b.data(), S);
    Eigen::VectorXd x = lu.solve(bv);
    // One step of iterative refinement keeps the residual well under 1e-9
    // even though the values scale like psi / r.
    Eigen::VectorXd resid = bv - A * x;
    x += lu.solve(resid);
    for (int64_t s = 0; s < S; ++s) theta[s] = x[s];
  } else {
    // Gauss-Seidel; the system is strictly diagonally dominant.
    double res = std::numeric_limits<double>::infinity();
    while (res > 1e-9) {
      for (int64_t s = 0; s < S; ++s) {
        double acc = b[s];
        for (const Off& o : off[s]) acc += o.w * theta[o.t];
        theta[s] = acc / diag[s];
      }
      res = 0.0;
      for (int64_t s = 0; s < S; ++s) {
        double acc = b[s] - diag[s] * theta[s];
        for (const Off& o : off[s]) acc += o.w * theta[o.t];
        res = std::max(res, std::abs(acc));
      }
    }
  }
  return ValueTable(grid, ValueFlavor::AtAnyTime, std::move(theta));
}

ValueTable to_rfq_value(const MarketSpec& market, const ValueTable& anytime) {
  if (anytime.flavor != ValueFlavor::AtAnyTime) {
    throw std::invalid_argument("to_rfq_value: input must be AtAnyTime");
  }
  double g = gamma_rl(market);
  double denom = market.discount() + market.total_intensity();
  std::vector<double> psi = penalties_on_grid(market, anytime.grid);
  ValueTable out(anytime.grid, ValueFlavor::AtRfq);
  for (int64_t s = 0; s < anytime.grid.size(); ++s) {
    out.v[s] = (anytime.v[s] + psi[s] / denom) / g;
  }
  return out;
}

ValueTable to_anytime_value(const MarketSpec& market, const ValueTable& atrfq) {
  if (atrfq.flavor != ValueFlavor::AtRfq) {
    throw std::invalid_argument("to_anytime_value: input must be AtRfq");
  }
  double g = gamma_rl(market);
  double denom = market.discount() + market.total_intensity();
  std::vector<double> psi = penalties_on_grid(market, atrfq.grid);
  ValueTable out(atrfq.grid, ValueFlavor::AtAnyTime);
  for (int64_t s = 0; s < atrfq.grid.size(); ++s) {
    out.v[s] = -psi[s] / denom + g * atrfq.v[s];
  }
  return out;
}

namespace {

// Gamma_2 on an AtAnyTime table, writing an AtRfq table.
void gamma2_into(const MarketSpec& market, const InventoryGrid& grid,
                 const std::vector<double>& anytime,
                 const HamiltonianOracle& oracle, std::vector<double>& out) {
  int d = grid.dim();
  double lam_total = market.total_intensity();
  for (int64_t s = 0; s < grid.size(); ++s) {
    double acc = anytime[s];
    for (int k = 0; k < d; ++k) {
      double inv_delta = 1.0 / market.bond(k).trade_size;
      for (int side = 0; side < 2; ++side) {
        int64_t t = grid.neighbor(s, k, side);
        if (t < 0) continue;
        double p = (anytime[s] - anytime[t]) * inv_delta;
        acc += lambda_of(market, k, side) / lam_total * oracle.value(k, p);
      }
    }
    out[s] = acc;
  }
}

}  // namespace

ValueTable bellman_operator(const MarketSpec& market, const ValueTable& atrfq,
                            const HamiltonianOracle& oracle) {
  if (atrfq.flavor != ValueFlavor::AtRfq) {
    throw std::invalid_argument("bellman_operator: input must be AtRfq");
  }
  ValueTable anytime = to_anytime_value(market, atrfq);
  ValueTable out(atrfq.grid, ValueFlavor::AtRfq);
  gamma2_into(market, atrfq.grid, anytime.v, oracle, out.v);
  return out;
}

ViResult value_iteration(const MarketSpec& market, double tol,
                         const HamiltonianOracle& oracle, int64_t max_iter) {
  if (!(tol > 0.0)) throw std::invalid_argument("value_iteration: tol <= 0");
  InventoryGrid grid = market_grid(market);
  int64_t S = grid.size();
  double g = gamma_rl(market);
  double denom = market.discount() + market.total_intensity();
  std::vector<double> psi = penalties_on_grid(market, grid);

  std::vector<double> theta(S, 0.0), anytime(S), next(S);
  double stop = tol * (1.0 - g);
  ViResult res{ValueTable(grid, ValueFlavor::AtRfq), 0, 0.0};
  int floor_hits = 0;
  for (int64_t it = 0; it < max_iter; ++it) {
    for (int64_t s = 0; s < S; ++s) anytime[s] = -psi[s] / denom + g * theta[s];
    gamma2_into(market, grid, anytime, oracle, next);
    double diff = 0.0, scale = 0.0;
    for (int64_t s = 0; s < S; ++s) {
      diff = std::max(diff, std::abs(next[s] - theta[s]));
      scale = std::max(scale, std::abs(next[s]));
    }
    theta.swap(next);
    res.iterations = it + 1;
    res.final_diff = diff;
    if (diff < stop) {
      res.table.v = theta;
      return res;
    }
    // With discount rates near zero the value level is huge (the constant
    // mode is mean reward / (1 - gamma_RL)), and a tight tol can sit below
    // the rounding noise of that level. Once updates stall at the noise
    // floor for a stretch, the iterate is as converged as double allows.
    if (diff <= 8.0 * std::numeric_limits<double>::epsilon() * scale) {
      if (++floor_hits >= 4) {
        res.table.v = theta;
        return res;
      }
    } else {
      floor_hits = 0;
    }
  }
  throw std::runtime_error("value_iteration: max_iter exhausted");
}

PolicyTable greedy_policy(const MarketSpec& market, const ValueTable& table) {
  const ValueTable* anytime = &table;
  ValueTable converted = table.flavor == ValueFlavor::AtRfq
                             ? to_anytime_value(market, table)
                             : ValueTable(table.grid, table.flavor, table.v);
  anytime = &converted;
  const InventoryGrid& grid = table.grid;
  int d = grid.dim();
  PolicyTable pol(grid);
  for (int64_t s = 0; s < grid.size(); ++s) {
    for (int k = 0; k < d; ++k) {
      const BondSpec& b = market.bond(k);
      for (int side = 0; side < 2; ++side) {
        int64_t t = grid.neighbor(s, k, side);
        if (t < 0) continue;
        double p = (anytime->v[s] - anytime->v[t]) / b.trade_size;
        double dstar = hamiltonian_argmax(b.curve, p);
        pol.set_prob(s, k, side, f_eval(b.curve, dstar));
      }
    }
  }
  return pol;
}

namespace {

struct Chain {
  // transition probabilities of the RFQ-time chain, self-loops implicit
  std::vector<std::vector<std::pair<int64_t, double>>> moves;  // per state
  std::vector<double> stay;
  std::vector<double> reward;  // expected per-RFQ reward at each state
};

Chain build_chain(const MarketSpec& market, const PolicyTable& policy) {
  const InventoryGrid& grid = policy.grid;
  int d = grid.dim();
  int64_t S = grid.size();
  double lam_total = market.total_intensity();
  std::vector<double> psi = penalties_on_grid(market, grid);
  Chain c;
  c.moves.resize(S);
  c.stay.assign(S, 0.0);
  c.reward.assign(S, 0.0);
  for (int64_t s = 0; s < S; ++s) {
    double stay = 0.0;
    double rew = -psi[s] / lam_total;
    for (int k = 0; k < d; ++k) {
      const BondSpec& b = market.bond(k);
      for (int side = 0; side < 2; ++side) {
        double pis = lambda_of(market, k, side) / lam_total;
        int64_t t = grid.neighbor(s, k, side);
        if (t < 0) {
          stay += pis;
          continue;
        }
        double pr = policy.prob(s, k, side);
        if (std::isnan(pr)) {
          throw std::invalid_argument(
              "stationary_distribution: policy undefined on admissible move");
        }
        if (pr <= 0.0) {
          stay += pis;
          continue;
        }
        double delta = f_inverse(b.curve, pr);
        c.moves[s].push_back({t, pis * pr});
        stay += pis * (1.0 - pr);
        rew += pis * pr * delta * b.trade_size;
      }
    }
    c.stay[s] = stay;
    c.reward[s] = rew;
  }
  return c;
}

// Closed communicating classes of the positive-probability move graph.
std::vector<std::vector<int64_t>> closed_classes(const Chain& c) {
  int64_t S = static_cast<int64_t>(c.moves.size());
  // Tarjan SCC, iterative.
  std::vector<int64_t> idx(S, -1), low(S, 0), stk;
  std::vector<bool> on(S, false);
  std::vector<int64_t> comp(S, -1);
  int64_t counter = 0, ncomp = 0;
  struct Frame {
    int64_t v;
    size_t ei;
  };
  for (int64_t root = 0; root < S; ++root) {
    if (idx[root] != -1) continue;
    std::vector<Frame> call{{root, 0}};
    idx[root] = low[root] = counter++;
    stk.push_back(root);
    on[root] = true;
    while (!call.empty()) {
      Frame& f = call.back();
      if (f.ei < c.moves[f.v].size()) {
        int64_t w = c.moves[f.v][f.ei++].first;
        if (idx[w] == -1) {
          idx[w] = low[w] = counter++;
          stk.push_back(w);
          on[w] = true;
          call.push_back({w, 0});
        } else if (on[w]) {
          low[f.v] = std::min(low[f.v], idx[w]);
        }
      } else {
        if (low[f.v] == idx[f.v]) {
          while (true) {
            int64_t w = stk.back();
            stk.pop_back();
            on[w] = false;
            comp[w] = ncomp;
            if (w == f.v) break;
          }
          ++ncomp;
        }
        int64_t v = f.v;
        call.pop_back();
        if (!call.empty()) {
          low[call.back().v] = std::min(low[call.back().v], low[v]);
        }
      }
    }
  }
  std::vector<bool> has_exit(ncomp, false);
  for (int64_t s = 0; s < S; ++s) {
    for (const auto& [t, w] : c.moves[s]) {
      if (comp[t] != comp[s]) has_exit[comp[s]] = true;
    }
  }
  std::vector<std::vector<int64_t>> closed(ncomp);
  for (int64_t s = 0; s < S; ++s) {
    if (!has_exit[comp[s]]) closed[comp[s]].push_back(s);
  }
  std::erase_if(closed, [](const auto& v) { return v.empty(); });
  return closed;
}

}  // namespace

std::vector<double> stationary_distribution(const MarketSpec& market,
                                            const PolicyTable& policy) {
  const InventoryGrid& grid = policy.grid;
  int64_t S = grid.size();
  Chain c = build_chain(market, policy);

  bool any_move = false;
  for (int64_t s = 0; s < S && !any_move; ++s) any_move = !c.moves[s].empty();
  std::vector<double> m(S, 1.0 / static_cast<double>(S));
  if (!any_move) return m;  // identity chain: uniform is stationary

  auto classes = closed_classes(c);
  if (classes.size() > 1) {
    std::string msg = "stationary_distribution: reducible chain with " +
                      std::to_string(classes.size()) + " absorbing classes:";
    for (const auto& cls : classes) {
      msg += " {";
      for (size_t i = 0; i < std::min<size_t>(cls.size(), 8); ++i) {
        if (i) msg += ",";
        msg += std::to_string(cls[i]);
      }
      if (cls.size() > 8) msg += ",...";
      msg += "}";
    }
    throw std::runtime_error(msg);
  }

  std::vector<double> next(S);
  for (int64_t iter = 0; iter < 100'000'000; ++iter) {
    std::fill(next.begin(), next.end(), 0.0);
    for (int64_t s = 0; s < S; ++s) {
      double ms = m[s];
      if (ms == 0.0 && c.moves[s].empty()) continue;
      next[s] += ms * c.stay[s];
      for (const auto& [t, w] : c.moves[s]) next[t] += ms * w;
    }
    double diff = 0.0;
    for (int64_t s = 0; s < S; ++s) diff += std::abs(next[s] - m[s]);
    m.swap(next);
    if (diff < 1e-12) {
      // Renormalize away accumulated rounding.
      double sum = 0.0;
      for (double x : m) sum += x;
      for (double& x : m) x /= sum;
      return m;
    }
  }
  throw std::runtime_error("stationary_distribution: power iteration stalled");
}

double average_reward_per_rfq(const MarketSpec& market,
                              const PolicyTable& policy) {
  Chain c = build_chain(market, policy);
  std::vector<double> m = stationary_distribution(market, policy);
  double acc = 0.0;
  for (size_t s = 0; s < m.size(); ++s) acc += m[s] * c.reward[s];
  return acc;
}

std::string value_table_csv(const ValueTable& table) {
  const InventoryGrid& grid = table.grid;
  int d = grid.dim();
  std::string out;
  for (int k = 0; k < d; ++k) {
    out += "n" + std::to_string(k + 1) + ",";
  }
  out += "value\n";
  std::vector<int> u(d);
  for (int64_t s = 0; s < grid.size(); ++s) {
    grid.units(s, u);
    for (int k = 0; k < d; ++k) {
      out += std::to_string(u[k]);
      out += ',';
    }
    append_double(out, table.v[s]);
    out += '\n';
  }
  return out;
}

std::string policy_table_csv(const MarketSpec& market,
                             const PolicyTable& policy) {
  const InventoryGrid& grid = policy.grid;
  int d = grid.dim();
  std::string out;
  for (int k = 0; k < d; ++k) out += "n" + std::to_string(k + 1) + ",";
  for (int k = 0; k < d; ++k) {
    std::string id = market.bond(k).id;
    out += id + "_bid_quote," + id + "_bid_prob," + id + "_ask_quote," + id +
           "_ask_prob";
    out += k + 1 < d ? "," : "";
  }
  out += '\n';
  std::vector<int> u(d);
  for (int64_t s = 0; s < grid.size(); ++s) {
    grid.units(s, u);
    for (int k = 0; k < d; ++k) {
      out += std::to_string(u[k]);
      out += ',';
    }
    for (int k = 0; k < d; ++k) {
      for (int side = 0; side < 2; ++side) {
        double pr = policy.prob(s, k, side);
        if (std::isnan(pr)) {
          out += ',';
        } else {
          append_double(out, policy.quote(market, s, k, side));
          out += ',';
          append_double(out, pr);
        }
        if (!(k + 1 == d && side == 1)) out += ',';
      }
    }
    out += '\n';
  }
  return out;
}

}  // namespace rfqmm
