#include "rfqmm/simulator.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

#include "rfqmm/csv.hpp"

namespace rfqmm {

void NoiseSpec::validate() const {
  if (!(amplitude >= 0.0)) throw std::invalid_argument("NoiseSpec: amplitude < 0");
  if (!(floor_nu > 0.0 && floor_nu < 0.5)) {
    throw std::invalid_argument("NoiseSpec: floor outside (0, 0.5)");
  }
}

PerturbedQuote perturbed_policy(const SuJohnsonCurve& curve, double delta,
                                double eps, double nu) {
  if (!std::isfinite(delta)) {
    return {0.0, std::numeric_limits<double>::quiet_NaN()};
  }
  double p = f_eval(curve, delta);
  double p_eps = std::clamp(p + eps, nu, 1.0 - nu);
  return {p_eps, f_inverse(curve, p_eps)};
}

std::vector<int16_t> RolloutBatch::next_state(int64_t i) const {
  std::vector<int16_t> out(state(i).begin(), state(i).end());
  if (fill[i]) {
    out[bond[i]] = static_cast<int16_t>(out[bond[i]] +
                                        (side[i] == kBid ? 1 : -1));
  }
  return out;
}

bool RolloutBatch::blocked(int64_t i) const {
  int16_t n = units[i * dim + bond[i]];
  return side[i] == kBid ? n >= limits[bond[i]] : n <= -limits[bond[i]];
}

void RolloutBatch::append(const RolloutBatch& other) {
  if (other.dim != dim || other.limits != limits) {
    throw std::invalid_argument("RolloutBatch::append: incompatible batches");
  }
  units.insert(units.end(), other.units.begin(), other.units.end());
  bond.insert(bond.end(), other.bond.begin(), other.bond.end());
  side.insert(side.end(), other.side.begin(), other.side.end());
  prob.insert(prob.end(), other.prob.begin(), other.prob.end());
  quote.insert(quote.end(), other.quote.begin(), other.quote.end());
  prob_eps.insert(prob_eps.end(), other.prob_eps.begin(), other.prob_eps.end());
  quote_eps.insert(quote_eps.end(), other.quote_eps.begin(),
                   other.quote_eps.end());
  fill.insert(fill.end(), other.fill.begin(), other.fill.end());
}

RolloutBatch rollout(const MarketSpec& market, const QuotePolicy& policy,
                     const InventoryState& start, int64_t length,
                     const NoiseSpec& noise, Rng& rng) {
  noise.validate();
  int d = market.dim();
  if (static_cast<int>(start.units.size()) != d ||
      static_cast<int>(start.limit.size()) != d) {
    throw std::invalid_argument("rollout: start state dimension mismatch");
  }
  if (!start.in_bounds()) {
    throw std::invalid_argument("rollout: start state outside active limits");
  }
  if (length < 0) throw std::invalid_argument("rollout: negative length");

  std::vector<double> cumulative = rfq_event_distribution(market);
  std::partial_sum(cumulative.begin(), cumulative.end(), cumulative.begin());

  RolloutBatch batch;
  batch.dim = d;
  batch.limits = start.limit;
  batch.units.reserve(length * d);
  batch.bond.reserve(length);
  batch.side.reserve(length);
  batch.prob.reserve(length);
  batch.quote.reserve(length);
  batch.prob_eps.reserve(length);
  batch.quote_eps.reserve(length);
  batch.fill.reserve(length);

  InventoryState state = start;
  std::vector<int16_t> u16(d);
  constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
  for (int64_t k = 0; k < length; ++k) {
    // exactly three draws per event, in this order
    double u_event = rng.uniform01();
    double eps = rng.uniform(-noise.amplitude, noise.amplitude);
    double u_fill = rng.uniform01();

    int event = 0;
    while (event + 1 < static_cast<int>(cumulative.size()) &&
           u_event >= cumulative[event]) {
      ++event;
    }
    int bond = event / 2, side = event % 2;

    for (int i = 0; i < d; ++i) u16[i] = static_cast<int16_t>(state.units[i]);
    batch.units.insert(batch.units.end(), u16.begin(), u16.end());
    batch.bond.push_back(bond);
    batch.side.push_back(static_cast<int8_t>(side));

    bool traded = false;
    if (!state.admissible(bond, side)) {
      batch.prob.push_back(0.0);
      batch.quote.push_back(kNaN);
      batch.prob_eps.push_back(0.0);
      batch.quote_eps.push_back(kNaN);
    } else {
      double p = policy.prob(u16, state.limit, bond, side);
      if (!(p >= 0.0) || p >= 1.0) {
        throw std::runtime_error("rollout: policy probability outside [0, 1)");
      }
      if (p == 0.0) {
        // side quoted away; exploration does not resurrect it
        batch.prob.push_back(0.0);
        batch.quote.push_back(kNaN);
        batch.prob_eps.push_back(0.0);
        batch.quote_eps.push_back(kNaN);
      } else {
        const SuJohnsonCurve& curve = market.bond(bond).curve;
        double delta = f_inverse(curve, p);
        double p_eps = std::clamp(p + eps, noise.floor_nu, 1.0 - noise.floor_nu);
        batch.prob.push_back(p);
        batch.quote.push_back(delta);
        batch.prob_eps.push_back(p_eps);
        batch.quote_eps.push_back(f_inverse(curve, p_eps));
        traded = u_fill < p_eps;
      }
    }
    batch.fill.push_back(traded ? 1 : 0);
    if (traded) state.apply_fill(bond, side);
  }
  return batch;
}

double estimate_r_mean(const MarketSpec& market, const RolloutBatch& records) {
  int64_t n = records.size();
  if (n == 0) throw std::invalid_argument("estimate_r_mean: empty batch");
  double lam = market.total_intensity();
  double acc = 0.0;
  for (int64_t i = 0; i < n; ++i) {
    double expected = 0.0;
    if (records.prob[i] > 0.0) {
      expected = records.prob[i] * market.bond(records.bond[i]).trade_size *
                 records.quote[i];
    }
    acc += expected - penalty_eval(market, records.state(i)) / lam;
  }
  return acc / static_cast<double>(n);
}

void shuffle(RolloutBatch& records, Rng& rng) {
  int64_t n = records.size();
  std::vector<int64_t> perm(n);
  std::iota(perm.begin(), perm.end(), int64_t{0});
  rng.shuffle(perm);

  RolloutBatch out;
  out.dim = records.dim;
  out.limits = records.limits;
  out.units.resize(records.units.size());
  out.bond.resize(n);
  out.side.resize(n);
  out.prob.resize(n);
  out.quote.resize(n);
  out.prob_eps.resize(n);
  out.quote_eps.resize(n);
  out.fill.resize(n);
  for (int64_t i = 0; i < n; ++i) {
    int64_t j = perm[i];
    std::copy_n(records.units.begin() + j * records.dim, records.dim,
                out.units.begin() + i * records.dim);
    out.bond[i] = records.bond[j];
    out.side[i] = records.side[j];
    out.prob[i] = records.prob[j];
    out.quote[i] = records.quote[j];
    out.prob_eps[i] = records.prob_eps[j];
    out.quote_eps[i] = records.quote_eps[j];
    out.fill[i] = records.fill[j];
  }
  records = std::move(out);
}

std::string rollout_csv(const RolloutBatch& records) {
  std::string out = "event";
  for (int i = 0; i < records.dim; ++i) {
    out += ",n" + std::to_string(i + 1);
  }
  out += ",bond,side,prob,quote,prob_eps,quote_eps,fill\n";
  for (int64_t k = 0; k < records.size(); ++k) {
    out += std::to_string(k);
    for (int i = 0; i < records.dim; ++i) {
      out += ',' + std::to_string(records.units[k * records.dim + i]);
    }
    out += ',' + std::to_string(records.bond[k]);
    out += ',' + std::to_string(static_cast<int>(records.side[k]));
    out += ',';
    append_double(out, records.prob[k]);
    out += ',';
    append_double(out, records.quote[k]);
    out += ',';
    append_double(out, records.prob_eps[k]);
    out += ',';
    append_double(out, records.quote_eps[k]);
    out += ',';
    out += records.fill[k] ? '1' : '0';
    out += '\n';
  }
  return out;
}

}  // namespace rfqmm
