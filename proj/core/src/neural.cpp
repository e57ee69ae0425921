#include "rfqmm/neural.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

namespace rfqmm {

using nlohmann::json;

FeedForwardNet::FeedForwardNet(std::vector<int> layer_sizes, OutputHead head)
    : layer_sizes_(std::move(layer_sizes)), head_(head) {
  if (layer_sizes_.size() < 2) {
    throw std::invalid_argument("FeedForwardNet: need at least input and output layers");
  }
  for (int n : layer_sizes_) {
    if (n <= 0) throw std::invalid_argument("FeedForwardNet: layer size <= 0");
  }
  if (layer_sizes_.back() != 1) {
    throw std::invalid_argument("FeedForwardNet: output layer size must be 1");
  }
  int64_t total = 0;
  offsets_.reserve(layer_sizes_.size() - 1);
  for (size_t l = 0; l + 1 < layer_sizes_.size(); ++l) {
    offsets_.push_back(total);
    total += static_cast<int64_t>(layer_sizes_[l + 1]) * layer_sizes_[l] +
             layer_sizes_[l + 1];
  }
  params_.assign(total, 0.0);
}

void FeedForwardNet::init_glorot(Rng& rng) {
  for (size_t l = 0; l + 1 < layer_sizes_.size(); ++l) {
    int in = layer_sizes_[l], out = layer_sizes_[l + 1];
    double limit = std::sqrt(6.0 / (in + out));
    double* w = params_.data() + offsets_[l];
    for (int64_t k = 0; k < static_cast<int64_t>(out) * in; ++k) {
      w[k] = rng.uniform(-limit, limit);
    }
    for (int j = 0; j < out; ++j) w[static_cast<int64_t>(out) * in + j] = 0.0;
  }
}

double FeedForwardNet::forward(std::span<const double> input,
                               NetWorkspace& ws) const {
  if (static_cast<int>(input.size()) != layer_sizes_.front()) {
    throw std::invalid_argument("forward: input dimension mismatch");
  }
  int64_t total_act = std::accumulate(layer_sizes_.begin(), layer_sizes_.end(),
                                      int64_t{0});
  ws.act.resize(total_act);
  std::copy(input.begin(), input.end(), ws.act.begin());

  int64_t prev_off = 0;
  size_t layers = layer_sizes_.size() - 1;
  for (size_t l = 0; l < layers; ++l) {
    int in = layer_sizes_[l], out = layer_sizes_[l + 1];
    const double* a_prev = ws.act.data() + prev_off;
    double* a_cur = ws.act.data() + prev_off + in;
    const double* w = params_.data() + offsets_[l];
    const double* b = w + static_cast<int64_t>(out) * in;
    for (int j = 0; j < out; ++j) {
      double z = b[j];
      const double* wj = w + static_cast<int64_t>(j) * in;
      for (int i = 0; i < in; ++i) z += wj[i] * a_prev[i];
      if (l + 1 < layers) {
        a_cur[j] = z > 0.0 ? z : 0.0;
      } else if (head_ == OutputHead::Affine) {
        a_cur[j] = z;
      } else {
        a_cur[j] = 1.0 / (1.0 + std::exp(-z));
      }
    }
    prev_off += in;
  }
  return ws.act[total_act - 1];
}

double FeedForwardNet::forward(std::span<const double> input) const {
  NetWorkspace ws;
  return forward(input, ws);
}

double FeedForwardNet::grad_params(std::span<const double> input, double coeff,
                                   std::span<double> acc,
                                   NetWorkspace& ws) const {
  if (static_cast<int64_t>(acc.size()) != param_count()) {
    throw std::invalid_argument("grad_params: accumulator size mismatch");
  }
  double y = forward(input, ws);

  int max_width = *std::max_element(layer_sizes_.begin(), layer_sizes_.end());
  ws.delta.resize(2 * static_cast<size_t>(max_width));
  double* cur = ws.delta.data();
  double* prev = ws.delta.data() + max_width;

  cur[0] = head_ == OutputHead::Affine ? coeff : coeff * y * (1.0 - y);

  size_t layers = layer_sizes_.size() - 1;
  // activation offsets per layer
  std::vector<int64_t>& aoff = ws.act_offsets;
  aoff.resize(layers + 1);
  aoff[0] = 0;
  for (size_t l = 0; l < layers; ++l) aoff[l + 1] = aoff[l] + layer_sizes_[l];

  for (size_t l = layers; l-- > 0;) {
    int in = layer_sizes_[l], out = layer_sizes_[l + 1];
    const double* a_prev = ws.act.data() + aoff[l];
    double* w = acc.data() + offsets_[l];
    double* b = w + static_cast<int64_t>(out) * in;
    const double* wnet = params_.data() + offsets_[l];
    for (int i = 0; i < in; ++i) prev[i] = 0.0;
    for (int j = 0; j < out; ++j) {
      double dj = cur[j];
      if (dj != 0.0) {
        double* wj = w + static_cast<int64_t>(j) * in;
        const double* wnj = wnet + static_cast<int64_t>(j) * in;
        for (int i = 0; i < in; ++i) {
          wj[i] += dj * a_prev[i];
          prev[i] += dj * wnj[i];
        }
        b[j] += dj;
      }
    }
    if (l > 0) {
      // rectifier mask; subgradient 0 at exactly 0
      for (int i = 0; i < in; ++i) {
        if (a_prev[i] <= 0.0) prev[i] = 0.0;
      }
    }
    std::swap(cur, prev);
  }
  return y;
}

void FeedForwardNet::scale_output_layer(double c) {
  size_t last = layer_sizes_.size() - 2;
  int in = layer_sizes_[last], out = layer_sizes_[last + 1];
  double* w = params_.data() + offsets_[last];
  for (int64_t k = 0; k < static_cast<int64_t>(out) * in + out; ++k) w[k] *= c;
}

std::string FeedForwardNet::to_json() const {
  json j;
  j["layer_sizes"] = layer_sizes_;
  j["head"] = head_ == OutputHead::Affine ? "affine" : "logistic";
  j["params"] = params_;
  return j.dump();
}

FeedForwardNet FeedForwardNet::from_json(const std::string& text) {
  json j = json::parse(text);
  std::vector<int> sizes = j.at("layer_sizes").get<std::vector<int>>();
  std::string head = j.at("head").get<std::string>();
  if (head != "affine" && head != "logistic") {
    throw std::invalid_argument("FeedForwardNet::from_json: unknown head");
  }
  FeedForwardNet net(std::move(sizes),
                     head == "affine" ? OutputHead::Affine : OutputHead::Logistic);
  std::vector<double> params = j.at("params").get<std::vector<double>>();
  if (static_cast<int64_t>(params.size()) != net.param_count()) {
    throw std::invalid_argument("FeedForwardNet::from_json: parameter count mismatch");
  }
  std::copy(params.begin(), params.end(), net.params().begin());
  return net;
}

Optimizer::Optimizer(Kind kind, double rate, int64_t n_params, AdamConfig adam)
    : kind_(kind), rate_(rate), adam_(adam) {
  if (!(rate > 0.0)) throw std::invalid_argument("Optimizer: rate <= 0");
  if (!(adam.beta1 > 0.0 && adam.beta1 < 1.0 && adam.beta2 > 0.0 &&
        adam.beta2 < 1.0)) {
    throw std::invalid_argument("Optimizer: Adam betas outside (0,1)");
  }
  if (kind == Kind::Adam) {
    m_.assign(n_params, 0.0);
    v_.assign(n_params, 0.0);
  }
}

void Optimizer::set_rate(double rate) {
  if (!(rate > 0.0)) throw std::invalid_argument("Optimizer: rate <= 0");
  rate_ = rate;
}

void Optimizer::step(std::span<double> params,
                     std::span<const double> direction) {
  if (params.size() != direction.size()) {
    throw std::invalid_argument("Optimizer::step: size mismatch");
  }
  if (kind_ == Kind::PlainSGD) {
    for (size_t i = 0; i < params.size(); ++i) {
      params[i] += rate_ * direction[i];
    }
    return;
  }
  if (params.size() != m_.size()) {
    throw std::invalid_argument("Optimizer::step: state size mismatch");
  }
  ++t_;
  double c1 = 1.0 - std::pow(adam_.beta1, static_cast<double>(t_));
  double c2 = 1.0 - std::pow(adam_.beta2, static_cast<double>(t_));
  for (size_t i = 0; i < params.size(); ++i) {
    double g = direction[i];
    m_[i] = adam_.beta1 * m_[i] + (1.0 - adam_.beta1) * g;
    v_[i] = adam_.beta2 * v_[i] + (1.0 - adam_.beta2) * g * g;
    params[i] += rate_ * (m_[i] / c1) / (std::sqrt(v_[i] / c2) + adam_.eps);
  }
}

namespace {

double mse_over(const FeedForwardNet& net, std::span<const double> inputs,
                std::span<const double> targets,
                const std::vector<int64_t>& idx, NetWorkspace& ws) {
  if (idx.empty()) return 0.0;
  int dim = net.input_dim();
  double acc = 0.0;
  for (int64_t i : idx) {
    double y = net.forward(inputs.subspan(static_cast<size_t>(i) * dim, dim), ws);
    double e = y - targets[i];
    acc += e * e;
  }
  return acc / static_cast<double>(idx.size());
}

}  // namespace

PretrainResult pretrain_supervised(FeedForwardNet& net,
                                   std::span<const double> inputs,
                                   std::span<const double> targets,
                                   const PretrainConfig& config, Rng& rng) {
  int dim = net.input_dim();
  int64_t n = static_cast<int64_t>(targets.size());
  if (n == 0) throw std::invalid_argument("pretrain_supervised: no samples");
  if (inputs.size() != static_cast<size_t>(n) * dim) {
    throw std::invalid_argument("pretrain_supervised: inputs/targets size mismatch");
  }
  if (config.standardize_target && net.head() != OutputHead::Affine) {
    throw std::invalid_argument(
        "pretrain_supervised: standardize_target needs an affine head");
  }
  if (config.schedule.empty() || config.restarts < 1) {
    throw std::invalid_argument("pretrain_supervised: empty schedule or restarts < 1");
  }

  double mean = 0.0;
  for (int64_t i = 0; i < n; ++i) mean += targets[i];
  mean /= static_cast<double>(n);
  double var = 0.0;
  for (int64_t i = 0; i < n; ++i) {
    var += (targets[i] - mean) * (targets[i] - mean);
  }
  var /= static_cast<double>(n);

  double scale = 1.0;
  std::vector<double> fit_targets(targets.begin(), targets.end());
  if (config.standardize_target) {
    scale = std::sqrt(var);
    if (scale <= 0.0) scale = 1.0;
    for (double& t : fit_targets) t /= scale;
  }

  // one split shared by all restarts
  std::vector<int64_t> perm(n);
  std::iota(perm.begin(), perm.end(), int64_t{0});
  uint64_t seed0 = rng.next();
  Rng split_rng = Rng::stream(seed0, "pretrain-split");
  split_rng.shuffle(perm);
  auto n_hold = static_cast<int64_t>(std::llround(config.holdout_fraction *
                                                  static_cast<double>(n)));
  n_hold = std::clamp<int64_t>(n_hold, 0, n - 1);
  std::vector<int64_t> hold(perm.begin(), perm.begin() + n_hold);
  std::vector<int64_t> train(perm.begin() + n_hold, perm.end());
  if (hold.empty()) hold = train;

  NetWorkspace ws;
  std::vector<double> grad(net.param_count());
  std::vector<double> best_params;
  double best_mse = std::numeric_limits<double>::infinity();

  int64_t n_train = static_cast<int64_t>(train.size());
  for (int attempt = 0; attempt < config.restarts; ++attempt) {
    Rng ar = Rng::stream(seed0, "pretrain-restart", static_cast<uint64_t>(attempt));
    net.init_glorot(ar);
    Optimizer opt(Optimizer::Kind::Adam, config.schedule.front().rate,
                  net.param_count());
    for (const PretrainStage& stage : config.schedule) {
      opt.set_rate(stage.rate);
      for (int64_t it = 0; it < stage.iters; ++it) {
        std::fill(grad.begin(), grad.end(), 0.0);
        int64_t batch = config.batch_size > 0
                            ? std::min<int64_t>(config.batch_size, n_train)
                            : n_train;
        for (int64_t k = 0; k < batch; ++k) {
          int64_t i = config.batch_size > 0
                          ? train[ar.below(static_cast<uint64_t>(n_train))]
                          : train[k];
          auto x = inputs.subspan(static_cast<size_t>(i) * dim, dim);
          double y = net.forward(x, ws);
          net.grad_params(x, (fit_targets[i] - y) / static_cast<double>(batch),
                          grad, ws);
        }
        opt.step(net.params(), grad);
      }
    }
    // held-out error in standardized units; comparable across restarts
    double mse = mse_over(net, inputs, fit_targets, hold, ws);
    if (mse < best_mse) {
      best_mse = mse;
      best_params.assign(net.params().begin(), net.params().end());
    }
  }
  std::copy(best_params.begin(), best_params.end(), net.params().begin());
  if (config.standardize_target) net.scale_output_layer(scale);

  PretrainResult res;
  res.target_variance = var;
  std::vector<double> orig_targets(targets.begin(), targets.end());
  res.held_out_mse = best_mse * scale * scale;
  res.train_mse = mse_over(net, inputs, orig_targets, train, ws);
  double threshold = std::max(config.threshold_rel * var, config.threshold_abs);
  res.reached = res.held_out_mse <= threshold;
  if (!res.reached) {
    res.warning = "pretrain_supervised: held-out MSE " +
                  std::to_string(res.held_out_mse) + " above threshold " +
                  std::to_string(threshold);
  }
  return res;
}

double gradient_check(const FeedForwardNet& net, std::span<const double> input,
                      double fd_step) {
  FeedForwardNet probe = net;
  NetWorkspace ws;
  std::vector<double> grad(net.param_count(), 0.0);
  probe.grad_params(input, 1.0, grad, ws);

  double gmax = 0.0;
  for (double g : grad) gmax = std::max(gmax, std::abs(g));
  double floor = 1e-6 * (1.0 + gmax);

  double worst = 0.0;
  std::span<double> p = probe.params();
  for (int64_t i = 0; i < probe.param_count(); ++i) {
    double saved = p[i];
    p[i] = saved + fd_step;
    double up = probe.forward(input, ws);
    p[i] = saved - fd_step;
    double dn = probe.forward(input, ws);
    p[i] = saved;
    double fd = (up - dn) / (2.0 * fd_step);
    double rel = std::abs(fd - grad[i]) /
                 std::max({std::abs(fd), std::abs(grad[i]), floor});
    worst = std::max(worst, rel);
  }
  return worst;
}

}  // namespace rfqmm
