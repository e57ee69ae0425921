/// @file neural.hpp
/// @brief Minimal feedforward-network engine: forward pass, exact
///        backpropagation, plain-SGD and Adam updates, supervised
///        pre-training, and bit-exact JSON checkpoints.
#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "rfqmm/rng.hpp"

namespace rfqmm {

enum class OutputHead { Affine, Logistic };

/// Scratch buffers for forward/backward passes; reusable across calls to
/// avoid per-call allocation in hot loops.
struct NetWorkspace {
  std::vector<double> act;    // activations, all layers concatenated
  std::vector<double> delta;  // backpropagated sensitivities
  std::vector<int64_t> act_offsets;
};

/// Fully connected net with rectifier hidden layers and a scalar output,
/// affine or logistic headed. Parameters live in one flat array (per layer:
/// row-major weights, then biases) so optimizers and checkpoints can treat
/// them uniformly.
class FeedForwardNet {
 public:
  /// layer_sizes = {input, hidden..., 1}; needs at least {in, 1} and a
  /// final size of exactly 1.
  FeedForwardNet(std::vector<int> layer_sizes, OutputHead head);

  /// Weights uniform on +-sqrt(6/(fan_in+fan_out)), biases zero.
  void init_glorot(Rng& rng);

  int input_dim() const { return layer_sizes_.front(); }
  int64_t param_count() const { return static_cast<int64_t>(params_.size()); }
  const std::vector<int>& layer_sizes() const { return layer_sizes_; }
  OutputHead head() const { return head_; }

  std::span<double> params() { return params_; }
  std::span<const double> params() const { return params_; }

  double forward(std::span<const double> input, NetWorkspace& ws) const;
  double forward(std::span<const double> input) const;

  /// Accumulates coeff * (gradient of the output w.r.t. every parameter)
  /// into acc (size param_count). Returns the forward value. The rectifier
  /// subgradient at exactly zero is zero.
  double grad_params(std::span<const double> input, double coeff,
                     std::span<double> acc, NetWorkspace& ws) const;

  /// Multiplies the output-layer weights and bias by c. With an affine head
  /// this scales the represented function exactly; used after a
  /// standardized-target fit.
  void scale_output_layer(double c);

  /// Bit-exact round trip (shortest round-trip decimal representation).
  std::string to_json() const;
  static FeedForwardNet from_json(const std::string& text);

 private:
  std::vector<int> layer_sizes_;
  OutputHead head_;
  std::vector<double> params_;
  // offsets_[l] = start of layer l's block (weights then biases)
  std::vector<int64_t> offsets_;
};

struct AdamConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// First-order parameter updates in ascent form: step() moves params by
/// +rate * direction (PlainSGD) or the bias-corrected Adam rule applied to
/// the given ascent direction.
class Optimizer {
 public:
  enum class Kind { PlainSGD, Adam };

  Optimizer(Kind kind, double rate, int64_t n_params, AdamConfig adam = {});

  Kind kind() const { return kind_; }
  double rate() const { return rate_; }
  void set_rate(double rate);

  void step(std::span<double> params, std::span<const double> direction);

 private:
  Kind kind_;
  double rate_;
  AdamConfig adam_;
  int64_t t_ = 0;
  std::vector<double> m_, v_;
};

struct PretrainStage {
  int64_t iters = 10'000;
  double rate = 1e-3;
};

struct PretrainConfig {
  std::vector<PretrainStage> schedule = {{10'000, 1e-3}};
  int batch_size = 64;  ///< 0 means full batch
  int restarts = 1;     ///< keep the best of several seeded re-inits
  /// Fit target/std(target) and rescale the output layer afterwards; only
  /// valid for affine heads. Large-magnitude targets are unreachable for
  /// Adam from a fresh Glorot init without this.
  bool standardize_target = false;
  double threshold_rel = 1e-4;  ///< pass if MSE <= rel * var(target) ...
  double threshold_abs = 1e-6;  ///< ... or <= abs (constant targets)
  double holdout_fraction = 0.1;
};

struct PretrainResult {
  double held_out_mse = 0.0;
  double train_mse = 0.0;
  double target_variance = 0.0;
  bool reached = false;
  std::string warning;  // set when the threshold was not reached
};

/// Adam fit of net to (inputs, targets) pairs by mean squared error;
/// inputs is row-major n x input_dim. A random holdout fraction is held
/// back for the reported error. Restarts re-init from fresh Glorot draws
/// and keep the best held-out fit. Never throws on a poor fit: the result
/// carries a warning instead (threshold semantics in PretrainConfig).
PretrainResult pretrain_supervised(FeedForwardNet& net,
                                   std::span<const double> inputs,
                                   std::span<const double> targets,
                                   const PretrainConfig& config, Rng& rng);

/// Max relative gap between backprop and central finite differences
/// (step 1e-5) over all parameters at the given input, with |output|
/// providing the denominator floor. Used by the hygiene suites.
double gradient_check(const FeedForwardNet& net, std::span<const double> input,
                      double fd_step = 1e-5);

}  // namespace rfqmm
