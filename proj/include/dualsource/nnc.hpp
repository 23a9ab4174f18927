#pragma once

#include <cstdint>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

#include "dualsource/demand.hpp"
#include "dualsource/dynamics.hpp"
#include "dualsource/rng.hpp"
#include "dualsource/simulate.hpp"
#include "dualsource/tape.hpp"

namespace dualsource::nnc {

class NetworkFormatError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// Raised when training produces a non-finite loss or gradient.
class NumericError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

enum class Activation { identity, celu };

/// What the controller sees each period.
enum class InputMode {
  /// (I, Q_r..., Q_e...)
  state,
  /// (I + Q_r[0], Q_r[1..], Q_e..., mu_t, sigma_t) for time-varying demand
  reduced_with_moments,
};

struct Layer {
  Matrix W;  ///< out x in
  Matrix b;  ///< 1 x out, or empty for a bias-free layer
  Activation act = Activation::celu;

  bool has_bias() const { return b.size() != 0; }
};

struct Network {
  std::vector<Layer> layers;
  double alpha = 1.0;           ///< CELU parameter
  /// Learnable starting net inventory (pre-rounding). It starts one unit up
  /// because the straight-through gradient of [y]^+ vanishes at y = 0.
  double init_inventory = 1.0;
  double scale = 1.0;           ///< inputs are divided by and outputs multiplied by this
  InputMode inputs = InputMode::state;

  /// Fully connected stack: CELU on hidden layers, identity on the output.
  /// Weights are zero until init_weights().
  static Network make(std::size_t n_inputs, const std::vector<std::size_t>& hidden,
                      std::size_t n_outputs, bool output_bias = true, double alpha = 1.0);

  /// 128/64/32/16/8/4/2 CELU stack on the full state with two outputs.
  static Network dual_sourcing_default(const CostParams& p);
  /// One CELU unit with bias feeding a bias-free linear output: the
  /// base-stock-shaped controller for a zero-lead-time single supplier.
  static Network single_sourcing_minimal();
  /// Three hidden layers of 8 CELU units on the reduced state plus moments.
  static Network empirical_default(const CostParams& p);

  std::size_t n_inputs() const;
  std::size_t n_outputs() const;
  std::size_t parameter_count() const;
  void validate() const;

  friend bool operator==(const Network& a, const Network& b);
};

/// Input width required by `mode` for the given lead times.
std::size_t input_width(const CostParams& p, InputMode mode);

double celu(double x, double alpha);
/// Forward value of fractional decoupling: floor of the positive part.
std::int64_t fractional_decouple(double y);

/// U(-1/sqrt(fan_in), 1/sqrt(fan_in)) on every weight and bias.
void init_weights(Network& net, Rng& rng);

std::string save(const Network& net);
Network load(const std::string& bytes);

struct TrainingConfig {
  std::size_t T = 100;
  std::size_t M = 512;
  double gamma = 1.0;
  double eta = 3e-3;
  double eta_init_inv = 0.1;
  double alpha_rms = 0.99;
  double eps_rms = 1e-8;
  std::size_t max_epochs = 5000;
  std::uint64_t seed = 1;
  /// Two-stage schedule: from this epoch on (0 = never) both learning rates
  /// are multiplied by decay_factor.
  std::size_t decay_epoch = 0;
  double decay_factor = 0.1;
  bool learn_init_inventory = true;

  void validate() const;
};

/// Per-parameter moving averages of squared gradients, all starting at 0.
struct OptimizerState {
  std::vector<Matrix> vW;
  std::vector<Matrix> vb;
  double v_init = 0.0;

  static OptimizerState for_network(const Network& net);
};

/// v <- a v + (1 - a) g^2; returns p - eta g / (sqrt(v) + eps) with the new v.
double rmsprop_step(double p, double g, double& v, double eta, double alpha_rms, double eps_rms);

/// Gradients with the same layout as the network parameters.
struct NetworkGradient {
  std::vector<Matrix> dW;
  std::vector<Matrix> db;
  double d_init = 0.0;

  static NetworkGradient zeros_like(const Network& net);
};

/// Demand moments fed to InputMode::reduced_with_moments controllers.
struct Moments {
  std::vector<double> mu;
  std::vector<double> sigma;
};

Moments moments_of(const DemandModel& model);

/// Loss (1/T) sum_t gamma^t mean_m cost_t over the M x T demand matrix,
/// recorded on a tape. With `grad` set, backpropagates into it (adding).
/// `surrogate` replaces the integer orders by their [y]^+ surrogates.
double loss_and_gradient(const Network& net, const CostParams& p, const Matrix& demand,
                         const Moments* moments, double gamma, bool surrogate,
                         NetworkGradient* grad);

/// Applies one RMSprop update to all parameters.
void apply_update(Network& net, const NetworkGradient& g, OptimizerState& st, double eta,
                  double eta_init_inv, const TrainingConfig& cfg);

struct EpochRecord {
  std::size_t epoch = 0;
  double loss = 0.0;
  double best = 0.0;
};

struct TrainResult {
  double best_loss = 0.0;
  std::size_t best_epoch = 0;
  Network best_net;
  Network final_net;
  std::vector<EpochRecord> history;
};

using EpochCallback = std::function<void(const EpochRecord&)>;

/// Backpropagation-through-time training: each epoch simulates M fresh
/// trajectories of T periods on tape, backpropagates the full loss and takes
/// one RMSprop step. Returns the best parameters seen.
TrainResult train(const CostParams& p, const DemandModel& model, Network net,
                  const TrainingConfig& cfg, const EpochCallback& on_epoch = {});

/// As train(), but every epoch reuses the same demand matrix.
TrainResult train_fixed(const CostParams& p, const Matrix& demand, const Moments* moments,
                        Network net, const TrainingConfig& cfg,
                        const EpochCallback& on_epoch = {});

struct EmpiricalTrainingConfig {
  TrainingConfig one_shot;   ///< phase 1 on a single realization (M is ignored)
  TrainingConfig fine_tune;  ///< phase 2 on fresh minibatches of fine_tune.M
};

/// Two-phase training for time-varying demand: one-shot on one realization,
/// then fine-tuning on sampled minibatches. T is the process horizon.
TrainResult train_empirical(const TruncatedNormalProcess& process, const CostParams& p,
                            Network net, const EmpiricalTrainingConfig& cfg,
                            const EpochCallback& on_epoch = {});

/// Off-tape forward pass on a batch of raw (unscaled) feature rows; returns
/// the pre-rounding outputs times scale.
Matrix forward(const Network& net, const Matrix& features);

/// Feature row for one state in period t.
Matrix features(const Network& net, const InventoryState& s, std::size_t t,
                const Moments* moments);

/// Integer action for one state (q_e = 0 for single-output networks).
Action act(const Network& net, const InventoryState& s, std::size_t t, const Moments* moments);

/// Starting net inventory used when the controller is deployed.
double starting_inventory(const Network& net);

/// Per-realization mean cost per period, all realizations stepped as one
/// batch; periods before burn_in are not averaged.
std::vector<double> evaluate_paths(const Network& net, const CostParams& p,
                                   const DemandPaths& paths, const Moments* moments,
                                   std::size_t burn_in = 0);

}  // namespace dualsource::nnc
