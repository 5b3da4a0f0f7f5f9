#pragma once

// Offline imitation: expert data, linear / MLP imitators with exact
// gradients, and the minibatch training loop with checkpoint evaluation.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "gva/linear_control.hpp"
#include "gva/numerics.hpp"
#include "gva/optim.hpp"
#include "gva/stabilizers.hpp"

namespace gva {

struct Trajectory {
  std::vector<Vector> states;   // x_0 .. x_{n-1}
  std::vector<Vector> actions;  // u_0 .. u_{n-1}, same length as states
};

struct Dataset {
  std::size_t state_dim = 0;
  std::size_t action_dim = 0;
  std::vector<Trajectory> trajectories;
  std::vector<std::size_t> train;
  std::vector<std::size_t> val;

  /// Checks dimensions and that train/val partition the trajectories.
  void validate() const;
  std::size_t pair_count(const std::vector<std::size_t>& which) const;

  /// One row per (traj_id, h, x..., u...); the split is stored in a `split` column.
  void write_csv(const std::filesystem::path& path) const;
  static Dataset read_csv(const std::filesystem::path& path);
};

/// Rolls out the expert N times with the system's initial-state sampler and
/// process noise. Recorded labels are K x plus optional N(0, label_noise^2)
/// noise; the executed action is always K x. Trajectories end at cliff
/// termination. The validation set holds max(1, round(val_fraction N)) trajectories.
Dataset collect_expert_data(const LinearSystem& system, const LinearPolicy& expert, std::size_t n,
                            Rng& rng, double val_fraction = 0.1, double label_noise = 0.0);

enum class Activation { kRelu, kTanh };

std::string to_string(Activation a);
Activation activation_from_string(const std::string& s);

/// Layer sizes and flags of a feed-forward policy.
///
/// Parameters are flattened layer by layer: the weight matrix (out x in,
/// row-major) followed by the bias vector when `bias` is set. With no hidden
/// layers and no bias the parameter vector is K in row-major order.
struct MlpArch {
  std::size_t state_dim = 0;
  std::size_t action_dim = 0;
  std::vector<std::size_t> hidden;
  Activation activation = Activation::kRelu;
  bool bias = true;
  bool prev_action = false;

  std::size_t input_dim() const { return state_dim + (prev_action ? action_dim : 0); }
  std::vector<std::size_t> layer_dims() const;
  std::size_t param_count() const;
  void validate() const;
};

struct MlpPolicy {
  MlpArch arch;
  ParamVector params;

  /// Weights uniform in +-1/sqrt(fan_in), biases zero.
  static MlpPolicy init(const MlpArch& arch, Rng& rng);
  static MlpPolicy zeros(const MlpArch& arch);
  /// Bias-free linear policy holding K.
  static MlpPolicy linear(const Matrix& K);

  Vector forward(std::span<const double> x, std::span<const double> prev_u = {}) const;
  PolicyFn as_policy() const;
  /// Reads K back from a bias-free single-layer policy.
  Matrix linear_gain() const;
};

Vector mlp_forward(const MlpArch& arch, std::span<const double> params, std::span<const double> x,
                   std::span<const double> prev_u = {});

struct Sample {
  Vector x;
  Vector prev_u;  // empty unless the policy is prev-action augmented
  Vector u;
};

struct LossGrad {
  double loss = 0.0;  // batch mean of 1/2 |f(x) - u|^2
  ParamVector grad;
};

LossGrad mlp_loss_grad(const MlpArch& arch, std::span<const double> params,
                       const std::vector<Sample>& batch);
ParamVector mlp_grad(const MlpArch& arch, std::span<const double> params,
                     const std::vector<Sample>& batch);
double mlp_loss(const MlpArch& arch, std::span<const double> params, const std::vector<Sample>& batch);

/// (x, prev u, u) triples of the chosen trajectories in trajectory order.
std::vector<Sample> dataset_samples(const Dataset& data, const std::vector<std::size_t>& which,
                                    bool prev_action);

struct OptimizerSpec {
  enum class Kind { kSgd, kAdamW };
  Kind kind = Kind::kSgd;
  double beta1 = 0.0;  // SGD momentum, or Adam beta1
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.0;

  Optimizer make() const;
};

struct TrainConfig {
  std::size_t epochs = 20;
  std::size_t batch_size = 32;
  OptimizerSpec optimizer;
  LrSchedule schedule = LrSchedule::constant(0.3);
  EmaConfig ema = EmaConfig::annealed(1.0, 1e-4);
  std::size_t eval_every = 100;
  std::size_t eval_seeds = 20;
  std::uint64_t eval_seed = 0;
  bool evaluate = true;
  /// Keep raw and EMA parameter snapshots in the records.
  bool retain_params = false;

  void validate() const;
};

struct EvalResult {
  std::vector<double> rewards;  // per seed, NaN for diverged seeds
  std::vector<bool> diverged;
  double mean = 0.0;            // over non-diverged seeds
  std::size_t diverged_count = 0;
};

/// Seed k starts from the system's sampler driven by Rng(base).child(k), so
/// every checkpoint of a run sees the same initial states and noise.
EvalResult eval_checkpoint(const LinearSystem& system, const PolicyFn& policy, std::size_t seeds,
                           std::uint64_t base_seed);

struct CheckpointRecord {
  std::size_t step = 0;
  double train_loss = 0.0;  // mean minibatch loss since the previous record
  double val_loss = 0.0;
  double ema_val_loss = 0.0;
  std::optional<EvalResult> raw_eval;
  std::optional<EvalResult> ema_eval;
  std::optional<ParamVector> raw_params;
  std::optional<ParamVector> ema_params;
};

struct TrainResult {
  std::vector<CheckpointRecord> records;
  ParamVector final_params;
  ParamVector final_ema;
  std::size_t total_steps = 0;
};

/// Minibatch training over all (state, action) pairs of the training split,
/// reshuffled every epoch from rng.child(epoch). The EMA shadow is updated
/// after every optimizer step. Records are taken at step 0, every
/// `eval_every` steps and at the final step.
TrainResult train_bc(const Dataset& data, const MlpPolicy& init, const TrainConfig& config,
                     const LinearSystem& system, const Rng& rng);

}  // namespace gva
