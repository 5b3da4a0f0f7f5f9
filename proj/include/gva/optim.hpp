#pragma once

#include <cstddef>
#include <memory>
#include <string>
#include <variant>

#include "gva/numerics.hpp"

namespace gva {

/// Learning-rate schedule evaluated on the global step count.
///
/// `linear_warmup_then` multiplies the base schedule by t / W during the
/// first W steps, so the rate ramps from 0 to the base value.
class LrSchedule {
 public:
  enum class Kind { kConstant, kInverse, kInverseSqrt, kPowerDecay };

  static LrSchedule constant(double eta);
  /// eta / (1 + t)
  static LrSchedule inverse(double eta);
  /// eta / sqrt(1 + t)
  static LrSchedule inverse_sqrt(double eta);
  /// eta * (1 - t/T)^alpha; alpha = 0 is the constant schedule.
  static LrSchedule power_decay(double eta, double alpha);
  static LrSchedule linear_warmup_then(LrSchedule base, std::size_t warmup_steps);

  double at(std::size_t t, std::size_t total_steps) const;

  Kind kind() const { return kind_; }
  double base_rate() const { return eta_; }
  double power() const { return alpha_; }
  std::size_t warmup() const { return warmup_; }

 private:
  LrSchedule(Kind kind, double eta, double alpha) : kind_(kind), eta_(eta), alpha_(alpha) {}

  Kind kind_;
  double eta_;
  double alpha_ = 0.0;
  std::size_t warmup_ = 0;
};

/// Plain / heavy-ball SGD. With beta1 > 0 the buffer follows b <- beta1 b + g.
struct SgdState {
  double beta1 = 0.0;
  ParamVector momentum;
};

/// Decoupled-weight-decay Adam with bias-corrected moments.
struct AdamWState {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.01;
  ParamVector m;
  ParamVector v;
  std::size_t step = 0;
};

ParamVector sgd_step(SgdState& state, std::span<const double> params, std::span<const double> grad,
                     double lr);
ParamVector adamw_step(AdamWState& state, std::span<const double> params,
                       std::span<const double> grad, double lr);

/// Either optimizer behind one call site.
class Optimizer {
 public:
  explicit Optimizer(SgdState s) : state_(std::move(s)) { validate(); }
  explicit Optimizer(AdamWState s) : state_(std::move(s)) { validate(); }

  ParamVector step(std::span<const double> params, std::span<const double> grad, double lr);
  const std::variant<SgdState, AdamWState>& state() const { return state_; }

 private:
  void validate() const;
  std::variant<SgdState, AdamWState> state_;
};

/// Sums gradients and returns their arithmetic mean on flush.
class GradAccumulator {
 public:
  explicit GradAccumulator(std::size_t target_multiple = 1) : target_(target_multiple) {}

  void accumulate(std::span<const double> grad);
  ParamVector flush();

  std::size_t count() const { return count_; }
  bool ready() const { return count_ >= target_; }

 private:
  ParamVector sum_;
  std::size_t count_ = 0;
  std::size_t target_;
};

}  // namespace gva
