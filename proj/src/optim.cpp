#include "gva/optim.hpp"

#include <cmath>
#include <string>

#include "gva/errors.hpp"

namespace gva {

namespace {

void check_rate(double eta) {
  if (!(eta >= 0.0) || !std::isfinite(eta)) throw ArgumentError("learning rate must be finite and >= 0");
}

void check_dims(std::size_t params, std::size_t grad, const char* who) {
  if (params != grad)
    throw ArgumentError(std::string(who) + ": parameter dimension " + std::to_string(params) +
                        " does not match gradient dimension " + std::to_string(grad));
}

}  // namespace

LrSchedule LrSchedule::constant(double eta) {
  check_rate(eta);
  return {Kind::kConstant, eta, 0.0};
}

LrSchedule LrSchedule::inverse(double eta) {
  check_rate(eta);
  return {Kind::kInverse, eta, 0.0};
}

LrSchedule LrSchedule::inverse_sqrt(double eta) {
  check_rate(eta);
  return {Kind::kInverseSqrt, eta, 0.0};
}

LrSchedule LrSchedule::power_decay(double eta, double alpha) {
  check_rate(eta);
  if (!(alpha >= 0.0)) throw ArgumentError("power_decay: alpha must be >= 0");
  return {Kind::kPowerDecay, eta, alpha};
}

LrSchedule LrSchedule::linear_warmup_then(LrSchedule base, std::size_t warmup_steps) {
  base.warmup_ = warmup_steps;
  return base;
}

double LrSchedule::at(std::size_t t, std::size_t total_steps) const {
  if (total_steps < 1) throw ArgumentError("lr_at: total steps must be >= 1");
  if (t > total_steps)
    throw ArgumentError("lr_at: step " + std::to_string(t) + " exceeds total " +
                        std::to_string(total_steps));
  const double td = static_cast<double>(t);
  double rate = eta_;
  switch (kind_) {
    case Kind::kConstant:
      break;
    case Kind::kInverse:
      rate = eta_ / (1.0 + td);
      break;
    case Kind::kInverseSqrt:
      rate = eta_ / std::sqrt(1.0 + td);
      break;
    case Kind::kPowerDecay:
      rate = alpha_ == 0.0 ? eta_
                           : eta_ * std::pow(1.0 - td / static_cast<double>(total_steps), alpha_);
      break;
  }
  if (warmup_ > 0 && t < warmup_) rate *= td / static_cast<double>(warmup_);
  return rate;
}

ParamVector sgd_step(SgdState& state, std::span<const double> params, std::span<const double> grad,
                     double lr) {
  check_dims(params.size(), grad.size(), "sgd_step");
  ParamVector out(params.begin(), params.end());
  if (state.beta1 == 0.0) {
    axpy(-lr, grad, out);
    return out;
  }
  if (state.momentum.empty()) state.momentum.assign(params.size(), 0.0);
  check_dims(params.size(), state.momentum.size(), "sgd_step (momentum buffer)");
  for (std::size_t i = 0; i < params.size(); ++i) {
    state.momentum[i] = state.beta1 * state.momentum[i] + grad[i];
    out[i] -= lr * state.momentum[i];
  }
  return out;
}

ParamVector adamw_step(AdamWState& state, std::span<const double> params,
                       std::span<const double> grad, double lr) {
  check_dims(params.size(), grad.size(), "adamw_step");
  if (state.m.empty()) state.m.assign(params.size(), 0.0);
  if (state.v.empty()) state.v.assign(params.size(), 0.0);
  check_dims(params.size(), state.m.size(), "adamw_step (first moment)");
  check_dims(params.size(), state.v.size(), "adamw_step (second moment)");

  ++state.step;
  const double bc1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step));
  const double decay = 1.0 - lr * state.weight_decay;
  ParamVector out(params.size());
  for (std::size_t i = 0; i < params.size(); ++i) {
    const double g = grad[i];
    state.m[i] = state.beta1 * state.m[i] + (1.0 - state.beta1) * g;
    state.v[i] = state.beta2 * state.v[i] + (1.0 - state.beta2) * g * g;
    const double m_hat = state.m[i] / bc1;
    const double v_hat = state.v[i] / bc2;
    out[i] = params[i] * decay - lr * m_hat / (std::sqrt(v_hat) + state.eps);
  }
  return out;
}

void Optimizer::validate() const {
  std::visit(
      [](const auto& s) {
        using T = std::decay_t<decltype(s)>;
        if (!(s.beta1 >= 0.0 && s.beta1 < 1.0)) throw ArgumentError("optimizer: beta1 must be in [0, 1)");
        if constexpr (std::is_same_v<T, AdamWState>) {
          if (!(s.beta2 >= 0.0 && s.beta2 < 1.0)) throw ArgumentError("adamw: beta2 must be in [0, 1)");
          if (!(s.eps > 0.0)) throw ArgumentError("adamw: eps must be > 0");
          if (!(s.weight_decay >= 0.0)) throw ArgumentError("adamw: weight decay must be >= 0");
        }
      },
      state_);
}

ParamVector Optimizer::step(std::span<const double> params, std::span<const double> grad, double lr) {
  return std::visit(
      [&](auto& s) -> ParamVector {
        using T = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<T, SgdState>)
          return sgd_step(s, params, grad, lr);
        else
          return adamw_step(s, params, grad, lr);
      },
      state_);
}

void GradAccumulator::accumulate(std::span<const double> grad) {
  if (count_ == 0 && sum_.empty()) sum_.assign(grad.size(), 0.0);
  check_dims(sum_.size(), grad.size(), "accumulate");
  for (std::size_t i = 0; i < grad.size(); ++i) sum_[i] += grad[i];
  ++count_;
}

ParamVector GradAccumulator::flush() {
  if (count_ == 0) throw ArgumentError("flush: accumulator is empty");
  ParamVector out = std::move(sum_);
  const double n = static_cast<double>(count_);
  for (double& v : out) v /= n;
  sum_.clear();
  count_ = 0;
  return out;
}

}  // namespace gva
