#include "gva/stabilizers.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "gva/errors.hpp"

namespace gva {

namespace {

void check_step(const std::optional<std::size_t>& last, std::size_t t) {
  if (last && t <= *last)
    throw ArgumentError("filter update: step " + std::to_string(t) +
                        " is not greater than previous step " + std::to_string(*last));
}

void check_dim(const ParamVector& state, std::span<const double> iterate) {
  if (!state.empty() && state.size() != iterate.size())
    throw ArgumentError("filter update: iterate dimension " + std::to_string(iterate.size()) +
                        " does not match filter dimension " + std::to_string(state.size()));
}

}  // namespace

EmaConfig EmaConfig::fixed(double gamma, std::size_t burn_in, std::size_t period) {
  EmaConfig c;
  c.gamma_kind = Gamma::kFixed;
  c.gamma = gamma;
  c.burn_in = burn_in;
  c.update_period = period;
  c.validate();
  return c;
}

EmaConfig EmaConfig::annealed(double power, double gamma_min, std::size_t burn_in,
                              std::size_t period) {
  EmaConfig c;
  c.gamma_kind = Gamma::kAnnealed;
  c.anneal_power = power;
  c.gamma_min = gamma_min;
  c.burn_in = burn_in;
  c.update_period = period;
  c.validate();
  return c;
}

void EmaConfig::validate() const {
  if (update_period < 1) throw ArgumentError("ema: update period must be >= 1");
  if (gamma_kind == Gamma::kFixed) {
    if (!(gamma >= 0.0 && gamma <= 1.0)) throw ArgumentError("ema: gamma must be in [0, 1]");
  } else {
    if (!(anneal_power >= 0.0)) throw ArgumentError("ema: anneal power must be >= 0");
    if (!(gamma_min >= 0.0 && gamma_min <= 1.0)) throw ArgumentError("ema: gamma_min must be in [0, 1]");
  }
}

double EmaConfig::gamma_at(std::size_t t) const {
  if (gamma_kind == Gamma::kFixed) return gamma;
  const std::size_t since = t >= burn_in ? t - burn_in : 0;
  if (since == 0) return 1.0;
  const double g = std::pow(static_cast<double>(since), -anneal_power);
  return std::clamp(std::max(g, gamma_min), 0.0, 1.0);
}

EmaFilter::EmaFilter(EmaConfig config) : config_(config) { config_.validate(); }

const ParamVector& EmaFilter::update(std::size_t t, std::span<const double> iterate) {
  check_step(last_t_, t);
  check_dim(shadow_, iterate);
  last_t_ = t;
  ++seen_;
  if (shadow_.empty() || t < config_.burn_in) {
    shadow_.assign(iterate.begin(), iterate.end());
    return shadow_;
  }
  if ((t - config_.burn_in) % config_.update_period != 0) return shadow_;
  const double g = config_.gamma_at(t);
  for (std::size_t i = 0; i < shadow_.size(); ++i)
    shadow_[i] = (1.0 - g) * shadow_[i] + g * iterate[i];
  return shadow_;
}

AverageFilter::AverageFilter(AverageConfig config) : config_(config) {
  if (config_.kind == AverageConfig::Kind::kSuffix && !(config_.alpha > 0.0 && config_.alpha <= 1.0))
    throw ArgumentError("suffix average: alpha must be in (0, 1]");
}

const ParamVector& AverageFilter::update(std::size_t t, std::span<const double> iterate) {
  check_step(last_t_, t);
  check_dim(value_, iterate);
  last_t_ = t;
  ++count_;
  const double n = static_cast<double>(count_);

  switch (config_.kind) {
    case AverageConfig::Kind::kUniform:
    case AverageConfig::Kind::kLacosteJulien: {
      if (value_.empty()) {
        value_.assign(iterate.begin(), iterate.end());
        break;
      }
      const double g = config_.kind == AverageConfig::Kind::kUniform ? 1.0 / n : 2.0 / (n + 1.0);
      for (std::size_t i = 0; i < value_.size(); ++i) value_[i] = (1.0 - g) * value_[i] + g * iterate[i];
      break;
    }
    case AverageConfig::Kind::kSuffix: {
      // ceil(alpha * n) is non-decreasing in n and grows by at most one per step.
      const auto target = static_cast<std::size_t>(std::ceil(config_.alpha * n - 1e-12));
      window_.emplace_back(iterate.begin(), iterate.end());
      while (window_.size() > std::max<std::size_t>(target, 1)) window_.pop_front();
      // Re-summing the window keeps the mean exact rather than drifting.
      value_.assign(iterate.size(), 0.0);
      for (const auto& w : window_) axpy(1.0, w, value_);
      const double inv = 1.0 / static_cast<double>(window_.size());
      for (double& v : value_) v *= inv;
      break;
    }
  }
  return value_;
}

std::vector<ParamVector> filter_checkpoint_stream(const std::vector<ParamVector>& stream,
                                                  const FilterConfig& config) {
  if (stream.empty()) throw ArgumentError("filter_checkpoint_stream: empty stream");
  std::vector<ParamVector> out;
  out.reserve(stream.size());
  std::visit(
      [&](const auto& cfg) {
        using T = std::decay_t<decltype(cfg)>;
        if constexpr (std::is_same_v<T, EmaConfig>) {
          EmaFilter f(cfg);
          for (std::size_t t = 0; t < stream.size(); ++t) out.push_back(f.update(t, stream[t]));
        } else {
          AverageFilter f(cfg);
          for (std::size_t t = 0; t < stream.size(); ++t) out.push_back(f.update(t, stream[t]));
        }
      },
      config);
  return out;
}

}  // namespace gva
