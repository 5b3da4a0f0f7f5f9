#pragma once

// Iterate-averaging filters applied to optimizer trajectories.
//
// All filters use the gamma convention: shadow <- (1 - gamma) shadow + gamma x.
// Libraries that parameterize by beta use beta = 1 - gamma.

#include <cstddef>
#include <deque>
#include <optional>
#include <variant>
#include <vector>

#include "gva/numerics.hpp"

namespace gva {

struct EmaConfig {
  enum class Gamma { kFixed, kAnnealed };
  Gamma gamma_kind = Gamma::kFixed;
  /// Used when gamma_kind == kFixed.
  double gamma = 1.0;
  /// gamma_t = max((t - burn_in)^(-anneal_power), gamma_min) when annealed.
  double anneal_power = 1.0;
  double gamma_min = 1e-4;
  std::size_t burn_in = 0;
  std::size_t update_period = 1;

  static EmaConfig fixed(double gamma, std::size_t burn_in = 0, std::size_t period = 1);
  static EmaConfig annealed(double power, double gamma_min, std::size_t burn_in = 0,
                            std::size_t period = 1);

  /// gamma at global step t (assumes t >= burn_in), always in [0, 1].
  double gamma_at(std::size_t t) const;
  void validate() const;
};

/// Exponential moving average of iterates with burn-in and annealing.
///
/// Before burn-in ends the shadow is a copy of the latest iterate. The
/// annealing clock restarts at burn-in, so the first post-burn-in gamma is 1.
class EmaFilter {
 public:
  explicit EmaFilter(EmaConfig config);

  const ParamVector& update(std::size_t t, std::span<const double> iterate);
  const ParamVector& shadow() const { return shadow_; }
  std::size_t steps_seen() const { return seen_; }
  const EmaConfig& config() const { return config_; }

 private:
  EmaConfig config_;
  ParamVector shadow_;
  std::optional<std::size_t> last_t_;
  std::size_t seen_ = 0;
};

struct AverageConfig {
  enum class Kind { kUniform, kLacosteJulien, kSuffix };
  Kind kind = Kind::kUniform;
  /// Window fraction for kSuffix, in (0, 1].
  double alpha = 1.0;
};

/// Uniform, Lacoste-Julien (gamma_n = 2/(n+1)) and suffix-alpha averages.
/// Weights are indexed by the number of observed iterates n = 1, 2, ...
class AverageFilter {
 public:
  explicit AverageFilter(AverageConfig config);

  const ParamVector& update(std::size_t t, std::span<const double> iterate);
  const ParamVector& value() const { return value_; }
  std::size_t count() const { return count_; }
  /// Number of iterates currently held by the suffix window.
  std::size_t window_size() const { return window_.size(); }

 private:
  AverageConfig config_;
  ParamVector value_;
  std::deque<ParamVector> window_;
  std::optional<std::size_t> last_t_;
  std::size_t count_ = 0;
};

using FilterConfig = std::variant<EmaConfig, AverageConfig>;

/// Applies the configured filter to a stream in order; element t of the
/// output is the filter state after observing element t.
std::vector<ParamVector> filter_checkpoint_stream(const std::vector<ParamVector>& stream,
                                                  const FilterConfig& config);

}  // namespace gva
