#pragma once

// Noisy mean estimation under square loss with a cliff-shaped reward, the
// closed-form SGD/EMA error predictions for it, and continuous-time
// (driftless Brownian and Ornstein-Uhlenbeck) simulators of its SGD limit.

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "gva/numerics.hpp"
#include "gva/stabilizers.hpp"

namespace gva {

struct Estimate {
  double mean = 0.0;
  double se = 0.0;
};

/// Sample mean with leave-one-out jackknife standard error.
Estimate jackknife_mean(std::span<const double> samples);
/// Sample variance with a delta-method standard error from the fourth moment.
Estimate variance_estimate(std::span<const double> samples);

/// Reward -|theta - mu|^2 inside the closed epsilon-ball, -C outside.
struct CliffSpec {
  Vector mu;
  double epsilon = 0.5;
  double penalty = 100.0;  // C

  void validate() const;
};

double bc_loss(std::span<const double> theta, std::span<const double> mu);
Vector bc_loss_grad(std::span<const double> theta, std::span<const double> mu);
double cliff_reward(std::span<const double> theta, const CliffSpec& spec);

/// theta_{t+1} = theta_t - eta (theta_t - mu + w_t), w_t ~ N(0, sigma^2 I).
struct SgdMeanProcess {
  double eta = 0.1;
  double sigma = 1.0;
  Vector theta0{0.0};
  Vector mu{0.0};
  std::size_t horizon = 100;

  std::size_t dim() const { return mu.size(); }
  /// b = |theta0 - mu|
  double initial_gap() const;
  void validate() const;
};

struct MeanStep {
  Vector theta;
  Vector shadow;
};

/// Full trajectory t = 0..horizon of the iterate and its EMA shadow.
std::vector<MeanStep> simulate_sgd_mean(const SgdMeanProcess& proc, const EmaConfig& ema, Rng& rng);

/// Exact E[(theta_t - mu)^2] for scalar SGD without averaging.
double closed_form_no_ema_mse(double eta, double sigma, double b, std::size_t t);

struct MseBounds {
  double lower = 0.0;
  double upper = 0.0;
  int upper_regime = 0;  // 1: gamma >= 2 eta, 2: intermediate, 3: eta >= 2 gamma
  int lower_regime = 0;  // 1: gamma >= eta, 2: eta >= gamma
};

/// Analytic bounds on E[(ema_T - mu)^2] for constant eta and gamma in (0, 1/2].
MseBounds ema_mse_bounds(double eta, double gamma, double sigma, double b, std::size_t horizon);

struct MseMonteCarlo {
  Estimate raw;  // E|theta_T - mu|^2
  Estimate ema;  // E|shadow_T - mu|^2
  std::size_t trials = 0;
};

MseMonteCarlo monte_carlo_mse(const SgdMeanProcess& proc, const EmaConfig& ema, std::size_t trials,
                              const Rng& rng);

struct CliffStats {
  Estimate bc_loss;
  Estimate reward;         // J(theta_T)
  Estimate regret;         // J(mu) - J(theta_T)
  Estimate p_inside;       // |theta_T - mu| <= epsilon
  Estimate p_small_regret; // J(mu) - J(theta_T) <= gamma
};

struct CliffMonteCarlo {
  CliffStats raw;
  CliffStats ema;
  std::size_t trials = 0;
};

/// Requires the shadow to forget its start: (1 - gamma)^(2T) <= gamma for fixed gamma.
CliffMonteCarlo monte_carlo_cliff(const SgdMeanProcess& proc, const CliffSpec& spec,
                                  const EmaConfig& ema, std::size_t trials, const Rng& rng);

struct GaussianCliffReport {
  double expected_bc_loss = 0.0;   // analytic 1/2 (|offset|^2 + d variance)
  Estimate bc_loss;
  Estimate regret;
  Estimate p_outside;
  bool high_loss_regime = false;   // E[l_BC] >= 10 eps^2
  bool low_loss_regime = false;    // E[l_BC] <= eps^2/8 and eps^2 >= E l log(C / E l)
  bool high_loss_ok = true;        // regret >= C/2 when high_loss_regime
  bool low_loss_ok = true;         // regret <= 3 E[l_BC] when low_loss_regime
  /// Largest c3 with regret - 2 E[l] <= C exp(-c3 eps^2 / (2 E[l])), when defined.
  std::optional<double> fitted_c3;
};

/// theta ~ N(mu + offset e_1, variance I) against the cliff reward.
GaussianCliffReport gaussian_cliff_check(double offset, double variance, const CliffSpec& spec,
                                         std::size_t trials, const Rng& rng);

/// Exact E[J(theta)] for scalar theta ~ N(mean, var) and a one-dimensional cliff.
double gaussian_cliff_expectation(double mean, double var, const CliffSpec& spec);

// ---------------------------------------------------------------------------
// Continuous-time limits.

/// d theta = -a (theta - mu) dt + dB, d shadow = gamma (theta - shadow) dt.
struct OuSpec {
  double a = 1.0;
  double theta0 = 1.0;
  double mu = 0.0;
  double gamma = 0.1;
  double t_end = 5.0;
  double dt = 1e-3;

  void validate() const;
  /// min(1/|a|, 1/gamma) / 100
  double default_dt() const;
};

struct OuAnalytic {
  double mean_theta = 0.0;
  double var_theta = 0.0;
  double mean_ema = 0.0;
  double var_ema_bound = 0.0;
};

/// Moments of the OU process and its EMA at time t for deterministic theta0.
OuAnalytic ou_analytic(double a, double gamma, double theta0, double mu, double t);

struct OuReport {
  Estimate mean_theta;
  Estimate var_theta;
  Estimate mean_ema;
  Estimate var_ema;
  Estimate mean_gap;  // E[shadow_T - theta_T]
  OuAnalytic analytic;
  std::size_t trials = 0;
  std::size_t steps = 0;
};

OuReport simulate_ou_ema(const OuSpec& spec, std::size_t trials, const Rng& rng);

struct OuSeparationRow {
  double gamma = 0.0;
  double raw_regret = 0.0;  // exact, theta_t Gaussian
  double ema_regret = 0.0;  // Gaussian with the analytic mean and variance bound
  bool separated = false;   // raw >= C/2 and ema <= 2 eps
};

/// Scans gamma over `gammas` for the continuous-time cliff separation.
std::vector<OuSeparationRow> ou_separation_search(double a, double theta0, const CliffSpec& spec,
                                                  double t, std::span<const double> gammas);

enum class DriftlessSchedule { kConstant, kInverseSqrt, kInverse, kLinearDecay };

std::string to_string(DriftlessSchedule s);
DriftlessSchedule driftless_schedule_from_string(const std::string& s);

/// theta_t = int_0^t eta_s dB_s with one of four learning-rate schedules.
struct DriftlessSpec {
  DriftlessSchedule schedule = DriftlessSchedule::kConstant;
  double eta = 1.0;
  double gamma = 1.0;
  double t_end = 10.0;
  double dt = 1e-3;

  double eta_at(double s) const;
  /// H(s) = int_0^s eta_u^2 du
  double cumulative_variance(double s) const;
  void validate() const;
};

struct DriftlessReport {
  DriftlessSchedule schedule = DriftlessSchedule::kConstant;
  Estimate var_theta;
  Estimate var_ema;
  double h_t = 0.0;            // analytic var(theta_t)
  double jensen_bound = 0.0;   // int_0^t gamma e^{gamma (s - t)} H(s) ds
  /// Closed-form bound of the worked example for this schedule, if any.
  std::optional<double> example_bound;
  std::size_t trials = 0;
};

DriftlessReport simulate_driftless(const DriftlessSpec& spec, std::size_t trials, const Rng& rng);

/// Simulates several schedules on shared Brownian increments; all specs must
/// agree on t_end and dt.
std::vector<DriftlessReport> simulate_driftless_batch(const std::vector<DriftlessSpec>& specs,
                                                      std::size_t trials, const Rng& rng);

}  // namespace gva
