#include "gva/mean_cliff.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "gva/errors.hpp"

namespace gva {

Estimate jackknife_mean(std::span<const double> samples) {
  const std::size_t n = samples.size();
  if (n == 0) throw ArgumentError("jackknife_mean: no samples");
  double sum = 0.0;
  for (double x : samples) sum += x;
  const double mean = sum / static_cast<double>(n);
  if (n == 1) return {mean, 0.0};
  // Leave-one-out means; the jackknife variance of a mean reduces to s^2 / n.
  const double nm1 = static_cast<double>(n - 1);
  double acc = 0.0;
  for (double x : samples) {
    const double loo = (sum - x) / nm1;
    acc += (loo - mean) * (loo - mean);
  }
  return {mean, std::sqrt(nm1 / static_cast<double>(n) * acc)};
}

Estimate variance_estimate(std::span<const double> samples) {
  const std::size_t n = samples.size();
  if (n < 2) throw ArgumentError("variance_estimate: need at least two samples");
  double mean = 0.0;
  for (double x : samples) mean += x;
  mean /= static_cast<double>(n);
  double m2 = 0.0, m4 = 0.0;
  for (double x : samples) {
    const double d2 = (x - mean) * (x - mean);
    m2 += d2;
    m4 += d2 * d2;
  }
  const double var = m2 / static_cast<double>(n - 1);
  const double pop_var = m2 / static_cast<double>(n);
  m4 /= static_cast<double>(n);
  return {var, std::sqrt(std::max(m4 - pop_var * pop_var, 0.0) / static_cast<double>(n))};
}

// ---------------------------------------------------------------------------
// Discrete mean estimation

void CliffSpec::validate() const {
  if (mu.empty()) throw ArgumentError("cliff: mu must be non-empty");
  if (!(epsilon > 0.0 && epsilon <= 1.0)) throw ArgumentError("cliff: epsilon must be in (0, 1]");
  if (!(penalty > epsilon * epsilon)) throw ArgumentError("cliff: C must exceed epsilon^2");
}

double bc_loss(std::span<const double> theta, std::span<const double> mu) {
  if (theta.size() != mu.size()) throw ArgumentError("bc_loss: dimension mismatch");
  double s = 0.0;
  for (std::size_t i = 0; i < theta.size(); ++i) s += (theta[i] - mu[i]) * (theta[i] - mu[i]);
  return 0.5 * s;
}

Vector bc_loss_grad(std::span<const double> theta, std::span<const double> mu) {
  return subtract(theta, mu);
}

double cliff_reward(std::span<const double> theta, const CliffSpec& spec) {
  const double sq = 2.0 * bc_loss(theta, spec.mu);
  return sq <= spec.epsilon * spec.epsilon ? -sq : -spec.penalty;
}

double SgdMeanProcess::initial_gap() const { return norm(subtract(theta0, mu)); }

void SgdMeanProcess::validate() const {
  if (mu.empty()) throw ArgumentError("sgd mean process: dimension must be >= 1");
  if (theta0.size() != mu.size()) throw ArgumentError("sgd mean process: theta0/mu dimension mismatch");
  if (!(eta > 0.0 && eta < 1.0)) throw ArgumentError("sgd mean process: eta must be in (0, 1)");
  if (!(sigma >= 0.0)) throw ArgumentError("sgd mean process: sigma must be >= 0");
}

std::vector<MeanStep> simulate_sgd_mean(const SgdMeanProcess& proc, const EmaConfig& ema, Rng& rng) {
  proc.validate();
  EmaFilter filter(ema);
  std::vector<MeanStep> out;
  out.reserve(proc.horizon + 1);
  Vector theta = proc.theta0;
  out.push_back({theta, filter.update(0, theta)});
  const std::size_t d = proc.dim();
  for (std::size_t t = 1; t <= proc.horizon; ++t) {
    for (std::size_t i = 0; i < d; ++i) {
      const double w = proc.sigma * rng.normal();
      theta[i] -= proc.eta * (theta[i] - proc.mu[i] + w);
    }
    out.push_back({theta, filter.update(t, theta)});
  }
  return out;
}

double closed_form_no_ema_mse(double eta, double sigma, double b, std::size_t t) {
  if (!(eta > 0.0 && eta < 1.0)) throw ArgumentError("closed_form_no_ema_mse: eta must be in (0, 1)");
  const double contraction = std::pow(1.0 - eta, 2.0 * static_cast<double>(t));
  return eta * sigma * sigma * (1.0 - contraction) / (2.0 - eta) + b * b * contraction;
}

MseBounds ema_mse_bounds(double eta, double gamma, double sigma, double b, std::size_t horizon) {
  if (!(eta > 0.0 && eta <= 0.5)) throw ArgumentError("ema_mse_bounds: eta must be in (0, 1/2]");
  if (!(gamma > 0.0 && gamma <= 0.5)) throw ArgumentError("ema_mse_bounds: gamma must be in (0, 1/2]");
  if (!(sigma >= 0.0)) throw ArgumentError("ema_mse_bounds: sigma must be >= 0");
  const double T = static_cast<double>(horizon);
  const double s2 = sigma * sigma;
  const double b2 = b * b;
  const double ratio2 = (gamma / eta) * (gamma / eta);

  MseBounds out;
  out.upper = 2.0 * b2 * std::pow(1.0 - gamma, 2.0 * T);
  if (gamma >= 2.0 * eta) {
    out.upper_regime = 1;
    out.upper += 4.0 * s2 * eta + 4.0 * b2 * std::pow(1.0 - eta, 2.0 * T);
  } else if (eta >= 2.0 * gamma) {
    out.upper_regime = 3;
    out.upper += 4.0 * s2 * gamma + 4.0 * b2 * ratio2 * std::pow(1.0 - gamma, 2.0 * T);
  } else {
    out.upper_regime = 2;
    out.upper += 16.0 * s2 * eta + 32.0 * b2 * std::pow(1.0 - eta / 4.0, 2.0 * T);
  }

  const double tm1 = horizon > 0 ? T - 1.0 : 0.0;
  out.lower = b2 * std::pow(1.0 - gamma, 2.0 * T);
  if (gamma >= eta) {
    out.lower_regime = 1;
    out.lower += 0.25 * (s2 * eta + b2 * std::pow(1.0 - eta, 2.0 * tm1));
  } else {
    out.lower_regime = 2;
    out.lower += 0.25 * (s2 * gamma + b2 * ratio2 * std::pow(1.0 - gamma, 2.0 * tm1));
  }
  return out;
}

namespace {

// Runs one trial to the horizon and leaves the final iterate/shadow in place.
void run_trial(const SgdMeanProcess& proc, const EmaConfig& ema, Rng& rng, Vector& theta,
               Vector& shadow) {
  EmaFilter filter(ema);
  theta = proc.theta0;
  filter.update(0, theta);
  const std::size_t d = proc.dim();
  for (std::size_t t = 1; t <= proc.horizon; ++t) {
    for (std::size_t i = 0; i < d; ++i)
      theta[i] -= proc.eta * (theta[i] - proc.mu[i] + proc.sigma * rng.normal());
    filter.update(t, theta);
  }
  shadow = filter.shadow();
}

CliffStats cliff_stats(const std::vector<Vector>& finals, const CliffSpec& spec, double gamma) {
  const std::size_t n = finals.size();
  std::vector<double> loss(n), reward(n), regret(n), inside(n), small(n);
  const double best = cliff_reward(spec.mu, spec);
  for (std::size_t i = 0; i < n; ++i) {
    loss[i] = bc_loss(finals[i], spec.mu);
    reward[i] = cliff_reward(finals[i], spec);
    regret[i] = best - reward[i];
    inside[i] = 2.0 * loss[i] <= spec.epsilon * spec.epsilon ? 1.0 : 0.0;
    small[i] = regret[i] <= gamma ? 1.0 : 0.0;
  }
  return {jackknife_mean(loss), jackknife_mean(reward), jackknife_mean(regret), jackknife_mean(inside),
          jackknife_mean(small)};
}

}  // namespace

MseMonteCarlo monte_carlo_mse(const SgdMeanProcess& proc, const EmaConfig& ema, std::size_t trials,
                              const Rng& rng) {
  proc.validate();
  if (trials < 2) throw ArgumentError("monte_carlo_mse: need at least two trials");
  std::vector<double> raw(trials), avg(trials);
  Vector theta, shadow;
  for (std::size_t k = 0; k < trials; ++k) {
    Rng trial_rng = rng.child(k);
    run_trial(proc, ema, trial_rng, theta, shadow);
    raw[k] = 2.0 * bc_loss(theta, proc.mu);
    avg[k] = 2.0 * bc_loss(shadow, proc.mu);
  }
  return {jackknife_mean(raw), jackknife_mean(avg), trials};
}

CliffMonteCarlo monte_carlo_cliff(const SgdMeanProcess& proc, const CliffSpec& spec,
                                  const EmaConfig& ema, std::size_t trials, const Rng& rng) {
  proc.validate();
  spec.validate();
  if (trials < 100) throw ArgumentError("monte_carlo_cliff: trials must be >= 100");
  if (spec.mu.size() != proc.dim()) throw ArgumentError("monte_carlo_cliff: cliff/process dimension mismatch");
  if (ema.gamma_kind == EmaConfig::Gamma::kFixed) {
    const double g = ema.gamma;
    if (!(std::pow(1.0 - g, 2.0 * static_cast<double>(proc.horizon)) <= g))
      throw ArgumentError("monte_carlo_cliff: horizon too short, need (1 - gamma)^(2T) <= gamma");
  }
  std::vector<Vector> raw(trials), avg(trials);
  for (std::size_t k = 0; k < trials; ++k) {
    Rng trial_rng = rng.child(k);
    run_trial(proc, ema, trial_rng, raw[k], avg[k]);
  }
  const double g = ema.gamma_kind == EmaConfig::Gamma::kFixed ? ema.gamma : ema.gamma_min;
  return {cliff_stats(raw, spec, g), cliff_stats(avg, spec, g), trials};
}

GaussianCliffReport gaussian_cliff_check(double offset, double variance, const CliffSpec& spec,
                                         std::size_t trials, const Rng& rng) {
  spec.validate();
  if (trials < 100) throw ArgumentError("gaussian_cliff_check: trials must be >= 100");
  if (!(variance >= 0.0)) throw ArgumentError("gaussian_cliff_check: variance must be >= 0");
  const std::size_t d = spec.mu.size();
  const double sd = std::sqrt(variance);
  const double eps2 = spec.epsilon * spec.epsilon;

  std::vector<double> loss(trials), regret(trials), outside(trials);
  const double best = cliff_reward(spec.mu, spec);
  Vector theta(d);
  for (std::size_t k = 0; k < trials; ++k) {
    Rng trial_rng = rng.child(k);
    for (std::size_t i = 0; i < d; ++i)
      theta[i] = spec.mu[i] + (i == 0 ? offset : 0.0) + sd * trial_rng.normal();
    loss[k] = bc_loss(theta, spec.mu);
    regret[k] = best - cliff_reward(theta, spec);
    outside[k] = 2.0 * loss[k] > eps2 ? 1.0 : 0.0;
  }

  GaussianCliffReport r;
  r.expected_bc_loss = 0.5 * (offset * offset + static_cast<double>(d) * variance);
  r.bc_loss = jackknife_mean(loss);
  r.regret = jackknife_mean(regret);
  r.p_outside = jackknife_mean(outside);
  const double el = r.expected_bc_loss;
  r.high_loss_regime = el >= 10.0 * eps2;
  r.low_loss_regime = el > 0.0 && el <= eps2 / 8.0 && eps2 >= el * std::log(spec.penalty / el);
  if (r.high_loss_regime) r.high_loss_ok = r.regret.mean >= spec.penalty / 2.0;
  if (r.low_loss_regime || el == 0.0) r.low_loss_ok = r.regret.mean <= 3.0 * el;
  const double excess = r.regret.mean - 2.0 * el;
  if (el > 0.0 && excess > 0.0 && excess < spec.penalty)
    r.fitted_c3 = -2.0 * el / eps2 * std::log(excess / spec.penalty);
  return r;
}

double gaussian_cliff_expectation(double mean, double var, const CliffSpec& spec) {
  spec.validate();
  if (spec.mu.size() != 1) throw ArgumentError("gaussian_cliff_expectation: scalar cliff required");
  const double m = mean - spec.mu[0];
  const double eps = spec.epsilon;
  if (var <= 0.0) return std::abs(m) <= eps ? -m * m : -spec.penalty;
  const double s = std::sqrt(var);
  const double lo = (-eps - m) / s;
  const double hi = (eps - m) / s;
  auto pdf = [](double z) { return std::exp(-0.5 * z * z) / std::sqrt(2.0 * std::numbers::pi); };
  auto cdf = [](double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); };
  const double p_in = cdf(hi) - cdf(lo);
  const double z1 = pdf(lo) - pdf(hi);
  const double z2 = p_in + lo * pdf(lo) - hi * pdf(hi);
  const double second_in = m * m * p_in + 2.0 * m * s * z1 + var * z2;
  return -second_in - spec.penalty * (1.0 - p_in);
}

// ---------------------------------------------------------------------------
// Ornstein-Uhlenbeck

void OuSpec::validate() const {
  if (a == 0.0) throw ArgumentError("ou: drift rate a must be non-zero");
  if (!(gamma > 0.0)) throw ArgumentError("ou: gamma must be > 0");
  if (!(dt > 0.0)) throw ArgumentError("ou: dt must be > 0");
  if (!(t_end > 0.0)) throw ArgumentError("ou: t_end must be > 0");
  const double ratio = gamma / a;
  if (std::abs(ratio - 1.0) < 1e-6 || std::abs(ratio - 2.0) < 1e-6)
    throw ArgumentError("ou: gamma / a too close to 1 or 2, closed forms are singular");
  const double coarse = std::min(1.0 / std::abs(a), 1.0 / gamma) / 50.0;
  if (dt > coarse * (1.0 + 1e-12))
    throw ArgumentError("ou: step size too coarse, dt must be <= min(1/|a|, 1/gamma)/50 = " +
                        std::to_string(coarse));
}

double OuSpec::default_dt() const { return std::min(1.0 / std::abs(a), 1.0 / gamma) / 100.0; }

OuAnalytic ou_analytic(double a, double gamma, double theta0, double mu, double t) {
  const double d0 = theta0 - mu;
  const double ea = std::exp(-a * t);
  const double eg = std::exp(-gamma * t);
  const double e2a = std::exp(-2.0 * a * t);
  OuAnalytic r;
  r.mean_theta = mu + ea * d0;
  r.var_theta = (1.0 - e2a) / (2.0 * a);
  r.mean_ema = mu + eg * d0 + gamma / (gamma - a) * (ea - eg) * d0;
  r.var_ema_bound = (1.0 - eg) / (2.0 * a) - (e2a - eg) / (2.0 * a * (1.0 - 2.0 * a / gamma));
  return r;
}

OuReport simulate_ou_ema(const OuSpec& spec, std::size_t trials, const Rng& rng) {
  spec.validate();
  if (trials < 2) throw ArgumentError("simulate_ou_ema: need at least two trials");
  const auto steps = static_cast<std::size_t>(std::llround(spec.t_end / spec.dt));
  const double dt = spec.t_end / static_cast<double>(steps);
  const double sqrt_dt = std::sqrt(dt);
  std::vector<double> theta_t(trials), ema_t(trials), gap(trials);
  for (std::size_t k = 0; k < trials; ++k) {
    Rng path = rng.child(k);
    double theta = spec.theta0;
    double ema = spec.theta0;
    for (std::size_t n = 0; n < steps; ++n) {
      const double next = theta - spec.a * (theta - spec.mu) * dt + sqrt_dt * path.normal();
      ema += spec.gamma * (theta - ema) * dt;
      theta = next;
    }
    theta_t[k] = theta;
    ema_t[k] = ema;
    gap[k] = ema - theta;
  }
  OuReport r;
  r.mean_theta = jackknife_mean(theta_t);
  r.var_theta = variance_estimate(theta_t);
  r.mean_ema = jackknife_mean(ema_t);
  r.var_ema = variance_estimate(ema_t);
  r.mean_gap = jackknife_mean(gap);
  r.analytic = ou_analytic(spec.a, spec.gamma, spec.theta0, spec.mu, static_cast<double>(steps) * dt);
  r.trials = trials;
  r.steps = steps;
  return r;
}

std::vector<OuSeparationRow> ou_separation_search(double a, double theta0, const CliffSpec& spec,
                                                  double t, std::span<const double> gammas) {
  spec.validate();
  std::vector<OuSeparationRow> rows;
  const double best = -0.0;
  for (double g : gammas) {
    if (!(g > 0.0) || std::abs(g / a - 1.0) < 1e-6 || std::abs(g / a - 2.0) < 1e-6) continue;
    const OuAnalytic an = ou_analytic(a, g, theta0, spec.mu[0], t);
    OuSeparationRow row;
    row.gamma = g;
    row.raw_regret = best - gaussian_cliff_expectation(an.mean_theta, an.var_theta, spec);
    row.ema_regret = best - gaussian_cliff_expectation(an.mean_ema, std::max(an.var_ema_bound, 0.0), spec);
    row.separated = row.raw_regret >= spec.penalty / 2.0 && row.ema_regret <= 2.0 * spec.epsilon;
    rows.push_back(row);
  }
  return rows;
}

// ---------------------------------------------------------------------------
// Driftless Brownian time change

std::string to_string(DriftlessSchedule s) {
  switch (s) {
    case DriftlessSchedule::kConstant: return "constant";
    case DriftlessSchedule::kInverseSqrt: return "inverse_sqrt";
    case DriftlessSchedule::kInverse: return "inverse";
    case DriftlessSchedule::kLinearDecay: return "linear_decay";
  }
  return "unknown";
}

DriftlessSchedule driftless_schedule_from_string(const std::string& s) {
  if (s == "constant") return DriftlessSchedule::kConstant;
  if (s == "inverse_sqrt") return DriftlessSchedule::kInverseSqrt;
  if (s == "inverse") return DriftlessSchedule::kInverse;
  if (s == "linear_decay") return DriftlessSchedule::kLinearDecay;
  throw ArgumentError("unknown driftless schedule '" + s + "'");
}

double DriftlessSpec::eta_at(double s) const {
  switch (schedule) {
    case DriftlessSchedule::kConstant: return eta;
    case DriftlessSchedule::kInverseSqrt: return eta / std::sqrt(1.0 + s);
    case DriftlessSchedule::kInverse: return eta / (1.0 + s);
    case DriftlessSchedule::kLinearDecay: return eta * (1.0 - s / t_end);
  }
  return eta;
}

double DriftlessSpec::cumulative_variance(double s) const {
  const double e2 = eta * eta;
  switch (schedule) {
    case DriftlessSchedule::kConstant: return e2 * s;
    case DriftlessSchedule::kInverseSqrt: return e2 * std::log1p(s);
    case DriftlessSchedule::kInverse: return e2 * s / (1.0 + s);
    case DriftlessSchedule::kLinearDecay: {
      const double r = 1.0 - s / t_end;
      return e2 * t_end / 3.0 * (1.0 - r * r * r);
    }
  }
  return 0.0;
}

void DriftlessSpec::validate() const {
  if (!(dt > 0.0)) throw ArgumentError("driftless: dt must be > 0");
  if (!(t_end > 0.0)) throw ArgumentError("driftless: t_end must be > 0");
  if (!(gamma > 0.0)) throw ArgumentError("driftless: gamma must be > 0");
  if (!(eta > 0.0)) throw ArgumentError("driftless: eta must be > 0");
  const double coarse = std::min(t_end, 1.0 / gamma) / 50.0;
  if (dt > coarse * (1.0 + 1e-12))
    throw ArgumentError("driftless: step size too coarse, dt must be <= min(t_end, 1/gamma)/50 = " +
                        std::to_string(coarse));
}

namespace {

double jensen_bound(const DriftlessSpec& spec) {
  // Composite Simpson on int_0^t gamma e^{gamma (s - t)} H(s) ds.
  constexpr int kIntervals = 20000;
  const double t = spec.t_end;
  const double h = t / kIntervals;
  auto f = [&](double s) { return spec.gamma * std::exp(spec.gamma * (s - t)) * spec.cumulative_variance(s); };
  double acc = f(0.0) + f(t);
  for (int i = 1; i < kIntervals; ++i) acc += (i % 2 == 1 ? 4.0 : 2.0) * f(i * h);
  return acc * h / 3.0;
}

std::optional<double> example_bound(const DriftlessSpec& spec) {
  const double t = spec.t_end;
  const double g = spec.gamma;
  const double e2 = spec.eta * spec.eta;
  const double decay = 1.0 - std::exp(-g * t);
  switch (spec.schedule) {
    case DriftlessSchedule::kConstant:
      return e2 * (t - decay / g);
    case DriftlessSchedule::kInverseSqrt:
      return e2 * decay * std::log(1.0 + (t - decay / g) / decay);
    case DriftlessSchedule::kLinearDecay:
      return e2 * (t / 2.0 - (1.0 - std::exp(-g * t) * (g * t + 1.0)) / (g * g * t));
    case DriftlessSchedule::kInverse:
      return std::nullopt;
  }
  return std::nullopt;
}

}  // namespace

std::vector<DriftlessReport> simulate_driftless_batch(const std::vector<DriftlessSpec>& specs,
                                                      std::size_t trials, const Rng& rng) {
  if (specs.empty()) throw ArgumentError("simulate_driftless_batch: no schedules");
  if (trials < 2) throw ArgumentError("simulate_driftless: need at least two trials");
  for (const auto& s : specs) {
    s.validate();
    if (s.t_end != specs.front().t_end || s.dt != specs.front().dt)
      throw ArgumentError("simulate_driftless_batch: schedules must share t_end and dt");
  }
  const std::size_t m = specs.size();
  const double t_end = specs.front().t_end;
  const auto steps = static_cast<std::size_t>(std::llround(t_end / specs.front().dt));
  const double dt = t_end / static_cast<double>(steps);
  const double sqrt_dt = std::sqrt(dt);

  // Midpoint learning rates per step, shared by every path.
  std::vector<std::vector<double>> rate(m, std::vector<double>(steps));
  for (std::size_t j = 0; j < m; ++j)
    for (std::size_t n = 0; n < steps; ++n)
      rate[j][n] = specs[j].eta_at((static_cast<double>(n) + 0.5) * dt) * sqrt_dt;

  std::vector<std::vector<double>> theta_t(m, std::vector<double>(trials));
  std::vector<std::vector<double>> ema_t(m, std::vector<double>(trials));
  std::vector<double> theta(m), ema(m), gdt(m);
  for (std::size_t j = 0; j < m; ++j) gdt[j] = specs[j].gamma * dt;
  for (std::size_t k = 0; k < trials; ++k) {
    Rng path = rng.child(k);
    std::fill(theta.begin(), theta.end(), 0.0);
    std::fill(ema.begin(), ema.end(), 0.0);
    for (std::size_t n = 0; n < steps; ++n) {
      const double z = path.normal();
      for (std::size_t j = 0; j < m; ++j) {
        ema[j] += gdt[j] * (theta[j] - ema[j]);
        theta[j] += rate[j][n] * z;
      }
    }
    for (std::size_t j = 0; j < m; ++j) {
      theta_t[j][k] = theta[j];
      ema_t[j][k] = ema[j];
    }
  }

  std::vector<DriftlessReport> out;
  for (std::size_t j = 0; j < m; ++j) {
    DriftlessReport r;
    r.schedule = specs[j].schedule;
    r.var_theta = variance_estimate(theta_t[j]);
    r.var_ema = variance_estimate(ema_t[j]);
    r.h_t = specs[j].cumulative_variance(t_end);
    r.jensen_bound = jensen_bound(specs[j]);
    r.example_bound = example_bound(specs[j]);
    r.trials = trials;
    out.push_back(r);
  }
  return out;
}

DriftlessReport simulate_driftless(const DriftlessSpec& spec, std::size_t trials, const Rng& rng) {
  return simulate_driftless_batch({spec}, trials, rng).front();
}

}  // namespace gva
