#include <gtest/gtest.h>

#include <cmath>

#include "gva/errors.hpp"
#include "gva/mean_cliff.hpp"

using namespace gva;

namespace {

CliffSpec scalar_cliff(double eps = 0.5, double c = 100.0) {
  CliffSpec s;
  s.mu = {0.0};
  s.epsilon = eps;
  s.penalty = c;
  return s;
}

// Exact MSE by iterating the second-moment recursion m_{t+1} = (1-eta)^2 m_t + eta^2 sigma^2.
double mse_recursion(double eta, double sigma, double b, std::size_t t) {
  double m = b * b;
  for (std::size_t k = 0; k < t; ++k) m = (1 - eta) * (1 - eta) * m + eta * eta * sigma * sigma;
  return m;
}

}  // namespace

TEST(BcLoss, Values) {
  const Vector mu{1.0, 2.0};
  EXPECT_EQ(bc_loss(mu, mu), 0.0);
  EXPECT_DOUBLE_EQ(bc_loss(Vector{4.0, 6.0}, mu), 12.5);
  EXPECT_THROW(bc_loss(Vector{1.0}, mu), ArgumentError);
}

TEST(BcLoss, GradientMatchesFiniteDifference) {
  Rng r(1);
  const Vector mu{0.3, -1.2, 2.0};
  Vector th{r.normal(), r.normal(), r.normal()};
  const Vector g = bc_loss_grad(th, mu);
  for (std::size_t i = 0; i < 3; ++i) {
    Vector p = th, m = th;
    p[i] += 1e-5;
    m[i] -= 1e-5;
    EXPECT_NEAR((bc_loss(p, mu) - bc_loss(m, mu)) / 2e-5, g[i], 1e-6);
  }
}

TEST(CliffReward, BoundaryInclusive) {
  const CliffSpec s = scalar_cliff(0.5, 100.0);
  EXPECT_EQ(cliff_reward(Vector{0.0}, s), 0.0);
  EXPECT_DOUBLE_EQ(cliff_reward(Vector{0.5}, s), -0.25);
  EXPECT_EQ(cliff_reward(Vector{0.5 + 1e-9}, s), -100.0);
  Rng r(2);
  for (int i = 0; i < 1000; ++i) {
    const Vector th{r.normal()};
    const double j = cliff_reward(th, s);
    EXPECT_GE(j, -100.0);
    if (std::abs(th[0]) <= 0.5) EXPECT_DOUBLE_EQ(j, -2.0 * bc_loss(th, s.mu));
  }
}

TEST(SimulateSgdMean, NoiselessContraction) {
  SgdMeanProcess p;
  p.eta = 0.5;
  p.sigma = 0.0;
  p.theta0 = {1.0};
  p.mu = {0.0};
  p.horizon = 10;
  Rng r(3);
  const auto traj = simulate_sgd_mean(p, EmaConfig::fixed(1.0), r);
  ASSERT_EQ(traj.size(), 11u);
  for (std::size_t t = 0; t < traj.size(); ++t) {
    EXPECT_DOUBLE_EQ(traj[t].theta[0], std::pow(0.5, double(t)));
    EXPECT_EQ(traj[t].shadow, traj[t].theta);
  }
}

TEST(ClosedFormMse, Cases) {
  EXPECT_DOUBLE_EQ(closed_form_no_ema_mse(0.3, 0.0, 2.0, 5), 4.0 * std::pow(0.7, 10));
  EXPECT_NEAR(closed_form_no_ema_mse(0.1, 1.0, 0.0, 10000), 0.1 / 1.9, 1e-12);
  EXPECT_NEAR(closed_form_no_ema_mse(0.5, 1.0, 1.0, 1), 0.5, 1e-15);
  for (double eta : {0.05, 0.3, 0.9})
    for (std::size_t t : {1u, 7u, 100u}) EXPECT_NEAR(closed_form_no_ema_mse(eta, 1.3, 0.7, t), mse_recursion(eta, 1.3, 0.7, t), 1e-12);
  EXPECT_THROW(closed_form_no_ema_mse(1.0, 1.0, 0.0, 1), ArgumentError);
}

TEST(ClosedFormMse, MonteCarloAgrees) {
  SgdMeanProcess p;
  p.eta = 0.1;
  p.sigma = 1.0;
  p.theta0 = {1.0};
  p.horizon = 40;
  const MseMonteCarlo mc = monte_carlo_mse(p, EmaConfig::fixed(1.0), 20000, Rng(4));
  EXPECT_LE(std::abs(mc.raw.mean - closed_form_no_ema_mse(0.1, 1.0, 1.0, 40)), 3.0 * mc.raw.se);
}

TEST(EmaBounds, TrivialAndRegime3) {
  const MseBounds z = ema_mse_bounds(0.2, 0.2, 0.0, 0.0, 100);
  EXPECT_EQ(z.lower, 0.0);
  EXPECT_EQ(z.upper, 0.0);
  const MseBounds b = ema_mse_bounds(0.3, 0.01, 1.0, 0.0, 2000);
  EXPECT_EQ(b.upper_regime, 3);
  EXPECT_NEAR(b.lower, 0.0025, 1e-12);
  EXPECT_GE(b.upper, 0.04);
  EXPECT_THROW(ema_mse_bounds(0.6, 0.1, 1.0, 0.0, 10), ArgumentError);
}

TEST(EmaBounds, OrderedAndNoiseTermsContinuous) {
  for (double eta : {0.02, 0.1, 0.3, 0.5}) {
    double prev = -1.0;
    for (int k = 1; k <= 500; ++k) {
      const double g = 0.5 * k / 500.0;
      // noise terms only: the bias terms differ between regimes by design
      const MseBounds b = ema_mse_bounds(eta, g, 1.0, 0.0, 300);
      EXPECT_LE(b.lower, b.upper);
      if (prev > 0.0) {
        EXPECT_LE(b.upper / prev, 8.0);
        EXPECT_LE(prev / b.upper, 8.0);
      }
      prev = b.upper;
    }
  }
}

TEST(EmaBounds, MonteCarloInside) {
  for (double eta : {0.1, 0.3})
    for (double g : {0.02, 0.1}) {
      SgdMeanProcess p;
      p.eta = eta;
      p.sigma = 1.0;
      p.theta0 = {1.0};
      p.horizon = 300;
      const MseMonteCarlo mc = monte_carlo_mse(p, EmaConfig::fixed(g), 5000, Rng(5));
      // noise terms only: the bias terms differ between regimes by design
      const MseBounds b = ema_mse_bounds(eta, g, 1.0, 0.0, 300);
      EXPECT_GE(mc.ema.mean, b.lower);
      EXPECT_LE(mc.ema.mean, b.upper);
      if (g <= eta) EXPECT_LE(mc.ema.mean, mc.raw.mean);
    }
}

TEST(MonteCarloCliff, NoiselessAtOptimum) {
  SgdMeanProcess p;
  p.eta = 0.3;
  p.sigma = 0.0;
  p.theta0 = {0.0};
  p.horizon = 1000;
  const CliffMonteCarlo mc = monte_carlo_cliff(p, scalar_cliff(), EmaConfig::fixed(0.01), 100, Rng(6));
  EXPECT_EQ(mc.raw.p_inside.mean, 1.0);
  EXPECT_EQ(mc.ema.p_inside.mean, 1.0);
  EXPECT_EQ(mc.raw.reward.mean, 0.0);
  EXPECT_EQ(mc.ema.reward.mean, 0.0);
}

TEST(MonteCarloCliff, Validation) {
  SgdMeanProcess p;
  p.theta0 = {0.0};
  p.horizon = 10;
  EXPECT_THROW(monte_carlo_cliff(p, scalar_cliff(), EmaConfig::fixed(0.01), 100, Rng(1)), ArgumentError);
  p.horizon = 2000;
  EXPECT_THROW(monte_carlo_cliff(p, scalar_cliff(), EmaConfig::fixed(0.01), 50, Rng(1)), ArgumentError);
}

TEST(GaussianCliff, Regimes) {
  const CliffSpec s = scalar_cliff(0.5, 100.0);
  const GaussianCliffReport zero = gaussian_cliff_check(0.0, 0.0, s, 100, Rng(7));
  EXPECT_EQ(zero.regret.mean, 0.0);

  const double eps2 = 0.25;
  const GaussianCliffReport hi = gaussian_cliff_check(0.0, 2.0 * 10.0 * eps2, s, 100000, Rng(8));
  EXPECT_TRUE(hi.high_loss_regime);
  EXPECT_GE(hi.regret.mean, 50.0);

  const GaussianCliffReport lo = gaussian_cliff_check(0.0, 2.0 * eps2 / 100.0, s, 100000, Rng(9));
  EXPECT_TRUE(lo.low_loss_regime);
  EXPECT_LE(lo.regret.mean, 3.0 * lo.expected_bc_loss);
}

TEST(GaussianCliff, ExactExpectationMatchesMonteCarlo) {
  const CliffSpec s = scalar_cliff(0.5, 10.0);
  const GaussianCliffReport r = gaussian_cliff_check(0.2, 0.09, s, 100000, Rng(10));
  const double exact = gaussian_cliff_expectation(0.2, 0.09, s);
  EXPECT_LE(std::abs(-r.regret.mean - exact), 4.0 * r.regret.se);
}

TEST(Ou, AnalyticMatchesSimulation) {
  OuSpec spec;
  spec.a = 1.0;
  spec.gamma = 0.5;
  spec.t_end = 3.0;
  spec.dt = 2e-3;
  const OuReport r = simulate_ou_ema(spec, 20000, Rng(11));
  EXPECT_LE(std::abs(r.mean_ema.mean - r.analytic.mean_ema), 3.0 * r.mean_ema.se);
  EXPECT_LE(std::abs(r.var_theta.mean - (1 - std::exp(-6.0)) / 2.0), 3.0 * r.var_theta.se);
  EXPECT_LE(r.var_ema.mean, r.analytic.var_ema_bound + 3.0 * r.var_ema.se);
}

TEST(Ou, FastEmaTracksIterate) {
  OuSpec spec;
  spec.a = 1.0;
  spec.gamma = 1000.0;
  spec.t_end = 1.0;
  spec.dt = 1e-5;
  const OuReport r = simulate_ou_ema(spec, 2000, Rng(12));
  EXPECT_LE(std::abs(r.mean_gap.mean), 3.0 * r.mean_gap.se + 1e-3);
}

TEST(Ou, Validation) {
  OuSpec spec;
  spec.gamma = 1.0;  // gamma / a == 1
  EXPECT_THROW(spec.validate(), ArgumentError);
  OuSpec coarse;
  coarse.dt = 0.1;
  EXPECT_THROW(coarse.validate(), ArgumentError);
}

TEST(Driftless, ScheduleNamesRoundTrip) {
  for (auto s : {DriftlessSchedule::kConstant, DriftlessSchedule::kInverseSqrt, DriftlessSchedule::kInverse,
                 DriftlessSchedule::kLinearDecay})
    EXPECT_EQ(driftless_schedule_from_string(to_string(s)), s);
  EXPECT_THROW(driftless_schedule_from_string("cosine"), ArgumentError);
}

TEST(Driftless, CumulativeVarianceMatchesQuadrature) {
  for (auto kind : {DriftlessSchedule::kConstant, DriftlessSchedule::kInverseSqrt, DriftlessSchedule::kInverse,
                    DriftlessSchedule::kLinearDecay}) {
    DriftlessSpec s;
    s.schedule = kind;
    s.eta = 0.7;
    s.t_end = 4.0;
    const int n = 200000;
    double h = 0.0;
    for (int i = 0; i < n; ++i) {
      const double e = s.eta_at((i + 0.5) * 3.0 / n);
      h += e * e * 3.0 / n;
    }
    EXPECT_NEAR(s.cumulative_variance(3.0), h, 1e-8) << to_string(kind);
  }
}

TEST(Driftless, ConstantScheduleAndFrozenShadow) {
  DriftlessSpec s;
  s.t_end = 2.0;
  s.dt = 2e-3;
  const DriftlessReport r = simulate_driftless(s, 20000, Rng(13));
  EXPECT_LE(std::abs(r.var_theta.mean - 2.0), 3.0 * r.var_theta.se);
  ASSERT_TRUE(r.example_bound.has_value());
  EXPECT_LE(r.var_ema.mean, *r.example_bound + 3.0 * r.var_ema.se);

  DriftlessSpec f;
  f.gamma = 1e-6;
  f.t_end = 1.0;
  f.dt = 1e-3;
  const DriftlessReport z = simulate_driftless(f, 5000, Rng(14));
  EXPECT_LT(z.var_ema.mean, 1e-3 * z.var_theta.mean);
}

TEST(Driftless, HalvingStepIsStable) {
  DriftlessSpec a;
  a.schedule = DriftlessSchedule::kInverseSqrt;
  a.t_end = 2.0;
  a.dt = 4e-3;
  DriftlessSpec b = a;
  b.dt = 2e-3;
  const DriftlessReport ra = simulate_driftless(a, 20000, Rng(15));
  const DriftlessReport rb = simulate_driftless(b, 20000, Rng(15));
  EXPECT_LE(std::abs(ra.var_theta.mean - rb.var_theta.mean), 2.0 * ra.var_theta.se);
  EXPECT_LE(std::abs(ra.var_ema.mean - rb.var_ema.mean), 2.0 * ra.var_ema.se);
}

TEST(Tensorization, CoordinatesIndependentInThreeDims) {
  SgdMeanProcess p;
  p.eta = 0.2;
  p.sigma = 1.0;
  p.theta0 = {1.0, 0.0, -1.0};
  p.mu = {0.0, 0.0, 0.0};
  p.horizon = 50;
  const MseMonteCarlo mc = monte_carlo_mse(p, EmaConfig::fixed(1.0), 20000, Rng(16));
  const double want = 2.0 * closed_form_no_ema_mse(0.2, 1.0, 1.0, 50) + closed_form_no_ema_mse(0.2, 1.0, 0.0, 50);
  EXPECT_LE(std::abs(mc.raw.mean - want), 3.0 * mc.raw.se);
}

TEST(Jackknife, MeanAndVariance) {
  const Vector x{1.0, 2.0, 3.0, 4.0};
  const Estimate m = jackknife_mean(x);
  EXPECT_DOUBLE_EQ(m.mean, 2.5);
  // jackknife SE of the mean equals s / sqrt(n)
  EXPECT_NEAR(m.se, std::sqrt(5.0 / 3.0 / 4.0), 1e-12);
  EXPECT_NEAR(variance_estimate(x).mean, 5.0 / 3.0, 1e-12);
}
