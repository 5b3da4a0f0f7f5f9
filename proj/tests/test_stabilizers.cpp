#include <gtest/gtest.h>

#include <cmath>

#include "gva/errors.hpp"
#include "gva/stabilizers.hpp"

using namespace gva;

namespace {

std::vector<ParamVector> scalar_stream(Rng& r, std::size_t n, double offset = 0.0) {
  std::vector<ParamVector> s;
  for (std::size_t i = 0; i < n; ++i) s.push_back(ParamVector{offset + r.normal()});
  return s;
}

}  // namespace

TEST(Ema, GammaOneTracksIterate) {
  EmaFilter f(EmaConfig::fixed(1.0));
  Rng r(1);
  for (std::size_t t = 0; t < 20; ++t) {
    const ParamVector x{r.normal()};
    EXPECT_EQ(f.update(t, x), x);
  }
}

TEST(Ema, GammaZeroFreezes) {
  EmaFilter f(EmaConfig::fixed(0.0));
  f.update(0, ParamVector{3.0});
  for (std::size_t t = 1; t < 10; ++t) EXPECT_EQ(f.update(t, ParamVector{double(t)})[0], 3.0);
}

TEST(Ema, HandRecurrence) {
  EmaFilter f(EmaConfig::fixed(0.5));
  EXPECT_DOUBLE_EQ(f.update(0, ParamVector{0.0})[0], 0.0);
  EXPECT_DOUBLE_EQ(f.update(1, ParamVector{1.0})[0], 0.5);
  EXPECT_DOUBLE_EQ(f.update(2, ParamVector{1.0})[0], 0.75);
}

TEST(Ema, BurnInCopiesAndPeriodSkips) {
  EmaFilter f(EmaConfig::fixed(0.5, 3, 2));
  EXPECT_EQ(f.update(0, ParamVector{5.0})[0], 5.0);
  EXPECT_EQ(f.update(2, ParamVector{7.0})[0], 7.0);  // still burning in
  EXPECT_EQ(f.update(3, ParamVector{9.0})[0], 8.0);  // (t - B) % p == 0
  EXPECT_EQ(f.update(4, ParamVector{1.0})[0], 8.0);  // skipped
  EXPECT_EQ(f.update(5, ParamVector{0.0})[0], 4.0);
}

TEST(Ema, AnnealedGammaStaysInRange) {
  const EmaConfig c = EmaConfig::annealed(0.7, 1e-4, 10);
  for (std::size_t t = 10; t < 200000; t += 97) {
    const double g = c.gamma_at(t);
    EXPECT_GE(g, 1e-4);
    EXPECT_LE(g, 1.0);
  }
  EXPECT_EQ(c.gamma_at(10), 1.0);  // clock restarts at burn-in
}

TEST(Ema, Errors) {
  EmaFilter f(EmaConfig::fixed(0.5));
  f.update(3, ParamVector{1.0, 2.0});
  EXPECT_THROW(f.update(3, ParamVector{1.0, 2.0}), ArgumentError);
  EXPECT_THROW(f.update(4, ParamVector{1.0}), ArgumentError);
  EXPECT_THROW(EmaConfig::fixed(1.5), ArgumentError);
}

TEST(Average, SuffixFullWindowIsUniform) {
  Rng r(2);
  const auto s = scalar_stream(r, 60);
  AverageFilter suf(AverageConfig{AverageConfig::Kind::kSuffix, 1.0});
  AverageFilter uni(AverageConfig{AverageConfig::Kind::kUniform, 1.0});
  for (std::size_t t = 0; t < s.size(); ++t)
    EXPECT_NEAR(suf.update(t, s[t])[0], uni.update(t, s[t])[0], 1e-12);
}

TEST(Average, LacosteJulienFirstStepAndBruteForce) {
  Rng r(3);
  const auto s = scalar_stream(r, 50);
  AverageFilter lj(AverageConfig{AverageConfig::Kind::kLacosteJulien, 1.0});
  EXPECT_EQ(lj.update(1, s[0])[0], s[0][0]);
  double got = 0.0;
  for (std::size_t t = 1; t < s.size(); ++t) got = lj.update(t + 1, s[t])[0];
  // weights from the product formula: w_k = gamma_k prod_{j > k} (1 - gamma_j) = 2k / (T (T + 1))
  const double T = 50.0;
  double want = 0.0;
  for (std::size_t k = 1; k <= 50; ++k) {
    double w = 2.0 / (k + 1.0);
    for (std::size_t j = k + 1; j <= 50; ++j) w *= 1.0 - 2.0 / (j + 1.0);
    want += w * s[k - 1][0];
    EXPECT_NEAR(w, 2.0 * k / (T * (T + 1.0)), 1e-14);
  }
  EXPECT_NEAR(got, want, 1e-10);
}

TEST(Average, SuffixWindowSize) {
  AverageFilter f(AverageConfig{AverageConfig::Kind::kSuffix, 0.25});
  for (std::size_t n = 1; n <= 40; ++n) {
    f.update(n, ParamVector{double(n)});
    EXPECT_EQ(f.window_size(), static_cast<std::size_t>(std::ceil(0.25 * n)));
  }
}

TEST(Average, UniformLongStream) {
  Rng r(5);
  AverageFilter f(AverageConfig{AverageConfig::Kind::kUniform, 1.0});
  double sum = 0.0, got = 0.0;
  for (std::size_t t = 1; t <= 10000; ++t) {
    const double x = 100.0 + r.normal();
    sum += x;
    got = f.update(t, ParamVector{x})[0];
  }
  EXPECT_NEAR(got, sum / 10000.0, 1e-10);
}

TEST(FilterStream, SingletonAndConstant) {
  const std::vector<ParamVector> one{{4.0, -1.0}};
  EXPECT_EQ(filter_checkpoint_stream(one, EmaConfig::fixed(0.3)), one);
  const std::vector<ParamVector> c(30, ParamVector{2.5});
  for (const auto& v : filter_checkpoint_stream(c, EmaConfig::annealed(0.5, 1e-4))) EXPECT_DOUBLE_EQ(v[0], 2.5);
  for (const auto& v : filter_checkpoint_stream(c, AverageConfig{AverageConfig::Kind::kLacosteJulien, 1.0}))
    EXPECT_NEAR(v[0], 2.5, 1e-14);
  EXPECT_THROW(filter_checkpoint_stream({}, EmaConfig::fixed(0.3)), ArgumentError);
}

TEST(FilterStream, UnrolledSum) {
  Rng r(6);
  const auto s = scalar_stream(r, 80);
  const double g = 0.07;
  const auto out = filter_checkpoint_stream(s, EmaConfig::fixed(g));
  const std::size_t T = s.size() - 1;
  double want = std::pow(1.0 - g, double(T)) * s[0][0];
  for (std::size_t k = 1; k <= T; ++k) want += g * std::pow(1.0 - g, double(T - k)) * s[k][0];
  EXPECT_NEAR(out.back()[0], want, 1e-10);
}

TEST(FilterProperties, ConvexAndAffineEquivariant) {
  Rng r(7);
  const auto s = scalar_stream(r, 100);
  std::vector<ParamVector> t;
  const double a = 3.5, b = -2.0;
  for (const auto& v : s) t.push_back(ParamVector{a * v[0] + b});
  const std::vector<FilterConfig> configs{EmaConfig::fixed(0.1), EmaConfig::annealed(0.8, 1e-4, 5),
                                          AverageConfig{AverageConfig::Kind::kUniform, 1.0},
                                          AverageConfig{AverageConfig::Kind::kLacosteJulien, 1.0},
                                          AverageConfig{AverageConfig::Kind::kSuffix, 0.3}};
  for (const auto& cfg : configs) {
    const auto fs = filter_checkpoint_stream(s, cfg);
    const auto ft = filter_checkpoint_stream(t, cfg);
    double lo = s[0][0], hi = s[0][0];
    for (std::size_t i = 0; i < s.size(); ++i) {
      lo = std::min(lo, s[i][0]);
      hi = std::max(hi, s[i][0]);
      EXPECT_GE(fs[i][0], lo - 1e-12);
      EXPECT_LE(fs[i][0], hi + 1e-12);
      EXPECT_NEAR(ft[i][0], a * fs[i][0] + b, 1e-12 * std::max(1.0, std::abs(ft[i][0])) * 10);
    }
  }
}
