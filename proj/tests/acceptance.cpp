// Runs the shipped presets and checks each acceptance criterion against
// oracles computed here, independently of the library code under test.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "gva/behavior_cloning.hpp"
#include "gva/experiments.hpp"
#include "gva/io.hpp"
#include "gva/linear_control.hpp"
#include "gva/stabilizers.hpp"

namespace fs = std::filesystem;
using namespace gva;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

struct Verdict {
  bool pass = true;
  std::vector<std::string> notes;

  void require(bool ok, const std::string& what) {
    if (!ok) {
      pass = false;
      notes.push_back("FAILED " + what);
    }
  }
  void note(const std::string& what) { notes.push_back(what); }
};

std::string fmt(const char* f, double a) {
  char buf[128];
  std::snprintf(buf, sizeof buf, f, a);
  return buf;
}
std::string fmt(const char* f, double a, double b) {
  char buf[160];
  std::snprintf(buf, sizeof buf, f, a, b);
  return buf;
}
std::string fmt(const char* f, double a, double b, double c) {
  char buf[200];
  std::snprintf(buf, sizeof buf, f, a, b, c);
  return buf;
}

double num(const CsvTable& t, std::size_t row, const std::string& col) {
  return parse_real(t.rows[row][t.index(col)]);
}

// ---- oracles ---------------------------------------------------------------

// E[e_T^2] for e_{t+1} = (1 - eta) e_t - eta sigma xi, e_0 = b.
double sgd_mse(double eta, double sigma, double b, std::size_t T) {
  double m = b * b;
  for (std::size_t t = 0; t < T; ++t) m = (1 - eta) * (1 - eta) * m + eta * eta * sigma * sigma;
  return m;
}

// Second moments of (e_T, EMA of e) with the shadow started at e_0.
struct Moments {
  double ee, es, ss;
};
Moments sgd_ema_moments(double eta, double gamma, double sigma, double b, std::size_t T) {
  Moments m{b * b, b * b, b * b};
  for (std::size_t t = 0; t < T; ++t) {
    const double ee1 = (1 - eta) * (1 - eta) * m.ee + eta * eta * sigma * sigma;
    const double s0e1 = (1 - eta) * m.es;
    const double es1 = (1 - gamma) * s0e1 + gamma * ee1;
    const double ss1 = (1 - gamma) * (1 - gamma) * m.ss + 2 * gamma * (1 - gamma) * s0e1 + gamma * gamma * ee1;
    m = {ee1, es1, ss1};
  }
  return m;
}

// Bounds on the EMA mean-squared error with constant eta and gamma.
std::pair<double, double> ema_bounds(double eta, double g, double sigma, double b, double T) {
  const double s2 = sigma * sigma, b2 = b * b, r2 = (g / eta) * (g / eta);
  double ub = 2 * b2 * std::pow(1 - g, 2 * T);
  if (g >= 2 * eta)
    ub += 4 * s2 * eta + 4 * b2 * std::pow(1 - eta, 2 * T);
  else if (eta >= 2 * g)
    ub += 4 * s2 * g + 4 * b2 * r2 * std::pow(1 - g, 2 * T);
  else
    ub += 16 * s2 * eta + 32 * b2 * std::pow(1 - eta / 4, 2 * T);
  double lb = b2 * std::pow(1 - g, 2 * T);
  if (g >= eta)
    lb += 0.25 * (s2 * eta + b2 * std::pow(1 - eta, 2 * (T - 1)));
  else
    lb += 0.25 * (s2 * g + b2 * r2 * std::pow(1 - g, 2 * (T - 1)));
  return {lb, ub};
}

// Chi-square CDFs with 3 and 5 degrees of freedom.
double chi2_3(double x) { return std::erf(std::sqrt(x / 2)) - std::sqrt(2 * x / M_PI) * std::exp(-x / 2); }
double chi2_5(double x) { return chi2_3(x) - std::sqrt(2 * x / M_PI) * std::exp(-x / 2) * x / 3; }

// Cliff reward regret and ball probability for e ~ N(0, v I_3):
// regret = C P(|e| > eps) + E[|e|^2; |e| <= eps].
struct CliffExact {
  double regret, p_inside;
};
CliffExact cliff_exact(double v, double eps, double C) {
  const double x = eps * eps / v;
  const double p = chi2_3(x);
  return {C * (1 - p) + v * 3 * chi2_5(x), p};
}

// Composite Simpson on [0, t].
double simpson(const std::function<double(double)>& f, double t, std::size_t n = 200000) {
  const double h = t / static_cast<double>(n);
  double s = f(0) + f(t);
  for (std::size_t i = 1; i < n; ++i) s += f(i * h) * (i % 2 ? 4.0 : 2.0);
  return s * h / 3;
}

// ---- preset runs -------------------------------------------------------------

struct PresetRun {
  RunOutcome outcome;
  double seconds = 0.0;
};

std::map<std::string, PresetRun> run_all(const fs::path& root, bool verbose) {
  std::vector<fs::path> files;
  for (const auto& e : fs::directory_iterator(preset_dir()))
    if (e.path().extension() == ".cfg") files.push_back(e.path());
  std::sort(files.begin(), files.end());
  std::map<std::string, PresetRun> out;
  for (const auto& f : files) {
    const auto t0 = Clock::now();
    PresetRun r;
    r.outcome = run_file(f, root / f.stem());
    r.seconds = seconds_since(t0);
    if (verbose)
      std::printf("  ran %-26s %7.1fs  %s\n", f.stem().string().c_str(), r.seconds,
                  r.outcome.passed() ? "checks ok" : "checks FAILED");
    std::fflush(stdout);
    out[f.stem().string()] = r;
  }
  return out;
}

// Lower median of one runs.csv column for a variant.
double runs_median(const CsvTable& runs, const std::string& variant, const std::string& col) {
  std::vector<double> v;
  for (std::size_t i = 0; i < runs.rows.size(); ++i)
    if (runs.rows[i][runs.index("variant")] == variant) v.push_back(num(runs, i, col));
  std::sort(v.begin(), v.end());
  return v.empty() ? NAN : v[(v.size() - 1) / 2];
}

// ---- criteria ----------------------------------------------------------------

Verdict c1_dare() {
  Verdict v;
  const auto t0 = Clock::now();
  const LinearSystem s = reference_marginal_system();
  const DareResult r = dare_solve(s.A, s.B, s.Q, s.R);
  const double secs = seconds_since(t0);
  const double want[2][2] = {{1.3867, 0.8250}, {0.8250, -1.3867}};
  double worst = 0.0;
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j) {
      const double rounded = std::round(r.K(i, j) * 1e4) / 1e4;
      v.require(std::abs(rounded - want[i][j]) < 1e-9, fmt("K(%g,%g) rounds to %.4f", i, j, rounded));
      worst = std::max(worst, std::abs(r.K(i, j) - want[i][j]));
    }
  v.require(secs < 5.0, fmt("runtime %.3fs < 5s", secs));
  v.note(fmt("K = [[%.5f, %.5f], ...]", r.K(0, 0), r.K(0, 1)) + fmt(", max |K - K_target| = %.2e, %.3fs", worst, secs));
  return v;
}

Verdict c2_raw_mse(const PresetRun& run) {
  Verdict v;
  const CsvTable t = read_csv(run.outcome.dir / "dt_ema.csv");
  std::size_t cells = 0;
  double worst_z = 0.0;
  for (std::size_t i = 0; i < t.rows.size(); ++i) {
    if (t.rows[i][t.index("check")] != "raw") continue;
    ++cells;
    const double eta = num(t, i, "eta"), b = num(t, i, "b"), sigma = num(t, i, "sigma");
    const auto T = static_cast<std::size_t>(num(t, i, "T"));
    const double exact = sgd_mse(eta, sigma, b, T);
    const double mc = num(t, i, "mc_mse_raw"), se = num(t, i, "se");
    v.require(std::abs(num(t, i, "closed_raw") - exact) <= 1e-12 * std::max(1.0, exact),
              fmt("closed form %.6g vs recursion %.6g", num(t, i, "closed_raw"), exact));
    const double z = std::abs(mc - exact) / se;
    worst_z = std::max(worst_z, z);
    v.require(z <= 3.0, fmt("eta=%g b=%g T=%g", eta, b, double(T)) + fmt(": |MC - exact| = %.3g SE", z));
  }
  v.require(cells == 12, fmt("12 grid cells, found %g", double(cells)));
  v.note(fmt("%g cells, worst |MC - exact| = %.2f SE", double(cells), worst_z));
  return v;
}

Verdict c3_ema_bounds(const PresetRun& run) {
  Verdict v;
  const CsvTable t = read_csv(run.outcome.dir / "dt_ema.csv");
  std::size_t cells = 0;
  double worst_z = 0.0, min_margin = 1e300;
  for (std::size_t i = 0; i < t.rows.size(); ++i) {
    if (t.rows[i][t.index("check")] != "ema") continue;
    ++cells;
    const double eta = num(t, i, "eta"), g = num(t, i, "gamma"), b = num(t, i, "b"), sigma = num(t, i, "sigma");
    const double T = num(t, i, "T");
    const std::string cell = fmt("eta=%g gamma=%g b=%g", eta, g, b);
    v.require(std::pow(1 - g, 2 * T) <= g, cell + ": (1-gamma)^(2T) <= gamma");
    const auto [lb, ub] = ema_bounds(eta, g, sigma, b, T);
    v.require(std::abs(lb - num(t, i, "lb_ema")) <= 1e-12 * std::max(1.0, lb) &&
                  std::abs(ub - num(t, i, "ub_ema")) <= 1e-12 * std::max(1.0, ub),
              cell + ": reported bounds match");
    const double mc = num(t, i, "mc_mse_ema"), se = num(t, i, "se_ema");
    v.require(lb <= mc && mc <= ub, cell + fmt(": %.4g <= %.4g <= %.4g", lb, mc, ub));
    const double exact = sgd_ema_moments(eta, g, sigma, b, static_cast<std::size_t>(T)).ss;
    v.require(lb <= exact && exact <= ub, cell + fmt(": exact %.4g in bounds", exact));
    const double z = std::abs(mc - exact) / se;
    worst_z = std::max(worst_z, z);
    v.require(z <= 4.0, cell + fmt(": MC vs exact moment recursion %.2f SE", z));
    min_margin = std::min({min_margin, mc / lb, ub / mc});
  }
  v.require(cells == 12, fmt("12 grid cells, found %g", double(cells)));
  v.note(fmt("%g cells, tightest bound ratio %.3f, worst |MC - exact| = %.2f SE", double(cells), min_margin, worst_z));
  return v;
}

Verdict c4_c5_cliff(const PresetRun& run, bool separation) {
  Verdict v;
  const double eta = 0.3, gamma = 0.005, eps = 0.5, C = 100.0;
  const std::size_t T = 5000;
  const CsvTable t = read_csv(run.outcome.dir / "cliff.csv");
  std::size_t raw = 0, ema = 1;
  if (t.rows[0][0] != "raw") std::swap(raw, ema);

  const Moments m = sgd_ema_moments(eta, gamma, 1.0, 0.0, T);
  const CliffExact ex_raw = cliff_exact(m.ee, eps, C);
  const CliffExact ex_ema = cliff_exact(m.ss, eps, C);

  if (separation) {
    const double r = num(t, raw, "regret"), r_se = num(t, raw, "se_regret");
    const double e = num(t, ema, "regret"), e_se = num(t, ema, "se_regret");
    v.require(r >= C / 2, fmt("raw regret %.3f >= %.1f", r, C / 2));
    v.require(e <= 1.0, fmt("ema regret %.4g <= 1", e));
    v.require(r / e >= 20.0, fmt("separation %.1f >= 20", r / e));
    v.require(std::abs(r - ex_raw.regret) <= 4 * r_se, fmt("raw regret MC %.3f vs exact %.3f", r, ex_raw.regret));
    v.require(std::abs(e - ex_ema.regret) <= 4 * e_se + 1e-12,
              fmt("ema regret MC %.5f vs exact %.5f", e, ex_ema.regret));
    v.require(run.seconds < 60.0, fmt("runtime %.1fs < 60s", run.seconds));
    v.note(fmt("raw %.2f (exact %.2f)", r, ex_raw.regret) + fmt(", ema %.4f (exact %.4f)", e, ex_ema.regret) +
           fmt(", factor %.0f, %.1fs", r / e, run.seconds));
  } else {
    const double p = num(t, raw, "p_inside"), se = num(t, raw, "se_p_inside");
    const double lo = 0.1 * gamma / eta;
    v.require(p >= lo && p <= 0.9, fmt("%.4g <= p_inside %.4f <= 0.9", lo, p));
    v.require(std::abs(p - ex_raw.p_inside) <= 4 * se, fmt("p_inside MC %.4f vs exact %.4f", p, ex_raw.p_inside));
    v.note(fmt("p_inside %.4f (exact %.4f), lower limit %.4g", p, ex_raw.p_inside, lo));
  }
  return v;
}

Verdict c6_ou(const PresetRun& run) {
  Verdict v;
  const double a = 1.0, g = 0.1, t_end = 5.0, theta0 = 1.0;
  const CsvTable t = read_csv(run.outcome.dir / "ou.csv");
  std::map<std::string, std::size_t> row;
  for (std::size_t i = 0; i < t.rows.size(); ++i) row[t.rows[i][0]] = i;

  const double mean_ema = theta0 * (std::exp(-g * t_end) + g / (g - a) * (std::exp(-a * t_end) - std::exp(-g * t_end)));
  const double var_theta = (1 - std::exp(-2 * a * t_end)) / (2 * a);
  // exact covariance of (theta, shadow) by RK4 on P' = M P + P M^T + diag(1, 0)
  double P[3] = {0, 0, 0};  // pp, ps, ss
  auto rhs = [&](const double* p, double* d) {
    d[0] = -2 * a * p[0] + 1.0;
    d[1] = -a * p[1] + g * (p[0] - p[1]);
    d[2] = 2 * g * (p[1] - p[2]);
  };
  const std::size_t steps = 50000;
  const double h = t_end / steps;
  for (std::size_t k = 0; k < steps; ++k) {
    double k1[3], k2[3], k3[3], k4[3], tmp[3];
    rhs(P, k1);
    for (int i = 0; i < 3; ++i) tmp[i] = P[i] + 0.5 * h * k1[i];
    rhs(tmp, k2);
    for (int i = 0; i < 3; ++i) tmp[i] = P[i] + 0.5 * h * k2[i];
    rhs(tmp, k3);
    for (int i = 0; i < 3; ++i) tmp[i] = P[i] + h * k3[i];
    rhs(tmp, k4);
    for (int i = 0; i < 3; ++i) P[i] += h / 6 * (k1[i] + 2 * k2[i] + 2 * k3[i] + k4[i]);
  }

  const std::size_t im = row.at("mean_ema"), iv = row.at("var_theta"), ie = row.at("var_ema");
  const double m = num(t, im, "empirical"), m_se = num(t, im, "se");
  const double vt = num(t, iv, "empirical"), vt_se = num(t, iv, "se");
  const double ve = num(t, ie, "empirical"), ve_se = num(t, ie, "se"), bound = num(t, ie, "analytic");
  v.require(std::abs(num(t, im, "analytic") - mean_ema) < 1e-12, "reported EMA mean formula");
  v.require(std::abs(m - mean_ema) <= 3 * m_se, fmt("mean(shadow) %.5f vs %.5f", m, mean_ema) + fmt(" (%.2f SE)", std::abs(m - mean_ema) / m_se));
  v.require(std::abs(vt - var_theta) <= 3 * vt_se, fmt("var(theta) %.5f vs %.5f", vt, var_theta));
  v.require(ve <= bound + 3 * ve_se, fmt("var(shadow) %.5f <= bound %.5f", ve, bound));
  v.require(P[2] <= bound, fmt("exact var(shadow) %.5f <= bound %.5f", P[2], bound));
  v.require(std::abs(ve - P[2]) <= 4 * ve_se, fmt("var(shadow) MC %.5f vs exact %.5f", ve, P[2]));
  v.require(run.seconds < 300.0, fmt("runtime %.1fs < 300s", run.seconds));
  v.note(fmt("mean %.4f vs %.4f", m, mean_ema) + fmt(", var(shadow) %.4f (exact %.4f) <= %.4f", ve, P[2], bound) +
         fmt(", %.1fs", run.seconds));
  return v;
}

Verdict c7_driftless(const PresetRun& run) {
  Verdict v;
  const double t_end = 10.0, g = 1.0;
  const std::map<std::string, std::function<double(double)>> eta{
      {"constant", [](double) { return 1.0; }},
      {"inverse_sqrt", [](double s) { return 1.0 / std::sqrt(1.0 + s); }},
      {"inverse", [](double s) { return 1.0 / (1.0 + s); }},
      {"linear_decay", [t_end](double s) { return 1.0 - s / t_end; }}};
  const CsvTable t = read_csv(run.outcome.dir / "driftless.csv");
  std::size_t bounded = 0;
  for (std::size_t i = 0; i < t.rows.size(); ++i) {
    const std::string name = t.rows[i][t.index("schedule")];
    const auto& f = eta.at(name);
    const double H = simpson([&](double s) { return f(s) * f(s); }, t_end);
    const double exact_ema = simpson(
        [&](double s) {
          const double k = 1 - std::exp(-g * (t_end - s));
          return f(s) * f(s) * k * k;
        },
        t_end);
    const double var = num(t, i, "var_theta"), se = num(t, i, "se_theta");
    const double ve = num(t, i, "var_ema"), se_e = num(t, i, "se_ema");
    const double jensen = num(t, i, "jensen_bound");
    v.require(std::abs(num(t, i, "h_t") - H) <= 1e-8 * H, name + ": H(t) matches quadrature");
    v.require(std::abs(var - H) <= 3 * se, name + fmt(": var %.4f vs H %.4f", var, H));
    v.require(ve <= jensen + 3 * se_e, name + fmt(": var_ema %.4f <= %.4f", ve, jensen));
    v.require(exact_ema <= jensen + 1e-9, name + fmt(": exact var_ema %.4f <= %.4f", exact_ema, jensen));
    v.require(std::abs(ve - exact_ema) <= 4 * se_e, name + fmt(": var_ema MC %.4f vs exact %.4f", ve, exact_ema));
    const std::string ex = t.rows[i][t.index("example_bound")];
    if (ex != "-") {
      ++bounded;
      const double eb = parse_real(ex);
      v.require(ve <= eb + 3 * se_e, name + fmt(": var_ema %.4f <= example bound %.4f", ve, eb));
    }
  }
  v.require(bounded >= 3, "three schedules carry an example bound");
  v.note(fmt("%g schedules, %g with example bounds", double(t.rows.size()), double(bounded)) +
         fmt(", %.1fs", run.seconds));
  return v;
}

Verdict c8_amplification(const PresetRun& run) {
  Verdict v;
  const double eps = 0.01;
  const std::size_t H = 500;
  auto closed = [&](double delta) {
    // 1-d, x_1 = 1: sum_h ((1 + delta)^{2(h-1)} - (1 - eps)^{2(h-1)}) as geometric sums
    const double q1 = (1 + delta) * (1 + delta), q0 = (1 - eps) * (1 - eps);
    auto geo = [H](double q) { return q == 1.0 ? double(H) : (std::pow(q, double(H)) - 1) / (q - 1); };
    return geo(q1) - geo(q0);
  };
  const CsvTable t = read_csv(run.outcome.dir / "amplification.csv");
  double g1 = NAN, g2 = NAN;
  for (std::size_t i = 0; i < t.rows.size(); ++i) {
    const double d = num(t, i, "delta"), gap = num(t, i, "gap");
    if (std::abs(d - 0.01) < 1e-12) g1 = gap;
    if (std::abs(d - 0.02) < 1e-12) {
      g2 = gap;
      const double c = closed(d);
      v.require(std::abs(gap - c) <= 1e-10 * std::abs(c), fmt("gap(0.02) %.10g vs closed form %.10g", gap, c));
    }
  }
  // the probe itself, outside the bundle
  const std::vector<double> eps_primes{0.02 + eps};
  const double direct = error_amplification_probe(1, eps, 1.0, eps_primes, H).at(0).gap;
  v.require(std::abs(direct - closed(0.02)) <= 1e-10 * std::abs(closed(0.02)), "direct probe matches closed form");
  const double ratio = g2 / g1, need = std::exp(0.005 * H * 0.9);
  v.require(ratio >= need, fmt("gap ratio %.4g >= %.4g", ratio, need));
  v.note(fmt("gap(0.02) = %.6g, ratio %.1f >= %.2f", g2, ratio, need));
  return v;
}

Verdict c9_marginal(const PresetRun& run) {
  Verdict v;
  const CsvTable runs = read_csv(run.outcome.dir / "runs.csv");
  const Config cfg = Config::load(run.outcome.dir / "config.cfg");
  v.require(cfg.reals("policy.hidden", {}).empty(), "linear imitator");
  const double j_max = runs_median(runs, "raw", "j_max");
  const double band = 0.02 * std::abs(j_max);
  const double loss = runs_median(runs, "raw", "loss_final");
  const double r_raw = runs_median(runs, "raw", "range_mid"), r_ema = runs_median(runs, "ema", "range_mid");
  const double d_mu = runs_median(runs, "ema", "mu_mid") - runs_median(runs, "raw", "mu_mid");
  v.require(loss <= 1e-6, fmt("final val loss %.3g <= 1e-6", loss));
  v.require(r_raw <= band, fmt("raw range_mid %.4g <= %.4g", r_raw, band));
  v.require(r_ema <= band, fmt("ema range_mid %.4g <= %.4g", r_ema, band));
  v.require(std::abs(d_mu) <= band, fmt("|d mu_mid| %.4g <= %.4g", std::abs(d_mu), band));
  v.require(runs.rows.size() == 6, "3 seeds x 2 variants");
  v.require(run.seconds < 600.0, fmt("runtime %.1fs < 600s", run.seconds));
  v.note(fmt("val loss %.2g, raw range %.3g, ema range %.3g", loss, r_raw, r_ema) +
         fmt(" (band %.2f), %.1fs", band, run.seconds));
  return v;
}

Verdict c10_spring_cliff(const PresetRun& run) {
  Verdict v;
  const CsvTable runs = read_csv(run.outcome.dir / "runs.csv");
  const double r_raw = runs_median(runs, "raw", "range_mid"), r_ema = runs_median(runs, "ema", "range_mid");
  const double m_raw = runs_median(runs, "raw", "mu_mid"), m_ema = runs_median(runs, "ema", "mu_mid");
  v.require(r_raw > 0.0, fmt("raw curve oscillates (range_mid %.4g > 0)", r_raw));
  v.require(r_ema <= 0.5 * r_raw, fmt("ema range_mid %.4g <= 0.5 * %.4g", r_ema, r_raw));
  v.require(m_ema >= m_raw, fmt("ema mu_mid %.4f >= raw %.4f", m_ema, m_raw));
  v.require(runs.rows.size() == 6, "3 seeds x 2 variants");
  v.require(run.seconds < 600.0, fmt("runtime %.1fs < 600s", run.seconds));
  v.note(fmt("range_mid raw %.2f / ema %.2f, mu_mid raw %.2f", r_raw, r_ema, m_raw) +
         fmt(" / ema %.2f, %.1fs", m_ema, run.seconds));
  return v;
}

Verdict c11_averaging() {
  Verdict v;
  const auto t0 = Clock::now();
  Rng root(2024);
  double worst = 0.0;
  const std::vector<double> alphas{0.1, 0.25, 0.5, 0.75, 1.0};
  for (std::size_t k = 0; k < 100; ++k) {
    Rng r = root.child(k);
    std::vector<ParamVector> s;
    const double shift = 10.0 * r.normal();
    for (std::size_t i = 0; i < 200; ++i) s.push_back(ParamVector{shift + r.normal()});

    const auto lj = filter_checkpoint_stream(s, AverageConfig{AverageConfig::Kind::kLacosteJulien, 1.0});
    for (std::size_t n = 1; n <= s.size(); ++n) {
      // weights proportional to 1, 2, ..., n
      double num_ = 0.0, den = 0.0;
      for (std::size_t j = 1; j <= n; ++j) {
        num_ += double(j) * s[j - 1][0];
        den += double(j);
      }
      worst = std::max(worst, std::abs(lj[n - 1][0] - num_ / den));
    }
    for (double alpha : alphas) {
      const auto suf = filter_checkpoint_stream(s, AverageConfig{AverageConfig::Kind::kSuffix, alpha});
      for (std::size_t n = 1; n <= s.size(); ++n) {
        // smallest integer window >= alpha n, computed without floating rounding for these alphas
        std::size_t w = 1;
        while (double(w) < alpha * double(n) - 1e-9) ++w;
        double sum = 0.0;
        for (std::size_t j = n - w; j < n; ++j) sum += s[j][0];
        worst = std::max(worst, std::abs(suf[n - 1][0] - sum / double(w)));
      }
    }
  }
  const double secs = seconds_since(t0);
  v.require(worst <= 1e-10, fmt("max deviation %.3g <= 1e-10", worst));
  v.require(secs < 5.0, fmt("runtime %.2fs < 5s", secs));
  v.note(fmt("100 streams x 200, LJ + %g suffix alphas, max deviation %.2g", double(alphas.size()), worst) +
         fmt(", %.2fs", secs));
  return v;
}

Verdict c12_gradients() {
  Verdict v;
  const auto t0 = Clock::now();
  Rng root(77);
  double worst = 0.0;
  for (std::size_t k = 0; k < 50; ++k) {
    Rng r = root.child(k);
    auto pick = [&r](std::size_t lo, std::size_t hi) {
      return lo + static_cast<std::size_t>(r.uniform() * double(hi - lo + 1)) % (hi - lo + 1);
    };
    MlpArch a;
    a.state_dim = pick(1, 4);
    a.action_dim = pick(1, 3);
    const std::size_t layers = pick(0, 2);
    for (std::size_t l = 0; l < layers; ++l) a.hidden.push_back(pick(1, 8));
    a.activation = r.uniform() < 0.5 ? Activation::kTanh : Activation::kRelu;
    a.bias = r.uniform() < 0.7;
    a.prev_action = r.uniform() < 0.3;
    ParamVector p(a.param_count());
    for (double& x : p) x = r.normal();
    std::vector<Sample> batch(pick(1, 6));
    for (auto& s : batch) {
      for (std::size_t i = 0; i < a.state_dim; ++i) s.x.push_back(r.normal());
      if (a.prev_action)
        for (std::size_t i = 0; i < a.action_dim; ++i) s.prev_u.push_back(r.normal());
      for (std::size_t i = 0; i < a.action_dim; ++i) s.u.push_back(r.normal());
    }
    const ParamVector g = mlp_grad(a, p, batch);
    double diff2 = 0.0, norm2 = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) {
      const double h = 1e-6 * std::max(1.0, std::abs(p[i]));
      ParamVector q = p;
      q[i] = p[i] + h;
      const double up = mlp_loss(a, q, batch);
      q[i] = p[i] - h;
      const double dn = mlp_loss(a, q, batch);
      const double fd = (up - dn) / (2 * h);
      diff2 += (g[i] - fd) * (g[i] - fd);
      norm2 += std::max(g[i] * g[i], fd * fd);
    }
    const double rel = std::sqrt(diff2) / std::max(std::sqrt(norm2), 1e-8);
    worst = std::max(worst, rel);
    v.require(rel <= 1e-4, fmt("network %g: relative error %.3g", double(k), rel));
  }
  const double secs = seconds_since(t0);
  v.require(secs < 30.0, fmt("runtime %.2fs < 30s", secs));
  v.note(fmt("50 networks, worst relative error %.2g, %.2fs", worst, secs));
  return v;
}

Verdict c13_determinism(const std::map<std::string, PresetRun>& first, const fs::path& second_root) {
  Verdict v;
  const auto second = run_all(second_root, false);
  for (const auto& [name, r] : first) {
    const auto it = second.find(name);
    if (it == second.end()) {
      v.require(false, name + " missing from the second pass");
      continue;
    }
    const std::string a = read_text(r.outcome.dir / "manifest.json");
    const std::string b = read_text(it->second.outcome.dir / "manifest.json");
    v.require(a == b, name + ": manifests differ");
  }
  v.note(fmt("%g presets, manifests byte-identical across two passes", double(first.size())));
  return v;
}

}  // namespace

int main() {
  const char* env = std::getenv("GVA_ACCEPTANCE_DIR");
  const fs::path root = env ? fs::path(env) : fs::current_path() / "acceptance_out";
  fs::create_directories(root);
  std::printf("presets from %s, bundles under %s\n", preset_dir().string().c_str(), root.string().c_str());

  std::vector<std::pair<std::string, Verdict>> results;
  auto record = [&](const std::string& name, const std::function<Verdict()>& f) {
    Verdict v;
    try {
      v = f();
    } catch (const std::exception& e) {
      v.require(false, std::string("exception: ") + e.what());
    }
    results.emplace_back(name, v);
  };

  record("1  DARE gain of the marginal system", c1_dare);

  std::map<std::string, PresetRun> runs;
  try {
    runs = run_all(root / "pass1", true);
  } catch (const std::exception& e) {
    std::printf("preset run failed: %s\n", e.what());
  }
  auto preset = [&](const std::string& n) -> const PresetRun& { return runs.at(n); };

  record("2  no-EMA MSE closed form", [&] {
    Verdict v = c2_raw_mse(preset("verify-dt-ema"));
    v.require(preset("verify-dt-ema").seconds < 60.0, fmt("runtime %.1fs < 60s", preset("verify-dt-ema").seconds));
    return v;
  });
  record("3  EMA MSE bounds", [&] {
    Verdict v = c3_ema_bounds(preset("verify-dt-ema"));
    v.require(preset("verify-dt-ema").seconds < 120.0, "runtime < 120s");
    return v;
  });
  record("4  cliff regret separation", [&] { return c4_c5_cliff(preset("verify-cliff"), true); });
  record("5  cliff ball probability", [&] { return c4_c5_cliff(preset("verify-cliff"), false); });
  record("6  OU with EMA", [&] { return c6_ou(preset("verify-ou")); });
  record("7  driftless schedules", [&] { return c7_driftless(preset("verify-driftless")); });
  record("8  error amplification", [&] { return c8_amplification(preset("verify-amplification")); });
  record("9  marginal LQR, no GVA", [&] { return c9_marginal(preset("lqr-marginal-linear")); });
  record("10 spring cliff GVA and EMA", [&] { return c10_spring_cliff(preset("lqr-cliff")); });
  record("11 averaging oracles", c11_averaging);
  record("12 MLP gradients", c12_gradients);
  record("13 determinism", [&] {
    Verdict v = c13_determinism(runs, root / "pass2");
    v.require(!runs.empty(), "presets ran");
    return v;
  });

  bool all = true;
  std::printf("\n");
  for (const auto& [name, v] : results) {
    all = all && v.pass;
    std::printf("%s  %s\n", v.pass ? "PASS" : "FAIL", name.c_str());
    for (const auto& n : v.notes) std::printf("        %s\n", n.c_str());
  }
  std::printf("\n%s\n", all ? "all criteria pass" : "some criteria FAILED");
  return all ? 0 : 1;
}
