#include "gva/experiments.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <limits>
#include <map>
#include <utility>

#include "json.hpp"

#include "gva/behavior_cloning.hpp"
#include "gva/errors.hpp"
#include "gva/gva_metrics.hpp"
#include "gva/linear_control.hpp"
#include "gva/mean_cliff.hpp"
#include "gva/numerics.hpp"
#include "gva/optim.hpp"
#include "gva/stabilizers.hpp"

#ifndef GVA_PRESET_DIR
#define GVA_PRESET_DIR "presets"
#endif

namespace gva {

namespace fs = std::filesystem;
using Json = nlohmann::ordered_json;

// ---------------------------------------------------------------------------
// Checks

namespace {

std::string short_real(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

}  // namespace

std::string Check::describe() const {
  std::string s = name + ": " + short_real(lhs) + " " + op + " ";
  if (op == "in")
    s += "[" + short_real(rhs) + ", " + short_real(rhs_hi) + "]";
  else
    s += short_real(rhs);
  return s + (pass ? "  ok" : "  FAILED");
}

Check check_le(std::string name, double lhs, double rhs) {
  return Check{std::move(name), lhs, "<=", rhs, 0.0, lhs <= rhs};
}

Check check_ge(std::string name, double lhs, double rhs) {
  return Check{std::move(name), lhs, ">=", rhs, 0.0, lhs >= rhs};
}

Check check_in(std::string name, double value, double lo, double hi) {
  return Check{std::move(name), value, "in", lo, hi, value >= lo && value <= hi};
}

bool RunOutcome::passed() const {
  return std::all_of(checks.begin(), checks.end(), [](const Check& c) { return c.pass; });
}

namespace {

// ---------------------------------------------------------------------------
// Bundle assembly

struct Bundle {
  std::vector<std::pair<std::string, std::string>> files;
  Json summary = Json::object();
  std::vector<Check> checks;

  void add(const std::string& name, std::string text) { files.emplace_back(name, std::move(text)); }
  void add(const std::string& name, const CsvTable& t) { add(name, t.to_string()); }
  void check(Check c) { checks.push_back(std::move(c)); }
};

struct Context {
  std::uint64_t seed = 0;
  bool plots = true;
};

using Job = std::function<void(Bundle&)>;

Json real_or_null(double v) { return std::isfinite(v) ? Json(v) : Json(nullptr); }

Json opt_json(const std::optional<double>& v) { return v ? real_or_null(*v) : Json(nullptr); }

Json estimate_json(const Estimate& e) { return Json{{"mean", real_or_null(e.mean)}, {"se", real_or_null(e.se)}}; }

Json checks_json(const std::vector<Check>& checks) {
  Json arr = Json::array();
  for (const auto& c : checks) {
    Json j{{"name", c.name}, {"lhs", real_or_null(c.lhs)}, {"op", c.op}, {"rhs", real_or_null(c.rhs)}};
    if (c.op == "in") j["rhs_hi"] = real_or_null(c.rhs_hi);
    j["pass"] = c.pass;
    arr.push_back(std::move(j));
  }
  return arr;
}

fs::path normalized_dir(const fs::path& dir) {
  fs::path d = dir.lexically_normal();
  if (d.filename().empty()) d = d.parent_path();
  return d;
}

void write_bundle(const fs::path& target, const Bundle& bundle, const std::string& config_text) {
  const fs::path dir = normalized_dir(target);
  fs::path parent = dir.parent_path();
  if (parent.empty()) parent = ".";
  fs::create_directories(parent);
  const fs::path tmp = parent / ("." + dir.filename().string() + ".partial");
  fs::remove_all(tmp);
  fs::create_directory(tmp);

  std::vector<std::pair<std::string, std::string>> files = bundle.files;
  files.emplace_back("config.cfg", config_text);
  Json summary = bundle.summary;
  summary["checks"] = checks_json(bundle.checks);
  summary["passed"] = std::all_of(bundle.checks.begin(), bundle.checks.end(), [](const Check& c) { return c.pass; });
  files.emplace_back("summary.json", summary.dump(2) + "\n");
  std::sort(files.begin(), files.end());

  Json listing = Json::array();
  for (const auto& [name, text] : files) {
    write_text(tmp / name, text);
    listing.push_back(Json{{"path", name}, {"sha256", sha256_hex(text)}, {"bytes", text.size()}});
  }
  write_text(tmp / "manifest.json", Json{{"files", listing}}.dump(2) + "\n");

  if (fs::exists(dir)) fs::remove_all(dir);
  fs::rename(tmp, dir);
}

// ---------------------------------------------------------------------------
// Shared config readers

EmaConfig read_ema(const Config& c, const std::string& s, const EmaConfig& def) {
  EmaConfig e = def;
  const std::string mode = c.string(s + ".mode", def.gamma_kind == EmaConfig::Gamma::kFixed ? "fixed" : "annealed");
  if (mode == "fixed") {
    e.gamma_kind = EmaConfig::Gamma::kFixed;
    e.gamma = c.real(s + ".gamma", def.gamma);
  } else if (mode == "annealed") {
    e.gamma_kind = EmaConfig::Gamma::kAnnealed;
    e.anneal_power = c.real(s + ".power", def.anneal_power);
    e.gamma_min = c.real(s + ".gamma_min", def.gamma_min);
  } else {
    throw ConfigError("key '" + s + ".mode': expected fixed or annealed, got '" + mode + "'");
  }
  e.burn_in = c.count(s + ".burn_in", def.burn_in);
  e.update_period = c.count(s + ".period", def.update_period);
  e.validate();
  return e;
}

LrSchedule read_schedule(const Config& c, const std::string& s, const std::string& def_kind, double def_lr,
                         std::size_t def_warmup) {
  const std::string kind = c.string(s + ".schedule", def_kind);
  const double lr = c.real(s + ".lr", def_lr);
  if (!(lr > 0.0)) throw ConfigError("key '" + s + ".lr': must be > 0");
  LrSchedule base = LrSchedule::constant(lr);
  if (kind == "constant") {
  } else if (kind == "inverse") {
    base = LrSchedule::inverse(lr);
  } else if (kind == "inverse_sqrt") {
    base = LrSchedule::inverse_sqrt(lr);
  } else if (kind == "power_decay") {
    base = LrSchedule::power_decay(lr, c.real(s + ".power", 1.0));
  } else {
    throw ConfigError("key '" + s + ".schedule': unknown schedule '" + kind + "'");
  }
  const std::size_t warmup = c.count(s + ".warmup", def_warmup);
  return warmup > 0 ? LrSchedule::linear_warmup_then(base, warmup) : base;
}

std::size_t positive_count(const Config& c, const std::string& key, std::size_t def) {
  const std::size_t v = c.count(key, def);
  if (v == 0) throw ConfigError("key '" + key + "': must be >= 1");
  return v;
}

double fraction_in(const Config& c, const std::string& key, double def, double lo, double hi) {
  const double v = c.real(key, def);
  if (!(v > lo && v < hi))
    throw ConfigError("key '" + key + "': must lie in (" + short_real(lo) + ", " + short_real(hi) + ")");
  return v;
}

// ---------------------------------------------------------------------------
// verify-dt-ema

std::size_t forgetting_horizon(double gamma, std::size_t minimum) {
  // smallest T with (1 - gamma)^(2T) <= gamma
  const auto t = static_cast<std::size_t>(std::ceil(std::log(gamma) / (2.0 * std::log1p(-gamma))));
  return std::max(t, minimum);
}

Job prepare_dt_ema(const Config& c, const Context& ctx) {
  const auto raw_etas = c.reals("raw.etas", {0.05, 0.1, 0.3});
  const auto raw_bs = c.reals("raw.b", {0.0, 1.0});
  const auto raw_ts = c.reals("raw.horizons", {50, 500});
  const double raw_sigma = c.real("raw.sigma", 1.0);
  const std::size_t raw_trials = c.count("raw.trials", 100000);
  const auto ema_etas = c.reals("ema.etas", {0.3, 0.1});
  const auto ema_gammas = c.reals("ema.gammas", {0.01, 0.05, 0.2});
  const auto ema_bs = c.reals("ema.b", {0.0, 1.0});
  const double ema_sigma = c.real("ema.sigma", 1.0);
  const std::size_t min_t = c.count("ema.min_horizon", 500);
  const std::size_t ema_trials = c.count("ema.trials", 100000);
  const double z = c.real("checks.z", 3.0);

  for (double e : raw_etas)
    if (!(e > 0.0 && e < 1.0)) throw ConfigError("raw.etas: every eta must lie in (0, 1)");
  for (double t : raw_ts)
    if (!(t >= 1.0) || t != std::floor(t)) throw ConfigError("raw.horizons: positive integers required");
  for (double e : ema_etas)
    if (!(e > 0.0 && e <= 0.5)) throw ConfigError("ema.etas: every eta must lie in (0, 1/2]");
  for (double g : ema_gammas)
    if (!(g > 0.0 && g <= 0.5)) throw ConfigError("ema.gammas: every gamma must lie in (0, 1/2]");
  if (raw_trials < 2 || ema_trials < 2) throw ConfigError("trials must be >= 2");
  if (!(raw_sigma >= 0.0) || !(ema_sigma >= 0.0)) throw ConfigError("sigma must be >= 0");

  return [=](Bundle& b) {
    const Rng root(ctx.seed);
    CsvTable t;
    t.header = {"check", "eta",        "gamma",  "b",      "T",      "sigma", "mc_mse_raw",
                "se",    "closed_raw", "mc_mse_ema", "se_ema", "lb_ema", "ub_ema", "pass"};
    std::uint64_t cell = 0;
    for (double eta : raw_etas)
      for (double bb : raw_bs)
        for (double tt : raw_ts) {
          SgdMeanProcess p;
          p.eta = eta;
          p.sigma = raw_sigma;
          p.theta0 = {bb};
          p.mu = {0.0};
          p.horizon = static_cast<std::size_t>(tt);
          const MseMonteCarlo mc = monte_carlo_mse(p, EmaConfig::fixed(1.0), raw_trials, root.child(cell++));
          const double closed = closed_form_no_ema_mse(eta, raw_sigma, bb, p.horizon);
          Check ch = check_le("raw eta=" + short_real(eta) + " b=" + short_real(bb) + " T=" + short_real(tt) +
                                  " |mc - closed|",
                              std::abs(mc.raw.mean - closed), z * mc.raw.se);
          t.add_row({"raw", format_real(eta), "-", format_real(bb), std::to_string(p.horizon), format_real(raw_sigma),
                     format_real(mc.raw.mean), format_real(mc.raw.se), format_real(closed), "-", "-", "-", "-",
                     ch.pass ? "1" : "0"});
          b.check(std::move(ch));
        }
    for (double eta : ema_etas)
      for (double g : ema_gammas)
        for (double bb : ema_bs) {
          SgdMeanProcess p;
          p.eta = eta;
          p.sigma = ema_sigma;
          p.theta0 = {bb};
          p.mu = {0.0};
          p.horizon = forgetting_horizon(g, min_t);
          const MseMonteCarlo mc = monte_carlo_mse(p, EmaConfig::fixed(g), ema_trials, root.child(cell++));
          const MseBounds bounds = ema_mse_bounds(eta, g, ema_sigma, bb, p.horizon);
          const double closed = closed_form_no_ema_mse(eta, ema_sigma, bb, p.horizon);
          Check ch = check_in("ema eta=" + short_real(eta) + " gamma=" + short_real(g) + " b=" + short_real(bb) +
                                  " T=" + std::to_string(p.horizon) + " mc mse",
                              mc.ema.mean, bounds.lower, bounds.upper);
          t.add_row({"ema", format_real(eta), format_real(g), format_real(bb), std::to_string(p.horizon),
                     format_real(ema_sigma), format_real(mc.raw.mean), format_real(mc.raw.se), format_real(closed),
                     format_real(mc.ema.mean), format_real(mc.ema.se), format_real(bounds.lower),
                     format_real(bounds.upper), ch.pass ? "1" : "0"});
          b.check(std::move(ch));
        }
    b.add("dt_ema.csv", t);
    b.summary["cells"] = t.rows.size();
  };
}

// ---------------------------------------------------------------------------
// verify-cliff

struct CliffSetup {
  SgdMeanProcess proc;
  CliffSpec spec;
  EmaConfig ema;
};

CliffSetup read_cliff_setup(const Config& c) {
  CliffSetup s;
  const std::size_t d = positive_count(c, "process.dim", 3);
  s.proc.eta = c.real("process.eta", 0.3);
  s.proc.sigma = c.real("process.sigma", 1.0);
  const double b0 = c.real("process.b", 0.0);
  s.proc.horizon = positive_count(c, "process.horizon", 5000);
  s.proc.mu.assign(d, 0.0);
  s.proc.theta0.assign(d, 0.0);
  s.proc.theta0[0] = b0;
  s.spec.mu = s.proc.mu;
  s.spec.epsilon = c.real("cliff.epsilon", 0.5);
  s.spec.penalty = c.real("cliff.penalty", 100.0);
  s.ema = read_ema(c, "ema", EmaConfig::fixed(0.005));
  s.proc.validate();
  s.spec.validate();
  return s;
}

Json cliff_stats_json(const CliffStats& s) {
  return Json{{"bc_loss", estimate_json(s.bc_loss)},
              {"reward", estimate_json(s.reward)},
              {"regret", estimate_json(s.regret)},
              {"p_inside", estimate_json(s.p_inside)},
              {"p_small_regret", estimate_json(s.p_small_regret)}};
}

Job prepare_cliff(const Config& c, const Context& ctx) {
  const CliffSetup s = read_cliff_setup(c);
  const std::size_t trials = c.count("trials", 10000);
  if (trials < 100) throw ConfigError("key 'trials': must be >= 100");
  if (s.ema.gamma_kind == EmaConfig::Gamma::kFixed &&
      std::pow(1.0 - s.ema.gamma, 2.0 * static_cast<double>(s.proc.horizon)) > s.ema.gamma)
    throw ConfigError("process.horizon too short: need (1 - gamma)^(2T) <= gamma");
  const auto offsets = c.reals("gaussian.offsets", {0.0, 0.0, 0.0, 0.4});
  const auto variances = c.reals("gaussian.variances", {5.0 / 3.0, 0.005 / 3.0, 0.0, 0.0});
  const std::size_t g_trials = c.count("gaussian.trials", 100000);
  if (offsets.size() != variances.size()) throw ConfigError("gaussian.offsets and gaussian.variances differ in length");
  if (g_trials < 100) throw ConfigError("key 'gaussian.trials': must be >= 100");
  for (double v : variances)
    if (!(v >= 0.0)) throw ConfigError("gaussian.variances: must be >= 0");
  const double min_regret = c.real("checks.min_raw_regret", s.spec.penalty / 2.0);
  const double max_ema_regret = c.real("checks.max_ema_regret", 1.0);
  const double min_sep = c.real("checks.min_separation", 20.0);
  const double inside_factor = c.real("checks.min_inside_factor", 0.1);
  const double max_inside = c.real("checks.max_inside", 0.9);

  return [=](Bundle& b) {
    const Rng root(ctx.seed);
    const CliffMonteCarlo mc = monte_carlo_cliff(s.proc, s.spec, s.ema, trials, root.child(0));
    CsvTable t;
    t.header = {"variant", "bc_loss", "se_bc_loss", "regret", "se_regret", "p_inside", "se_p_inside",
                "p_small_regret", "se_p_small_regret"};
    for (const auto& [name, st] : {std::pair{"raw", mc.raw}, std::pair{"ema", mc.ema}})
      t.add_row({name, format_real(st.bc_loss.mean), format_real(st.bc_loss.se), format_real(st.regret.mean),
                 format_real(st.regret.se), format_real(st.p_inside.mean), format_real(st.p_inside.se),
                 format_real(st.p_small_regret.mean), format_real(st.p_small_regret.se)});
    b.add("cliff.csv", t);
    b.summary["raw"] = cliff_stats_json(mc.raw);
    b.summary["ema"] = cliff_stats_json(mc.ema);

    const double sep = mc.ema.regret.mean > 0.0 ? mc.raw.regret.mean / mc.ema.regret.mean
                                                : std::numeric_limits<double>::infinity();
    b.check(check_ge("raw regret E[J(mu) - J(theta_T)]", mc.raw.regret.mean, min_regret));
    b.check(check_le("ema regret E[J(mu) - J(ema_T)]", mc.ema.regret.mean, max_ema_regret));
    b.check(check_ge("separation raw regret / ema regret", sep, min_sep));
    const double gamma = s.ema.gamma_kind == EmaConfig::Gamma::kFixed ? s.ema.gamma : s.ema.gamma_min;
    b.check(check_in("raw P[|theta_T - mu| <= eps]", mc.raw.p_inside.mean, inside_factor * gamma / s.proc.eta,
                     max_inside));

    CsvTable g;
    g.header = {"offset", "variance", "expected_bc_loss", "bc_loss", "se_bc_loss", "regret", "se_regret",
                "p_outside", "regime", "ok", "fitted_c3"};
    for (std::size_t i = 0; i < offsets.size(); ++i) {
      const GaussianCliffReport r = gaussian_cliff_check(offsets[i], variances[i], s.spec, g_trials, root.child(1 + i));
      const std::string regime = r.high_loss_regime ? "high" : (r.low_loss_regime ? "low" : "-");
      const bool ok = r.high_loss_ok && r.low_loss_ok;
      g.add_row({format_real(offsets[i]), format_real(variances[i]), format_real(r.expected_bc_loss),
                 format_real(r.bc_loss.mean), format_real(r.bc_loss.se), format_real(r.regret.mean),
                 format_real(r.regret.se), format_real(r.p_outside.mean), regime, ok ? "1" : "0",
                 r.fitted_c3 ? format_real(*r.fitted_c3) : "-"});
      const std::string tag = "gaussian offset=" + short_real(offsets[i]) + " var=" + short_real(variances[i]);
      if (r.high_loss_regime) b.check(check_ge(tag + " regret (high loss)", r.regret.mean, s.spec.penalty / 2.0));
      if (r.low_loss_regime) b.check(check_le(tag + " regret (low loss)", r.regret.mean, 3.0 * r.expected_bc_loss));
    }
    b.add("gaussian_cliff.csv", g);
  };
}

// ---------------------------------------------------------------------------
// verify-ou

Job prepare_ou(const Config& c, const Context& ctx) {
  OuSpec spec;
  spec.a = c.real("ou.a", 1.0);
  spec.gamma = c.real("ou.gamma", 0.1);
  spec.theta0 = c.real("ou.theta0", 1.0);
  spec.mu = c.real("ou.mu", 0.0);
  spec.t_end = c.real("ou.t_end", 5.0);
  spec.dt = c.real("ou.dt", 1e-3);
  spec.validate();
  const std::size_t trials = c.count("trials", 100000);
  if (trials < 2) throw ConfigError("key 'trials': must be >= 2");
  const double z = c.real("checks.z", 3.0);
  CliffSpec sep_spec;
  sep_spec.mu = {spec.mu};
  sep_spec.epsilon = c.real("separation.epsilon", 0.1);
  sep_spec.penalty = c.real("separation.penalty", 100.0);
  sep_spec.validate();
  const double sep_theta0 = c.real("separation.theta0", spec.mu);
  const double sep_t = c.real("separation.t", 50.0);
  const auto sep_gammas = c.reals("separation.gammas", {1e-4, 3e-4, 1e-3, 3e-3, 0.01, 0.03, 0.1, 0.3, 3.0});

  return [=](Bundle& b) {
    const OuReport r = simulate_ou_ema(spec, trials, Rng(ctx.seed).child(0));
    CsvTable t;
    t.header = {"quantity", "empirical", "se", "analytic"};
    t.add_row({"mean_theta", format_real(r.mean_theta.mean), format_real(r.mean_theta.se),
               format_real(r.analytic.mean_theta)});
    t.add_row({"var_theta", format_real(r.var_theta.mean), format_real(r.var_theta.se),
               format_real(r.analytic.var_theta)});
    t.add_row({"mean_ema", format_real(r.mean_ema.mean), format_real(r.mean_ema.se), format_real(r.analytic.mean_ema)});
    t.add_row({"var_ema", format_real(r.var_ema.mean), format_real(r.var_ema.se),
               format_real(r.analytic.var_ema_bound)});
    b.add("ou.csv", t);
    b.summary["steps"] = r.steps;
    b.summary["trials"] = r.trials;

    b.check(check_le("|mean(ema_t) - analytic mean|", std::abs(r.mean_ema.mean - r.analytic.mean_ema),
                     z * r.mean_ema.se));
    b.check(check_le("|mean(theta_t) - analytic mean|", std::abs(r.mean_theta.mean - r.analytic.mean_theta),
                     z * r.mean_theta.se));
    b.check(check_le("|var(theta_t) - (1 - e^{-2at})/(2a)|", std::abs(r.var_theta.mean - r.analytic.var_theta),
                     z * r.var_theta.se));
    b.check(check_le("var(ema_t) vs bound + z se", r.var_ema.mean, r.analytic.var_ema_bound + z * r.var_ema.se));

    const auto rows = ou_separation_search(spec.a, sep_theta0, sep_spec, sep_t, sep_gammas);
    CsvTable s;
    s.header = {"gamma", "raw_regret", "ema_regret", "separated"};
    bool any = false;
    for (const auto& row : rows) {
      s.add_row({format_real(row.gamma), format_real(row.raw_regret), format_real(row.ema_regret),
                 row.separated ? "1" : "0"});
      any = any || row.separated;
    }
    b.add("ou_separation.csv", s);
    b.summary["separation_found"] = any;
  };
}

// ---------------------------------------------------------------------------
// verify-driftless

Job prepare_driftless(const Config& c, const Context& ctx) {
  const auto names = c.strings("driftless.schedules", {"constant", "inverse_sqrt", "inverse", "linear_decay"});
  DriftlessSpec base;
  base.eta = c.real("driftless.eta", 1.0);
  base.gamma = c.real("driftless.gamma", 1.0);
  base.t_end = c.real("driftless.t_end", 10.0);
  base.dt = c.real("driftless.dt", 1e-3);
  const std::size_t trials = c.count("trials", 100000);
  if (trials < 2) throw ConfigError("key 'trials': must be >= 2");
  const double z = c.real("checks.z", 3.0);
  std::vector<DriftlessSpec> specs;
  for (const auto& n : names) {
    DriftlessSpec s = base;
    try {
      s.schedule = driftless_schedule_from_string(n);
    } catch (const ArgumentError& e) {
      throw ConfigError(std::string("driftless.schedules: ") + e.what());
    }
    s.validate();
    specs.push_back(s);
  }
  if (specs.empty()) throw ConfigError("driftless.schedules: at least one schedule required");

  return [=](Bundle& b) {
    const auto reports = simulate_driftless_batch(specs, trials, Rng(ctx.seed).child(0));
    CsvTable t;
    t.header = {"schedule", "var_theta", "se_theta", "h_t", "var_ema", "se_ema", "jensen_bound", "example_bound"};
    for (const auto& r : reports) {
      const std::string name = to_string(r.schedule);
      t.add_row({name, format_real(r.var_theta.mean), format_real(r.var_theta.se), format_real(r.h_t),
                 format_real(r.var_ema.mean), format_real(r.var_ema.se), format_real(r.jensen_bound),
                 r.example_bound ? format_real(*r.example_bound) : "-"});
      b.check(check_le(name + " |var(theta_t) - H(t)|", std::abs(r.var_theta.mean - r.h_t), z * r.var_theta.se));
      b.check(check_le(name + " var(ema_t) vs integral bound", r.var_ema.mean, r.jensen_bound + z * r.var_ema.se));
      if (r.example_bound)
        b.check(check_le(name + " var(ema_t) vs closed-form bound", r.var_ema.mean,
                         *r.example_bound + z * r.var_ema.se));
    }
    b.add("driftless.csv", t);
  };
}

// ---------------------------------------------------------------------------
// verify-amplification

double amplification_closed_form(std::size_t d, double eps, double delta, std::size_t horizon) {
  double s = 0.0;
  for (std::size_t h = 1; h <= horizon; ++h) {
    const double k = 2.0 * static_cast<double>(h - 1);
    s += std::pow(1.0 + delta, k) - std::pow(1.0 - eps, k);
  }
  return static_cast<double>(d) * s;
}

Job prepare_amplification(const Config& c, const Context& ctx) {
  const std::size_t d = positive_count(c, "probe.dim", 1);
  const double eps = c.real("probe.eps", 0.01);
  const double gain = c.real("probe.c", 1.0);
  const std::size_t horizon = positive_count(c, "probe.horizon", 500);
  auto deltas = c.reals("probe.deltas", {-0.02, -0.01, 0.0, 0.005, 0.01, 0.015, 0.02});
  const double lo_delta = c.real("checks.ratio_low", 0.01);
  const double hi_delta = c.real("checks.ratio_high", 0.02);
  const double rel_tol = c.real("checks.rel_tol", 1e-10);
  const double ratio_slack = c.real("checks.ratio_slack", 0.9);
  const double m_eps = c.real("margin.eps", 1e-3);
  const std::size_t m_grid = positive_count(c, "margin.grid", 50);
  const std::size_t m_horizon = positive_count(c, "margin.horizon", 1000);
  if (!(eps > 0.0) || !(gain > 0.0)) throw ConfigError("probe.eps and probe.c must be > 0");
  if (!(m_eps > 0.0)) throw ConfigError("margin.eps must be > 0");
  std::sort(deltas.begin(), deltas.end());
  auto has = [&](double v) { return std::any_of(deltas.begin(), deltas.end(), [&](double x) { return x == v; }); };
  if (!has(lo_delta) || !has(hi_delta) || !(hi_delta > lo_delta))
    throw ConfigError("probe.deltas must contain checks.ratio_low < checks.ratio_high");

  return [=](Bundle& b) {
    std::vector<double> eps_primes;
    for (double dl : deltas) eps_primes.push_back((eps + dl) / gain);
    const auto rows = error_amplification_probe(d, eps, gain, eps_primes, horizon);
    CsvTable t;
    t.header = {"eps_prime", "delta", "gap", "closed_form", "rel_err"};
    double g_lo = 0.0, g_hi = 0.0, prev = -std::numeric_limits<double>::infinity();
    bool monotone = true;
    for (std::size_t i = 0; i < rows.size(); ++i) {
      const auto& r = rows[i];
      const double closed = amplification_closed_form(d, eps, deltas[i], horizon);
      const double rel = closed == 0.0 ? std::abs(r.gap) : std::abs(r.gap - closed) / std::abs(closed);
      t.add_row({format_real(r.eps_prime), format_real(deltas[i]), format_real(r.gap), format_real(closed),
                 format_real(rel)});
      b.check(check_le("delta=" + short_real(deltas[i]) + " gap relative error", rel, rel_tol));
      if (deltas[i] <= -eps) b.check(check_le("delta=" + short_real(deltas[i]) + " gap", r.gap, 0.0));
      if (deltas[i] > 0.0) {
        monotone = monotone && r.gap >= prev;
        prev = r.gap;
      }
      if (deltas[i] == lo_delta) g_lo = r.gap;
      if (deltas[i] == hi_delta) g_hi = r.gap;
    }
    b.add("amplification.csv", t);
    const double target = std::exp((hi_delta - lo_delta) / 2.0 * static_cast<double>(horizon) * ratio_slack);
    b.check(check_ge("gap(" + short_real(hi_delta) + ") / gap(" + short_real(lo_delta) + ")", g_hi / g_lo, target));
    b.check(check_ge("gap monotone in eps' for delta > 0", monotone ? 1.0 : 0.0, 1.0));

    LinearSystem sys = reference_marginal_system(m_horizon);
    sys.sigma_w = 0.0;
    const DareResult dare = dare_solve(sys.A, sys.B, sys.Q, sys.R);
    Rng rng = Rng(ctx.seed).child(0);
    const Vector x0{1.0, 0.0};
    const StabilityMarginReport m = stability_margin_check(sys, dare.K, dare.K, m_eps, x0, m_grid, rng);
    CsvTable mt;
    mt.header = {"index", "gap", "bound"};
    for (std::size_t i = 0; i < m.gaps.size(); ++i)
      mt.add_row({std::to_string(i), format_real(m.gaps[i]), format_real(m.bound)});
    b.add("stability_margin.csv", mt);
    b.summary["margin"] = Json{{"closed_loop_norm", m.closed_loop_norm},
                               {"radius", m.radius},
                               {"constant", m.constant},
                               {"bound", m.bound},
                               {"max_gap", m.max_gap}};
    b.check(check_le("stable closed loop |A + B K*|_op", m.closed_loop_norm, 1.0 + 1e-8));
    b.check(check_le("max reward gap inside the margin", m.max_gap, m.bound));
  };
}

// ---------------------------------------------------------------------------
// mean-cliff

Job prepare_mean_cliff(const Config& c, const Context& ctx) {
  const CliffSetup s = read_cliff_setup(c);
  const std::size_t trials = c.count("mc.trials", 10000);
  const std::size_t blocks = positive_count(c, "mc.blocks", 10);
  const std::size_t every = positive_count(c, "mc.record_every", 250);
  if (trials < 2 * blocks) throw ConfigError("mc.trials must be at least twice mc.blocks");

  return [=](Bundle& b) {
    const Rng root(ctx.seed);
    std::vector<std::size_t> times;
    for (std::size_t t = 0; t <= s.proc.horizon; t += every) times.push_back(t);
    if (times.back() != s.proc.horizon) times.push_back(s.proc.horizon);
    // per trial, per recorded time: raw mse, ema mse, raw J, ema J, inside (raw), inside (ema)
    constexpr std::size_t kFields = 6;
    std::vector<std::vector<double>> values(times.size() * kFields, std::vector<double>(trials));
    const std::size_t d = s.proc.dim();
    for (std::size_t k = 0; k < trials; ++k) {
      Rng rng = root.child(k);
      EmaFilter ema(s.ema);
      Vector theta = s.proc.theta0;
      ema.update(0, theta);
      std::size_t next = 0;
      for (std::size_t t = 0;; ++t) {
        if (t == times[next]) {
          const auto& sh = ema.shadow();
          const double raw_sq = 2.0 * bc_loss(theta, s.proc.mu);
          const double ema_sq = 2.0 * bc_loss(sh, s.proc.mu);
          const double eps2 = s.spec.epsilon * s.spec.epsilon;
          const double v[kFields] = {raw_sq,
                                     ema_sq,
                                     cliff_reward(theta, s.spec),
                                     cliff_reward(sh, s.spec),
                                     raw_sq <= eps2 ? 1.0 : 0.0,
                                     ema_sq <= eps2 ? 1.0 : 0.0};
          for (std::size_t f = 0; f < kFields; ++f) values[next * kFields + f][k] = v[f];
          if (++next == times.size()) break;
        }
        for (std::size_t i = 0; i < d; ++i)
          theta[i] -= s.proc.eta * (theta[i] - s.proc.mu[i] + s.proc.sigma * rng.normal());
        ema.update(t + 1, theta);
      }
    }

    CsvTable t;
    t.header = {"trial_block", "t",           "raw_mse",    "ema_mse",   "raw_J",     "ema_J",
                "p_inside",    "p_inside_ema", "se_raw_mse", "se_ema_mse", "se_raw_J", "se_ema_J",
                "se_p_inside", "se_p_inside_ema"};
    for (std::size_t blk = 0; blk < blocks; ++blk) {
      const std::size_t lo = blk * trials / blocks, hi = (blk + 1) * trials / blocks;
      for (std::size_t i = 0; i < times.size(); ++i) {
        std::vector<std::string> row{std::to_string(blk), std::to_string(times[i])};
        std::vector<std::string> ses;
        for (std::size_t f = 0; f < kFields; ++f) {
          const auto& col = values[i * kFields + f];
          const Estimate e = jackknife_mean(std::span<const double>(col).subspan(lo, hi - lo));
          row.push_back(format_real(e.mean));
          ses.push_back(format_real(e.se));
        }
        row.insert(row.end(), ses.begin(), ses.end());
        t.add_row(std::move(row));
      }
    }
    b.add("mean_cliff.csv", t);

    const std::size_t last = times.size() - 1;
    const char* names[kFields] = {"raw_mse", "ema_mse", "raw_J", "ema_J", "p_inside", "p_inside_ema"};
    Json fin = Json::object();
    for (std::size_t f = 0; f < kFields; ++f) fin[names[f]] = estimate_json(jackknife_mean(values[last * kFields + f]));
    b.summary["final"] = fin;
    b.summary["horizon"] = s.proc.horizon;

    if (ctx.plots) {
      std::vector<double> x, raw, ema;
      for (std::size_t i = 0; i < times.size(); ++i) {
        x.push_back(static_cast<double>(times[i]));
        raw.push_back(jackknife_mean(values[i * kFields]).mean);
        ema.push_back(jackknife_mean(values[i * kFields + 1]).mean);
      }
      Panel p{"mean squared error", "t", "E|theta - mu|^2", {}};
      p.series.push_back(Series{"raw", x, raw, false, "#1f77b4"});
      p.series.push_back(Series{"ema", x, ema, false, "#d62728"});
      b.add("mse.svg", render_svg({p}));
    }
  };
}

// ---------------------------------------------------------------------------
// bench-averaging

Job prepare_averaging(const Config& c, const Context& ctx) {
  const std::size_t streams = positive_count(c, "streams", 100);
  const std::size_t length = positive_count(c, "length", 200);
  const auto alphas = c.reals("suffix_alphas", {0.125, 0.25, 0.5, 1.0});
  const double tol = c.real("checks.tolerance", 1e-10);
  for (double a : alphas)
    if (!(a > 0.0 && a <= 1.0)) throw ConfigError("suffix_alphas: every alpha must lie in (0, 1]");

  return [=](Bundle& b) {
    const Rng root(ctx.seed);
    CsvTable t;
    t.header = {"stream", "scheme", "max_abs_err"};
    std::map<std::string, double> worst;
    for (std::size_t sidx = 0; sidx < streams; ++sidx) {
      Rng rng = root.child(sidx);
      const double offset = 10.0 * rng.normal();
      std::vector<double> xs(length);
      for (auto& x : xs) x = offset + rng.normal();

      std::vector<std::pair<std::string, AverageConfig>> schemes{
          {"uniform", AverageConfig{AverageConfig::Kind::kUniform, 1.0}},
          {"lacoste_julien", AverageConfig{AverageConfig::Kind::kLacosteJulien, 1.0}}};
      for (double a : alphas) schemes.push_back({"suffix_" + short_real(a), AverageConfig{AverageConfig::Kind::kSuffix, a}});

      for (const auto& [name, cfg] : schemes) {
        AverageFilter f(cfg);
        double err = 0.0;
        for (std::size_t n = 1; n <= length; ++n) {
          const double got = f.update(n, std::span<const double>(&xs[n - 1], 1))[0];
          double want = 0.0;
          if (cfg.kind == AverageConfig::Kind::kUniform) {
            for (std::size_t k = 0; k < n; ++k) want += xs[k];
            want /= static_cast<double>(n);
          } else if (cfg.kind == AverageConfig::Kind::kLacosteJulien) {
            // weight of iterate k (1-based) is 2k / (n (n + 1))
            for (std::size_t k = 1; k <= n; ++k) want += 2.0 * static_cast<double>(k) * xs[k - 1];
            want /= static_cast<double>(n) * static_cast<double>(n + 1);
          } else {
            const auto w = static_cast<std::size_t>(std::ceil(cfg.alpha * static_cast<double>(n) - 1e-12));
            for (std::size_t k = n - w; k < n; ++k) want += xs[k];
            want /= static_cast<double>(w);
          }
          err = std::max(err, std::abs(got - want));
        }
        t.add_row({std::to_string(sidx), name, format_real(err)});
        worst[name] = std::max(worst[name], err);
      }
    }
    b.add("averaging.csv", t);
    for (const auto& [name, err] : worst) {
      b.summary["max_abs_err"][name] = err;
      b.check(check_le(name + " max |filter - brute force|", err, tol));
    }
  };
}

// ---------------------------------------------------------------------------
// lqr-marginal / lqr-cliff

struct LqrSetup {
  LinearSystem system;
  LinearPolicy expert;
  std::size_t runs = 3;
  std::size_t trajectories = 1000;
  double val_fraction = 0.1;
  double label_noise = 0.0;
  MlpArch arch;
  bool random_init = false;
  TrainConfig train;
};

void read_bc_common(const Config& c, LqrSetup& s, const TrainConfig& def, const std::string& def_opt,
                    const std::string& def_schedule, double def_lr, std::size_t def_warmup, double def_wd,
                    const EmaConfig& def_ema) {
  s.runs = positive_count(c, "runs", 3);
  s.trajectories = c.count("data.trajectories", 1000);
  if (s.trajectories < 2) throw ConfigError("key 'data.trajectories': must be >= 2");
  s.val_fraction = fraction_in(c, "data.val_fraction", 0.1, 0.0, 1.0);
  s.label_noise = c.real("data.label_noise", s.label_noise);
  if (!(s.label_noise >= 0.0)) throw ConfigError("key 'data.label_noise': must be >= 0");

  s.arch.state_dim = s.system.state_dim();
  s.arch.action_dim = s.system.action_dim();
  for (double h : c.reals("policy.hidden", {})) {
    if (!(h >= 1.0) || h != std::floor(h)) throw ConfigError("policy.hidden: widths must be positive integers");
    s.arch.hidden.push_back(static_cast<std::size_t>(h));
  }
  try {
    s.arch.activation = activation_from_string(c.string("policy.activation", "relu"));
  } catch (const ArgumentError& e) {
    throw ConfigError(std::string("policy.activation: ") + e.what());
  }
  s.arch.bias = c.boolean("policy.bias", !s.arch.hidden.empty());
  s.arch.prev_action = c.boolean("policy.prev_action", false);
  s.arch.validate();
  const std::string init = c.string("policy.init", s.arch.hidden.empty() ? "zeros" : "uniform");
  if (init != "zeros" && init != "uniform") throw ConfigError("key 'policy.init': expected zeros or uniform");
  s.random_init = init == "uniform";

  TrainConfig& t = s.train;
  t = def;
  t.epochs = c.count("train.epochs", def.epochs);
  t.batch_size = positive_count(c, "train.batch_size", def.batch_size);
  const std::string opt = c.string("train.optimizer", def_opt);
  if (opt == "sgd") {
    t.optimizer.kind = OptimizerSpec::Kind::kSgd;
    t.optimizer.beta1 = c.real("train.momentum", 0.0);
  } else if (opt == "adamw") {
    t.optimizer.kind = OptimizerSpec::Kind::kAdamW;
    t.optimizer.beta1 = c.real("train.beta1", 0.9);
    t.optimizer.beta2 = c.real("train.beta2", 0.999);
    t.optimizer.eps = c.real("train.adam_eps", 1e-8);
    t.optimizer.weight_decay = c.real("train.weight_decay", def_wd);
  } else {
    throw ConfigError("key 'train.optimizer': expected sgd or adamw, got '" + opt + "'");
  }
  t.schedule = read_schedule(c, "train", def_schedule, def_lr, def_warmup);
  t.ema = read_ema(c, "ema", def_ema);
  t.eval_every = positive_count(c, "train.eval_every", def.eval_every);
  t.eval_seeds = positive_count(c, "train.eval_seeds", def.eval_seeds);
  t.evaluate = true;
  t.validate();
  try {
    (void)t.optimizer.make();
  } catch (const ArgumentError& e) {
    throw ConfigError(std::string("train: ") + e.what());
  }
}

struct RunCurves {
  GvaSummary raw;
  GvaSummary ema;
};

Json summary_json(const GvaSummary& s) {
  return Json{{"j_max", real_or_null(s.j_max)},       {"j_final", real_or_null(s.j_final)},
              {"loss_min", real_or_null(s.loss_min)}, {"loss_final", real_or_null(s.loss_final)},
              {"mu_mid", real_or_null(s.mu_mid)},     {"range_mid", real_or_null(s.range_mid)},
              {"t_early", opt_json(s.t_early)},       {"t_worse", opt_json(s.t_worse)}};
}

const std::vector<std::string> kSummaryFields{"j_max",  "j_final",   "loss_min", "loss_final",
                                              "mu_mid", "range_mid", "t_early",  "t_worse"};

std::vector<std::string> summary_cells(const GvaSummary& s) {
  auto opt = [](const std::optional<double>& v) { return v ? format_real(*v) : std::string("-"); };
  return {format_real(s.j_max),  format_real(s.j_final),   format_real(s.loss_min), format_real(s.loss_final),
          format_real(s.mu_mid), format_real(s.range_mid), opt(s.t_early),          opt(s.t_worse)};
}

GvaSummary summary_from_cells(const CsvTable& t, const std::vector<std::string>& row) {
  auto get = [&](const std::string& f) { return row.at(t.index(f)); };
  auto opt = [&](const std::string& f) -> std::optional<double> {
    const std::string v = get(f);
    if (v == "-") return std::nullopt;
    return parse_real(v);
  };
  GvaSummary s;
  s.j_max = parse_real(get("j_max"));
  s.j_final = parse_real(get("j_final"));
  s.loss_min = parse_real(get("loss_min"));
  s.loss_final = parse_real(get("loss_final"));
  s.mu_mid = parse_real(get("mu_mid"));
  s.range_mid = parse_real(get("range_mid"));
  s.t_early = opt("t_early");
  s.t_worse = opt("t_worse");
  return s;
}

Panel curve_panel(const std::string& title, const CsvTable& t, const std::string& column, const std::string& run) {
  Panel p{title, "step", "reward", {}};
  const std::size_t ir = t.index("run"), is = t.index("step"), ic = t.index(column);
  Series pts{"per seed", {}, {}, true, "#9ecae1"};
  std::map<double, std::pair<double, std::size_t>> by_step;
  for (const auto& row : t.rows) {
    if (row[ir] != run) continue;
    const double x = parse_real(row[is]), y = parse_real(row[ic]);
    if (!std::isfinite(y)) continue;
    pts.x.push_back(x);
    pts.y.push_back(y);
    auto& acc = by_step[x];
    acc.first += y;
    ++acc.second;
  }
  Series mean{"mean", {}, {}, false, "#d62728"};
  for (const auto& [x, acc] : by_step) {
    mean.x.push_back(x);
    mean.y.push_back(acc.first / static_cast<double>(acc.second));
  }
  p.series = {pts, mean};
  return p;
}

Panel loss_panel(const CsvTable& t, const std::string& run) {
  Panel p{"validation loss", "step", "log10 val loss", {}};
  const std::size_t ir = t.index("run"), is = t.index("step");
  Series raw{"raw", {}, {}, false, "#1f77b4"}, ema{"ema", {}, {}, false, "#d62728"};
  for (const auto& row : t.rows) {
    if (row[ir] != run) continue;
    const double x = parse_real(row[is]);
    const double a = parse_real(row[t.index("val_loss")]), e = parse_real(row[t.index("ema_val_loss")]);
    if (a > 0.0 && std::isfinite(a)) {
      raw.x.push_back(x);
      raw.y.push_back(std::log10(a));
    }
    if (e > 0.0 && std::isfinite(e)) {
      ema.x.push_back(x);
      ema.y.push_back(std::log10(e));
    }
  }
  p.series = {raw, ema};
  return p;
}

using LqrChecks = std::function<void(Bundle&, const GvaSummary& raw, const GvaSummary& ema)>;

void run_lqr(const LqrSetup& s, const Context& ctx, Bundle& b, const LqrChecks& checks) {
  const Rng root(ctx.seed);
  CsvTable curves, points, runs;
  curves.header = {"run", "step", "eval_seed", "raw_reward", "ema_reward"};
  points.header = {"run",      "step",     "train_loss",   "val_loss",     "ema_val_loss",
                   "raw_mean", "ema_mean", "raw_diverged", "ema_diverged"};
  runs.header = {"run", "variant"};
  runs.header.insert(runs.header.end(), kSummaryFields.begin(), kSummaryFields.end());

  const EvalResult expert_eval = eval_checkpoint(s.system, as_policy(s.expert), s.train.eval_seeds, root.child(1u << 20).next_u64());
  b.summary["expert_gain"] = s.expert.K.to_rows();
  b.summary["expert_mean_reward"] = real_or_null(expert_eval.mean);

  std::vector<GvaSummary> raw_sums, ema_sums;
  Json per_run = Json::array();
  for (std::size_t r = 0; r < s.runs; ++r) {
    const Rng rr = root.child(r);
    Rng data_rng = rr.child(0);
    const Dataset data =
        collect_expert_data(s.system, s.expert, s.trajectories, data_rng, s.val_fraction, s.label_noise);
    Rng init_rng = rr.child(1);
    const MlpPolicy init = s.random_init ? MlpPolicy::init(s.arch, init_rng) : MlpPolicy::zeros(s.arch);
    TrainConfig tc = s.train;
    Rng eval_rng = rr.child(3);
    tc.eval_seed = eval_rng.next_u64();
    const TrainResult res = train_bc(data, init, tc, s.system, rr.child(2));

    TrainingCurve raw_curve, ema_curve;
    const std::string rs = std::to_string(r);
    for (const auto& rec : res.records) {
      const EvalResult& re = *rec.raw_eval;
      const EvalResult& ee = *rec.ema_eval;
      for (std::size_t k = 0; k < re.rewards.size(); ++k)
        curves.add_row({rs, std::to_string(rec.step), std::to_string(k), format_real(re.rewards[k]),
                        format_real(ee.rewards[k])});
      points.add_row({rs, std::to_string(rec.step), format_real(rec.train_loss), format_real(rec.val_loss),
                      format_real(rec.ema_val_loss), format_real(re.mean), format_real(ee.mean),
                      std::to_string(re.diverged_count), std::to_string(ee.diverged_count)});
      raw_curve.push_back(CurvePoint{rec.step, re.mean, rec.val_loss});
      ema_curve.push_back(CurvePoint{rec.step, ee.mean, rec.ema_val_loss});
    }
    const GvaSummary rsum = summarize(raw_curve), esum = summarize(ema_curve);
    raw_sums.push_back(rsum);
    ema_sums.push_back(esum);
    for (const auto& [variant, sum] : {std::pair{"raw", rsum}, std::pair{"ema", esum}}) {
      std::vector<std::string> row{rs, variant};
      auto cells = summary_cells(sum);
      row.insert(row.end(), cells.begin(), cells.end());
      runs.add_row(std::move(row));
    }
    per_run.push_back(Json{{"run", r},
                           {"steps", res.total_steps},
                           {"final_gain", Json(res.final_params)},
                           {"raw", summary_json(rsum)},
                           {"ema", summary_json(esum)}});
  }

  const GvaSummary raw_med = median_over_seeds(raw_sums), ema_med = median_over_seeds(ema_sums);
  const Comparison cmp = compare(raw_med, ema_med);
  b.add("curves.csv", curves);
  b.add("checkpoints.csv", points);
  b.add("runs.csv", runs);
  b.add("summary.csv", summary_table({SummaryRow{"raw", raw_med, std::nullopt},
                                      SummaryRow{"ema", ema_med, cmp.oscillation_ratio}}));
  b.summary["runs"] = per_run;
  b.summary["median"] = Json{{"raw", summary_json(raw_med)}, {"ema", summary_json(ema_med)}};
  b.summary["comparison"] = Json{{"oscillation_ratio", real_or_null(cmp.oscillation_ratio)},
                                 {"d_j_max", cmp.d_j_max},
                                 {"d_j_final", cmp.d_j_final},
                                 {"d_loss_min", cmp.d_loss_min},
                                 {"d_loss_final", cmp.d_loss_final},
                                 {"d_mu_mid", cmp.d_mu_mid},
                                 {"d_range_mid", cmp.d_range_mid},
                                 {"d_t_early", opt_json(cmp.d_t_early)},
                                 {"d_t_worse", opt_json(cmp.d_t_worse)}};
  checks(b, raw_med, ema_med);

  if (ctx.plots) {
    b.add("curves.svg", render_svg({curve_panel("no EMA", curves, "raw_reward", "0"),
                                    curve_panel("EMA", curves, "ema_reward", "0")}));
    b.add("loss.svg", render_svg({loss_panel(points, "0")}));
  }
}

LinearSystem read_marginal_system(const Config& c, const Rng& root) {
  const std::string type = c.string("system.type", "reference");
  const std::size_t horizon = positive_count(c, "system.horizon", 1000);
  LinearSystem s;
  if (type == "reference") {
    s = reference_marginal_system(horizon);
  } else if (type == "random") {
    const std::size_t d = positive_count(c, "system.dim", 2);
    const double alpha = c.real("system.alpha", 2.5);
    if (!(alpha > 0.0)) throw ConfigError("key 'system.alpha': must be > 0");
    Rng rng = root.child(1u << 21);
    s = make_marginally_stable(rng, d, alpha, horizon);
  } else if (type == "custom") {
    s.A = c.matrix("system.A", Matrix());
    s.B = c.matrix("system.B", Matrix());
    s.Q = c.matrix("system.Q", Matrix::identity(s.A.rows()));
    s.R = c.matrix("system.R", Matrix::identity(s.B.cols()));
    s.horizon = horizon;
    if (s.A.empty() || s.B.empty()) throw ConfigError("system.type = custom needs system.A and system.B");
  } else {
    throw ConfigError("key 'system.type': expected reference, random or custom, got '" + type + "'");
  }
  s.sigma_w = c.real("system.sigma_w", 1e-3);
  s.init.kind = InitSampler::Kind::kGaussian;
  s.init.scale = c.real("system.init_scale", 1.0);
  try {
    s.validate();
  } catch (const ArgumentError& e) {
    throw ConfigError(std::string("system: ") + e.what());
  }
  return s;
}

Job prepare_lqr_marginal(const Config& c, const Context& ctx) {
  LqrSetup s;
  s.system = read_marginal_system(c, Rng(ctx.seed));
  TrainConfig def;
  def.epochs = 20;
  def.batch_size = 32;
  def.eval_every = 2500;
  def.eval_seeds = 20;
  read_bc_common(c, s, def, "adamw", "power_decay", 3e-4, 50, 0.01, EmaConfig::annealed(1.0, 1e-4, 50));
  const double max_val = c.real("checks.max_final_val_loss", 1e-6);
  const double band = c.real("checks.max_range_fraction", 0.02);

  return [=](Bundle& b) {
    LqrSetup run = s;
    const DareResult dare = dare_solve(run.system.A, run.system.B, run.system.Q, run.system.R);
    run.expert.K = dare.K;
    b.summary["dare_iterations"] = dare.iterations;
    b.summary["dare_residual"] = dare.residual;
    run_lqr(run, ctx, b, [=](Bundle& bb, const GvaSummary& raw, const GvaSummary& ema) {
      const double scale = band * std::abs(raw.j_max);
      bb.check(check_le("median final val loss (raw)", raw.loss_final, max_val));
      bb.check(check_le("median range_mid (raw)", raw.range_mid, scale));
      bb.check(check_le("median range_mid (ema)", ema.range_mid, scale));
      bb.check(check_le("|mu_mid(ema) - mu_mid(raw)|", std::abs(ema.mu_mid - raw.mu_mid), scale));
    });
  };
}

Job prepare_lqr_cliff(const Config& c, const Context& ctx) {
  LqrSetup s;
  const double eta_time = c.real("system.eta", 0.1);
  const double kappa = c.real("system.kappa", -0.05);
  const std::size_t horizon = positive_count(c, "system.horizon", 1000);
  if (!(eta_time > 0.0)) throw ConfigError("key 'system.eta': must be > 0");
  if (!(kappa < 0.0)) throw ConfigError("key 'system.kappa': must be < 0");
  s.system = make_spring_cliff(eta_time, kappa, horizon);
  s.system.sigma_w = c.real("system.sigma_w", 0.0);
  const std::string init = c.string("system.init", "arc");
  if (init == "arc") {
    const auto arc = c.reals("system.arc", {-84.0, 90.0});
    if (arc.size() != 2 || !(arc[0] < arc[1])) throw ConfigError("key 'system.arc': expected [lo, hi] degrees");
    s.system.init.kind = InitSampler::Kind::kArc;
    s.system.init.arc_lo_deg = arc[0];
    s.system.init.arc_hi_deg = arc[1];
  } else if (init == "circle") {
    s.system.init.kind = InitSampler::Kind::kUnitCircle;
  } else {
    throw ConfigError("key 'system.init': expected arc or circle");
  }
  try {
    s.system.validate();
  } catch (const ArgumentError& e) {
    throw ConfigError(std::string("system: ") + e.what());
  }
  s.label_noise = 1.0;
  TrainConfig def;
  def.epochs = 1;
  def.batch_size = 8;
  def.eval_every = 500;
  def.eval_seeds = 20;
  read_bc_common(c, s, def, "sgd", "constant", 0.3, 0, 0.0, EmaConfig::annealed(1.0, 1e-4, 20000));
  const double max_ratio = c.real("checks.max_oscillation_ratio", 0.5);

  return [=](Bundle& b) {
    LqrSetup run = s;
    run.expert.K = dare_solve(run.system.A, run.system.B, run.system.Q, run.system.R).K;
    run_lqr(run, ctx, b, [=](Bundle& bb, const GvaSummary& raw, const GvaSummary& ema) {
      bb.check(check_le("median range_mid(ema)", ema.range_mid, max_ratio * raw.range_mid));
      bb.check(check_ge("median mu_mid(ema)", ema.mu_mid, raw.mu_mid));
    });
  };
}

// ---------------------------------------------------------------------------

using Preparer = Job (*)(const Config&, const Context&);

const std::vector<std::pair<std::string, Preparer>>& registry() {
  static const std::vector<std::pair<std::string, Preparer>> r{
      {"verify-dt-ema", prepare_dt_ema},       {"verify-cliff", prepare_cliff},
      {"verify-ou", prepare_ou},               {"verify-driftless", prepare_driftless},
      {"verify-amplification", prepare_amplification}, {"mean-cliff", prepare_mean_cliff},
      {"lqr-marginal", prepare_lqr_marginal},  {"lqr-cliff", prepare_lqr_cliff},
      {"bench-averaging", prepare_averaging}};
  return r;
}

fs::path checked_relative(const std::string& rel) {
  const fs::path p(rel);
  if (rel.empty() || p.is_absolute()) throw ConfigError("key 'output': must be a non-empty relative path");
  for (const auto& part : p)
    if (part == "..") throw ConfigError("key 'output': '..' is not allowed");
  return p;
}

}  // namespace

const std::vector<std::string>& experiment_kinds() {
  static const std::vector<std::string> kinds = [] {
    std::vector<std::string> k;
    for (const auto& [name, _] : registry()) k.push_back(name);
    return k;
  }();
  return kinds;
}

fs::path output_root() {
  const char* env = std::getenv("GVA_OUTPUT_ROOT");
  return (env && *env) ? fs::path(env) : fs::path("results");
}

RunOutcome run(const Config& config, const std::optional<fs::path>& out) {
  const std::string kind = config.string("kind", "");
  const auto it = std::find_if(registry().begin(), registry().end(), [&](const auto& e) { return e.first == kind; });
  if (it == registry().end()) {
    std::string known;
    for (const auto& k : experiment_kinds()) known += (known.empty() ? "" : ", ") + k;
    throw ConfigError("key 'kind': unknown experiment '" + kind + "' (expected one of " + known + ")");
  }
  Context ctx;
  const std::int64_t seed = config.integer("seed", 0);
  if (seed < 0) throw ConfigError("key 'seed': must be >= 0");
  ctx.seed = static_cast<std::uint64_t>(seed);
  ctx.plots = config.boolean("plots", true);
  const fs::path rel = checked_relative(config.string("output", kind));
  (void)config.string("label", kind);

  Job job;
  try {
    job = it->second(config, ctx);
  } catch (const ArgumentError& e) {
    throw ConfigError(e.what());
  }
  config.reject_unknown();

  Bundle bundle;
  job(bundle);
  const fs::path dir = out ? *out : output_root() / rel;
  write_bundle(dir, bundle, config.effective().serialize());
  return RunOutcome{kind, normalized_dir(dir), bundle.checks};
}

RunOutcome run_file(const fs::path& path, const std::optional<fs::path>& out) {
  return run(Config::load(path), out);
}

fs::path preset_dir() {
  const char* env = std::getenv("GVA_PRESET_DIR");
  return (env && *env) ? fs::path(env) : fs::path(GVA_PRESET_DIR);
}

const std::vector<std::string>& verify_suites() {
  static const std::vector<std::string> s{"dt-ema", "cliff", "ou", "driftless", "amplification", "averaging"};
  return s;
}

fs::path verify_preset(const std::string& suite) {
  if (std::find(verify_suites().begin(), verify_suites().end(), suite) == verify_suites().end())
    throw ArgumentError("unknown verify suite '" + suite + "'");
  return preset_dir() / (suite == "averaging" ? std::string("bench-averaging.cfg") : "verify-" + suite + ".cfg");
}

// ---------------------------------------------------------------------------
// plot / report

const std::vector<std::string>& plot_specs() {
  static const std::vector<std::string> s{"curves", "loss", "mse", "amplification"};
  return s;
}

std::string plot_csv(const CsvTable& t, const std::string& spec) {
  if (spec == "curves") {
    for (const char* col : {"run", "step", "raw_reward", "ema_reward"}) (void)t.index(col);
    const std::string run = t.rows.empty() ? "0" : t.rows.front()[t.index("run")];
    return render_svg({curve_panel("no EMA", t, "raw_reward", run), curve_panel("EMA", t, "ema_reward", run)});
  }
  if (spec == "loss") {
    for (const char* col : {"run", "step", "val_loss", "ema_val_loss"}) (void)t.index(col);
    const std::string run = t.rows.empty() ? "0" : t.rows.front()[t.index("run")];
    return render_svg({loss_panel(t, run)});
  }
  if (spec == "mse") {
    const std::size_t it = t.index("t"), ir = t.index("raw_mse"), ie = t.index("ema_mse");
    std::map<double, std::array<double, 3>> acc;
    for (const auto& row : t.rows) {
      auto& a = acc[parse_real(row[it])];
      a[0] += parse_real(row[ir]);
      a[1] += parse_real(row[ie]);
      a[2] += 1.0;
    }
    Series raw{"raw", {}, {}, false, "#1f77b4"}, ema{"ema", {}, {}, false, "#d62728"};
    for (const auto& [x, a] : acc) {
      raw.x.push_back(x);
      raw.y.push_back(a[0] / a[2]);
      ema.x.push_back(x);
      ema.y.push_back(a[1] / a[2]);
    }
    return render_svg({Panel{"mean squared error", "t", "E|theta - mu|^2", {raw, ema}}});
  }
  if (spec == "amplification") {
    const std::size_t id = t.index("delta"), ig = t.index("gap");
    Series s{"gap", {}, {}, false, "#1f77b4"};
    for (const auto& row : t.rows) {
      const double g = parse_real(row[ig]);
      s.x.push_back(parse_real(row[id]));
      s.y.push_back(g > 0.0 ? std::log10(g) : std::numeric_limits<double>::quiet_NaN());
    }
    std::vector<double> x, y;
    for (std::size_t i = 0; i < s.x.size(); ++i)
      if (std::isfinite(s.y[i])) {
        x.push_back(s.x[i]);
        y.push_back(s.y[i]);
      }
    s.x = x;
    s.y = y;
    return render_svg({Panel{"error amplification", "delta", "log10 reward gap", {s}}});
  }
  throw ArgumentError("unknown plot spec '" + spec + "'");
}

CsvTable report(const std::vector<fs::path>& bundles, const std::string& variant) {
  if (bundles.empty()) throw ArgumentError("report: no bundles given");
  if (variant != "raw" && variant != "ema" && variant != "both")
    throw ArgumentError("report: variant must be raw, ema or both");
  std::string kind;
  std::vector<std::string> labels;
  std::map<std::string, std::map<std::string, std::vector<GvaSummary>>> groups;
  for (const auto& dir : bundles) {
    const Config cfg = Config::load(dir / "config.cfg");
    const std::string k = cfg.string("kind", "");
    if (k != "lqr-marginal" && k != "lqr-cliff")
      throw ArgumentError("report: " + dir.string() + " is a '" + k + "' bundle; only lqr bundles carry curves");
    if (!kind.empty() && k != kind) throw ArgumentError("report: mixed experiment kinds '" + kind + "' and '" + k + "'");
    kind = k;
    const std::string label = cfg.string("label", k);
    if (std::find(labels.begin(), labels.end(), label) == labels.end()) labels.push_back(label);
    const CsvTable runs = read_csv(dir / "runs.csv");
    const std::size_t iv = runs.index("variant");
    for (const auto& row : runs.rows) groups[label][row[iv]].push_back(summary_from_cells(runs, row));
  }
  std::vector<SummaryRow> rows;
  for (const auto& label : labels) {
    auto& g = groups[label];
    if (g["raw"].empty() || g["ema"].empty()) throw DataError("report: bundle '" + label + "' lacks raw or ema rows");
    const GvaSummary raw = median_over_seeds(g["raw"]), ema = median_over_seeds(g["ema"]);
    if (variant != "ema") rows.push_back(SummaryRow{label + "/raw", raw, std::nullopt});
    if (variant != "raw")
      rows.push_back(SummaryRow{label + "/ema", ema,
                                variant == "both" ? std::optional<double>(compare(raw, ema).oscillation_ratio)
                                                  : std::nullopt});
  }
  return summary_table(rows);
}

}  // namespace gva
