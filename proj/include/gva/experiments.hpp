#pragma once

// End-to-end studies driven by a Config, written as result bundles:
//
//   <dir>/config.cfg      effective configuration (defaults filled in)
//   <dir>/*.csv           tables
//   <dir>/summary.json    headline numbers and every check with both sides
//   <dir>/*.svg           plots, when enabled
//   <dir>/manifest.json   sha256 and size of every other file
//
// Bundles are built in a sibling temp directory and renamed into place.

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "gva/config.hpp"
#include "gva/io.hpp"

namespace gva {

struct Check {
  std::string name;
  double lhs = 0.0;
  std::string op;  // "<=", ">=" or "in"
  double rhs = 0.0;
  double rhs_hi = 0.0;  // upper end for "in"
  bool pass = false;

  std::string describe() const;
};

Check check_le(std::string name, double lhs, double rhs);
Check check_ge(std::string name, double lhs, double rhs);
Check check_in(std::string name, double value, double lo, double hi);

struct RunOutcome {
  std::string kind;
  std::filesystem::path dir;
  std::vector<Check> checks;

  bool passed() const;
};

const std::vector<std::string>& experiment_kinds();

/// $GVA_OUTPUT_ROOT, or "results" under the working directory.
std::filesystem::path output_root();

/// Validates the whole config (unknown keys, parameter ranges) before any
/// computation, runs the experiment and writes its bundle. `out` overrides
/// the bundle directory.
RunOutcome run(const Config& config, const std::optional<std::filesystem::path>& out = std::nullopt);
RunOutcome run_file(const std::filesystem::path& path,
                    const std::optional<std::filesystem::path>& out = std::nullopt);

/// Directory holding the shipped presets ($GVA_PRESET_DIR overrides the built-in path).
std::filesystem::path preset_dir();
/// Preset file behind `gva verify <suite>`.
std::filesystem::path verify_preset(const std::string& suite);
const std::vector<std::string>& verify_suites();

/// Plot specs: curves, loss, mse, amplification.
const std::vector<std::string>& plot_specs();
std::string plot_csv(const CsvTable& table, const std::string& spec);

/// One row per (label, variant) across lqr bundles, medians over all runs;
/// ema rows carry the oscillation ratio against raw. `variant` is raw, ema or both.
CsvTable report(const std::vector<std::filesystem::path>& bundles, const std::string& variant = "both");

}  // namespace gva
