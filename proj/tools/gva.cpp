#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "gva/errors.hpp"
#include "gva/experiments.hpp"
#include "gva/gva_metrics.hpp"
#include "gva/io.hpp"

namespace fs = std::filesystem;

namespace {

int report_outcome(const gva::RunOutcome& out) {
  for (const auto& c : out.checks) std::cout << "  " << c.describe() << "\n";
  std::cout << out.kind << ": " << (out.passed() ? "PASS" : "FAIL") << "  -> " << out.dir.string() << "\n";
  return out.passed() ? 0 : 1;
}

std::optional<fs::path> opt_path(const std::string& s) {
  if (s.empty()) return std::nullopt;
  return fs::path(s);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"gva: iterate averaging and gradient variance amplification experiments"};
  app.require_subcommand(1);

  std::string run_cfg, run_out;
  auto* run = app.add_subcommand("run", "Run an experiment config and write its result bundle");
  run->add_option("config", run_cfg, "Config file")->required();
  run->add_option("--out", run_out, "Bundle directory (default: $GVA_OUTPUT_ROOT/<output>)");

  std::string plot_in, plot_spec, plot_out;
  auto* plot = app.add_subcommand("plot", "Render an SVG from a bundle CSV");
  plot->add_option("csv", plot_in, "Input CSV")->required();
  plot->add_option("--spec", plot_spec, "curves, loss, mse or amplification")->required();
  plot->add_option("--out", plot_out, "Output SVG (default: next to the CSV)");

  std::vector<std::string> report_in;
  std::string report_variant = "both", report_csv;
  auto* rep = app.add_subcommand("report", "Median GVA statistics across lqr bundles");
  rep->add_option("bundles", report_in, "Bundle directories")->required();
  rep->add_option("--variant", report_variant, "raw, ema or both");
  rep->add_option("--csv", report_csv, "Also write the table as CSV");

  std::string verify_suite, verify_out;
  auto* ver = app.add_subcommand("verify", "Run a built-in verification suite");
  ver->add_option("suite", verify_suite, "dt-ema, cliff, ou, driftless, amplification, averaging or all")->required();
  ver->add_option("--out", verify_out, "Bundle directory (single suite only)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (*run) return report_outcome(gva::run_file(run_cfg, opt_path(run_out)));

    if (*plot) {
      const gva::CsvTable table = gva::read_csv(plot_in);
      fs::path out = plot_out.empty() ? fs::path(plot_in).replace_extension("").concat("-" + plot_spec + ".svg")
                                      : fs::path(plot_out);
      gva::write_text(out, gva::plot_csv(table, plot_spec));
      std::cout << out.string() << "\n";
      return 0;
    }

    if (*rep) {
      std::vector<fs::path> dirs(report_in.begin(), report_in.end());
      const gva::CsvTable table = gva::report(dirs, report_variant);
      std::cout << gva::format_table(table);
      if (!report_csv.empty()) gva::write_csv(report_csv, table);
      return 0;
    }

    if (*ver) {
      std::vector<std::string> suites{verify_suite};
      if (verify_suite == "all") {
        suites = gva::verify_suites();
        if (!verify_out.empty()) throw gva::ArgumentError("--out needs a single suite");
      }
      int code = 0;
      for (const auto& s : suites) {
        const int c = report_outcome(gva::run_file(gva::verify_preset(s), opt_path(verify_out)));
        if (c != 0) code = c;
      }
      return code;
    }
  } catch (const gva::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const gva::ArgumentError& e) {
    std::cerr << "invalid argument: " << e.what() << "\n";
    return 2;
  } catch (const gva::NumericError& e) {
    std::cerr << "numeric error: " << e.what() << "\n";
    return 3;
  } catch (const gva::DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  }
  return 0;
}
