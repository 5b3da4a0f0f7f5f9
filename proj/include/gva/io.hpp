#pragma once

// CSV tables, deterministic SVG charts and content hashing for result bundles.

#include <cstddef>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace gva {

/// Shortest round-trippable form with at most 17 significant digits.
std::string format_real(double v);
double parse_real(const std::string& s);

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  std::optional<std::size_t> find(const std::string& column) const;
  /// Throws DataError naming the missing column.
  std::size_t index(const std::string& column) const;
  std::vector<double> numeric_column(const std::string& column) const;

  void add_row(std::vector<std::string> row);
  std::string to_string() const;
};

CsvTable parse_csv(const std::string& text);
CsvTable read_csv(const std::filesystem::path& path);
void write_csv(const std::filesystem::path& path, const CsvTable& table);

std::string read_text(const std::filesystem::path& path);
void write_text(const std::filesystem::path& path, const std::string& text);

/// Lower-case hex SHA-256 of a byte string or a file's contents.
std::string sha256_hex(const std::string& bytes);
std::string sha256_file(const std::filesystem::path& path);

struct Series {
  std::string label;
  std::vector<double> x;
  std::vector<double> y;
  bool scatter = false;  // points instead of a polyline
  std::string color = "#1f77b4";
};

struct Panel {
  std::string title;
  std::string x_label;
  std::string y_label;
  std::vector<Series> series;
};

/// Panels stacked left to right in one SVG document. Output depends only on
/// the inputs, so repeated renders are byte-identical.
std::string render_svg(const std::vector<Panel>& panels, double panel_width = 420.0,
                       double panel_height = 300.0);

}  // namespace gva
