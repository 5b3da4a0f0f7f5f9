#include "gva/io.hpp"

#include <openssl/evp.h>

#include <algorithm>
#include <cerrno>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "gva/errors.hpp"

namespace gva {

std::string format_real(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

double parse_real(const std::string& s) {
  if (s.empty()) throw DataError("empty numeric field");
  errno = 0;
  char* end = nullptr;
  const double v = std::strtod(s.c_str(), &end);
  if (end != s.c_str() + s.size()) throw DataError("not a number: '" + s + "'");
  return v;
}

std::optional<std::size_t> CsvTable::find(const std::string& column) const {
  const auto it = std::find(header.begin(), header.end(), column);
  if (it == header.end()) return std::nullopt;
  return static_cast<std::size_t>(it - header.begin());
}

std::size_t CsvTable::index(const std::string& column) const {
  if (auto i = find(column)) return *i;
  throw DataError("missing column '" + column + "'");
}

std::vector<double> CsvTable::numeric_column(const std::string& column) const {
  const std::size_t c = index(column);
  std::vector<double> out;
  out.reserve(rows.size());
  for (const auto& r : rows) out.push_back(parse_real(r.at(c)));
  return out;
}

void CsvTable::add_row(std::vector<std::string> row) {
  if (row.size() != header.size())
    throw DataError("csv row has " + std::to_string(row.size()) + " fields, header has " +
                    std::to_string(header.size()));
  rows.push_back(std::move(row));
}

namespace {

void append_line(std::string& out, const std::vector<std::string>& fields) {
  for (std::size_t i = 0; i < fields.size(); ++i) {
    if (i) out += ',';
    out += fields[i];
  }
  out += '\n';
}

std::vector<std::string> split_fields(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char ch : line) {
    if (ch == ',') {
      out.push_back(cur);
      cur.clear();
    } else if (ch != '\r') {
      cur += ch;
    }
  }
  out.push_back(cur);
  return out;
}

}  // namespace

std::string CsvTable::to_string() const {
  std::string out;
  append_line(out, header);
  for (const auto& r : rows) append_line(out, r);
  return out;
}

CsvTable parse_csv(const std::string& text) {
  CsvTable t;
  std::istringstream in(text);
  std::string line;
  bool first = true;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line == "\r") continue;
    auto fields = split_fields(line);
    if (first) {
      t.header = std::move(fields);
      first = false;
      continue;
    }
    if (fields.size() != t.header.size())
      throw DataError("csv line " + std::to_string(lineno) + " has " + std::to_string(fields.size()) +
                      " fields, expected " + std::to_string(t.header.size()));
    t.rows.push_back(std::move(fields));
  }
  if (first) throw DataError("csv input has no header");
  return t;
}

std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write " + path.string());
  out << text;
  if (!out) throw DataError("write failed for " + path.string());
}

CsvTable read_csv(const std::filesystem::path& path) { return parse_csv(read_text(path)); }

void write_csv(const std::filesystem::path& path, const CsvTable& table) {
  write_text(path, table.to_string());
}

std::string sha256_hex(const std::string& bytes) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), digest, &len, EVP_sha256(), nullptr) != 1)
    throw DataError("sha256 failed");
  static const char* hex = "0123456789abcdef";
  std::string out;
  for (unsigned int i = 0; i < len; ++i) {
    out += hex[digest[i] >> 4];
    out += hex[digest[i] & 15];
  }
  return out;
}

std::string sha256_file(const std::filesystem::path& path) { return sha256_hex(read_text(path)); }

// ---------------------------------------------------------------------------
// SVG

namespace {

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

std::string tick_label(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4g", std::abs(v) < 1e-12 ? 0.0 : v);
  return buf;
}

std::string escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '&': out += "&amp;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

struct Range {
  double lo = 0.0, hi = 1.0;
};

Range padded(double lo, double hi) {
  if (!(lo <= hi)) return {0.0, 1.0};
  if (hi - lo < 1e-300) {
    const double pad = std::max(std::abs(lo) * 0.05, 0.5);
    return {lo - pad, hi + pad};
  }
  return {lo, hi};
}

}  // namespace

std::string render_svg(const std::vector<Panel>& panels, double panel_width, double panel_height) {
  constexpr double kLeft = 64.0, kRight = 16.0, kTop = 30.0, kBottom = 46.0;
  const double width = panel_width * static_cast<double>(std::max<std::size_t>(panels.size(), 1));
  std::ostringstream o;
  o << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << fmt(width) << "\" height=\""
    << fmt(panel_height) << "\" font-family=\"sans-serif\" font-size=\"11\">\n";
  o << "<rect x=\"0\" y=\"0\" width=\"" << fmt(width) << "\" height=\"" << fmt(panel_height)
    << "\" fill=\"white\"/>\n";

  for (std::size_t p = 0; p < panels.size(); ++p) {
    const Panel& panel = panels[p];
    const double ox = panel_width * static_cast<double>(p);
    const double x0 = ox + kLeft, x1 = ox + panel_width - kRight;
    const double y0 = panel_height - kBottom, y1 = kTop;

    double xmin = INFINITY, xmax = -INFINITY, ymin = INFINITY, ymax = -INFINITY;
    std::size_t points = 0;
    for (const auto& s : panel.series)
      for (std::size_t i = 0; i < std::min(s.x.size(), s.y.size()); ++i) {
        if (!std::isfinite(s.x[i]) || !std::isfinite(s.y[i])) continue;
        xmin = std::min(xmin, s.x[i]);
        xmax = std::max(xmax, s.x[i]);
        ymin = std::min(ymin, s.y[i]);
        ymax = std::max(ymax, s.y[i]);
        ++points;
      }
    const Range xr = points ? padded(xmin, xmax) : Range{};
    const Range yr = points ? padded(ymin, ymax) : Range{};
    auto mx = [&](double v) { return x0 + (v - xr.lo) / (xr.hi - xr.lo) * (x1 - x0); };
    auto my = [&](double v) { return y0 - (v - yr.lo) / (yr.hi - yr.lo) * (y0 - y1); };

    o << "<g>\n";
    o << "<text x=\"" << fmt((x0 + x1) / 2) << "\" y=\"18\" text-anchor=\"middle\" font-size=\"13\">"
      << escape(panel.title) << "</text>\n";
    o << "<line x1=\"" << fmt(x0) << "\" y1=\"" << fmt(y0) << "\" x2=\"" << fmt(x1) << "\" y2=\"" << fmt(y0)
      << "\" stroke=\"black\"/>\n";
    o << "<line x1=\"" << fmt(x0) << "\" y1=\"" << fmt(y0) << "\" x2=\"" << fmt(x0) << "\" y2=\"" << fmt(y1)
      << "\" stroke=\"black\"/>\n";
    for (int k = 0; k <= 4; ++k) {
      const double xv = xr.lo + (xr.hi - xr.lo) * k / 4.0;
      const double yv = yr.lo + (yr.hi - yr.lo) * k / 4.0;
      o << "<text x=\"" << fmt(mx(xv)) << "\" y=\"" << fmt(y0 + 14) << "\" text-anchor=\"middle\">"
        << tick_label(xv) << "</text>\n";
      o << "<text x=\"" << fmt(x0 - 4) << "\" y=\"" << fmt(my(yv) + 4) << "\" text-anchor=\"end\">"
        << tick_label(yv) << "</text>\n";
    }
    o << "<text x=\"" << fmt((x0 + x1) / 2) << "\" y=\"" << fmt(panel_height - 8)
      << "\" text-anchor=\"middle\">" << escape(panel.x_label) << "</text>\n";
    o << "<text x=\"" << fmt(ox + 12) << "\" y=\"" << fmt((y0 + y1) / 2) << "\" text-anchor=\"middle\" transform=\"rotate(-90 "
      << fmt(ox + 12) << " " << fmt((y0 + y1) / 2) << ")\">" << escape(panel.y_label) << "</text>\n";

    if (points == 0) {
      o << "<text x=\"" << fmt((x0 + x1) / 2) << "\" y=\"" << fmt((y0 + y1) / 2)
        << "\" text-anchor=\"middle\" fill=\"gray\">no data</text>\n";
    }
    for (const auto& s : panel.series) {
      const std::size_t n = std::min(s.x.size(), s.y.size());
      if (s.scatter) {
        for (std::size_t i = 0; i < n; ++i) {
          if (!std::isfinite(s.x[i]) || !std::isfinite(s.y[i])) continue;
          o << "<circle cx=\"" << fmt(mx(s.x[i])) << "\" cy=\"" << fmt(my(s.y[i]))
            << "\" r=\"1.6\" fill=\"" << s.color << "\" fill-opacity=\"0.5\"/>\n";
        }
      } else if (n > 0) {
        o << "<polyline fill=\"none\" stroke=\"" << s.color << "\" stroke-width=\"1.5\" points=\"";
        bool first = true;
        for (std::size_t i = 0; i < n; ++i) {
          if (!std::isfinite(s.x[i]) || !std::isfinite(s.y[i])) continue;
          if (!first) o << ' ';
          o << fmt(mx(s.x[i])) << ',' << fmt(my(s.y[i]));
          first = false;
        }
        o << "\"/>\n";
      }
    }
    // Legend, one entry per labelled series.
    double ly = y1 + 4;
    for (const auto& s : panel.series) {
      if (s.label.empty()) continue;
      o << "<rect x=\"" << fmt(x1 - 110) << "\" y=\"" << fmt(ly) << "\" width=\"10\" height=\"10\" fill=\""
        << s.color << "\"/>\n";
      o << "<text x=\"" << fmt(x1 - 96) << "\" y=\"" << fmt(ly + 9) << "\">" << escape(s.label) << "</text>\n";
      ly += 14;
    }
    o << "</g>\n";
  }
  o << "</svg>\n";
  return o.str();
}

}  // namespace gva
