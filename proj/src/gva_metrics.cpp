#include "gva/gva_metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <limits>

#include "gva/errors.hpp"

namespace gva {

double near_best_threshold(double j_max) { return j_max - 0.05 * std::abs(j_max); }

GvaSummary summarize(const TrainingCurve& curve) {
  if (curve.size() < 4) throw ArgumentError("summarize: need at least 4 records, got " + std::to_string(curve.size()));
  for (std::size_t i = 1; i < curve.size(); ++i)
    if (curve[i].step <= curve[i - 1].step) throw ArgumentError("summarize: steps must be strictly increasing");
  const double t_max = static_cast<double>(curve.back().step);
  if (t_max <= 0.0) throw ArgumentError("summarize: final step must be positive");

  GvaSummary s;
  s.j_max = -std::numeric_limits<double>::infinity();
  s.loss_min = std::numeric_limits<double>::infinity();
  for (const auto& p : curve) {
    s.j_max = std::max(s.j_max, p.mean_reward);
    s.loss_min = std::min(s.loss_min, p.val_loss);
  }
  s.j_final = curve.back().mean_reward;
  s.loss_final = curve.back().val_loss;

  double lo = std::numeric_limits<double>::infinity(), hi = -lo, sum = 0.0;
  std::size_t count = 0;
  for (const auto& p : curve) {
    const double st = static_cast<double>(p.step);
    if (st < 0.25 * t_max || st > 0.75 * t_max) continue;
    lo = std::min(lo, p.mean_reward);
    hi = std::max(hi, p.mean_reward);
    sum += p.mean_reward;
    ++count;
  }
  if (count == 0) throw ArgumentError("summarize: no records fall in the middle half of training");
  s.mu_mid = sum / static_cast<double>(count);
  s.range_mid = hi - lo;

  const double thr = near_best_threshold(s.j_max);
  std::size_t first = curve.size();
  for (std::size_t i = 0; i < curve.size(); ++i)
    if (curve[i].mean_reward >= thr) {
      first = i;
      break;
    }
  if (first < curve.size()) {
    s.t_early = static_cast<double>(curve[first].step) / t_max;
    for (std::size_t i = curve.size(); i-- > first + 1;)
      if (curve[i].mean_reward < thr) {
        s.t_worse = static_cast<double>(curve[i].step) / t_max;
        break;
      }
  }
  return s;
}

namespace {

double lower_median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  return v[(v.size() - 1) / 2];
}

std::optional<double> lower_median_opt(const std::vector<std::optional<double>>& v) {
  std::vector<double> x;
  for (const auto& o : v) x.push_back(o ? *o : std::numeric_limits<double>::infinity());
  const double m = lower_median(std::move(x));
  if (std::isinf(m)) return std::nullopt;
  return m;
}

}  // namespace

GvaSummary median_over_seeds(const std::vector<GvaSummary>& summaries) {
  if (summaries.empty()) throw ArgumentError("median_over_seeds: no summaries");
  auto field = [&](auto member) {
    std::vector<double> v;
    for (const auto& s : summaries) v.push_back(s.*member);
    return lower_median(std::move(v));
  };
  auto opt_field = [&](auto member) {
    std::vector<std::optional<double>> v;
    for (const auto& s : summaries) v.push_back(s.*member);
    return lower_median_opt(v);
  };
  GvaSummary m;
  m.j_max = field(&GvaSummary::j_max);
  m.j_final = field(&GvaSummary::j_final);
  m.loss_min = field(&GvaSummary::loss_min);
  m.loss_final = field(&GvaSummary::loss_final);
  m.mu_mid = field(&GvaSummary::mu_mid);
  m.range_mid = field(&GvaSummary::range_mid);
  m.t_early = opt_field(&GvaSummary::t_early);
  m.t_worse = opt_field(&GvaSummary::t_worse);
  return m;
}

Comparison compare(const GvaSummary& raw, const GvaSummary& ema) {
  Comparison c;
  if (raw.range_mid == 0.0)
    c.oscillation_ratio = ema.range_mid == 0.0 ? 1.0 : std::numeric_limits<double>::infinity();
  else
    c.oscillation_ratio = ema.range_mid / raw.range_mid;
  c.d_j_max = ema.j_max - raw.j_max;
  c.d_j_final = ema.j_final - raw.j_final;
  c.d_loss_min = ema.loss_min - raw.loss_min;
  c.d_loss_final = ema.loss_final - raw.loss_final;
  c.d_mu_mid = ema.mu_mid - raw.mu_mid;
  c.d_range_mid = ema.range_mid - raw.range_mid;
  if (raw.t_early && ema.t_early) c.d_t_early = *ema.t_early - *raw.t_early;
  if (raw.t_worse && ema.t_worse) c.d_t_worse = *ema.t_worse - *raw.t_worse;
  return c;
}

CsvTable summary_table(const std::vector<SummaryRow>& rows) {
  CsvTable t;
  t.header = {"label", "j_max", "j_final", "loss_min", "loss_final", "mu_mid", "range_mid", "t_early", "t_worse"};
  bool ratio = std::any_of(rows.begin(), rows.end(), [](const SummaryRow& r) { return r.oscillation_ratio.has_value(); });
  if (ratio) t.header.push_back("oscillation_ratio");
  auto opt = [](const std::optional<double>& v) { return v ? format_real(*v) : std::string("-"); };
  for (const auto& r : rows) {
    const GvaSummary& s = r.summary;
    std::vector<std::string> row{r.label,
                                 format_real(s.j_max),
                                 format_real(s.j_final),
                                 format_real(s.loss_min),
                                 format_real(s.loss_final),
                                 format_real(s.mu_mid),
                                 format_real(s.range_mid),
                                 opt(s.t_early),
                                 opt(s.t_worse)};
    if (ratio) row.push_back(opt(r.oscillation_ratio));
    t.add_row(std::move(row));
  }
  return t;
}

std::string format_table(const CsvTable& table) {
  // Shorter numbers read better in a terminal than 17 digits.
  auto shorten = [](const std::string& cell) {
    char* end = nullptr;
    const double v = std::strtod(cell.c_str(), &end);
    if (cell.empty() || end != cell.c_str() + cell.size()) return cell;
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.6g", v);
    return std::string(buf);
  };
  std::vector<std::vector<std::string>> cells{table.header};
  for (const auto& r : table.rows) {
    std::vector<std::string> row;
    for (const auto& c : r) row.push_back(shorten(c));
    cells.push_back(std::move(row));
  }
  std::vector<std::size_t> width(table.header.size(), 0);
  for (const auto& r : cells)
    for (std::size_t i = 0; i < r.size(); ++i) width[i] = std::max(width[i], r[i].size());
  std::string out;
  for (std::size_t k = 0; k < cells.size(); ++k) {
    for (std::size_t i = 0; i < cells[k].size(); ++i) {
      const std::string& c = cells[k][i];
      if (i == 0) {
        out += c + std::string(width[i] - c.size(), ' ');
      } else {
        out += "  " + std::string(width[i] - c.size(), ' ') + c;
      }
    }
    out += '\n';
    if (k == 0) {
      std::size_t total = 0;
      for (std::size_t w : width) total += w + 2;
      out += std::string(total - 2, '-') + '\n';
    }
  }
  return out;
}

}  // namespace gva
