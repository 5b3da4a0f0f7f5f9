#pragma once

// Oscillation statistics of a training curve of checkpoint evaluations.

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "gva/io.hpp"

namespace gva {

struct CurvePoint {
  std::size_t step = 0;
  double mean_reward = 0.0;
  double val_loss = 0.0;
};

using TrainingCurve = std::vector<CurvePoint>;

struct GvaSummary {
  double j_max = 0.0;
  double j_final = 0.0;
  double loss_min = 0.0;
  double loss_final = 0.0;
  double mu_mid = 0.0;
  double range_mid = 0.0;
  std::optional<double> t_early;  // fraction of the final step
  std::optional<double> t_worse;  // absent when the curve never falls back below the threshold
};

/// Reward level counted as "near the best": J_max - 0.05 |J_max|, which is
/// 95% of J_max for positive rewards.
double near_best_threshold(double j_max);

/// Needs at least four records with strictly increasing steps. The middle
/// window is steps in [T/4, 3T/4] inclusive, T the last step.
GvaSummary summarize(const TrainingCurve& curve);

/// Field-wise lower median. A missing t_worse sorts as +inf ("never worse").
GvaSummary median_over_seeds(const std::vector<GvaSummary>& summaries);

struct Comparison {
  double oscillation_ratio = 1.0;  // range_mid(ema) / range_mid(raw)
  double d_j_max = 0.0;            // ema - raw for each field
  double d_j_final = 0.0;
  double d_loss_min = 0.0;
  double d_loss_final = 0.0;
  double d_mu_mid = 0.0;
  double d_range_mid = 0.0;
  std::optional<double> d_t_early;
  std::optional<double> d_t_worse;
};

Comparison compare(const GvaSummary& raw, const GvaSummary& ema);

struct SummaryRow {
  std::string label;
  GvaSummary summary;
  std::optional<double> oscillation_ratio;
};

CsvTable summary_table(const std::vector<SummaryRow>& rows);
/// Space-aligned text rendering of summary_table.
std::string format_table(const CsvTable& table);

}  // namespace gva
