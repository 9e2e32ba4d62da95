#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "wxkrig/indexes.hpp"
#include "wxkrig/interpolate.hpp"
#include "wxkrig/panel.hpp"

namespace wxkrig {

// Station -> fold map. A pure function of (seed, sorted ids, k); fold sizes
// differ by at most one.
struct FoldAssignment {
  std::uint32_t seed = 42;
  int k = 10;
  std::map<std::string, int> fold_of;

  int fold(const std::string& id) const;
};

FoldAssignment kfold_split(std::vector<std::string> station_ids, int k = 10,
                           std::uint32_t seed = 42);

double rmse(std::span<const double> predicted, std::span<const double> observed);
double mae(std::span<const double> predicted, std::span<const double> observed);

/// Moment-ratio sample skewness m3 / m2^(3/2) with 1/n moments.
double skewness(std::span<const double> sample);
/// Moment-ratio sample kurtosis m4 / m2^2 (not excess).
double kurtosis(std::span<const double> sample);

enum class Pooling {
  PerPeriod,  // metric per day/period, then averaged within the year
  Pooled,     // residuals pooled within the year before the metric
};

struct EvalConfig {
  PredictConfig predict;
  MissingPolicy policy = MissingPolicy::Strict;
  DryThresholdMode threshold = DryThresholdMode::Below;
  Pooling pooling = Pooling::PerPeriod;
  int threads = 0;  // 0 = hardware concurrency; results are thread-count invariant
};

struct ReportRow {
  std::string approach;  // daily | direct | two-stage
  Method method = Method::NN;
  std::string variable;  // P | MFP | CDD
  std::string year;      // "1990".."1993" or "all"
  std::string metric;    // RMSE | MAE
  double value = 0.0;
  long n_periods = 0;
  double fallback_rate = 0.0;
  std::uint32_t seed = 0;
};

// Held-out daily predictions for every (station, date) cell under a fold
// assignment; the station's own observation never feeds its prediction.
struct HoldoutDaily {
  std::vector<std::optional<double>> predicted;  // stations x dates, panel layout
  std::vector<std::uint8_t> fallback;            // same layout, 1 = IDW substituted
  long skipped_units = 0;      // (date, fold) pairs without training data
  long fallback_count = 0;
  long prediction_count = 0;
};

HoldoutDaily predict_heldout_daily(const ObservationPanel& panel, Method method,
                                   const FoldAssignment& folds, const EvalConfig& config);

struct CvDailyResult {
  std::vector<ReportRow> rows;
  HoldoutDaily detail;
  long days_used = 0;
  long days_skipped = 0;  // no residual pair on the day
};

/// Daily cross-validation of precipitation: fit on out-of-fold stations,
/// predict held-out ones, RMSE/MAE per day, averaged per year.
CvDailyResult cv_daily(const ObservationPanel& panel, Method method,
                       const FoldAssignment& folds, const EvalConfig& config);

/// Direct approach: interpolate the station index values period by period.
std::vector<ReportRow> run_direct(const ObservationPanel& panel, IndexKind kind,
                                  Method method, const FoldAssignment& folds,
                                  const EvalConfig& config);

/// Two-stage approach: interpolate daily precipitation, then compute the
/// index from each held-out station's predicted series.
std::vector<ReportRow> run_two_stage(const ObservationPanel& panel, IndexKind kind,
                                     Method method, const FoldAssignment& folds,
                                     const EvalConfig& config);

struct MomentRow {
  std::string variable;  // P, cbrt(P), T, MFP, cbrt(MFP), CDD, cbrt(CDD)
  std::string year;      // "1990".. or "all"
  std::string metric;    // skewness | kurtosis
  double value = 0.0;
  long n_periods = 0;
  long n_skipped = 0;  // zero-variance or undersized samples
};

/// Per-day sample moments of P, cbrt(P) and (when present) T across
/// stations, averaged per year.
std::vector<MomentRow> panel_moments(const ObservationPanel& panel);

/// Per-period sample moments of an index and its cube root across stations.
std::vector<MomentRow> index_moments(const IndexTable& table);

}  // namespace wxkrig
