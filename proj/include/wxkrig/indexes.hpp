#pragma once

#include <optional>
#include <string>
#include <vector>

#include "wxkrig/panel.hpp"

namespace wxkrig {

enum class MissingPolicy {
  Strict,    // any missing day makes the period's index missing
  BreakRun,  // missing days terminate runs / windows
};

enum class DryThresholdMode {
  Below,   // dry iff precip < 1 mm
  AtMost,  // dry iff precip <= 1 mm
};

inline constexpr double kDryThresholdMm = 1.0;

/// True when the day counts as dry. Requires a present value; the caller's
/// missing-day policy decides what absence means.
bool is_dry_day(double precip_mm, DryThresholdMode mode = DryThresholdMode::Below);

// Gap-free run of calendar days; gaps are represented as missing entries.
struct DailySeries {
  std::vector<Date> dates;
  std::vector<std::optional<double>> precip;
};

struct IndexValue {
  std::string period;  // YYYY for CDD, YYYY-MM for MFP
  std::optional<double> value;
  double completeness = 0.0;  // fraction of days present
};

/// Annual maximum consecutive dry days over one calendar year.
IndexValue cdd(const DailySeries& series, MissingPolicy policy = MissingPolicy::Strict,
               DryThresholdMode mode = DryThresholdMode::Below);

/// Monthly maximum five-consecutive-day precipitation total; windows never
/// straddle month boundaries.
IndexValue mfp(const DailySeries& series, MissingPolicy policy = MissingPolicy::Strict);

enum class IndexKind { Cdd, Mfp };

const char* index_name(IndexKind kind);

// Per-station, per-period index values. Periods are sorted; values are
// station-major like the panel.
struct IndexTable {
  IndexKind kind = IndexKind::Cdd;
  std::vector<std::string> station_ids;
  std::vector<std::string> periods;
  std::vector<std::optional<double>> values;        // stations x periods
  std::vector<double> completeness;                 // same layout

  std::size_t cell(std::size_t station, std::size_t period) const {
    return station * periods.size() + period;
  }
};

/// Applies cdd/mfp station-wise across every calendar year (or month)
/// touched by the panel's date range.
IndexTable index_panel(const ObservationPanel& panel, IndexKind kind,
                       MissingPolicy policy = MissingPolicy::Strict,
                       DryThresholdMode mode = DryThresholdMode::Below);

/// Extracts one station's series over [first, last], inserting missing
/// entries for days the panel does not cover.
DailySeries station_series(const ObservationPanel& panel, std::size_t station,
                           const Date& first, const Date& last);

}  // namespace wxkrig
