#pragma once

#include <chrono>
#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "wxkrig/geo.hpp"

namespace wxkrig {

using Date = std::chrono::year_month_day;

/// Parses an ISO-8601 calendar date (YYYY-MM-DD). Throws LoadError on
/// malformed input or calendar-invalid dates.
Date parse_date(const std::string& text);
std::string format_date(const Date& d);

inline int date_year(const Date& d) { return static_cast<int>(d.year()); }
inline unsigned date_month(const Date& d) { return static_cast<unsigned>(d.month()); }

inline std::chrono::sys_days to_days(const Date& d) { return std::chrono::sys_days{d}; }
inline Date next_day(const Date& d) { return Date{to_days(d) + std::chrono::days{1}}; }

// Station x date matrix of daily observations with explicit missingness.
// Values are stored station-major; precipitation in mm, max temperature
// in degrees Fahrenheit. Immutable after construction by convention.
struct ObservationPanel {
  std::vector<Station> stations;
  std::vector<Date> dates;  // strictly increasing
  std::vector<std::optional<double>> precip;  // size = stations * dates
  std::vector<std::optional<double>> tmax;    // empty when absent

  std::size_t n_stations() const { return stations.size(); }
  std::size_t n_dates() const { return dates.size(); }

  std::size_t cell(std::size_t station, std::size_t date) const {
    return station * dates.size() + date;
  }
  const std::optional<double>& precip_at(std::size_t station, std::size_t date) const {
    return precip[cell(station, date)];
  }
  bool has_tmax() const { return !tmax.empty(); }
};

struct CellRef {
  std::string station_id;
  Date date;
};

struct ValidationReport {
  // per-station counts, aligned with panel.stations
  std::vector<long> missing_days;
  std::vector<CellRef> negative_values;
  std::vector<std::string> duplicate_station_ids;
  std::vector<std::string> structural_notes;  // e.g. non-increasing dates

  bool ok() const {
    return negative_values.empty() && duplicate_station_ids.empty() &&
           structural_notes.empty();
  }
};

/// Inspects a panel without modifying it. Throws StructuralError when the
/// matrix dimensions do not match |stations| x |dates|.
ValidationReport validate_panel(const ObservationPanel& panel);

}  // namespace wxkrig
