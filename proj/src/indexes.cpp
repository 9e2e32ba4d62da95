#include "wxkrig/indexes.hpp"

#include <algorithm>
#include <cstdio>

#include "wxkrig/errors.hpp"

namespace wxkrig {

namespace {

struct SeriesShape {
  int year = 0;
  unsigned month = 0;  // 0 when the series crosses months
  std::size_t present = 0;
};

// Enforces the DailySeries contract: non-empty, gap-free, single calendar
// year (and single month when require_month is set).
SeriesShape check_series(const DailySeries& series, bool require_month) {
  if (series.dates.empty()) {
    throw EmptyInputError("empty daily series");
  }
  if (series.dates.size() != series.precip.size()) {
    throw StructuralError("series dates and values differ in length");
  }
  SeriesShape shape;
  shape.year = date_year(series.dates.front());
  shape.month = date_month(series.dates.front());
  for (std::size_t i = 0; i < series.dates.size(); ++i) {
    if (i > 0 && series.dates[i] != next_day(series.dates[i - 1])) {
      throw StructuralError("daily series has date gaps");
    }
    if (date_year(series.dates[i]) != shape.year) {
      throw PeriodError("series spans more than one calendar year");
    }
    if (require_month && date_month(series.dates[i]) != shape.month) {
      throw PeriodError("series spans more than one calendar month");
    }
    if (series.precip[i].has_value()) {
      if (*series.precip[i] < 0.0) {
        throw DomainError("negative precipitation in series");
      }
      ++shape.present;
    }
  }
  return shape;
}

std::string year_label(int year) {
  char buf[8];
  std::snprintf(buf, sizeof buf, "%04d", year);
  return buf;
}

std::string month_label(int year, unsigned month) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "%04d-%02u", year, month);
  return buf;
}

}  // namespace

bool is_dry_day(double precip_mm, DryThresholdMode mode) {
  if (precip_mm < 0.0) {
    throw DomainError("negative precipitation");
  }
  return mode == DryThresholdMode::Below ? precip_mm < kDryThresholdMm
                                         : precip_mm <= kDryThresholdMm;
}

const char* index_name(IndexKind kind) {
  return kind == IndexKind::Cdd ? "cdd" : "mfp";
}

IndexValue cdd(const DailySeries& series, MissingPolicy policy, DryThresholdMode mode) {
  const SeriesShape shape = check_series(series, false);

  IndexValue out;
  out.period = year_label(shape.year);
  out.completeness =
      static_cast<double>(shape.present) / static_cast<double>(series.dates.size());

  if (policy == MissingPolicy::Strict && shape.present < series.dates.size()) {
    return out;  // value stays missing
  }

  long best = 0, run = 0;
  for (const std::optional<double>& p : series.precip) {
    if (!p.has_value()) {
      run = 0;  // BreakRun: a gap ends the current run
      continue;
    }
    if (is_dry_day(*p, mode)) {
      ++run;
      best = std::max(best, run);
    } else {
      run = 0;
    }
  }
  out.value = static_cast<double>(best);
  return out;
}

IndexValue mfp(const DailySeries& series, MissingPolicy policy) {
  const SeriesShape shape = check_series(series, true);

  IndexValue out;
  out.period = month_label(shape.year, shape.month);
  out.completeness =
      static_cast<double>(shape.present) / static_cast<double>(series.dates.size());

  if (policy == MissingPolicy::Strict && shape.present < series.dates.size()) {
    return out;
  }

  constexpr std::size_t kWindow = 5;
  std::optional<double> best;
  if (series.dates.size() >= kWindow) {
    for (std::size_t start = 0; start + kWindow <= series.dates.size(); ++start) {
      double sum = 0.0;
      bool complete = true;
      for (std::size_t i = start; i < start + kWindow; ++i) {
        if (!series.precip[i].has_value()) {
          complete = false;  // BreakRun: only fully present windows count
          break;
        }
        sum += *series.precip[i];
      }
      if (complete && (!best.has_value() || sum > *best)) {
        best = sum;
      }
    }
  }
  out.value = best;  // missing when no complete window exists
  return out;
}

DailySeries station_series(const ObservationPanel& panel, std::size_t station,
                           const Date& first, const Date& last) {
  if (station >= panel.n_stations()) {
    throw StructuralError("station index out of range");
  }
  if (to_days(first) > to_days(last)) {
    throw PeriodError("series start is after its end");
  }

  DailySeries series;
  std::size_t cursor = 0;  // panel dates are strictly increasing
  for (Date d = first;; d = next_day(d)) {
    while (cursor < panel.n_dates() && to_days(panel.dates[cursor]) < to_days(d)) {
      ++cursor;
    }
    series.dates.push_back(d);
    if (cursor < panel.n_dates() && panel.dates[cursor] == d) {
      series.precip.push_back(panel.precip_at(station, cursor));
    } else {
      series.precip.push_back(std::nullopt);
    }
    if (d == last) {
      break;
    }
  }
  return series;
}

IndexTable index_panel(const ObservationPanel& panel, IndexKind kind, MissingPolicy policy,
                       DryThresholdMode mode) {
  if (panel.n_dates() == 0 || panel.n_stations() == 0) {
    throw EmptyInputError("panel has no stations or no dates");
  }

  using std::chrono::year;
  using std::chrono::month;
  using std::chrono::last;

  // Full calendar periods touching the panel's range; days the panel does
  // not cover enter the series as missing.
  struct Span {
    Date first, last_day;
  };
  std::vector<Span> spans;
  const Date lo = panel.dates.front();
  const Date hi = panel.dates.back();
  if (kind == IndexKind::Cdd) {
    for (int y = date_year(lo); y <= date_year(hi); ++y) {
      spans.push_back({Date{year{y} / 1 / 1}, Date{year{y} / 12 / 31}});
    }
  } else {
    int y = date_year(lo);
    unsigned m = date_month(lo);
    while (y < date_year(hi) || (y == date_year(hi) && m <= date_month(hi))) {
      const auto ym = year{y} / month{m};
      spans.push_back({Date{ym / 1}, Date{ym / last}});
      if (++m > 12) {
        m = 1;
        ++y;
      }
    }
  }

  IndexTable table;
  table.kind = kind;
  for (const Station& st : panel.stations) {
    table.station_ids.push_back(st.id);
  }
  table.values.resize(panel.n_stations() * spans.size());
  table.completeness.assign(panel.n_stations() * spans.size(), 0.0);

  bool periods_filled = false;
  for (std::size_t s = 0; s < panel.n_stations(); ++s) {
    for (std::size_t p = 0; p < spans.size(); ++p) {
      const DailySeries series = station_series(panel, s, spans[p].first, spans[p].last_day);
      const IndexValue iv =
          kind == IndexKind::Cdd ? cdd(series, policy, mode) : mfp(series, policy);
      if (!periods_filled) {
        table.periods.push_back(iv.period);
      }
      const std::size_t c = s * spans.size() + p;
      table.values[c] = iv.value;
      table.completeness[c] = iv.completeness;
    }
    periods_filled = true;
  }
  return table;
}

}  // namespace wxkrig
