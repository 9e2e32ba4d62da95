#include "wxkrig/panel.hpp"

#include <cstdio>
#include <set>
#include <sstream>

#include "wxkrig/errors.hpp"

namespace wxkrig {

Date parse_date(const std::string& text) {
  int y = 0, m = 0, d = 0;
  char tail = 0;
  if (std::sscanf(text.c_str(), "%d-%d-%d%c", &y, &m, &d, &tail) != 3) {
    throw LoadError("unparsable date: '" + text + "'");
  }
  const Date date = std::chrono::year{y} / m / d;
  if (!date.ok()) {
    throw LoadError("calendar-invalid date: '" + text + "'");
  }
  return date;
}

std::string format_date(const Date& d) {
  char buf[16];
  std::snprintf(buf, sizeof(buf), "%04d-%02u-%02u", date_year(d), date_month(d),
                static_cast<unsigned>(d.day()));
  return buf;
}

ValidationReport validate_panel(const ObservationPanel& panel) {
  const std::size_t expected = panel.stations.size() * panel.dates.size();
  if (panel.precip.size() != expected) {
    std::ostringstream msg;
    msg << "panel dimension mismatch: " << panel.stations.size() << " stations x "
        << panel.dates.size() << " dates but " << panel.precip.size() << " precip cells";
    throw StructuralError(msg.str());
  }
  if (!panel.tmax.empty() && panel.tmax.size() != expected) {
    throw StructuralError("panel dimension mismatch in tmax matrix");
  }

  ValidationReport report;
  report.missing_days.assign(panel.stations.size(), 0);

  std::set<std::string> seen;
  for (const Station& s : panel.stations) {
    if (!seen.insert(s.id).second) {
      report.duplicate_station_ids.push_back(s.id);
    }
    if (!coordinates_valid(s.location())) {
      report.structural_notes.push_back("station " + s.id + " has out-of-bounds coordinates");
    }
  }
  for (std::size_t i = 1; i < panel.dates.size(); ++i) {
    if (!(to_days(panel.dates[i - 1]) < to_days(panel.dates[i]))) {
      report.structural_notes.push_back("dates not strictly increasing at position " +
                                        std::to_string(i));
    }
  }

  for (std::size_t si = 0; si < panel.stations.size(); ++si) {
    for (std::size_t di = 0; di < panel.dates.size(); ++di) {
      const auto& value = panel.precip_at(si, di);
      if (!value.has_value()) {
        ++report.missing_days[si];
      } else if (*value < 0.0) {
        report.negative_values.push_back({panel.stations[si].id, panel.dates[di]});
      }
    }
  }
  return report;
}

}  // namespace wxkrig
