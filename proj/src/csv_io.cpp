#include "wxkrig/csv_io.hpp"

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <tuple>
#include <unordered_map>

#include "wxkrig/errors.hpp"

namespace wxkrig {

namespace {

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> fields;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      fields.push_back(cur);
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  fields.push_back(cur);
  return fields;
}

std::string strip_cr(std::string line) {
  if (!line.empty() && line.back() == '\r') {
    line.pop_back();
  }
  return line;
}

double parse_double(const std::string& field, const std::string& where) {
  double v = 0.0;
  const char* begin = field.data();
  const char* end = begin + field.size();
  const auto [ptr, ec] = std::from_chars(begin, end, v);
  if (ec != std::errc{} || ptr != end) {
    throw LoadError(where + ": cannot parse number '" + field + "'");
  }
  return v;
}

long parse_long(const std::string& field, const std::string& where) {
  long v = 0;
  const char* begin = field.data();
  const char* end = begin + field.size();
  const auto [ptr, ec] = std::from_chars(begin, end, v);
  if (ec != std::errc{} || ptr != end) {
    throw LoadError(where + ": cannot parse integer '" + field + "'");
  }
  return v;
}

std::string row_tag(const std::string& path, std::size_t row) {
  return path + ":row " + std::to_string(row);
}

void expect_header(std::ifstream& in, const std::string& path, const std::string& expected) {
  std::string line;
  if (!std::getline(in, line)) {
    throw LoadError(path + ": empty file");
  }
  line = strip_cr(line);
  if (line != expected) {
    throw LoadError(path + ": expected header '" + expected + "', got '" + line + "'");
  }
}

}  // namespace

std::string format_double(double v) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  (void)ec;
  return std::string(buf, ptr);
}

std::vector<Station> load_stations(const std::string& path) {
  std::ifstream in(path);
  if (!in) {
    throw LoadError("cannot open " + path);
  }
  expect_header(in, path, "station_id,lat,lon,elev_m");

  std::vector<Station> stations;
  std::string line;
  std::size_t row = 1;
  while (std::getline(in, line)) {
    ++row;
    line = strip_cr(line);
    if (line.empty()) {
      continue;
    }
    const std::vector<std::string> f = split_csv(line);
    if (f.size() != 4) {
      throw LoadError(row_tag(path, row) + ": expected 4 fields, got " +
                      std::to_string(f.size()));
    }
    if (f[0].empty()) {
      throw LoadError(row_tag(path, row) + ": empty station id");
    }
    Station st;
    st.id = f[0];
    st.lat = parse_double(f[1], row_tag(path, row));
    st.lon = parse_double(f[2], row_tag(path, row));
    if (!f[3].empty()) {
      st.elev_m = parse_double(f[3], row_tag(path, row));
    }
    stations.push_back(std::move(st));
  }
  return stations;
}

ObservationPanel load_observations(const std::string& path, std::vector<Station> stations) {
  std::ifstream in(path);
  if (!in) {
    throw LoadError("cannot open " + path);
  }
  expect_header(in, path, "station_id,date,precip_mm,tmax_f");

  // duplicate ids are tolerated here (the validator reports them); the
  // join binds observations to the first occurrence
  std::unordered_map<std::string, std::size_t> station_index;
  for (std::size_t i = 0; i < stations.size(); ++i) {
    station_index.emplace(stations[i].id, i);
  }

  struct RawRow {
    std::size_t station = 0;
    Date date;
    std::optional<double> precip;
    std::optional<double> tmax;
    std::size_t row = 0;
  };
  std::vector<RawRow> raw;
  std::map<Date, std::size_t> date_index;

  std::string line;
  std::size_t row = 1;
  bool any_tmax = false;
  while (std::getline(in, line)) {
    ++row;
    line = strip_cr(line);
    if (line.empty()) {
      continue;
    }
    const std::vector<std::string> f = split_csv(line);
    if (f.size() != 4) {
      throw LoadError(row_tag(path, row) + ": expected 4 fields, got " +
                      std::to_string(f.size()));
    }
    const auto it = station_index.find(f[0]);
    if (it == station_index.end()) {
      throw LoadError(row_tag(path, row) + ": unknown station '" + f[0] + "'");
    }
    RawRow r;
    r.station = it->second;
    r.row = row;
    try {
      r.date = parse_date(f[1]);
    } catch (const LoadError& e) {
      throw LoadError(row_tag(path, row) + ": " + e.what());
    }
    if (!f[2].empty()) {
      const double p = parse_double(f[2], row_tag(path, row));
      if (p < 0.0) {
        throw LoadError(row_tag(path, row) + ": negative precipitation " + f[2]);
      }
      r.precip = p;
    }
    if (!f[3].empty()) {
      r.tmax = parse_double(f[3], row_tag(path, row));
      any_tmax = true;
    }
    date_index.emplace(r.date, 0);
    raw.push_back(std::move(r));
  }

  ObservationPanel panel;
  panel.stations = std::move(stations);
  panel.dates.reserve(date_index.size());
  for (auto& [d, idx] : date_index) {
    idx = panel.dates.size();
    panel.dates.push_back(d);
  }
  panel.precip.assign(panel.n_stations() * panel.n_dates(), std::nullopt);
  if (any_tmax) {
    panel.tmax.assign(panel.n_stations() * panel.n_dates(), std::nullopt);
  }

  std::set<std::size_t> seen;
  for (const RawRow& r : raw) {
    const std::size_t c = panel.cell(r.station, date_index[r.date]);
    if (!seen.insert(c).second) {
      throw LoadError(row_tag(path, r.row) + ": duplicate observation for station '" +
                      panel.stations[r.station].id + "' on " + format_date(r.date));
    }
    panel.precip[c] = r.precip;
    if (any_tmax) {
      panel.tmax[c] = r.tmax;
    }
  }
  return panel;
}

ObservationPanel load_dataset(const std::string& stations_path,
                              const std::string& observations_path) {
  return load_observations(observations_path, load_stations(stations_path));
}

void write_stations(const std::string& path, std::span<const Station> stations) {
  std::ofstream out(path);
  if (!out) {
    throw LoadError("cannot write " + path);
  }
  out << "station_id,lat,lon,elev_m\n";
  for (const Station& st : stations) {
    out << st.id << ',' << format_double(st.lat) << ',' << format_double(st.lon) << ',';
    if (st.elev_m.has_value()) {
      out << format_double(*st.elev_m);
    }
    out << '\n';
  }
}

namespace {

void sort_report(std::vector<ReportRow>& rows) {
  std::sort(rows.begin(), rows.end(), [](const ReportRow& a, const ReportRow& b) {
    return std::tie(a.approach, a.method, a.variable, a.year, a.metric) <
           std::tie(b.approach, b.method, b.variable, b.year, b.metric);
  });
}

}  // namespace

void emit_report_csv(std::ostream& out, std::vector<ReportRow> rows) {
  sort_report(rows);
  out << "approach,method,variable,year,metric,value,n_periods,fallback_rate,seed\n";
  for (const ReportRow& r : rows) {
    out << r.approach << ',' << method_name(r.method) << ',' << r.variable << ',' << r.year
        << ',' << r.metric << ',' << format_double(r.value) << ',' << r.n_periods << ','
        << format_double(r.fallback_rate) << ',' << r.seed << '\n';
  }
}

std::vector<ReportRow> parse_report_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) ||
      strip_cr(line) != "approach,method,variable,year,metric,value,n_periods,fallback_rate,seed") {
    throw LoadError("report: bad or missing header");
  }
  std::vector<ReportRow> rows;
  std::size_t n = 1;
  while (std::getline(in, line)) {
    ++n;
    line = strip_cr(line);
    if (line.empty()) {
      continue;
    }
    const std::vector<std::string> f = split_csv(line);
    if (f.size() != 9) {
      throw LoadError("report:row " + std::to_string(n) + ": expected 9 fields");
    }
    ReportRow r;
    r.approach = f[0];
    const auto m = method_from_name(f[1]);
    if (!m.has_value()) {
      throw LoadError("report:row " + std::to_string(n) + ": unknown method '" + f[1] + "'");
    }
    r.method = *m;
    r.variable = f[2];
    r.year = f[3];
    r.metric = f[4];
    r.value = parse_double(f[5], "report:row " + std::to_string(n));
    r.n_periods = parse_long(f[6], "report:row " + std::to_string(n));
    r.fallback_rate = parse_double(f[7], "report:row " + std::to_string(n));
    r.seed = static_cast<std::uint32_t>(parse_long(f[8], "report:row " + std::to_string(n)));
    rows.push_back(std::move(r));
  }
  return rows;
}

void emit_report_markdown(std::ostream& out, std::vector<ReportRow> rows) {
  sort_report(rows);

  // one grid per (approach, variable, metric): methods down, years across
  std::vector<std::tuple<std::string, std::string, std::string>> blocks;
  for (const ReportRow& r : rows) {
    std::tuple<std::string, std::string, std::string> key{r.approach, r.variable, r.metric};
    if (blocks.empty() || blocks.back() != key) {
      if (std::find(blocks.begin(), blocks.end(), key) == blocks.end()) {
        blocks.push_back(key);
      }
    }
  }

  for (const auto& [approach, variable, metric] : blocks) {
    std::vector<std::string> years;
    std::vector<Method> methods;
    for (const ReportRow& r : rows) {
      if (r.approach != approach || r.variable != variable || r.metric != metric) {
        continue;
      }
      if (std::find(years.begin(), years.end(), r.year) == years.end()) {
        years.push_back(r.year);
      }
      if (std::find(methods.begin(), methods.end(), r.method) == methods.end()) {
        methods.push_back(r.method);
      }
    }
    std::sort(years.begin(), years.end());
    std::sort(methods.begin(), methods.end());

    out << "## " << approach << ' ' << variable << ' ' << metric << "\n\n";
    out << "| method |";
    for (const std::string& y : years) {
      out << ' ' << y << " |";
    }
    out << "\n|---|";
    for (std::size_t i = 0; i < years.size(); ++i) {
      out << "---|";
    }
    out << '\n';
    for (Method m : methods) {
      out << "| " << method_name(m) << " |";
      for (const std::string& y : years) {
        const auto it = std::find_if(rows.begin(), rows.end(), [&](const ReportRow& r) {
          return r.approach == approach && r.variable == variable && r.metric == metric &&
                 r.method == m && r.year == y;
        });
        if (it != rows.end()) {
          char buf[32];
          std::snprintf(buf, sizeof buf, "%.2f", it->value);
          out << ' ' << buf << " |";
        } else {
          out << "  |";
        }
      }
      out << '\n';
    }
    out << '\n';
  }
}

void emit_moments_csv(std::ostream& out, std::vector<MomentRow> rows) {
  std::sort(rows.begin(), rows.end(), [](const MomentRow& a, const MomentRow& b) {
    return std::tie(a.variable, a.year, a.metric) < std::tie(b.variable, b.year, b.metric);
  });
  out << "variable,year,metric,value,n_periods,n_skipped\n";
  for (const MomentRow& r : rows) {
    out << r.variable << ',' << r.year << ',' << r.metric << ',' << format_double(r.value)
        << ',' << r.n_periods << ',' << r.n_skipped << '\n';
  }
}

void emit_index_csv(std::ostream& out, const IndexTable& table) {
  std::vector<std::size_t> order(table.station_ids.size());
  for (std::size_t i = 0; i < order.size(); ++i) {
    order[i] = i;
  }
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return table.station_ids[a] < table.station_ids[b];
  });

  out << "station_id,period,index,value,completeness\n";
  for (const std::size_t s : order) {
    for (std::size_t p = 0; p < table.periods.size(); ++p) {
      const std::size_t c = table.cell(s, p);
      out << table.station_ids[s] << ',' << table.periods[p] << ',' << index_name(table.kind)
          << ',';
      if (table.values[c].has_value()) {
        out << format_double(*table.values[c]);
      }
      out << ',' << format_double(table.completeness[c]) << '\n';
    }
  }
}

void emit_models_csv(std::ostream& out, std::span<const ModelRecord> records) {
  out << "date,sigma2,alpha_km,nugget,converged,iterations\n";
  for (const ModelRecord& r : records) {
    out << format_date(r.date) << ',' << format_double(r.model.sigma2) << ','
        << format_double(r.model.range_km) << ',' << format_double(r.model.nugget) << ','
        << (r.converged ? 1 : 0) << ',' << r.iterations << '\n';
  }
}

void emit_predictions_csv(std::ostream& out, std::span<const PredictionRecord> records) {
  out << "date,target_id,method,value,variance,fallback_used\n";
  for (const PredictionRecord& r : records) {
    out << format_date(r.date) << ',' << r.target_id << ',' << method_name(r.method) << ','
        << format_double(r.value) << ',';
    if (r.variance.has_value()) {
      out << format_double(*r.variance);
    }
    out << ',' << (r.fallback_used ? 1 : 0) << '\n';
  }
}

void emit_residuals_csv(std::ostream& out, const ObservationPanel& panel, Method method,
                        const HoldoutDaily& detail) {
  out << "date,station_id,method,predicted,observed\n";
  for (std::size_t d = 0; d < panel.n_dates(); ++d) {
    for (std::size_t s = 0; s < panel.n_stations(); ++s) {
      const std::size_t c = panel.cell(s, d);
      const std::optional<double>& pred = detail.predicted[c];
      const std::optional<double>& obs = panel.precip_at(s, d);
      if (!pred.has_value() || !obs.has_value()) {
        continue;
      }
      out << format_date(panel.dates[d]) << ',' << panel.stations[s].id << ','
          << method_name(method) << ',' << format_double(*pred) << ','
          << format_double(*obs) << '\n';
    }
  }
}

}  // namespace wxkrig
