#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "wxkrig/covariance.hpp"
#include "wxkrig/evaluate.hpp"
#include "wxkrig/indexes.hpp"
#include "wxkrig/panel.hpp"

namespace wxkrig {

/// Reads the station registry: header `station_id,lat,lon,elev_m`.
/// An empty elev_m field means unknown. Errors carry the row number.
std::vector<Station> load_stations(const std::string& path);

/// Reads long-format observations (`station_id,date,precip_mm,tmax_f`) and
/// joins them with the registry into a panel. Duplicate (station, date)
/// rows, unknown stations, unparsable dates and negative precipitation are
/// load errors naming the offending row.
ObservationPanel load_observations(const std::string& path, std::vector<Station> stations);

ObservationPanel load_dataset(const std::string& stations_path,
                              const std::string& observations_path);

void write_stations(const std::string& path, std::span<const Station> stations);

// Report emission. Rows are sorted by (approach, method, variable, year,
// metric) so repeated emission of the same report is byte-identical.
void emit_report_csv(std::ostream& out, std::vector<ReportRow> rows);
void emit_report_markdown(std::ostream& out, std::vector<ReportRow> rows);
std::vector<ReportRow> parse_report_csv(std::istream& in);

void emit_moments_csv(std::ostream& out, std::vector<MomentRow> rows);

void emit_index_csv(std::ostream& out, const IndexTable& table);

struct ModelRecord {
  Date date;
  CovarianceModel model;
  bool converged = false;
  int iterations = 0;
};
// `date,sigma2,alpha_km,nugget,converged,iterations`
void emit_models_csv(std::ostream& out, std::span<const ModelRecord> records);

struct PredictionRecord {
  Date date;
  std::string target_id;
  Method method = Method::NN;
  double value = 0.0;
  std::optional<double> variance;
  bool fallback_used = false;
};
// `date,target_id,method,value,variance,fallback_used`
void emit_predictions_csv(std::ostream& out, std::span<const PredictionRecord> records);

// Per-day residuals for external plotting: `date,station_id,method,predicted,observed`.
void emit_residuals_csv(std::ostream& out, const ObservationPanel& panel, Method method,
                        const HoldoutDaily& detail);

std::string format_double(double v);

}  // namespace wxkrig
