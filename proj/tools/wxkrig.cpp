#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "wxkrig/config.hpp"
#include "wxkrig/csv_io.hpp"
#include "wxkrig/elevation.hpp"
#include "wxkrig/errors.hpp"
#include "wxkrig/evaluate.hpp"

namespace {

using namespace wxkrig;

constexpr int kExitOk = 0;
constexpr int kExitValidation = 1;
constexpr int kExitLoad = 2;
constexpr int kExitNetwork = 3;

struct Opts {
  RunConfig cfg;

  std::string distance = "haversine";
  std::string dry_threshold = "below";
  std::string missing_policy = "strict";
  std::string pooling = "per-period";
  std::string methods = "nn,idw,ok,uk,tgk";
  std::string out;  // empty = stdout

  // interpolate
  std::string date;
  std::string target_station;
  std::optional<double> target_lat;
  std::optional<double> target_lon;
  std::optional<double> target_elev;
  std::string models_out;

  // cv-daily
  std::string residuals_out;

  // cv-index
  std::string index = "cdd";
  std::string approach = "direct";

  // fetch-elev
  std::string endpoint;
  std::string cache_file;
  std::string stations_out;
};

std::vector<Method> parse_methods(const std::string& spec) {
  std::vector<Method> methods;
  std::string token;
  std::stringstream ss(spec == "all" ? std::string("nn,idw,ok,uk,tgk") : spec);
  while (std::getline(ss, token, ',')) {
    if (token.empty()) {
      continue;
    }
    const auto m = method_from_name(token);
    if (!m.has_value()) {
      throw Error("unknown method '" + token + "'");
    }
    methods.push_back(*m);
  }
  if (methods.empty()) {
    throw Error("no methods selected");
  }
  return methods;
}

void finalize(Opts& o) {
  o.cfg.metric = o.distance == "haversine" ? DistanceMetric::Haversine
                                           : DistanceMetric::EuclideanDegrees;
  o.cfg.dry_threshold =
      o.dry_threshold == "below" ? DryThresholdMode::Below : DryThresholdMode::AtMost;
  o.cfg.policy = o.missing_policy == "strict" ? MissingPolicy::Strict : MissingPolicy::BreakRun;
  o.cfg.pooling = o.pooling == "per-period" ? Pooling::PerPeriod : Pooling::Pooled;
  o.cfg.methods = parse_methods(o.methods);
  o.cfg.index = o.index == "cdd" ? IndexKind::Cdd : IndexKind::Mfp;
  o.cfg.approach = o.approach;
}

ObservationPanel load_panel(const Opts& o) {
  if (o.cfg.stations_path.empty() || o.cfg.observations_path.empty()) {
    throw LoadError("--stations and --observations are required");
  }
  return load_dataset(o.cfg.stations_path, o.cfg.observations_path);
}

// Writes through a file when a path is given, stdout otherwise.
class OutputTarget {
 public:
  explicit OutputTarget(const std::string& path) {
    if (!path.empty()) {
      file_.open(path);
      if (!file_) {
        throw LoadError("cannot write " + path);
      }
    }
  }
  std::ostream& stream() { return file_.is_open() ? file_ : std::cout; }

 private:
  std::ofstream file_;
};

void emit_report(const Opts& o, std::vector<ReportRow> rows) {
  OutputTarget target(o.out);
  if (o.cfg.format == "markdown") {
    emit_report_markdown(target.stream(), std::move(rows));
  } else {
    emit_report_csv(target.stream(), std::move(rows));
  }
}

int run_validate(const Opts& o) {
  const ObservationPanel panel = load_panel(o);
  const ValidationReport report = validate_panel(panel);

  std::cout << "stations: " << panel.n_stations() << "\n";
  std::cout << "dates: " << panel.n_dates();
  if (panel.n_dates() > 0) {
    std::cout << " (" << format_date(panel.dates.front()) << " .. "
              << format_date(panel.dates.back()) << ")";
  }
  std::cout << "\n";
  long missing = 0;
  for (const long m : report.missing_days) {
    missing += m;
  }
  std::cout << "missing precip cells: " << missing << "\n";

  for (const std::string& id : report.duplicate_station_ids) {
    std::cout << "duplicate station id: " << id << "\n";
  }
  for (const CellRef& cell : report.negative_values) {
    std::cout << "negative value: " << cell.station_id << " " << format_date(cell.date)
              << "\n";
  }
  for (const std::string& note : report.structural_notes) {
    std::cout << "note: " << note << "\n";
  }
  if (!report.ok()) {
    std::cout << "validation failed\n";
    return kExitValidation;
  }
  std::cout << "validation passed\n";
  return kExitOk;
}

int run_interpolate(const Opts& o) {
  if (o.date.empty()) {
    throw LoadError("--date is required");
  }
  const ObservationPanel panel = load_panel(o);

  const Date date = parse_date(o.date);
  std::size_t day = panel.n_dates();
  for (std::size_t d = 0; d < panel.n_dates(); ++d) {
    if (panel.dates[d] == date) {
      day = d;
      break;
    }
  }
  if (day == panel.n_dates()) {
    throw LoadError("date " + o.date + " is not in the panel");
  }

  Station target;
  if (!o.target_station.empty()) {
    bool found = false;
    for (const Station& st : panel.stations) {
      if (st.id == o.target_station) {
        target = st;
        found = true;
        break;
      }
    }
    if (!found) {
      throw LoadError("station '" + o.target_station + "' is not in the registry");
    }
  } else if (o.target_lat.has_value() && o.target_lon.has_value()) {
    target.id = "target";
    target.lat = *o.target_lat;
    target.lon = *o.target_lon;
    target.elev_m = o.target_elev;
  } else {
    throw LoadError("give either --station or both --lat and --lon");
  }

  FieldSnapshot snapshot;
  snapshot.label = o.date;
  snapshot.stations = panel.stations;
  snapshot.values.reserve(panel.n_stations());
  for (std::size_t s = 0; s < panel.n_stations(); ++s) {
    snapshot.values.push_back(panel.precip_at(s, day));
  }
  // the target's own observation must not predict itself
  if (!o.target_station.empty()) {
    for (std::size_t s = 0; s < panel.n_stations(); ++s) {
      if (panel.stations[s].id == o.target_station) {
        snapshot.values[s] = std::nullopt;
      }
    }
  }

  std::vector<PredictionRecord> predictions;
  std::vector<ModelRecord> models;
  for (const Method m : o.cfg.methods) {
    const DayInterpolator unit = DayInterpolator::create(m, snapshot, o.cfg.eval().predict);
    const auto [value, variance] = unit.predict_with_variance(target);
    predictions.push_back({date, target.id, m, value, variance, unit.fallback()});
    if (unit.model().has_value()) {
      models.push_back({date, *unit.model(), unit.diagnostics()->converged,
                        unit.diagnostics()->iterations});
    }
  }

  OutputTarget target_out(o.out);
  emit_predictions_csv(target_out.stream(), predictions);
  if (!o.models_out.empty()) {
    OutputTarget models_target(o.models_out);
    emit_models_csv(models_target.stream(), models);
  }
  return kExitOk;
}

int run_cv_daily(const Opts& o) {
  const ObservationPanel panel = load_panel(o);
  std::vector<std::string> ids;
  for (const Station& st : panel.stations) {
    ids.push_back(st.id);
  }
  const FoldAssignment folds = kfold_split(ids, o.cfg.k, o.cfg.seed);

  if (!o.residuals_out.empty() && o.cfg.methods.size() != 1) {
    throw Error("--residuals-out needs exactly one method");
  }

  std::vector<ReportRow> rows;
  for (const Method m : o.cfg.methods) {
    const CvDailyResult result = cv_daily(panel, m, folds, o.cfg.eval());
    rows.insert(rows.end(), result.rows.begin(), result.rows.end());
    std::cerr << method_name(m) << ": days used " << result.days_used << ", skipped "
              << result.days_skipped << ", fallback " << result.detail.fallback_count << "/"
              << result.detail.prediction_count << "\n";
    if (!o.residuals_out.empty()) {
      OutputTarget residuals_target(o.residuals_out);
      emit_residuals_csv(residuals_target.stream(), panel, m, result.detail);
    }
  }
  emit_report(o, std::move(rows));
  return kExitOk;
}

int run_cv_index(const Opts& o) {
  const ObservationPanel panel = load_panel(o);
  std::vector<std::string> ids;
  for (const Station& st : panel.stations) {
    ids.push_back(st.id);
  }
  const FoldAssignment folds = kfold_split(ids, o.cfg.k, o.cfg.seed);

  std::vector<ReportRow> rows;
  for (const Method m : o.cfg.methods) {
    const std::vector<ReportRow> part =
        o.cfg.approach == "two-stage"
            ? run_two_stage(panel, o.cfg.index, m, folds, o.cfg.eval())
            : run_direct(panel, o.cfg.index, m, folds, o.cfg.eval());
    rows.insert(rows.end(), part.begin(), part.end());
  }
  emit_report(o, std::move(rows));
  return kExitOk;
}

int run_moments(const Opts& o) {
  const ObservationPanel panel = load_panel(o);
  std::vector<MomentRow> rows = panel_moments(panel);
  for (const IndexKind kind : {IndexKind::Cdd, IndexKind::Mfp}) {
    const IndexTable table = index_panel(panel, kind, o.cfg.policy, o.cfg.dry_threshold);
    const std::vector<MomentRow> part = index_moments(table);
    rows.insert(rows.end(), part.begin(), part.end());
  }
  OutputTarget target(o.out);
  emit_moments_csv(target.stream(), std::move(rows));
  return kExitOk;
}

int run_fetch_elev(const Opts& o) {
  if (o.cfg.stations_path.empty()) {
    throw LoadError("--stations is required");
  }
  if (o.endpoint.empty() && !o.cfg.offline) {
    throw LoadError("--endpoint is required unless --offline");
  }
  const std::vector<Station> stations = load_stations(o.cfg.stations_path);

  std::string cache_path = o.cache_file;
  if (cache_path.empty()) {
    const std::string dir = cache_dir();
    std::filesystem::create_directories(dir);
    cache_path = dir + "/elevations.csv";
  }
  ElevationCache cache = ElevationCache::load(cache_path);

  FetchOptions options;
  options.offline = o.cfg.offline;
  const FetchOutcome outcome = fetch_elevations(stations, o.endpoint, cache, options);
  cache.save(cache_path);

  std::cerr << "elevations: " << outcome.from_cache << " cached, " << outcome.from_service
            << " fetched, " << outcome.failed_ids.size() << " failed\n";

  const std::string out_path = o.stations_out.empty() ? o.cfg.stations_path : o.stations_out;
  write_stations(out_path, outcome.stations);

  if (!outcome.failed_ids.empty()) {
    for (const std::string& id : outcome.failed_ids) {
      std::cerr << "no elevation for station " << id << "\n";
    }
    return kExitNetwork;
  }
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"spatial interpolation and precipitation index toolkit"};
  app.require_subcommand(1);
  app.fallthrough();
  app.set_config("--config", "", "flat key=value config file");

  Opts o;
  app.add_option("--stations", o.cfg.stations_path, "station registry CSV");
  app.add_option("--observations", o.cfg.observations_path, "daily observations CSV");
  app.add_option("--distance", o.distance, "distance metric")
      ->check(CLI::IsMember({"haversine", "euclidean-degrees"}));
  app.add_option("--idw-power", o.cfg.idw_power, "IDW distance power");
  app.add_option("--idw-n-max", o.cfg.idw_n_max, "IDW neighborhood cap");
  app.add_option("--lambda", o.cfg.boxcox_lambda, "Box-Cox power for TGK");
  app.add_flag("--fit-nugget", o.cfg.fit_nugget, "fit a nugget term");
  app.add_option("--dry-threshold", o.dry_threshold, "dry day rule vs 1 mm")
      ->check(CLI::IsMember({"below", "at-most"}));
  app.add_option("--missing-policy", o.missing_policy, "missing day handling")
      ->check(CLI::IsMember({"strict", "break-run"}));
  app.add_option("--pooling", o.pooling, "within-year residual pooling")
      ->check(CLI::IsMember({"per-period", "pooled"}));
  app.add_option("--k", o.cfg.k, "fold count");
  app.add_option("--seed", o.cfg.seed, "fold shuffle seed");
  app.add_option("--threads", o.cfg.threads, "worker threads (0 = auto)");
  app.add_option("--methods", o.methods, "comma list of nn,idw,ok,uk,tgk or 'all'");
  app.add_option("--format", o.cfg.format, "report format")
      ->check(CLI::IsMember({"csv", "markdown"}));
  app.add_option("--out", o.out, "output file (default stdout)");

  CLI::App* validate = app.add_subcommand("validate", "load and check a dataset");

  CLI::App* interpolate =
      app.add_subcommand("interpolate", "predict one day at one target");
  interpolate->add_option("--date", o.date, "ISO date inside the panel");
  interpolate->add_option("--station", o.target_station,
                          "target station id (its observation is withheld)");
  interpolate->add_option("--lat", o.target_lat, "target latitude");
  interpolate->add_option("--lon", o.target_lon, "target longitude");
  interpolate->add_option("--elev", o.target_elev, "target elevation, meters (for uk)");
  interpolate->add_option("--models-out", o.models_out, "write fitted model rows here");

  CLI::App* cv_daily_cmd =
      app.add_subcommand("cv-daily", "cross-validate daily precipitation");
  cv_daily_cmd->add_option("--residuals-out", o.residuals_out,
                           "per-day residual CSV (single method only)");

  CLI::App* cv_index_cmd =
      app.add_subcommand("cv-index", "cross-validate a precipitation index");
  cv_index_cmd->add_option("--index", o.index, "index to evaluate")
      ->check(CLI::IsMember({"cdd", "mfp"}));
  cv_index_cmd->add_option("--approach", o.approach, "evaluation pipeline")
      ->check(CLI::IsMember({"direct", "two-stage"}));

  CLI::App* moments = app.add_subcommand("moments", "distribution shape report");

  CLI::App* fetch = app.add_subcommand("fetch-elev", "fill station elevations");
  fetch->add_option("--endpoint", o.endpoint, "elevation service URL");
  fetch->add_option("--cache-file", o.cache_file, "elevation cache CSV");
  fetch->add_flag("--offline", o.cfg.offline, "never touch the network");
  fetch->add_option("--stations-out", o.stations_out,
                    "where to write the updated registry (default: in place)");

  CLI11_PARSE(app, argc, argv);

  try {
    finalize(o);
    if (validate->parsed()) {
      return run_validate(o);
    }
    if (interpolate->parsed()) {
      return run_interpolate(o);
    }
    if (cv_daily_cmd->parsed()) {
      return run_cv_daily(o);
    }
    if (cv_index_cmd->parsed()) {
      return run_cv_index(o);
    }
    if (moments->parsed()) {
      return run_moments(o);
    }
    if (fetch->parsed()) {
      return run_fetch_elev(o);
    }
  } catch (const OfflineMissError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitNetwork;
  } catch (const ServiceError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitNetwork;
  } catch (const LoadError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitLoad;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitValidation;
  }
  return kExitOk;
}
