#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <optional>
#include <string>
#include <vector>

#include "wxkrig/config.hpp"
#include "wxkrig/csv_io.hpp"
#include "wxkrig/errors.hpp"
#include "wxkrig/evaluate.hpp"

namespace py = pybind11;
using namespace wxkrig;

namespace {

DistanceMetric metric_from(const std::string& name) {
  if (name == "haversine") {
    return DistanceMetric::Haversine;
  }
  if (name == "euclidean-degrees") {
    return DistanceMetric::EuclideanDegrees;
  }
  throw DomainError("unknown metric '" + name + "'");
}

Method method_from(const std::string& name) {
  const auto m = method_from_name(name);
  if (!m.has_value()) {
    throw DomainError("unknown method '" + name + "'");
  }
  return *m;
}

MissingPolicy policy_from(const std::string& name) {
  if (name == "strict") {
    return MissingPolicy::Strict;
  }
  if (name == "break-run") {
    return MissingPolicy::BreakRun;
  }
  throw DomainError("unknown policy '" + name + "'");
}

DryThresholdMode threshold_from(const std::string& name) {
  if (name == "below") {
    return DryThresholdMode::Below;
  }
  if (name == "at-most") {
    return DryThresholdMode::AtMost;
  }
  throw DomainError("unknown threshold mode '" + name + "'");
}

IndexKind index_from(const std::string& name) {
  if (name == "cdd") {
    return IndexKind::Cdd;
  }
  if (name == "mfp") {
    return IndexKind::Mfp;
  }
  throw DomainError("unknown index '" + name + "'");
}

FieldSnapshot make_snapshot(const std::vector<Station>& stations,
                            const std::vector<std::optional<double>>& values) {
  FieldSnapshot snap;
  snap.stations = stations;
  snap.values = values;
  return snap;
}

DailySeries make_series(const std::vector<std::string>& dates,
                        const std::vector<std::optional<double>>& precip) {
  DailySeries series;
  series.dates.reserve(dates.size());
  for (const std::string& d : dates) {
    series.dates.push_back(parse_date(d));
  }
  series.precip = precip;
  return series;
}

py::dict index_value_dict(const IndexValue& iv) {
  py::dict d;
  d["period"] = iv.period;
  d["value"] = iv.value;
  d["completeness"] = iv.completeness;
  return d;
}

py::list report_rows(const std::vector<ReportRow>& rows) {
  py::list out;
  for (const ReportRow& r : rows) {
    py::dict d;
    d["approach"] = r.approach;
    d["method"] = method_name(r.method);
    d["variable"] = r.variable;
    d["year"] = r.year;
    d["metric"] = r.metric;
    d["value"] = r.value;
    d["n_periods"] = r.n_periods;
    d["fallback_rate"] = r.fallback_rate;
    d["seed"] = r.seed;
    out.append(d);
  }
  return out;
}

EvalConfig eval_config(double idw_power, int idw_n_max, double lam, const std::string& metric,
                       const std::string& policy, const std::string& threshold, int threads) {
  EvalConfig cfg;
  cfg.predict.idw_power = idw_power;
  cfg.predict.idw_n_max = idw_n_max;
  cfg.predict.transform.lambda = lam;
  cfg.predict.metric = metric_from(metric);
  cfg.policy = policy_from(policy);
  cfg.threshold = threshold_from(threshold);
  cfg.threads = threads;
  return cfg;
}

FoldAssignment folds_for(const ObservationPanel& panel, int k, std::uint32_t seed) {
  std::vector<std::string> ids;
  ids.reserve(panel.n_stations());
  for (const Station& st : panel.stations) {
    ids.push_back(st.id);
  }
  return kfold_split(std::move(ids), k, seed);
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "spatial interpolation and precipitation index toolkit";

  py::register_exception<Error>(m, "ToolkitError");

  py::class_<Station>(m, "Station")
      .def(py::init([](std::string id, double lat, double lon, std::optional<double> elev_m) {
             Station st;
             st.id = std::move(id);
             st.lat = lat;
             st.lon = lon;
             st.elev_m = elev_m;
             return st;
           }),
           py::arg("id"), py::arg("lat"), py::arg("lon"), py::arg("elev_m") = py::none())
      .def_readwrite("id", &Station::id)
      .def_readwrite("lat", &Station::lat)
      .def_readwrite("lon", &Station::lon)
      .def_readwrite("elev_m", &Station::elev_m)
      .def("__repr__", [](const Station& st) {
        return "Station(" + st.id + ", " + std::to_string(st.lat) + ", " +
               std::to_string(st.lon) + ")";
      });

  py::class_<ObservationPanel>(m, "Panel")
      .def_property_readonly("n_stations", &ObservationPanel::n_stations)
      .def_property_readonly("n_dates", &ObservationPanel::n_dates)
      .def_property_readonly("station_ids",
                             [](const ObservationPanel& p) {
                               std::vector<std::string> ids;
                               for (const Station& st : p.stations) {
                                 ids.push_back(st.id);
                               }
                               return ids;
                             })
      .def_property_readonly("dates",
                             [](const ObservationPanel& p) {
                               std::vector<std::string> out;
                               for (const Date& d : p.dates) {
                                 out.push_back(format_date(d));
                               }
                               return out;
                             })
      .def("precip", [](const ObservationPanel& p, std::size_t station, std::size_t date) {
        if (station >= p.n_stations() || date >= p.n_dates()) {
          throw StructuralError("panel index out of range");
        }
        return p.precip_at(station, date);
      });

  m.def("load_dataset", &load_dataset, py::arg("stations_path"),
        py::arg("observations_path"));

  m.def(
      "validate",
      [](const ObservationPanel& panel) {
        const ValidationReport report = validate_panel(panel);
        long missing = 0;
        for (const long v : report.missing_days) {
          missing += v;
        }
        py::dict d;
        d["ok"] = report.ok();
        d["missing_cells"] = missing;
        d["duplicate_station_ids"] = report.duplicate_station_ids;
        d["structural_notes"] = report.structural_notes;
        d["negative_cells"] = static_cast<long>(report.negative_values.size());
        return d;
      },
      py::arg("panel"));

  m.def(
      "distance",
      [](double lat1, double lon1, double lat2, double lon2, const std::string& metric) {
        return distance({lat1, lon1}, {lat2, lon2}, metric_from(metric));
      },
      py::arg("lat1"), py::arg("lon1"), py::arg("lat2"), py::arg("lon2"),
      py::arg("metric") = "haversine");

  m.def(
      "covariance",
      [](double lag_km, double sigma2, double range_km, double nugget) {
        return covariance_at({sigma2, range_km, nugget}, lag_km);
      },
      py::arg("lag_km"), py::arg("sigma2") = 1.0, py::arg("range_km") = 1.0,
      py::arg("nugget") = 0.0);

  m.def(
      "boxcox", [](double z, double lam) { return boxcox(z, {lam}); }, py::arg("z"),
      py::arg("lam") = 1.0 / 3.0);
  m.def(
      "boxcox_inverse", [](double y, double lam) { return boxcox_inverse(y, {lam}); },
      py::arg("y"), py::arg("lam") = 1.0 / 3.0);
  m.def("tgk_back_transform",
        [](double yhat, double mu, double variance, double lagrange, double lam) {
          return tgk_back_transform(yhat, mu, variance, lagrange, {lam});
        },
        py::arg("yhat"), py::arg("mu"), py::arg("variance"), py::arg("lagrange"),
        py::arg("lam") = 1.0 / 3.0);

  m.def(
      "interpolate_point",
      [](const std::string& method, const std::vector<Station>& stations,
         const std::vector<std::optional<double>>& values, double lat, double lon,
         double idw_power, int idw_n_max, double lam, const std::string& metric) {
        PredictConfig cfg;
        cfg.idw_power = idw_power;
        cfg.idw_n_max = idw_n_max;
        cfg.transform.lambda = lam;
        cfg.metric = metric_from(metric);
        const FallbackResult r =
            with_fallback(method_from(method), make_snapshot(stations, values), {lat, lon}, cfg);
        py::dict d;
        d["value"] = r.value;
        d["method_used"] = method_name(r.used);
        d["fallback"] = r.fallback;
        return d;
      },
      py::arg("method"), py::arg("stations"), py::arg("values"), py::arg("lat"),
      py::arg("lon"), py::arg("idw_power") = 2.0, py::arg("idw_n_max") = 20,
      py::arg("lam") = 1.0 / 3.0, py::arg("metric") = "haversine");

  m.def(
      "cdd",
      [](const std::vector<std::string>& dates,
         const std::vector<std::optional<double>>& precip, const std::string& policy,
         const std::string& threshold) {
        return index_value_dict(
            cdd(make_series(dates, precip), policy_from(policy), threshold_from(threshold)));
      },
      py::arg("dates"), py::arg("precip"), py::arg("policy") = "strict",
      py::arg("threshold") = "below");

  m.def(
      "mfp",
      [](const std::vector<std::string>& dates,
         const std::vector<std::optional<double>>& precip, const std::string& policy) {
        return index_value_dict(mfp(make_series(dates, precip), policy_from(policy)));
      },
      py::arg("dates"), py::arg("precip"), py::arg("policy") = "strict");

  m.def(
      "kfold",
      [](std::vector<std::string> ids, int k, std::uint32_t seed) {
        return kfold_split(std::move(ids), k, seed).fold_of;
      },
      py::arg("ids"), py::arg("k") = 10, py::arg("seed") = 42);

  m.def("rmse", [](const std::vector<double>& p, const std::vector<double>& o) {
    return rmse(p, o);
  });
  m.def("mae", [](const std::vector<double>& p, const std::vector<double>& o) {
    return mae(p, o);
  });
  m.def("skewness", [](const std::vector<double>& s) { return skewness(s); });
  m.def("kurtosis", [](const std::vector<double>& s) { return kurtosis(s); });

  m.def(
      "cv_daily",
      [](const ObservationPanel& panel, const std::string& method, int k, std::uint32_t seed,
         double idw_power, int idw_n_max, double lam, const std::string& metric,
         const std::string& policy, const std::string& threshold, int threads) {
        const FoldAssignment folds = folds_for(panel, k, seed);
        const EvalConfig cfg =
            eval_config(idw_power, idw_n_max, lam, metric, policy, threshold, threads);
        return report_rows(cv_daily(panel, method_from(method), folds, cfg).rows);
      },
      py::arg("panel"), py::arg("method"), py::arg("k") = 10, py::arg("seed") = 42,
      py::arg("idw_power") = 2.0, py::arg("idw_n_max") = 20, py::arg("lam") = 1.0 / 3.0,
      py::arg("metric") = "haversine", py::arg("policy") = "strict",
      py::arg("threshold") = "below", py::arg("threads") = 0);

  m.def(
      "cv_index",
      [](const ObservationPanel& panel, const std::string& index, const std::string& approach,
         const std::string& method, int k, std::uint32_t seed, double idw_power, int idw_n_max,
         double lam, const std::string& metric, const std::string& policy,
         const std::string& threshold, int threads) {
        const FoldAssignment folds = folds_for(panel, k, seed);
        const EvalConfig cfg =
            eval_config(idw_power, idw_n_max, lam, metric, policy, threshold, threads);
        if (approach == "two-stage") {
          return report_rows(
              run_two_stage(panel, index_from(index), method_from(method), folds, cfg));
        }
        if (approach == "direct") {
          return report_rows(
              run_direct(panel, index_from(index), method_from(method), folds, cfg));
        }
        throw DomainError("unknown approach '" + approach + "'");
      },
      py::arg("panel"), py::arg("index"), py::arg("approach"), py::arg("method"),
      py::arg("k") = 10, py::arg("seed") = 42, py::arg("idw_power") = 2.0,
      py::arg("idw_n_max") = 20, py::arg("lam") = 1.0 / 3.0, py::arg("metric") = "haversine",
      py::arg("policy") = "strict", py::arg("threshold") = "below", py::arg("threads") = 0);

  m.def(
      "moments",
      [](const ObservationPanel& panel) {
        py::list out;
        for (const MomentRow& r : panel_moments(panel)) {
          py::dict d;
          d["variable"] = r.variable;
          d["year"] = r.year;
          d["metric"] = r.metric;
          d["value"] = r.value;
          d["n_periods"] = r.n_periods;
          d["n_skipped"] = r.n_skipped;
          out.append(d);
        }
        return out;
      },
      py::arg("panel"));
}
