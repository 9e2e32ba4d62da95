#include "wxkrig/interpolate.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <limits>
#include <numeric>
#include <utility>

#include "wxkrig/errors.hpp"

namespace wxkrig {

namespace {

constexpr double kCoincidentKm = 1e-9;
constexpr double kJitterScale = 1e-10;
constexpr double kConstantSd = 1e-12;

struct CompactField {
  std::vector<Station> stations;
  Eigen::VectorXd values;
  std::vector<std::size_t> source_rows;  // index into the original snapshot
};

CompactField compact_present(const FieldSnapshot& snapshot) {
  if (snapshot.stations.size() != snapshot.values.size()) {
    throw StructuralError("snapshot stations and values differ in length");
  }
  std::vector<std::size_t> rows;
  for (std::size_t i = 0; i < snapshot.stations.size(); ++i) {
    if (snapshot.values[i].has_value()) {
      rows.push_back(i);
    }
  }
  if (rows.empty()) {
    throw NoDataError("no present values in snapshot" +
                      (snapshot.label.empty() ? "" : " " + snapshot.label));
  }
  // canonical id order: downstream solves come out identical no matter how
  // the caller ordered its stations
  std::sort(rows.begin(), rows.end(), [&](std::size_t a, std::size_t b) {
    return snapshot.stations[a].id != snapshot.stations[b].id
               ? snapshot.stations[a].id < snapshot.stations[b].id
               : a < b;
  });

  CompactField out;
  out.values.resize(static_cast<Eigen::Index>(rows.size()));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    out.stations.push_back(snapshot.stations[rows[i]]);
    out.values[static_cast<Eigen::Index>(i)] = *snapshot.values[rows[i]];
    out.source_rows.push_back(rows[i]);
  }
  return out;
}

// Column z-scoring for conditioning only; constant columns (the intercept
// among them) pass through so the unbiasedness constraints keep their form.
struct Standardizer {
  Eigen::VectorXd mean;
  Eigen::VectorXd scale;

  static Standardizer fit(const Eigen::MatrixXd& x) {
    Standardizer s;
    s.mean = Eigen::VectorXd::Zero(x.cols());
    s.scale = Eigen::VectorXd::Ones(x.cols());
    for (Eigen::Index c = 0; c < x.cols(); ++c) {
      const double m = x.col(c).mean();
      const double sd = std::sqrt((x.col(c).array() - m).square().mean());
      if (sd > kConstantSd) {
        s.mean[c] = m;
        s.scale[c] = sd;
      }
    }
    return s;
  }

  Eigen::MatrixXd apply(const Eigen::MatrixXd& x) const {
    return (x.rowwise() - mean.transpose()).array().rowwise() /
           scale.transpose().array();
  }

  Eigen::VectorXd apply_row(const Eigen::VectorXd& row) const {
    return (row - mean).cwiseQuotient(scale);
  }
};

// Shared solver state for one day's kriging system; fits nothing itself.
struct KrigingCore {
  std::vector<Station> stations;
  Eigen::VectorXd z;
  CovarianceModel model;
  DistanceMetric metric = DistanceMetric::Haversine;

  Eigen::LLT<Eigen::MatrixXd> llt;
  Eigen::VectorXd ci_z;
  Eigen::VectorXd ci_one;
  double one_ci_one = 0.0;
  double mu = 0.0;

  bool universal = false;
  Standardizer standardizer;
  Eigen::MatrixXd xs;
  Eigen::MatrixXd ci_x;
  Eigen::LDLT<Eigen::MatrixXd> normal_ldlt;
  Eigen::VectorXd beta;

  static KrigingCore build(std::vector<Station> stations, Eigen::VectorXd values,
                           const std::optional<Eigen::MatrixXd>& raw_design,
                           const CovarianceModel& model, DistanceMetric metric) {
    KrigingCore core;
    core.stations = std::move(stations);
    core.z = std::move(values);
    core.model = model;
    core.metric = metric;

    const auto n = static_cast<Eigen::Index>(core.stations.size());
    const DistanceMatrix dist = DistanceMatrix::build(core.stations, metric);
    Eigen::MatrixXd cov(n, n);
    for (Eigen::Index i = 0; i < n; ++i) {
      for (Eigen::Index j = i; j < n; ++j) {
        const double c = covariance_at(model, dist(i, j));
        cov(i, j) = c;
        cov(j, i) = c;
      }
    }
    cov.diagonal().array() += kJitterScale * model.sigma2;

    core.llt.compute(cov);
    if (core.llt.info() != Eigen::Success) {
      throw NumericalError("covariance matrix not positive definite");
    }
    const Eigen::VectorXd ones = Eigen::VectorXd::Ones(n);
    core.ci_one = core.llt.solve(ones);
    core.one_ci_one = ones.dot(core.ci_one);
    if (!(core.one_ci_one > 0.0)) {
      throw NumericalError("degenerate unbiasedness normalization");
    }
    core.ci_z = core.llt.solve(core.z);
    core.mu = ones.dot(core.ci_z) / core.one_ci_one;

    if (raw_design.has_value()) {
      const Eigen::MatrixXd& raw = *raw_design;
      if (raw.rows() != n) {
        throw StructuralError("design rows do not match station count");
      }
      if (!raw.allFinite()) {
        throw MissingCovariateError("design contains non-finite covariates");
      }
      core.universal = true;
      core.standardizer = Standardizer::fit(raw);
      core.xs = core.standardizer.apply(raw);
      const Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(core.xs);
      if (qr.rank() < core.xs.cols()) {
        throw SingularDesignError("collinear covariates in kriging design");
      }
      core.ci_x = core.llt.solve(core.xs);
      const Eigen::MatrixXd normal = core.xs.transpose() * core.ci_x;
      core.normal_ldlt.compute(normal);
      if (core.normal_ldlt.info() != Eigen::Success) {
        throw SingularDesignError("normal equations not solvable");
      }
      core.beta = core.normal_ldlt.solve(core.ci_x.transpose() * core.z);
    }
    return core;
  }

  KrigingSolution solve(const GeoPoint& target,
                        const std::optional<Eigen::VectorXd>& raw_row) const {
    const auto n = static_cast<Eigen::Index>(stations.size());
    Eigen::VectorXd cvec(n);
    for (Eigen::Index i = 0; i < n; ++i) {
      cvec[i] = covariance_at(model, distance(target, stations[static_cast<std::size_t>(i)].location(), metric));
    }
    const Eigen::VectorXd ci_c = llt.solve(cvec);
    const double c0 = covariance_at(model, 0.0);

    KrigingSolution sol;
    if (!universal) {
      const double m = (1.0 - ci_c.sum()) / one_ci_one;
      sol.weights = ci_c + m * ci_one;
      sol.value = sol.weights.dot(z);
      sol.variance = c0 - sol.weights.dot(cvec) + m;
      sol.lagrange = m;
      sol.trend = mu;
    } else {
      if (!raw_row.has_value()) {
        throw MissingCovariateError("universal kriging target needs covariates");
      }
      if (!raw_row->allFinite()) {
        throw MissingCovariateError("target covariates are not finite");
      }
      const Eigen::VectorXd xrow = standardizer.apply_row(*raw_row);
      const Eigen::VectorXd gap = xrow - xs.transpose() * ci_c;
      const Eigen::VectorXd nu = normal_ldlt.solve(gap);
      sol.weights = ci_c + ci_x * nu;
      sol.value = sol.weights.dot(z);
      sol.variance = c0 - sol.weights.dot(cvec) + xrow.dot(nu);
      sol.lagrange = nu[0];
      sol.trend = xrow.dot(beta);
    }

    const double slack = 1e-8 * std::max(1.0, c0);
    if (sol.variance < -slack) {
      throw NumericalError("kriging variance strongly negative");
    }
    sol.variance = std::max(sol.variance, 0.0);
    return sol;
  }
};

// Fits a spherical model to the field itself (constant trend); throws the
// usual fallback-triggering errors for degenerate days.
std::pair<CovarianceModel, FitDiagnostics> fit_field_model(const CompactField& field,
                                                           const VariogramConfig& vconfig,
                                                           DistanceMetric metric) {
  const DistanceMatrix dist = DistanceMatrix::build(field.stations, metric);
  double cutoff = vconfig.cutoff_km;
  if (cutoff <= 0.0) {
    cutoff = dist.max_distance() / 3.0;
  }
  if (cutoff <= 0.0) {
    throw DegenerateFieldError("stations are co-located");
  }
  const std::vector<double> vals(field.values.data(), field.values.data() + field.values.size());
  const EmpiricalVariogram emp = empirical_semivariogram(vals, dist, cutoff, vconfig.n_bins);

  CovarianceModel init;
  init.sigma2 = (field.values.array() - field.values.mean()).square().mean();
  init.range_km = cutoff / 2.0;
  init.nugget = 0.0;

  auto fitted = fit_spherical(emp, init, vconfig);
  if (!fitted.second.converged) {
    throw NonConvergenceError("variogram fit did not converge");
  }
  if (!(fitted.first.sill() > 0.0)) {
    throw DegenerateFieldError("fitted sill is zero");
  }
  return fitted;
}

Eigen::MatrixXd covariate_design(const std::vector<Station>& stations) {
  Eigen::MatrixXd x(static_cast<Eigen::Index>(stations.size()), 4);
  for (std::size_t i = 0; i < stations.size(); ++i) {
    const Station& st = stations[i];
    if (!st.elev_m.has_value()) {
      throw MissingCovariateError("station " + st.id + " has no elevation");
    }
    const auto r = static_cast<Eigen::Index>(i);
    x(r, 0) = 1.0;
    x(r, 1) = st.lat;
    x(r, 2) = st.lon;
    x(r, 3) = *st.elev_m;
  }
  return x;
}

Eigen::VectorXd covariate_row(const Station& st) {
  if (!st.elev_m.has_value()) {
    throw MissingCovariateError("target " + st.id + " has no elevation");
  }
  Eigen::VectorXd row(4);
  row << 1.0, st.lat, st.lon, *st.elev_m;
  return row;
}

bool all_equal(const Eigen::VectorXd& v) {
  return v.size() == 0 || ((v.array() - v[0]).abs().maxCoeff() == 0.0);
}

}  // namespace

const char* method_name(Method m) {
  switch (m) {
    case Method::NN:
      return "nn";
    case Method::IDW:
      return "idw";
    case Method::OK:
      return "ok";
    case Method::UK:
      return "uk";
    case Method::TGK:
      return "tgk";
  }
  return "?";
}

std::optional<Method> method_from_name(const std::string& name) {
  std::string low;
  low.reserve(name.size());
  for (char c : name) {
    low.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
  }
  if (low == "nn") return Method::NN;
  if (low == "idw") return Method::IDW;
  if (low == "ok") return Method::OK;
  if (low == "uk") return Method::UK;
  if (low == "tgk") return Method::TGK;
  return std::nullopt;
}

std::size_t FieldSnapshot::present_count() const {
  return static_cast<std::size_t>(
      std::count_if(values.begin(), values.end(),
                    [](const std::optional<double>& v) { return v.has_value(); }));
}

double boxcox(double z, const TransformSpec& spec) {
  if (z < 0.0) {
    throw DomainError("power transform requires non-negative values");
  }
  if (spec.lambda == 0.0) {
    if (z <= 0.0) {
      throw DomainError("log transform requires positive values");
    }
    return std::log(z);
  }
  return (std::pow(z, spec.lambda) - 1.0) / spec.lambda;
}

double boxcox_inverse(double y, const TransformSpec& spec) {
  if (spec.lambda == 0.0) {
    return std::exp(y);
  }
  const double t = std::max(spec.lambda * y + 1.0, 0.0);
  return std::pow(t, 1.0 / spec.lambda);
}

double boxcox_inverse_dd(double y, const TransformSpec& spec) {
  if (spec.lambda == 0.0) {
    return std::exp(y);
  }
  const double t = std::max(spec.lambda * y + 1.0, 0.0);
  return (1.0 - spec.lambda) * std::pow(t, 1.0 / spec.lambda - 2.0);
}

double tgk_back_transform(double yhat, double mu, double variance, double lagrange,
                          const TransformSpec& spec) {
  return boxcox_inverse(yhat, spec) +
         boxcox_inverse_dd(mu, spec) * (variance / 2.0 - lagrange);
}

double nn_predict(const FieldSnapshot& snapshot, const GeoPoint& target,
                  DistanceMetric metric) {
  const CompactField field = compact_present(snapshot);
  std::size_t best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < field.stations.size(); ++i) {
    const double d = distance(target, field.stations[i].location(), metric);
    if (d < best_d || (d == best_d && field.stations[i].id < field.stations[best].id)) {
      best = i;
      best_d = d;
    }
  }
  return field.values[static_cast<Eigen::Index>(best)];
}

double idw_predict(const FieldSnapshot& snapshot, const GeoPoint& target, double power,
                   int n_max, DistanceMetric metric) {
  if (n_max < 1) {
    throw DomainError("neighborhood size must be at least one");
  }
  if (power <= 0.0) {
    throw DomainError("distance power must be positive");
  }
  const CompactField field = compact_present(snapshot);
  const std::size_t n = field.stations.size();

  std::vector<double> dist(n);
  std::size_t nearest = 0;
  for (std::size_t i = 0; i < n; ++i) {
    dist[i] = distance(target, field.stations[i].location(), metric);
    if (dist[i] < dist[nearest] ||
        (dist[i] == dist[nearest] && field.stations[i].id < field.stations[nearest].id)) {
      nearest = i;
    }
  }
  if (dist[nearest] < kCoincidentKm) {
    return field.values[static_cast<Eigen::Index>(nearest)];
  }

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  const auto closer = [&](std::size_t a, std::size_t b) {
    if (dist[a] != dist[b]) return dist[a] < dist[b];
    return field.stations[a].id < field.stations[b].id;
  };
  const std::size_t take = std::min(static_cast<std::size_t>(n_max), n);
  std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(take),
                    order.end(), closer);
  if (take == 1) {
    // a lone neighbor gets weight one; dividing w*v by w would round twice
    return field.values[static_cast<Eigen::Index>(order[0])];
  }

  double wsum = 0.0, vsum = 0.0;
  for (std::size_t k = 0; k < take; ++k) {
    const std::size_t i = order[k];
    const double w = 1.0 / std::pow(dist[i], power);
    wsum += w;
    vsum += w * field.values[static_cast<Eigen::Index>(i)];
  }
  return vsum / wsum;
}

KrigingSolution ok_predict(const FieldSnapshot& snapshot, const CovarianceModel& model,
                           const GeoPoint& target, DistanceMetric metric) {
  CompactField field = compact_present(snapshot);
  const KrigingCore core = KrigingCore::build(std::move(field.stations),
                                              std::move(field.values), std::nullopt,
                                              model, metric);
  return core.solve(target, std::nullopt);
}

KrigingSolution uk_predict(const FieldSnapshot& snapshot, const Eigen::MatrixXd& design,
                           const Eigen::VectorXd& target_row, const CovarianceModel& model,
                           const GeoPoint& target, DistanceMetric metric) {
  if (design.rows() != static_cast<Eigen::Index>(snapshot.stations.size())) {
    throw StructuralError("design rows do not match snapshot stations");
  }
  CompactField field = compact_present(snapshot);
  Eigen::MatrixXd present_design(static_cast<Eigen::Index>(field.source_rows.size()),
                                 design.cols());
  for (std::size_t i = 0; i < field.source_rows.size(); ++i) {
    present_design.row(static_cast<Eigen::Index>(i)) =
        design.row(static_cast<Eigen::Index>(field.source_rows[i]));
  }
  const KrigingCore core = KrigingCore::build(std::move(field.stations),
                                              std::move(field.values),
                                              std::move(present_design), model, metric);
  return core.solve(target, target_row);
}

double tgk_predict(const FieldSnapshot& snapshot, const GeoPoint& target,
                   const TransformSpec& spec, const VariogramConfig& vconfig,
                   DistanceMetric metric) {
  CompactField field = compact_present(snapshot);
  if (all_equal(field.values)) {
    return field.values[0];
  }
  Eigen::VectorXd y(field.values.size());
  for (Eigen::Index i = 0; i < y.size(); ++i) {
    y[i] = boxcox(field.values[i], spec);
  }
  CompactField transformed;
  transformed.stations = field.stations;
  transformed.values = y;
  auto [model, diag] = fit_field_model(transformed, vconfig, metric);
  (void)diag;
  const KrigingCore core = KrigingCore::build(std::move(transformed.stations), std::move(y),
                                              std::nullopt, model, metric);
  const KrigingSolution sol = core.solve(target, std::nullopt);
  const double z = tgk_back_transform(sol.value, sol.trend, sol.variance, sol.lagrange, spec);
  return std::max(z, 0.0);
}

struct DayInterpolator::KrigingState {
  KrigingCore core;
  bool transformed = false;
  TransformSpec spec;
  std::optional<double> constant_value;
};

DayInterpolator DayInterpolator::create(Method method, const FieldSnapshot& snapshot,
                                        const PredictConfig& config) {
  DayInterpolator di;
  di.requested_ = method;
  di.effective_ = method;
  di.config_ = config;

  CompactField field = compact_present(snapshot);
  di.compact_.label = snapshot.label;
  di.compact_.stations = field.stations;
  di.compact_.values.assign(field.stations.size(), std::nullopt);
  for (std::size_t i = 0; i < field.stations.size(); ++i) {
    di.compact_.values[i] = field.values[static_cast<Eigen::Index>(i)];
  }

  if (method == Method::NN || method == Method::IDW) {
    return di;
  }

  try {
    auto state = std::make_shared<KrigingState>();
    switch (method) {
      case Method::OK: {
        auto [model, diag] = fit_field_model(field, config.variogram, config.metric);
        di.model_ = model;
        di.diagnostics_ = diag;
        state->core = KrigingCore::build(field.stations, field.values, std::nullopt, model,
                                         config.metric);
        break;
      }
      case Method::UK: {
        const Eigen::MatrixXd design = covariate_design(field.stations);
        const std::vector<double> vals(field.values.data(),
                                       field.values.data() + field.values.size());
        const DistanceMatrix dist = DistanceMatrix::build(field.stations, config.metric);
        const TrendCovarianceFit fit =
            fit_trend_covariance(vals, design, dist, config.variogram);
        di.model_ = fit.model;
        di.diagnostics_ = fit.diagnostics;
        if (!fit.diagnostics.converged) {
          throw NonConvergenceError("variogram fit did not converge");
        }
        if (!(fit.model.sill() > 0.0)) {
          throw DegenerateFieldError("fitted sill is zero");
        }
        state->core = KrigingCore::build(field.stations, field.values, design, fit.model,
                                         config.metric);
        break;
      }
      case Method::TGK: {
        state->transformed = true;
        state->spec = config.transform;
        if (all_equal(field.values)) {
          state->constant_value = field.values[0];
          break;
        }
        Eigen::VectorXd y(field.values.size());
        for (Eigen::Index i = 0; i < y.size(); ++i) {
          y[i] = boxcox(field.values[i], config.transform);
        }
        CompactField transformed;
        transformed.stations = field.stations;
        transformed.values = y;
        auto [model, diag] = fit_field_model(transformed, config.variogram, config.metric);
        di.model_ = model;
        di.diagnostics_ = diag;
        state->core = KrigingCore::build(field.stations, std::move(y), std::nullopt, model,
                                         config.metric);
        break;
      }
      default:
        break;
    }
    di.kriging_ = std::move(state);
  } catch (const DegenerateFieldError&) {
    di.effective_ = Method::IDW;
  } catch (const NonConvergenceError&) {
    di.effective_ = Method::IDW;
  } catch (const NumericalError&) {
    di.effective_ = Method::IDW;
  } catch (const InsufficientBinsError&) {
    di.effective_ = Method::IDW;
  } catch (const InsufficientDataError&) {
    di.effective_ = Method::IDW;
  } catch (const SingularDesignError&) {
    di.effective_ = Method::IDW;
  }
  return di;
}

double DayInterpolator::predict_impl(const GeoPoint& target,
                                     const std::optional<Eigen::VectorXd>& row) const {
  switch (effective_) {
    case Method::NN:
      return nn_predict(compact_, target, config_.metric);
    case Method::IDW:
      return idw_predict(compact_, target, config_.idw_power, config_.idw_n_max,
                         config_.metric);
    case Method::OK:
      return kriging_->core.solve(target, std::nullopt).value;
    case Method::UK:
      return kriging_->core.solve(target, row).value;
    case Method::TGK: {
      if (kriging_->constant_value.has_value()) {
        return *kriging_->constant_value;
      }
      const KrigingSolution sol = kriging_->core.solve(target, std::nullopt);
      const double z =
          tgk_back_transform(sol.value, sol.trend, sol.variance, sol.lagrange, kriging_->spec);
      return std::max(z, 0.0);
    }
  }
  throw Error("unreachable method");
}

double DayInterpolator::predict(const Station& target) const {
  if (effective_ == Method::UK) {
    return predict_impl(target.location(), covariate_row(target));
  }
  return predict_impl(target.location(), std::nullopt);
}

double DayInterpolator::predict(const GeoPoint& target) const {
  if (effective_ == Method::UK) {
    throw MissingCovariateError("universal kriging target needs covariates");
  }
  return predict_impl(target, std::nullopt);
}

std::pair<double, std::optional<double>> DayInterpolator::predict_with_variance(
    const Station& target) const {
  if (effective_ == Method::OK) {
    const KrigingSolution sol = kriging_->core.solve(target.location(), std::nullopt);
    return {sol.value, sol.variance};
  }
  if (effective_ == Method::UK) {
    const KrigingSolution sol = kriging_->core.solve(target.location(), covariate_row(target));
    return {sol.value, sol.variance};
  }
  return {predict(target), std::nullopt};
}

FallbackResult with_fallback(Method primary, const FieldSnapshot& snapshot,
                             const GeoPoint& target, const PredictConfig& config) {
  const DayInterpolator di = DayInterpolator::create(primary, snapshot, config);
  FallbackResult result;
  result.value = di.predict(target);
  result.used = di.effective();
  result.fallback = di.fallback();
  return result;
}

}  // namespace wxkrig
