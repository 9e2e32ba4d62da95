#include "wxkrig/covariance.hpp"

#include <algorithm>
#include <cmath>

#include "wxkrig/errors.hpp"

namespace wxkrig {

namespace {

constexpr double kWeightFloor = 1e-12;
constexpr double kJitterScale = 1e-10;

// Unit spherical semivariogram shape: 1.5u - 0.5u^3 on [0,1], 1 beyond.
double spherical_shape(double u) {
  if (u >= 1.0) {
    return 1.0;
  }
  return 1.5 * u - 0.5 * u * u * u;
}

struct FitProblem {
  Eigen::VectorXd lags;
  Eigen::VectorXd gammas;
  Eigen::VectorXd sqrt_weights;
  bool fit_nugget = false;

  int n_params() const { return fit_nugget ? 3 : 2; }

  double model_semivariance(const Eigen::VectorXd& theta, double h) const {
    if (h <= 0.0) {
      return 0.0;
    }
    const double nugget = fit_nugget ? theta[2] : 0.0;
    return nugget + theta[0] * spherical_shape(h / theta[1]);
  }

  Eigen::VectorXd residuals(const Eigen::VectorXd& theta) const {
    Eigen::VectorXd r(lags.size());
    for (Eigen::Index b = 0; b < lags.size(); ++b) {
      r[b] = sqrt_weights[b] * (model_semivariance(theta, lags[b]) - gammas[b]);
    }
    return r;
  }

  Eigen::MatrixXd jacobian(const Eigen::VectorXd& theta) const {
    Eigen::MatrixXd j(lags.size(), n_params());
    const double sigma2 = theta[0];
    const double range = theta[1];
    for (Eigen::Index b = 0; b < lags.size(); ++b) {
      const double h = lags[b];
      const double u = h / range;
      j(b, 0) = sqrt_weights[b] * spherical_shape(u);
      if (h > 0.0 && u < 1.0) {
        j(b, 1) = sqrt_weights[b] * (-1.5 * sigma2 * h / (range * range)) * (1.0 - u * u);
      } else {
        j(b, 1) = 0.0;
      }
      if (fit_nugget) {
        j(b, 2) = h > 0.0 ? sqrt_weights[b] : 0.0;
      }
    }
    return j;
  }
};

// The range is boxed into the identifiable region: structure beyond a few
// cutoffs cannot be told apart from a straight line through the bins, and an
// unbounded range lets the solver run along the sigma2/range ridge forever.
Eigen::VectorXd clamp_params(Eigen::VectorXd theta, double min_range, double max_range) {
  theta[0] = std::max(theta[0], 0.0);
  theta[1] = std::clamp(theta[1], min_range, max_range);
  if (theta.size() > 2) {
    theta[2] = std::max(theta[2], 0.0);
  }
  return theta;
}

}  // namespace

double covariance_at(const CovarianceModel& model, double lag_km) {
  if (lag_km < 0.0) {
    throw DomainError("negative lag");
  }
  if (lag_km == 0.0) {
    return model.nugget + model.sigma2;
  }
  const double u = lag_km / model.range_km;
  if (u > 1.0) {
    return 0.0;
  }
  return model.sigma2 * (1.0 - spherical_shape(u));
}

double semivariance_at(const CovarianceModel& model, double lag_km) {
  if (lag_km < 0.0) {
    throw DomainError("negative lag");
  }
  if (lag_km == 0.0) {
    return 0.0;
  }
  return model.nugget + model.sigma2 * spherical_shape(lag_km / model.range_km);
}

EmpiricalVariogram empirical_semivariogram(std::span<const double> values,
                                           const DistanceMatrix& distances, double cutoff_km,
                                           int n_bins) {
  if (values.size() < 2) {
    throw InsufficientDataError("semivariogram needs at least two values");
  }
  if (static_cast<Eigen::Index>(values.size()) != distances.size()) {
    throw StructuralError("value vector does not match distance matrix");
  }
  if (cutoff_km <= 0.0) {
    throw DomainError("cutoff must be positive");
  }
  if (n_bins < 1) {
    throw DomainError("need at least one bin");
  }

  const double width = cutoff_km / n_bins;
  std::vector<double> sq_sums(static_cast<std::size_t>(n_bins), 0.0);
  std::vector<double> lag_sums(static_cast<std::size_t>(n_bins), 0.0);
  std::vector<long> counts(static_cast<std::size_t>(n_bins), 0);

  const auto n = static_cast<std::size_t>(values.size());
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      const double d = distances(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
      if (d > cutoff_km) {
        continue;
      }
      auto bin = static_cast<std::size_t>(d / width);
      bin = std::min(bin, static_cast<std::size_t>(n_bins - 1));
      const double diff = values[i] - values[j];
      sq_sums[bin] += diff * diff;
      lag_sums[bin] += d;
      ++counts[bin];
    }
  }

  EmpiricalVariogram result;
  result.cutoff_km = cutoff_km;
  for (std::size_t b = 0; b < static_cast<std::size_t>(n_bins); ++b) {
    if (counts[b] == 0) {
      continue;
    }
    VariogramBin bin;
    bin.lag_km = lag_sums[b] / static_cast<double>(counts[b]);
    bin.semivariance = sq_sums[b] / (2.0 * static_cast<double>(counts[b]));
    bin.pair_count = counts[b];
    result.bins.push_back(bin);
  }
  return result;
}

std::pair<CovarianceModel, FitDiagnostics> fit_spherical(const EmpiricalVariogram& emp,
                                                         std::optional<CovarianceModel> init,
                                                         const VariogramConfig& config) {
  if (emp.bins.size() < 3) {
    throw InsufficientBinsError("spherical fit needs at least three bins, got " +
                                std::to_string(emp.bins.size()));
  }
  bool any_signal = false;
  for (const VariogramBin& bin : emp.bins) {
    if (bin.semivariance > 0.0) {
      any_signal = true;
      break;
    }
  }
  if (!any_signal) {
    throw DegenerateFieldError("all semivariances are zero; nothing to fit");
  }

  FitProblem problem;
  problem.fit_nugget = config.fit_nugget;
  const auto n_bins = static_cast<Eigen::Index>(emp.bins.size());
  problem.lags.resize(n_bins);
  problem.gammas.resize(n_bins);
  problem.sqrt_weights.resize(n_bins);
  for (Eigen::Index b = 0; b < n_bins; ++b) {
    const VariogramBin& bin = emp.bins[static_cast<std::size_t>(b)];
    problem.lags[b] = bin.lag_km;
    problem.gammas[b] = bin.semivariance;
    const double denom = std::max(bin.semivariance * bin.semivariance, kWeightFloor);
    problem.sqrt_weights[b] = std::sqrt(static_cast<double>(bin.pair_count) / denom);
  }

  const double max_lag = problem.lags.maxCoeff();
  const double min_range = std::max(1e-8 * max_lag, 1e-9);
  const double max_range = 3.0 * max_lag;

  Eigen::VectorXd theta(problem.n_params());
  if (init.has_value()) {
    theta[0] = init->sigma2;
    theta[1] = init->range_km;
    if (config.fit_nugget) {
      theta[2] = init->nugget;
    }
  } else {
    // pair-weighted mean semivariance as the sill guess, half the cutoff as range
    double wsum = 0.0, gsum = 0.0;
    for (const VariogramBin& bin : emp.bins) {
      wsum += static_cast<double>(bin.pair_count);
      gsum += static_cast<double>(bin.pair_count) * bin.semivariance;
    }
    theta[0] = gsum / wsum;
    theta[1] = (emp.cutoff_km > 0.0 ? emp.cutoff_km : max_lag) / 2.0;
    if (config.fit_nugget) {
      theta[2] = 0.0;
    }
  }
  theta = clamp_params(std::move(theta), min_range, max_range);

  FitDiagnostics diag;
  Eigen::VectorXd r = problem.residuals(theta);
  double objective = r.squaredNorm();
  diag.objective_trace.push_back(objective);

  double damping = 1e-3;
  for (int iter = 0; iter < config.max_iterations; ++iter) {
    diag.iterations = iter + 1;
    const Eigen::MatrixXd j = problem.jacobian(theta);
    const Eigen::MatrixXd jtj = j.transpose() * j;
    const Eigen::VectorXd g = j.transpose() * r;

    Eigen::MatrixXd lhs = jtj;
    for (Eigen::Index d = 0; d < lhs.rows(); ++d) {
      lhs(d, d) += damping * std::max(jtj(d, d), 1e-30);
    }
    const Eigen::VectorXd step = lhs.ldlt().solve(-g);
    const Eigen::VectorXd candidate = clamp_params(theta + step, min_range, max_range);
    const Eigen::VectorXd r_candidate = problem.residuals(candidate);
    const double objective_candidate = r_candidate.squaredNorm();

    if (objective_candidate <= objective) {
      const double denom = std::max(theta.norm(), 1e-300);
      diag.final_delta = (candidate - theta).norm() / denom;
      theta = candidate;
      r = r_candidate;
      objective = objective_candidate;
      diag.objective_trace.push_back(objective);
      damping = std::max(damping / 3.0, 1e-12);
      if (diag.final_delta < config.tolerance) {
        diag.converged = true;
        break;
      }
    } else {
      // a rejected sub-tolerance step means no progress is possible: the
      // iterate is already at the damped stationary point
      const double denom = std::max(theta.norm(), 1e-300);
      const double delta = (candidate - theta).norm() / denom;
      if (delta < config.tolerance) {
        diag.final_delta = delta;
        diag.converged = true;
        break;
      }
      damping *= 4.0;
    }
  }
  diag.objective = objective;

  CovarianceModel model;
  model.sigma2 = theta[0];
  model.range_km = theta[1];
  model.nugget = config.fit_nugget ? theta[2] : 0.0;
  return {model, diag};
}

Eigen::VectorXd gls_coefficients(std::span<const double> values, const Eigen::MatrixXd& design,
                                 const CovarianceModel& model,
                                 const DistanceMatrix& distances) {
  const auto n = static_cast<Eigen::Index>(values.size());
  if (design.rows() != n || distances.size() != n) {
    throw StructuralError("design/distances do not match value vector");
  }
  const Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(design);
  if (qr.rank() < design.cols()) {
    throw SingularDesignError("design matrix is rank deficient");
  }

  Eigen::MatrixXd cov(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = i; j < n; ++j) {
      const double c = covariance_at(model, distances(i, j));
      cov(i, j) = c;
      cov(j, i) = c;
    }
  }
  cov.diagonal().array() += kJitterScale * model.sigma2;

  const Eigen::LLT<Eigen::MatrixXd> llt(cov);
  if (llt.info() != Eigen::Success) {
    throw NumericalError("covariance matrix not positive definite after jitter");
  }

  const Eigen::VectorXd z = Eigen::Map<const Eigen::VectorXd>(values.data(), n);
  const Eigen::MatrixXd ci_x = llt.solve(design);
  const Eigen::MatrixXd normal = design.transpose() * ci_x;
  const Eigen::VectorXd rhs = ci_x.transpose() * z;
  const Eigen::LDLT<Eigen::MatrixXd> ldlt(normal);
  if (ldlt.info() != Eigen::Success) {
    throw SingularDesignError("normal equations not solvable");
  }
  return ldlt.solve(rhs);
}

TrendCovarianceFit fit_trend_covariance(std::span<const double> values,
                                        const Eigen::MatrixXd& design,
                                        const DistanceMatrix& distances,
                                        const VariogramConfig& config) {
  const auto n = static_cast<Eigen::Index>(values.size());
  if (design.rows() != n) {
    throw StructuralError("design does not match value vector");
  }
  const Eigen::VectorXd z = Eigen::Map<const Eigen::VectorXd>(values.data(), n);

  const Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(design);
  if (qr.rank() < design.cols()) {
    throw SingularDesignError("design matrix is rank deficient");
  }

  double cutoff = config.cutoff_km;
  if (cutoff <= 0.0) {
    cutoff = distances.max_distance() / 3.0;
  }
  if (cutoff <= 0.0) {
    throw InsufficientDataError("no positive pairwise distance");
  }

  TrendCovarianceFit fit;
  fit.beta = qr.solve(z);  // OLS start

  constexpr int kMaxTrendIterations = 10;
  for (int t = 0; t < kMaxTrendIterations; ++t) {
    fit.trend_iterations = t + 1;
    const Eigen::VectorXd residuals = z - design * fit.beta;

    std::vector<double> r(residuals.data(), residuals.data() + residuals.size());
    const EmpiricalVariogram emp = empirical_semivariogram(r, distances, cutoff, config.n_bins);

    CovarianceModel init;
    const double mean = residuals.mean();
    init.sigma2 = (residuals.array() - mean).square().sum() / static_cast<double>(n);
    init.range_km = cutoff / 2.0;
    init.nugget = 0.0;

    auto [model, diag] = fit_spherical(emp, init, config);
    fit.model = model;
    fit.diagnostics = std::move(diag);

    const Eigen::VectorXd updated = gls_coefficients(values, design, fit.model, distances);
    const double delta = (updated - fit.beta).norm() / std::max(fit.beta.norm(), 1e-300);
    fit.beta = updated;
    if (delta < config.tolerance) {
      break;
    }
  }
  return fit;
}

}  // namespace wxkrig
