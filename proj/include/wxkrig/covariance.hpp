#pragma once

#include <Eigen/Dense>
#include <optional>
#include <span>
#include <vector>

#include "wxkrig/geo.hpp"

namespace wxkrig {

// Spherical covariance with partial sill sigma2 and practical range
// range_km; the covariance is exactly zero beyond the range. The nugget
// contributes at lag zero only.
struct CovarianceModel {
  double sigma2 = 1.0;    // partial sill, >= 0
  double range_km = 1.0;  // practical range, > 0
  double nugget = 0.0;    // >= 0

  double sill() const { return sigma2 + nugget; }
};

/// C(h) of the spherical family. Throws DomainError for negative lags.
double covariance_at(const CovarianceModel& model, double lag_km);

/// Semivariance gamma(h) = C(0) - C(h); zero at lag zero, jumps by the
/// nugget immediately after.
double semivariance_at(const CovarianceModel& model, double lag_km);

struct VariogramBin {
  double lag_km = 0.0;       // mean pair distance within the bin
  double semivariance = 0.0;
  long pair_count = 0;
};

struct EmpiricalVariogram {
  std::vector<VariogramBin> bins;  // lags strictly increasing, zero-pair bins dropped
  double cutoff_km = 0.0;
};

struct FitDiagnostics {
  bool converged = false;
  int iterations = 0;
  double final_delta = 0.0;  // relative parameter change at the last accepted step
  double objective = 0.0;    // weighted SSE
  std::vector<double> objective_trace;  // objective after each accepted step
};

struct VariogramConfig {
  double cutoff_km = 0.0;  // <= 0: one third of the max pairwise distance
  int n_bins = 15;
  bool fit_nugget = false;
  int max_iterations = 50;
  double tolerance = 1e-6;  // relative parameter delta for convergence
};

/// Matheron method-of-moments estimator over station pairs binned by
/// distance. Requires at least two values; bins without pairs are dropped.
EmpiricalVariogram empirical_semivariogram(std::span<const double> values,
                                           const DistanceMatrix& distances,
                                           double cutoff_km, int n_bins);

/// Fits the spherical model to an empirical variogram by damped
/// Gauss-Newton on the weighted SSE, weights N_b / gamma_b^2. Requires at
/// least three retained bins; throws DegenerateFieldError when every
/// semivariance is zero. Non-convergence is reported via the diagnostics,
/// not an exception.
std::pair<CovarianceModel, FitDiagnostics> fit_spherical(
    const EmpiricalVariogram& emp,
    std::optional<CovarianceModel> init = std::nullopt,
    const VariogramConfig& config = {});

/// GLS coefficients (X' C^-1 X)^-1 X' C^-1 z for the covariance matrix
/// implied by the model over the given distances. A jitter of
/// 1e-10 * sigma2 is added to the diagonal before factorization; failure
/// to factorize raises NumericalError, rank-deficient X raises
/// SingularDesignError.
Eigen::VectorXd gls_coefficients(std::span<const double> values,
                                 const Eigen::MatrixXd& design,
                                 const CovarianceModel& model,
                                 const DistanceMatrix& distances);

struct TrendCovarianceFit {
  Eigen::VectorXd beta;
  CovarianceModel model;
  FitDiagnostics diagnostics;
  int trend_iterations = 0;
};

/// Alternates trend estimation and residual variogram fitting: OLS start,
/// spherical fit on detrended values, GLS re-estimate, repeat until the
/// coefficients stabilize. With an intercept-only design one refinement
/// pass suffices since constants cancel out of the semivariances.
TrendCovarianceFit fit_trend_covariance(std::span<const double> values,
                                        const Eigen::MatrixXd& design,
                                        const DistanceMatrix& distances,
                                        const VariogramConfig& config = {});

}  // namespace wxkrig
