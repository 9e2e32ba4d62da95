#pragma once

#include <Eigen/Dense>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "wxkrig/covariance.hpp"
#include "wxkrig/geo.hpp"

namespace wxkrig {

enum class Method { NN, IDW, OK, UK, TGK };

const char* method_name(Method m);
std::optional<Method> method_from_name(const std::string& name);

// One day's observed field: a value (possibly missing) per station.
struct FieldSnapshot {
  std::vector<Station> stations;
  std::vector<std::optional<double>> values;
  std::string label;

  std::size_t present_count() const;
};

// Solution of a single kriging system at one target.
struct KrigingSolution {
  double value = 0.0;
  double variance = 0.0;   // kriging variance, >= 0 up to numerical slack
  double lagrange = 0.0;   // multiplier of the unbiasedness constraint
  Eigen::VectorXd weights; // aligned with the present-valued stations; sums to 1
  double trend = 0.0;      // GLS mean (OK) or x*'beta (UK) at the target
};

struct TransformSpec {
  double lambda = 1.0 / 3.0;  // Box-Cox power; (0, 1] here, 0 = log branch
};

/// Box-Cox forward transform (z^lambda - 1) / lambda; log for lambda = 0.
/// Requires z >= 0.
double boxcox(double z, const TransformSpec& spec = {});

/// Inverse transform phi(y) = (lambda y + 1)^(1/lambda); exp for lambda = 0.
double boxcox_inverse(double y, const TransformSpec& spec = {});

/// Second derivative phi'' of the inverse transform.
double boxcox_inverse_dd(double y, const TransformSpec& spec = {});

/// Bias-corrected back-transform: phi(yhat) + phi''(mu) (variance/2 - lagrange).
double tgk_back_transform(double yhat, double mu, double variance, double lagrange,
                          const TransformSpec& spec = {});

struct PredictConfig {
  double idw_power = 2.0;
  int idw_n_max = 20;
  TransformSpec transform;
  VariogramConfig variogram;
  DistanceMetric metric = DistanceMetric::Haversine;
};

/// Value at the nearest station holding a present observation, ties by id.
double nn_predict(const FieldSnapshot& snapshot, const GeoPoint& target,
                  DistanceMetric metric = DistanceMetric::Haversine);

/// Inverse-distance-weighted mean over the n_max nearest present-valued
/// stations. A target within 1e-9 km of a station returns that station's
/// value exactly. NN is the n_max = 1 special case.
double idw_predict(const FieldSnapshot& snapshot, const GeoPoint& target,
                   double power = 2.0, int n_max = 20,
                   DistanceMetric metric = DistanceMetric::Haversine);

/// Ordinary kriging with the given covariance model: GLS mean plus
/// covariance-weighted correction of the detrended data.
KrigingSolution ok_predict(const FieldSnapshot& snapshot, const CovarianceModel& model,
                           const GeoPoint& target,
                           DistanceMetric metric = DistanceMetric::Haversine);

/// Universal kriging. `design` holds one covariate row per snapshot station
/// (missing-valued stations are skipped together with their rows) and
/// `target_row` the covariates of the target. Columns are z-score
/// standardized over the present stations before solving; constant columns
/// are left alone, so an intercept-only design reproduces ok_predict.
KrigingSolution uk_predict(const FieldSnapshot& snapshot, const Eigen::MatrixXd& design,
                           const Eigen::VectorXd& target_row, const CovarianceModel& model,
                           const GeoPoint& target,
                           DistanceMetric metric = DistanceMetric::Haversine);

/// Trans-Gaussian kriging: Box-Cox transform, spherical fit plus ordinary
/// kriging on the transformed field, bias-corrected back-transform, clamp
/// at zero. A constant field is returned exactly; any other field whose
/// covariance fit is degenerate or non-convergent throws (DegenerateFieldError
/// or NonConvergenceError) so the caller can fall back.
double tgk_predict(const FieldSnapshot& snapshot, const GeoPoint& target,
                   const TransformSpec& spec = {}, const VariogramConfig& vconfig = {},
                   DistanceMetric metric = DistanceMetric::Haversine);

struct FallbackResult {
  double value = 0.0;
  Method used = Method::IDW;
  bool fallback = false;
};

/// Runs the requested method, fitting any covariance structure from the
/// snapshot itself; substitutes IDW when the fit is degenerate, fails to
/// converge, or the kriging system cannot be solved.
FallbackResult with_fallback(Method primary, const FieldSnapshot& snapshot,
                             const GeoPoint& target, const PredictConfig& config = {});

// Prediction unit for one snapshot and method: fits once, predicts many
// targets. Kriging fit failures downgrade the whole unit to IDW.
class DayInterpolator {
 public:
  static DayInterpolator create(Method method, const FieldSnapshot& snapshot,
                                const PredictConfig& config = {});

  Method requested() const { return requested_; }
  Method effective() const { return effective_; }
  bool fallback() const { return effective_ != requested_; }
  const std::optional<CovarianceModel>& model() const { return model_; }
  const std::optional<FitDiagnostics>& diagnostics() const { return diagnostics_; }

  /// Predicts at a station's location; UK draws its covariates (lat, lon,
  /// elevation) from the station and requires elevation to be present.
  double predict(const Station& target) const;
  /// Coordinate-only variant; rejects UK targets (no elevation available).
  double predict(const GeoPoint& target) const;

  /// Value plus kriging variance where the effective method defines one
  /// (OK and UK). Other methods report the value alone; TGK variances live
  /// on the transformed scale and are withheld rather than misstated.
  std::pair<double, std::optional<double>> predict_with_variance(const Station& target) const;

 private:
  DayInterpolator() = default;
  double predict_impl(const GeoPoint& target, const std::optional<Eigen::VectorXd>& row) const;

  Method requested_ = Method::IDW;
  Method effective_ = Method::IDW;
  PredictConfig config_;
  FieldSnapshot compact_;  // present-valued stations only
  std::optional<CovarianceModel> model_;
  std::optional<FitDiagnostics> diagnostics_;

  struct KrigingState;
  std::shared_ptr<const KrigingState> kriging_;
};

}  // namespace wxkrig
