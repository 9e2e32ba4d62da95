#pragma once

#include <Eigen/Dense>
#include <optional>
#include <span>
#include <string>
#include <unordered_set>
#include <vector>

#include "wxkrig/errors.hpp"

namespace wxkrig {

inline constexpr double kEarthRadiusKm = 6371.0;

struct GeoPoint {
  double lat = 0.0;  // degrees, [-90, 90]
  double lon = 0.0;  // degrees, [-180, 180]
};

inline bool coordinates_valid(const GeoPoint& p) {
  return p.lat >= -90.0 && p.lat <= 90.0 && p.lon >= -180.0 && p.lon <= 180.0;
}

enum class DistanceMetric {
  Haversine,         // great circle on a sphere of radius 6371 km
  EuclideanDegrees,  // plain 2-norm over (lat, lon), unit = degree
};

/// Distance between two coordinate pairs. Haversine yields km; the
/// euclidean-degrees metric yields degrees and exists for replication
/// studies against tools that treat coordinates as planar.
double distance(const GeoPoint& a, const GeoPoint& b,
                DistanceMetric metric = DistanceMetric::Haversine);

struct Station {
  std::string id;
  double lat = 0.0;
  double lon = 0.0;
  std::optional<double> elev_m;  // may be negative; absent until fetched

  GeoPoint location() const { return {lat, lon}; }
};

/// Station nearest to the target, excluding the given ids.
/// Ties are broken by lexicographically smallest id, so the result is
/// invariant under registry reordering. Throws NoCandidatesError if no
/// station survives the exclusion.
const Station& nearest_station(const GeoPoint& target,
                               std::span<const Station> registry,
                               const std::unordered_set<std::string>& exclude = {},
                               DistanceMetric metric = DistanceMetric::Haversine);

// Cached pairwise distances for a station registry. Symmetric, zero diagonal.
class DistanceMatrix {
 public:
  DistanceMatrix() = default;

  static DistanceMatrix build(std::span<const Station> stations,
                              DistanceMetric metric = DistanceMetric::Haversine);

  double operator()(Eigen::Index i, Eigen::Index j) const { return values_(i, j); }
  Eigen::Index size() const { return values_.rows(); }
  const Eigen::MatrixXd& values() const { return values_; }
  double max_distance() const;

 private:
  Eigen::MatrixXd values_;
};

}  // namespace wxkrig
