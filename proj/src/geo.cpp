#include "wxkrig/geo.hpp"

#include <cmath>
#include <numbers>
#include <sstream>

namespace wxkrig {

namespace {

double haversine_km(const GeoPoint& a, const GeoPoint& b) {
  constexpr double deg = std::numbers::pi / 180.0;
  const double lat1 = a.lat * deg;
  const double lat2 = b.lat * deg;
  const double dlat = (b.lat - a.lat) * deg;
  const double dlon = (b.lon - a.lon) * deg;

  const double s1 = std::sin(dlat / 2.0);
  const double s2 = std::sin(dlon / 2.0);
  const double h = s1 * s1 + std::cos(lat1) * std::cos(lat2) * s2 * s2;
  return 2.0 * kEarthRadiusKm * std::asin(std::min(1.0, std::sqrt(h)));
}

void require_valid(const GeoPoint& p, const char* which) {
  if (!coordinates_valid(p)) {
    std::ostringstream msg;
    msg << "coordinate out of bounds (" << which << "): lat=" << p.lat
        << " lon=" << p.lon;
    throw InvalidCoordinateError(msg.str());
  }
}

}  // namespace

double distance(const GeoPoint& a, const GeoPoint& b, DistanceMetric metric) {
  require_valid(a, "first");
  require_valid(b, "second");
  if (a.lat == b.lat && a.lon == b.lon) {
    return 0.0;
  }
  switch (metric) {
    case DistanceMetric::EuclideanDegrees: {
      const double dlat = a.lat - b.lat;
      const double dlon = a.lon - b.lon;
      return std::sqrt(dlat * dlat + dlon * dlon);
    }
    case DistanceMetric::Haversine:
    default:
      return haversine_km(a, b);
  }
}

const Station& nearest_station(const GeoPoint& target, std::span<const Station> registry,
                               const std::unordered_set<std::string>& exclude,
                               DistanceMetric metric) {
  require_valid(target, "target");
  const Station* best = nullptr;
  double best_distance = 0.0;
  for (const Station& station : registry) {
    if (exclude.contains(station.id)) {
      continue;
    }
    const double d = distance(target, station.location(), metric);
    if (best == nullptr || d < best_distance ||
        (d == best_distance && station.id < best->id)) {
      best = &station;
      best_distance = d;
    }
  }
  if (best == nullptr) {
    throw NoCandidatesError("no station left after exclusion");
  }
  return *best;
}

DistanceMatrix DistanceMatrix::build(std::span<const Station> stations,
                                     DistanceMetric metric) {
  const auto n = static_cast<Eigen::Index>(stations.size());
  DistanceMatrix m;
  m.values_ = Eigen::MatrixXd::Zero(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = i + 1; j < n; ++j) {
      const double d = distance(stations[static_cast<std::size_t>(i)].location(),
                                stations[static_cast<std::size_t>(j)].location(), metric);
      m.values_(i, j) = d;
      m.values_(j, i) = d;
    }
  }
  return m;
}

double DistanceMatrix::max_distance() const {
  return values_.size() == 0 ? 0.0 : values_.maxCoeff();
}

}  // namespace wxkrig
