#pragma once

#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "wxkrig/geo.hpp"

namespace wxkrig {

// Offline store of point elevations keyed by coordinates rounded to five
// decimal places (~1 m positional precision). Persisted as CSV between runs.
class ElevationCache {
 public:
  ElevationCache() = default;

  static ElevationCache load(const std::string& path);  // missing file = empty cache
  void save(const std::string& path) const;

  std::optional<double> lookup(double lat, double lon) const;
  void store(double lat, double lon, double elev_m);
  std::size_t size() const { return entries_.size(); }

  static std::string key(double lat, double lon);

 private:
  std::map<std::string, double> entries_;
};

struct FetchOptions {
  bool offline = false;
  int max_retries = 3;
  int retry_backoff_ms = 250;
  int max_in_flight = 4;
};

struct FetchOutcome {
  std::vector<Station> stations;
  int from_cache = 0;
  int from_service = 0;
  std::vector<std::string> failed_ids;
};

/// Fills missing station elevations: cache first, then HTTP GET
/// `<endpoint>?lat=<lat>&lon=<lon>` expecting a JSON body with a numeric
/// `value` or `elevation` field. Service results are written through to the
/// cache. Offline mode never touches the network and throws
/// OfflineMissError listing every uncached station.
FetchOutcome fetch_elevations(std::span<const Station> stations, const std::string& endpoint,
                              ElevationCache& cache, const FetchOptions& options = {});

/// Directory for the elevation cache file: WXKRIG_CACHE_DIR if set, else
/// the fallback.
std::string cache_dir(const std::string& fallback = ".wxkrig_cache");

}  // namespace wxkrig
