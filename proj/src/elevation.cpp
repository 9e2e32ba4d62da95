#include "wxkrig/elevation.hpp"

#include <atomic>
#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <mutex>
#include <thread>

#include "httplib.h"
#include "json.hpp"
#include "wxkrig/errors.hpp"

namespace wxkrig {

namespace {

std::optional<double> find_elevation_value(const nlohmann::json& j) {
  if (j.is_number()) {
    return j.get<double>();
  }
  if (j.is_object()) {
    for (const char* name : {"value", "elevation"}) {
      if (j.contains(name) && j[name].is_number()) {
        return j[name].get<double>();
      }
    }
    for (const auto& item : j.items()) {
      if (const auto v = find_elevation_value(item.value()); v.has_value()) {
        return v;
      }
    }
  } else if (j.is_array()) {
    for (const auto& item : j) {
      if (const auto v = find_elevation_value(item); v.has_value()) {
        return v;
      }
    }
  }
  return std::nullopt;
}

struct Endpoint {
  std::string origin;  // scheme://host[:port]
  std::string path;
};

Endpoint split_endpoint(const std::string& url) {
  const std::size_t scheme = url.find("://");
  if (scheme == std::string::npos) {
    throw ServiceError("endpoint '" + url + "' has no scheme");
  }
  const std::size_t slash = url.find('/', scheme + 3);
  if (slash == std::string::npos) {
    return {url, "/"};
  }
  return {url.substr(0, slash), url.substr(slash)};
}

std::string format_coord(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

}  // namespace

std::string ElevationCache::key(double lat, double lon) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.5f,%.5f", lat, lon);
  return buf;
}

ElevationCache ElevationCache::load(const std::string& path) {
  ElevationCache cache;
  std::ifstream in(path);
  if (!in) {
    return cache;
  }
  std::string line;
  std::getline(in, line);  // header
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') {
      line.pop_back();
    }
    if (line.empty()) {
      continue;
    }
    const std::size_t c1 = line.find(',');
    const std::size_t c2 = line.find(',', c1 + 1);
    if (c1 == std::string::npos || c2 == std::string::npos) {
      throw LoadError(path + ": malformed cache line '" + line + "'");
    }
    const std::string k = line.substr(0, c2);
    char* end = nullptr;
    const double elev = std::strtod(line.c_str() + c2 + 1, &end);
    if (end == line.c_str() + c2 + 1 || *end != '\0') {
      throw LoadError(path + ": malformed cache line '" + line + "'");
    }
    cache.entries_[k] = elev;
  }
  return cache;
}

void ElevationCache::save(const std::string& path) const {
  std::ofstream out(path);
  if (!out) {
    throw LoadError("cannot write " + path);
  }
  out << "lat,lon,elev_m\n";
  char buf[32];
  for (const auto& [k, v] : entries_) {
    std::snprintf(buf, sizeof buf, "%.3f", v);
    out << k << ',' << buf << '\n';
  }
}

std::optional<double> ElevationCache::lookup(double lat, double lon) const {
  const auto it = entries_.find(key(lat, lon));
  if (it == entries_.end()) {
    return std::nullopt;
  }
  return it->second;
}

void ElevationCache::store(double lat, double lon, double elev_m) {
  entries_[key(lat, lon)] = elev_m;
}

std::string cache_dir(const std::string& fallback) {
  if (const char* dir = std::getenv("WXKRIG_CACHE_DIR"); dir != nullptr && *dir != '\0') {
    return dir;
  }
  return fallback;
}

FetchOutcome fetch_elevations(std::span<const Station> stations, const std::string& endpoint,
                              ElevationCache& cache, const FetchOptions& options) {
  FetchOutcome outcome;
  outcome.stations.assign(stations.begin(), stations.end());

  std::vector<std::size_t> pending;
  for (std::size_t i = 0; i < outcome.stations.size(); ++i) {
    Station& st = outcome.stations[i];
    if (st.elev_m.has_value()) {
      continue;
    }
    if (const auto hit = cache.lookup(st.lat, st.lon); hit.has_value()) {
      st.elev_m = hit;
      ++outcome.from_cache;
      continue;
    }
    pending.push_back(i);
  }

  if (pending.empty()) {
    return outcome;
  }
  if (options.offline) {
    std::string ids;
    for (const std::size_t i : pending) {
      if (!ids.empty()) {
        ids += ", ";
      }
      ids += outcome.stations[i].id;
    }
    throw OfflineMissError("offline mode, elevation not cached for: " + ids);
  }

  const Endpoint ep = split_endpoint(endpoint);
  std::vector<std::optional<double>> fetched(pending.size());
  std::vector<std::uint8_t> failed(pending.size(), 0);
  std::atomic<std::size_t> next{0};
  std::mutex error_mu;
  std::exception_ptr first_error;

  const unsigned workers = static_cast<unsigned>(
      std::min<std::size_t>(std::max(options.max_in_flight, 1), pending.size()));

  auto fetch_worker = [&]() {
    httplib::Client client(ep.origin);
    client.set_connection_timeout(10, 0);
    client.set_read_timeout(10, 0);
    try {
      for (;;) {
        const std::size_t slot = next.fetch_add(1);
        if (slot >= pending.size()) {
          break;
        }
        const Station& st = outcome.stations[pending[slot]];
        const std::string target =
            ep.path + "?lat=" + format_coord(st.lat) + "&lon=" + format_coord(st.lon);
        bool got = false;
        for (int attempt = 0; attempt <= options.max_retries && !got; ++attempt) {
          if (attempt > 0) {
            std::this_thread::sleep_for(
                std::chrono::milliseconds(options.retry_backoff_ms * attempt));
          }
          const httplib::Result res = client.Get(target);
          if (!res || res->status != 200) {
            continue;  // transport or HTTP failure: retry
          }
          nlohmann::json body;
          try {
            body = nlohmann::json::parse(res->body);
          } catch (const nlohmann::json::parse_error&) {
            throw ServiceError("endpoint returned non-JSON for station " + st.id);
          }
          const auto value = find_elevation_value(body);
          if (!value.has_value()) {
            throw ServiceError("no numeric elevation in response for station " + st.id);
          }
          fetched[slot] = value;
          got = true;
        }
        if (!got) {
          failed[slot] = 1;
        }
      }
    } catch (...) {
      const std::lock_guard<std::mutex> lock(error_mu);
      if (!first_error) {
        first_error = std::current_exception();
      }
    }
  };

  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (unsigned t = 0; t < workers; ++t) {
    pool.emplace_back(fetch_worker);
  }
  for (std::thread& th : pool) {
    th.join();
  }
  if (first_error) {
    std::rethrow_exception(first_error);
  }

  for (std::size_t slot = 0; slot < pending.size(); ++slot) {
    Station& st = outcome.stations[pending[slot]];
    if (fetched[slot].has_value()) {
      st.elev_m = fetched[slot];
      cache.store(st.lat, st.lon, *fetched[slot]);
      ++outcome.from_service;
    } else if (failed[slot]) {
      outcome.failed_ids.push_back(st.id);
    }
  }
  return outcome;
}

}  // namespace wxkrig
