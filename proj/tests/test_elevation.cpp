#include <atomic>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <random>
#include <thread>

// Eigen must come in ahead of httplib: the resolver headers behind httplib
// define macros that rewrite identifiers Eigen uses.
#include "wxkrig/elevation.hpp"
#include "wxkrig/errors.hpp"

#include "doctest.h"
#include "httplib.h"

using namespace wxkrig;
namespace fs = std::filesystem;

namespace {

std::string temp_file(const std::string& name) {
  static std::mt19937_64 rng(std::random_device{}());
  const auto dir = fs::temp_directory_path() / ("wxkrig_elev_" + std::to_string(rng()));
  fs::create_directories(dir);
  return (dir / name).string();
}

// Local elevation endpoint; elevations are a deterministic function of the
// coordinates so per-station routing is checkable.
class FakeService {
 public:
  FakeService() {
    server_.Get("/elev", [this](const httplib::Request& req, httplib::Response& res) {
      ++hits_;
      const double lat = std::stod(req.get_param_value("lat"));
      const double lon = std::stod(req.get_param_value("lon"));
      res.set_content("{\"value\": " + std::to_string(elevation_for(lat, lon)) + "}",
                      "application/json");
    });
    server_.Get("/nested", [this](const httplib::Request& req, httplib::Response& res) {
      ++hits_;
      const double lat = std::stod(req.get_param_value("lat"));
      const double lon = std::stod(req.get_param_value("lon"));
      res.set_content("{\"data\": [{\"elevation\": " +
                          std::to_string(elevation_for(lat, lon)) + "}]}",
                      "application/json");
    });
    server_.Get("/bare", [this](const httplib::Request& req, httplib::Response& res) {
      ++hits_;
      const double lat = std::stod(req.get_param_value("lat"));
      const double lon = std::stod(req.get_param_value("lon"));
      res.set_content(std::to_string(elevation_for(lat, lon)), "text/plain");
    });
    server_.Get("/garbage", [this](const httplib::Request&, httplib::Response& res) {
      ++hits_;
      res.set_content("this is not json", "application/json");
    });
    server_.Get("/no_number", [this](const httplib::Request&, httplib::Response& res) {
      ++hits_;
      res.set_content("{\"status\": \"ok\", \"unit\": \"m\"}", "application/json");
    });
    port_ = server_.bind_to_any_port("127.0.0.1");
    thread_ = std::thread([this] { server_.listen_after_bind(); });
    server_.wait_until_ready();
  }

  ~FakeService() {
    server_.stop();
    thread_.join();
  }

  static double elevation_for(double lat, double lon) {
    return 500.0 + 10.0 * lat + lon;
  }

  std::string endpoint(const std::string& path = "/elev") const {
    return "http://127.0.0.1:" + std::to_string(port_) + path;
  }

  int hits() const { return hits_.load(); }

 private:
  httplib::Server server_;
  std::thread thread_;
  int port_ = 0;
  std::atomic<int> hits_{0};
};

std::vector<Station> bare_stations(std::size_t n) {
  std::vector<Station> out;
  for (std::size_t i = 0; i < n; ++i) {
    Station s;
    s.id = "E" + std::to_string(i);
    s.lat = 37.0 + 0.25 * static_cast<double>(i);
    s.lon = -100.0 - 0.5 * static_cast<double>(i);
    out.push_back(s);
  }
  return out;
}

FetchOptions quick_options() {
  FetchOptions opt;
  opt.max_retries = 0;
  opt.retry_backoff_ms = 1;
  return opt;
}

}  // namespace

TEST_CASE("cache keys round coordinates to five decimals") {
  CHECK(ElevationCache::key(37.123456, -100.000004) ==
        ElevationCache::key(37.1234561, -100.0));
  CHECK(ElevationCache::key(37.1, -100.0) != ElevationCache::key(37.1, -100.1));
}

TEST_CASE("cache stores, looks up and persists entries") {
  ElevationCache cache;
  CHECK_FALSE(cache.lookup(37.0, -100.0).has_value());
  cache.store(37.0, -100.0, 612.5);
  cache.store(38.0, -101.0, 700.25);
  REQUIRE(cache.lookup(37.0, -100.0).has_value());
  CHECK(*cache.lookup(37.0, -100.0) == 612.5);
  // lookups tolerate sub-precision coordinate noise
  CHECK(cache.lookup(37.000000004, -100.0).has_value());
  CHECK(cache.size() == 2);

  const auto path = temp_file("cache.csv");
  cache.save(path);
  const auto loaded = ElevationCache::load(path);
  CHECK(loaded.size() == 2);
  REQUIRE(loaded.lookup(38.0, -101.0).has_value());
  CHECK(*loaded.lookup(38.0, -101.0) == 700.25);
}

TEST_CASE("loading a missing cache file yields an empty cache") {
  const auto cache = ElevationCache::load(temp_file("absent.csv"));
  CHECK(cache.size() == 0);
}

TEST_CASE("malformed cache lines are load errors") {
  const auto path = temp_file("broken.csv");
  std::ofstream(path) << "lat,lon,elev_m\nnot,a,number\n";
  CHECK_THROWS_AS(ElevationCache::load(path), LoadError);
}

TEST_CASE("offline mode resolves from cache or fails loudly") {
  auto stations = bare_stations(2);
  ElevationCache cache;
  FetchOptions opt;
  opt.offline = true;

  try {
    fetch_elevations(stations, "", cache, opt);
    FAIL("expected OfflineMissError");
  } catch (const OfflineMissError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("E0") != std::string::npos);
    CHECK(msg.find("E1") != std::string::npos);
  }

  cache.store(stations[0].lat, stations[0].lon, 611.0);
  cache.store(stations[1].lat, stations[1].lon, 622.0);
  const auto outcome = fetch_elevations(stations, "", cache, opt);
  CHECK(outcome.from_cache == 2);
  CHECK(outcome.from_service == 0);
  REQUIRE(outcome.stations.size() == 2);
  CHECK(*outcome.stations[0].elev_m == 611.0);
  CHECK(*outcome.stations[1].elev_m == 622.0);
}

TEST_CASE("stations that already know their elevation are never fetched") {
  auto stations = bare_stations(3);
  stations[1].elev_m = 999.0;
  FakeService service;
  ElevationCache cache;
  const auto outcome = fetch_elevations(stations, service.endpoint(), cache,
                                        quick_options());
  CHECK(service.hits() == 2);
  CHECK(outcome.from_service == 2);
  CHECK(*outcome.stations[1].elev_m == 999.0);
}

TEST_CASE("service fetch fills elevations and writes through to the cache") {
  const auto stations = bare_stations(5);
  FakeService service;
  ElevationCache cache;

  const auto outcome = fetch_elevations(stations, service.endpoint(), cache,
                                        quick_options());
  CHECK(outcome.from_service == 5);
  CHECK(outcome.from_cache == 0);
  CHECK(outcome.failed_ids.empty());
  REQUIRE(outcome.stations.size() == 5);
  for (const auto& s : outcome.stations) {
    REQUIRE(s.elev_m.has_value());
    CHECK(*s.elev_m ==
          doctest::Approx(FakeService::elevation_for(s.lat, s.lon)).epsilon(1e-6));
    CHECK(cache.lookup(s.lat, s.lon).has_value());
  }
  CHECK(service.hits() == 5);

  // the second pass is served entirely by the cache
  const auto again = fetch_elevations(stations, service.endpoint(), cache,
                                      quick_options());
  CHECK(again.from_cache == 5);
  CHECK(again.from_service == 0);
  CHECK(service.hits() == 5);
}

TEST_CASE("nested json and bare numeric bodies both resolve") {
  const auto stations = bare_stations(2);
  FakeService service;

  ElevationCache c1;
  const auto nested = fetch_elevations(stations, service.endpoint("/nested"), c1,
                                       quick_options());
  CHECK(nested.from_service == 2);
  CHECK(*nested.stations[0].elev_m ==
        doctest::Approx(FakeService::elevation_for(stations[0].lat, stations[0].lon)));

  ElevationCache c2;
  const auto bare = fetch_elevations(stations, service.endpoint("/bare"), c2,
                                     quick_options());
  CHECK(bare.from_service == 2);
}

TEST_CASE("unusable service responses raise service errors") {
  const auto stations = bare_stations(1);
  FakeService service;
  ElevationCache cache;
  CHECK_THROWS_AS(fetch_elevations(stations, service.endpoint("/garbage"), cache,
                                   quick_options()),
                  ServiceError);
  CHECK_THROWS_AS(fetch_elevations(stations, service.endpoint("/no_number"), cache,
                                   quick_options()),
                  ServiceError);
}

TEST_CASE("http failures exhaust retries and land in failed_ids") {
  const auto stations = bare_stations(2);
  FakeService service;
  ElevationCache cache;
  FetchOptions opt = quick_options();
  opt.max_retries = 2;

  const auto outcome = fetch_elevations(stations, service.endpoint("/missing_route"),
                                        cache, opt);
  CHECK(outcome.from_service == 0);
  REQUIRE(outcome.failed_ids.size() == 2);
  CHECK(outcome.failed_ids[0] == "E0");
  // each station tried 1 + max_retries times; nothing cached
  CHECK(cache.size() == 0);
  for (const auto& s : outcome.stations) {
    CHECK_FALSE(s.elev_m.has_value());
  }
}

TEST_CASE("unreachable endpoints raise service errors") {
  const auto stations = bare_stations(1);
  ElevationCache cache;
  CHECK_THROWS_AS(fetch_elevations(stations, "not-a-url", cache, quick_options()),
                  ServiceError);
}

TEST_CASE("cache directory honors the environment override") {
  ::setenv("WXKRIG_CACHE_DIR", "/tmp/wxkrig_custom_cache", 1);
  CHECK(cache_dir("fallback_dir") == "/tmp/wxkrig_custom_cache");
  ::unsetenv("WXKRIG_CACHE_DIR");
  CHECK(cache_dir("fallback_dir") == "fallback_dir");
}
