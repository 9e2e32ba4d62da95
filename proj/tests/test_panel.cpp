#include "doctest.h"
#include "testutil.hpp"
#include "wxkrig/errors.hpp"
#include "wxkrig/panel.hpp"

using namespace wxkrig;

TEST_CASE("parse_date accepts ISO dates and round-trips through format_date") {
  const Date d = parse_date("1991-02-28");
  CHECK(date_year(d) == 1991);
  CHECK(date_month(d) == 2);
  CHECK(format_date(d) == "1991-02-28");

  CHECK(format_date(parse_date("2000-12-31")) == "2000-12-31");
  CHECK(format_date(parse_date("1992-02-29")) == "1992-02-29");  // leap year
}

TEST_CASE("parse_date rejects malformed and impossible dates") {
  CHECK_THROWS_AS(parse_date(""), LoadError);
  CHECK_THROWS_AS(parse_date("not a date"), LoadError);
  CHECK_THROWS_AS(parse_date("1991/02/28"), LoadError);
  CHECK_THROWS_AS(parse_date("1991-02-28extra"), LoadError);
  CHECK_THROWS_AS(parse_date("1991-13-01"), LoadError);
  CHECK_THROWS_AS(parse_date("1991-00-10"), LoadError);
  CHECK_THROWS_AS(parse_date("1991-04-31"), LoadError);
  CHECK_THROWS_AS(parse_date("1993-02-29"), LoadError);  // not a leap year
}

TEST_CASE("next_day steps across month and year boundaries") {
  CHECK(format_date(next_day(parse_date("1990-01-31"))) == "1990-02-01");
  CHECK(format_date(next_day(parse_date("1990-12-31"))) == "1991-01-01");
  CHECK(format_date(next_day(parse_date("1992-02-28"))) == "1992-02-29");
}

namespace {

ObservationPanel small_panel() {
  std::vector<Station> stations;
  stations.push_back({"S1", 37.0, -100.0, 600.0});
  stations.push_back({"S2", 37.5, -100.5, 650.0});
  const auto dates = testutil::date_run(testutil::make_date(1990, 1, 1), 3);
  return testutil::make_panel(stations, dates,
                              {0.0, 1.5, std::nullopt, 2.0, 0.0, 4.0});
}

}  // namespace

TEST_CASE("validate_panel passes a clean panel and counts missing days") {
  const auto panel = small_panel();
  const auto report = validate_panel(panel);
  CHECK(report.ok());
  REQUIRE(report.missing_days.size() == 2);
  CHECK(report.missing_days[0] == 1);
  CHECK(report.missing_days[1] == 0);
}

TEST_CASE("validate_panel reports negative values with their cell") {
  auto panel = small_panel();
  panel.precip[panel.cell(1, 2)] = -0.5;
  const auto report = validate_panel(panel);
  CHECK_FALSE(report.ok());
  REQUIRE(report.negative_values.size() == 1);
  CHECK(report.negative_values[0].station_id == "S2");
  CHECK(format_date(report.negative_values[0].date) == "1990-01-03");
}

TEST_CASE("validate_panel reports duplicate station ids") {
  auto panel = small_panel();
  panel.stations[1].id = "S1";
  const auto report = validate_panel(panel);
  CHECK_FALSE(report.ok());
  REQUIRE(report.duplicate_station_ids.size() == 1);
  CHECK(report.duplicate_station_ids[0] == "S1");
}

TEST_CASE("validate_panel notes non-increasing dates and bad coordinates") {
  auto panel = small_panel();
  std::swap(panel.dates[0], panel.dates[1]);
  CHECK_FALSE(validate_panel(panel).structural_notes.empty());

  auto panel2 = small_panel();
  panel2.stations[0].lat = 95.0;
  CHECK_FALSE(validate_panel(panel2).structural_notes.empty());
}

TEST_CASE("validate_panel throws on dimension mismatch") {
  auto panel = small_panel();
  panel.precip.pop_back();
  CHECK_THROWS_AS(validate_panel(panel), StructuralError);

  auto panel2 = small_panel();
  panel2.tmax.assign(3, std::nullopt);  // wrong size: should be 6
  CHECK_THROWS_AS(validate_panel(panel2), StructuralError);
}
