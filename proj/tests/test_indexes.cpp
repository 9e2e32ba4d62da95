#include <random>

#include "doctest.h"
#include "testutil.hpp"
#include "wxkrig/errors.hpp"
#include "wxkrig/indexes.hpp"

using namespace wxkrig;
using testutil::make_date;
using testutil::make_series;

TEST_CASE("dry-day classification around the 1 mm threshold") {
  CHECK(is_dry_day(0.0));
  CHECK(is_dry_day(0.999));
  CHECK_FALSE(is_dry_day(1.0));
  CHECK_FALSE(is_dry_day(25.0));

  CHECK(is_dry_day(1.0, DryThresholdMode::AtMost));
  CHECK_FALSE(is_dry_day(1.001, DryThresholdMode::AtMost));

  CHECK_THROWS_AS(is_dry_day(-0.1), DomainError);
}

TEST_CASE("cdd worked examples") {
  // dry dry wet dry dry dry wet dry dry dry -> longest run 3
  const auto toy = make_series(make_date(1990, 1, 1),
                               {0.0, 0.0, 2.0, 0.0, 0.0, 0.0, 1.5, 0.0, 0.0, 0.0});
  const auto v = cdd(toy);
  CHECK(v.period == "1990");
  REQUIRE(v.value.has_value());
  CHECK(*v.value == 3.0);
  CHECK(v.completeness == 1.0);

  // every day wet
  const auto wet = make_series(make_date(1990, 1, 1), {5.0, 2.0, 7.0, 1.0});
  CHECK(*cdd(wet).value == 0.0);

  // a full dry year
  std::vector<std::optional<double>> dry(365, 0.0);
  const auto year = make_series(make_date(1990, 1, 1), dry);
  CHECK(*cdd(year).value == 365.0);
  CHECK(cdd(year).completeness == 1.0);

  // sub-threshold drizzle does not break a run
  const auto drizzle = make_series(make_date(1990, 1, 1), {0.0, 0.9, 0.0, 3.0});
  CHECK(*cdd(drizzle).value == 3.0);
}

TEST_CASE("cdd missing-day policies") {
  const auto gappy = make_series(make_date(1990, 1, 1),
                                 {0.0, 0.0, std::nullopt, 0.0, 0.0, 0.0, 0.0});

  const auto strict = cdd(gappy, MissingPolicy::Strict);
  CHECK_FALSE(strict.value.has_value());
  CHECK(strict.completeness == doctest::Approx(6.0 / 7.0));

  // the gap terminates the first run, leaving the four-day run after it
  const auto lenient = cdd(gappy, MissingPolicy::BreakRun);
  REQUIRE(lenient.value.has_value());
  CHECK(*lenient.value == 4.0);
}

TEST_CASE("cdd series validation") {
  CHECK_THROWS_AS(cdd(DailySeries{}), EmptyInputError);

  // series crossing a year boundary
  const auto crossing = make_series(make_date(1990, 12, 30), {0.0, 0.0, 0.0, 0.0});
  CHECK_THROWS_AS(cdd(crossing), PeriodError);

  // a hole in the date run is a structural defect, not a missing value
  DailySeries gapped;
  gapped.dates = {make_date(1990, 1, 1), make_date(1990, 1, 3)};
  gapped.precip = {0.0, 0.0};
  CHECK_THROWS_AS(cdd(gapped), StructuralError);

  DailySeries mismatched = make_series(make_date(1990, 1, 1), {0.0, 0.0});
  mismatched.precip.pop_back();
  CHECK_THROWS_AS(cdd(mismatched), StructuralError);

  const auto negative = make_series(make_date(1990, 1, 1), {0.0, -1.0});
  CHECK_THROWS_AS(cdd(negative), DomainError);
}

TEST_CASE("mfp worked examples") {
  // strictly increasing amounts: last window 2+3+4+5+6 = 20
  const auto rising =
      make_series(make_date(1990, 6, 1), {1.0, 2.0, 3.0, 4.0, 5.0, 6.0});
  const auto v = mfp(rising);
  CHECK(v.period == "1990-06");
  REQUIRE(v.value.has_value());
  CHECK(*v.value == 20.0);

  // constant 2 mm for 30 days: every window sums to 10
  std::vector<std::optional<double>> flat(30, 2.0);
  CHECK(*mfp(make_series(make_date(1990, 6, 1), flat)).value == 10.0);

  // single spike dominates
  std::vector<std::optional<double>> spike(30, 0.0);
  spike[14] = 50.0;
  CHECK(*mfp(make_series(make_date(1990, 6, 1), spike)).value == 50.0);
}

TEST_CASE("mfp needs five consecutive present days") {
  // four days cannot host a window: missing value, not an error
  const auto four = make_series(make_date(1990, 6, 1), {9.0, 9.0, 9.0, 9.0});
  const auto v = mfp(four);
  CHECK_FALSE(v.value.has_value());
  CHECK(v.completeness == 1.0);

  // strict: one gap anywhere wipes the month
  std::vector<std::optional<double>> gappy(30, 1.0);
  gappy[20] = std::nullopt;
  CHECK_FALSE(mfp(make_series(make_date(1990, 6, 1), gappy)).value.has_value());

  // break-run: windows clear of the gap still count
  const auto lenient = mfp(make_series(make_date(1990, 6, 1), gappy),
                           MissingPolicy::BreakRun);
  REQUIRE(lenient.value.has_value());
  CHECK(*lenient.value == 5.0);

  // break-run with gaps denser than the window: no value
  std::vector<std::optional<double>> riddled(30);
  for (std::size_t i = 0; i < riddled.size(); i += 3) {
    riddled[i] = 4.0;
  }
  CHECK_FALSE(mfp(make_series(make_date(1990, 6, 1), riddled),
                  MissingPolicy::BreakRun).value.has_value());
}

TEST_CASE("mfp rejects series spanning more than one month") {
  const auto crossing = make_series(make_date(1990, 6, 28), {1.0, 1.0, 1.0, 1.0, 1.0});
  CHECK_THROWS_AS(mfp(crossing), PeriodError);
}

TEST_CASE("mfp dominates the single wettest day on complete months") {
  std::mt19937 rng(51);
  for (int rep = 0; rep < 200; ++rep) {
    const auto precip = testutil::random_precip(rng, 30, 0.5, 0.0);
    const auto series = make_series(make_date(1991, 4, 1), precip);
    const auto v = mfp(series);
    REQUIRE(v.value.has_value());
    double max_day = 0.0, total = 0.0;
    for (const auto& p : precip) {
      max_day = std::max(max_day, *p);
      total += *p;
    }
    CHECK(*v.value >= max_day);
    CHECK(*v.value <= total);
  }
}

TEST_CASE("cdd agrees with an exhaustive scan on random series") {
  std::mt19937 rng(52);
  std::uniform_int_distribution<int> len_dist(28, 365);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int rep = 0; rep < 1000; ++rep) {
    const int len = len_dist(rng);
    const double gap_rate = u(rng) < 0.5 ? 0.0 : 0.1 * u(rng);
    const auto precip = testutil::random_precip(rng, static_cast<std::size_t>(len),
                                                0.7, gap_rate);
    const auto series = make_series(make_date(1992, 1, 1), precip);
    const auto policy = rep % 2 == 0 ? MissingPolicy::Strict : MissingPolicy::BreakRun;
    const auto mode = rep % 3 == 0 ? DryThresholdMode::AtMost : DryThresholdMode::Below;

    const auto got = cdd(series, policy, mode);
    const auto expect = testutil::brute_cdd(series, policy, mode);
    CHECK(got.value.has_value() == expect.has_value());
    if (got.value.has_value() && expect.has_value()) {
      CHECK(*got.value == *expect);
    }
  }
}

TEST_CASE("mfp agrees with an exhaustive scan on random series") {
  std::mt19937 rng(53);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int rep = 0; rep < 1000; ++rep) {
    const unsigned month = 1 + static_cast<unsigned>(rep % 12);
    const auto first = make_date(1991, month, 1);
    // series may stop short of the month's end
    const auto last_day = std::chrono::year_month_day_last{
        std::chrono::year{1991}, std::chrono::month_day_last{std::chrono::month{month}}};
    const auto full = static_cast<unsigned>(last_day.day());
    std::uniform_int_distribution<unsigned> len_dist(1, full);
    const unsigned len = len_dist(rng);
    const double gap_rate = u(rng) < 0.5 ? 0.0 : 0.25 * u(rng);
    const auto precip = testutil::random_precip(rng, len, 0.5, gap_rate);
    const auto series = make_series(first, precip);
    const auto policy = rep % 2 == 0 ? MissingPolicy::Strict : MissingPolicy::BreakRun;

    const auto got = mfp(series, policy);
    const auto expect = testutil::brute_mfp(series, policy);
    CHECK(got.value.has_value() == expect.has_value());
    if (got.value.has_value() && expect.has_value()) {
      CHECK(*got.value == doctest::Approx(*expect).epsilon(1e-12));
    }
  }
}

TEST_CASE("adding rain never lengthens a dry spell") {
  std::mt19937 rng(54);
  for (int rep = 0; rep < 200; ++rep) {
    auto precip = testutil::random_precip(rng, 60, 0.7, 0.0);
    const auto before = cdd(make_series(make_date(1993, 1, 1), precip));
    std::uniform_int_distribution<std::size_t> pick(0, precip.size() - 1);
    precip[pick(rng)] = 10.0;
    const auto after = cdd(make_series(make_date(1993, 1, 1), precip));
    CHECK(*after.value <= *before.value);
  }
}

TEST_CASE("index_panel covers every period the panel touches") {
  std::mt19937 rng(55);
  const auto stations = testutil::random_stations(rng, 3, false);

  // one full year: a single CDD row per station, twelve MFP rows
  const auto year_dates = testutil::date_run(make_date(1990, 1, 1), 365);
  std::vector<std::optional<double>> values(3 * 365, 0.5);
  const auto panel = testutil::make_panel(stations, year_dates, values);

  const auto cdd_table = index_panel(panel, IndexKind::Cdd);
  CHECK(cdd_table.periods == std::vector<std::string>{"1990"});
  REQUIRE(cdd_table.values.size() == 3);
  for (std::size_t s = 0; s < 3; ++s) {
    REQUIRE(cdd_table.values[cdd_table.cell(s, 0)].has_value());
    CHECK(*cdd_table.values[cdd_table.cell(s, 0)] == 365.0);
    CHECK(cdd_table.completeness[cdd_table.cell(s, 0)] == 1.0);
  }

  const auto mfp_table = index_panel(panel, IndexKind::Mfp);
  CHECK(mfp_table.periods.size() == 12);
  CHECK(mfp_table.periods.front() == "1990-01");
  CHECK(mfp_table.periods.back() == "1990-12");
  for (const auto& v : mfp_table.values) {
    REQUIRE(v.has_value());
    CHECK(*v == 2.5);
  }
}

TEST_CASE("index_panel spans partial years with reduced completeness") {
  std::mt19937 rng(56);
  const auto stations = testutil::random_stations(rng, 2, false);
  // mid-December 1990 through January 1991
  const auto dates = testutil::date_run(make_date(1990, 12, 15), 48);
  std::vector<std::optional<double>> values(2 * 48, 0.0);
  const auto panel = testutil::make_panel(stations, dates, values);

  const auto table = index_panel(panel, IndexKind::Cdd, MissingPolicy::BreakRun);
  CHECK(table.periods == std::vector<std::string>{"1990", "1991"});
  // 17 of 365 days in 1990, 31 of 365 in 1991
  CHECK(table.completeness[table.cell(0, 0)] == doctest::Approx(17.0 / 365.0));
  CHECK(table.completeness[table.cell(0, 1)] == doctest::Approx(31.0 / 365.0));
  CHECK(*table.values[table.cell(0, 0)] == 17.0);
  CHECK(*table.values[table.cell(0, 1)] == 31.0);

  // strict policy: both years have gaps, so both values are missing
  const auto strict = index_panel(panel, IndexKind::Cdd, MissingPolicy::Strict);
  CHECK_FALSE(strict.values[strict.cell(0, 0)].has_value());
  CHECK_FALSE(strict.values[strict.cell(0, 1)].has_value());
}

TEST_CASE("a single missing day under strict policy wipes only its own month") {
  std::mt19937 rng(57);
  const auto stations = testutil::random_stations(rng, 1, false);
  const auto dates = testutil::date_run(make_date(1990, 1, 1), 365);
  std::vector<std::optional<double>> values(365, 2.0);
  // knock out July 10
  values[31 + 28 + 31 + 30 + 31 + 30 + 9] = std::nullopt;
  const auto panel = testutil::make_panel(stations, dates, values);

  const auto table = index_panel(panel, IndexKind::Mfp, MissingPolicy::Strict);
  REQUIRE(table.periods.size() == 12);
  for (std::size_t p = 0; p < 12; ++p) {
    const auto& v = table.values[table.cell(0, p)];
    if (table.periods[p] == "1990-07") {
      CHECK_FALSE(v.has_value());
    } else {
      REQUIRE(v.has_value());
      CHECK(*v == 10.0);
    }
  }
}

TEST_CASE("station_series pads uncovered days with missing entries") {
  std::mt19937 rng(58);
  const auto stations = testutil::random_stations(rng, 1, false);
  const auto dates = testutil::date_run(make_date(1990, 3, 5), 10);
  std::vector<std::optional<double>> values(10, 1.0);
  const auto panel = testutil::make_panel(stations, dates, values);

  const auto series = station_series(panel, 0, make_date(1990, 3, 1),
                                     make_date(1990, 3, 31));
  REQUIRE(series.dates.size() == 31);
  REQUIRE(series.precip.size() == 31);
  for (std::size_t i = 0; i < 31; ++i) {
    const bool covered = i >= 4 && i < 14;
    CHECK(series.precip[i].has_value() == covered);
  }
}

TEST_CASE("index names are stable") {
  CHECK(std::string(index_name(IndexKind::Cdd)) == "cdd");
  CHECK(std::string(index_name(IndexKind::Mfp)) == "mfp");
}
