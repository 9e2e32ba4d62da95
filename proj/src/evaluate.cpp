#include "wxkrig/evaluate.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <functional>
#include <map>
#include <mutex>
#include <numeric>
#include <random>
#include <thread>

#include "wxkrig/errors.hpp"

namespace wxkrig {

namespace {

// Strided static schedule; per-index work writes only its own slots, so
// results do not depend on the thread count.
void parallel_for(std::size_t count, int threads,
                  const std::function<void(std::size_t)>& body) {
  if (count == 0) {
    return;
  }
  unsigned n = threads > 0 ? static_cast<unsigned>(threads)
                           : std::max(1u, std::thread::hardware_concurrency());
  n = static_cast<unsigned>(std::min<std::size_t>(n, count));
  if (n <= 1) {
    for (std::size_t i = 0; i < count; ++i) {
      body(i);
    }
    return;
  }

  std::mutex mu;
  std::exception_ptr first_error;
  auto worker = [&](unsigned t) {
    try {
      for (std::size_t i = t; i < count; i += n) {
        body(i);
      }
    } catch (...) {
      const std::lock_guard<std::mutex> lock(mu);
      if (!first_error) {
        first_error = std::current_exception();
      }
    }
  };
  std::vector<std::thread> pool;
  pool.reserve(n);
  for (unsigned t = 0; t < n; ++t) {
    pool.emplace_back(worker, t);
  }
  for (std::thread& th : pool) {
    th.join();
  }
  if (first_error) {
    std::rethrow_exception(first_error);
  }
}

struct PeriodPairs {
  int year = 0;
  std::vector<double> pred;
  std::vector<double> obs;
};

struct FallbackTally {
  long fallback = 0;
  long predictions = 0;
};

double mean_of(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) {
    s += x;
  }
  return s / static_cast<double>(v.size());
}

// Year rows plus an "all" row; the all-years value is the mean of the yearly
// values so every year carries equal weight regardless of period counts.
std::vector<ReportRow> make_rows(const std::string& approach, Method method,
                                 const std::string& variable,
                                 const std::vector<PeriodPairs>& periods, Pooling pooling,
                                 std::uint32_t seed,
                                 const std::map<int, FallbackTally>& tally_by_year) {
  std::map<int, std::vector<const PeriodPairs*>> by_year;
  for (const PeriodPairs& p : periods) {
    by_year[p.year].push_back(&p);
  }

  std::vector<ReportRow> rows;
  std::vector<double> yearly_rmse, yearly_mae;
  long total_periods = 0;
  FallbackTally total_tally;
  for (const auto& [fb_year, t] : tally_by_year) {
    (void)fb_year;
    total_tally.fallback += t.fallback;
    total_tally.predictions += t.predictions;
  }

  const auto rate = [](const FallbackTally& t) {
    return t.predictions > 0
               ? static_cast<double>(t.fallback) / static_cast<double>(t.predictions)
               : 0.0;
  };

  for (const auto& [yr, entries] : by_year) {
    double rmse_y = 0.0, mae_y = 0.0;
    if (pooling == Pooling::PerPeriod) {
      std::vector<double> rmses, maes;
      for (const PeriodPairs* p : entries) {
        rmses.push_back(rmse(p->pred, p->obs));
        maes.push_back(mae(p->pred, p->obs));
      }
      rmse_y = mean_of(rmses);
      mae_y = mean_of(maes);
    } else {
      std::vector<double> pred, obs;
      for (const PeriodPairs* p : entries) {
        pred.insert(pred.end(), p->pred.begin(), p->pred.end());
        obs.insert(obs.end(), p->obs.begin(), p->obs.end());
      }
      rmse_y = rmse(pred, obs);
      mae_y = mae(pred, obs);
    }
    yearly_rmse.push_back(rmse_y);
    yearly_mae.push_back(mae_y);
    const auto n_periods = static_cast<long>(entries.size());
    total_periods += n_periods;

    FallbackTally t;
    if (const auto it = tally_by_year.find(yr); it != tally_by_year.end()) {
      t = it->second;
    }
    const std::string year = std::to_string(yr);
    rows.push_back({approach, method, variable, year, "RMSE", rmse_y, n_periods, rate(t), seed});
    rows.push_back({approach, method, variable, year, "MAE", mae_y, n_periods, rate(t), seed});
  }

  if (!yearly_rmse.empty()) {
    rows.push_back({approach, method, variable, "all", "RMSE", mean_of(yearly_rmse),
                    total_periods, rate(total_tally), seed});
    rows.push_back({approach, method, variable, "all", "MAE", mean_of(yearly_mae),
                    total_periods, rate(total_tally), seed});
  }
  return rows;
}

// Residual and sample accumulation follows id order, not panel order, so
// reported metrics do not depend on how the input file ordered its stations.
std::vector<std::size_t> id_order(const std::vector<Station>& stations) {
  std::vector<std::size_t> order(stations.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return stations[a].id != stations[b].id ? stations[a].id < stations[b].id : a < b;
  });
  return order;
}

std::vector<std::size_t> id_order_of_ids(const std::vector<std::string>& ids) {
  std::vector<std::size_t> order(ids.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return ids[a] != ids[b] ? ids[a] < ids[b] : a < b;
  });
  return order;
}

std::vector<int> fold_index_of(const ObservationPanel& panel, const FoldAssignment& folds) {
  std::vector<int> fold_index(panel.n_stations());
  for (std::size_t s = 0; s < panel.n_stations(); ++s) {
    fold_index[s] = folds.fold(panel.stations[s].id);
  }
  return fold_index;
}

int year_of_period(const std::string& period) {
  return std::stoi(period.substr(0, 4));
}

std::optional<double> sample_skewness(std::span<const double> sample) {
  try {
    return skewness(sample);
  } catch (const UndefinedMomentError&) {
    return std::nullopt;
  }
}

std::optional<double> sample_kurtosis(std::span<const double> sample) {
  try {
    return kurtosis(sample);
  } catch (const UndefinedMomentError&) {
    return std::nullopt;
  }
}

// Per-period moment samples -> yearly averages plus an "all" row, skipping
// (and counting) periods whose moments are undefined.
void append_moment_rows(std::vector<MomentRow>& out, const std::string& variable,
                        const std::vector<std::pair<int, std::vector<double>>>& samples) {
  std::map<int, std::vector<double>> skew_by_year, kurt_by_year;
  std::map<int, long> skipped_by_year, seen_by_year;
  for (const auto& [yr, sample] : samples) {
    ++seen_by_year[yr];
    const auto sk = sample_skewness(sample);
    const auto ku = sample_kurtosis(sample);
    if (!sk.has_value() || !ku.has_value()) {
      ++skipped_by_year[yr];
      continue;
    }
    skew_by_year[yr].push_back(*sk);
    kurt_by_year[yr].push_back(*ku);
  }

  std::vector<double> yearly_skew, yearly_kurt;
  long total_used = 0, total_skipped = 0;
  for (const auto& [yr, count] : seen_by_year) {
    const long skipped = skipped_by_year.count(yr) ? skipped_by_year[yr] : 0;
    total_skipped += skipped;
    const auto it = skew_by_year.find(yr);
    if (it == skew_by_year.end()) {
      continue;  // every period in the year was degenerate
    }
    const auto used = static_cast<long>(it->second.size());
    total_used += used;
    const std::string year = std::to_string(yr);
    out.push_back({variable, year, "skewness", mean_of(it->second), used, skipped});
    out.push_back({variable, year, "kurtosis", mean_of(kurt_by_year[yr]), used, skipped});
    yearly_skew.push_back(mean_of(it->second));
    yearly_kurt.push_back(mean_of(kurt_by_year[yr]));
    (void)count;
  }
  if (!yearly_skew.empty()) {
    out.push_back({variable, "all", "skewness", mean_of(yearly_skew), total_used, total_skipped});
    out.push_back({variable, "all", "kurtosis", mean_of(yearly_kurt), total_used, total_skipped});
  } else if (total_skipped > 0) {
    out.push_back({variable, "all", "skewness", 0.0, 0, total_skipped});
    out.push_back({variable, "all", "kurtosis", 0.0, 0, total_skipped});
  }
}

std::vector<double> cbrt_of(const std::vector<double>& v) {
  std::vector<double> out;
  out.reserve(v.size());
  for (double x : v) {
    out.push_back(std::cbrt(x));
  }
  return out;
}

}  // namespace

int FoldAssignment::fold(const std::string& id) const {
  const auto it = fold_of.find(id);
  if (it == fold_of.end()) {
    throw FoldError("station " + id + " is not in the fold assignment");
  }
  return it->second;
}

FoldAssignment kfold_split(std::vector<std::string> station_ids, int k, std::uint32_t seed) {
  if (k < 2) {
    throw FoldError("need at least two folds");
  }
  if (static_cast<std::size_t>(k) > station_ids.size()) {
    throw FoldError("more folds than stations");
  }
  std::sort(station_ids.begin(), station_ids.end());

  // Fisher-Yates with an explicit modulo draw: std::shuffle's sequence of
  // engine calls is implementation-defined, this one is pinned.
  std::mt19937 rng(seed);
  for (std::size_t i = station_ids.size() - 1; i > 0; --i) {
    const auto j = static_cast<std::size_t>(rng() % (i + 1));
    std::swap(station_ids[i], station_ids[j]);
  }

  FoldAssignment folds;
  folds.seed = seed;
  folds.k = k;
  for (std::size_t i = 0; i < station_ids.size(); ++i) {
    folds.fold_of[station_ids[i]] = static_cast<int>(i % static_cast<std::size_t>(k));
  }
  return folds;
}

double rmse(std::span<const double> predicted, std::span<const double> observed) {
  if (predicted.size() != observed.size()) {
    throw StructuralError("prediction/observation length mismatch");
  }
  if (predicted.empty()) {
    throw EmptyInputError("no residual pairs");
  }
  double ss = 0.0;
  for (std::size_t i = 0; i < predicted.size(); ++i) {
    const double d = predicted[i] - observed[i];
    ss += d * d;
  }
  return std::sqrt(ss / static_cast<double>(predicted.size()));
}

double mae(std::span<const double> predicted, std::span<const double> observed) {
  if (predicted.size() != observed.size()) {
    throw StructuralError("prediction/observation length mismatch");
  }
  if (predicted.empty()) {
    throw EmptyInputError("no residual pairs");
  }
  double s = 0.0;
  for (std::size_t i = 0; i < predicted.size(); ++i) {
    s += std::abs(predicted[i] - observed[i]);
  }
  return s / static_cast<double>(predicted.size());
}

namespace {

// Central moments with 1/n normalization.
std::pair<double, double> central_moments(std::span<const double> sample, int p, int q) {
  const auto n = static_cast<double>(sample.size());
  double mean = 0.0;
  for (double x : sample) {
    mean += x;
  }
  mean /= n;
  double mp = 0.0, mq = 0.0;
  for (double x : sample) {
    const double d = x - mean;
    mp += std::pow(d, p);
    mq += std::pow(d, q);
  }
  return {mp / n, mq / n};
}

}  // namespace

double skewness(std::span<const double> sample) {
  if (sample.size() < 2) {
    throw UndefinedMomentError("need at least two observations");
  }
  const auto [m2, m3] = central_moments(sample, 2, 3);
  if (m2 <= 0.0) {
    throw UndefinedMomentError("zero sample variance");
  }
  return m3 / std::pow(m2, 1.5);
}

double kurtosis(std::span<const double> sample) {
  if (sample.size() < 2) {
    throw UndefinedMomentError("need at least two observations");
  }
  const auto [m2, m4] = central_moments(sample, 2, 4);
  if (m2 <= 0.0) {
    throw UndefinedMomentError("zero sample variance");
  }
  return m4 / (m2 * m2);
}

HoldoutDaily predict_heldout_daily(const ObservationPanel& panel, Method method,
                                   const FoldAssignment& folds, const EvalConfig& config) {
  const std::size_t nst = panel.n_stations();
  const std::size_t nd = panel.n_dates();
  const std::vector<int> fold_index = fold_index_of(panel, folds);

  HoldoutDaily out;
  out.predicted.assign(nst * nd, std::nullopt);
  out.fallback.assign(nst * nd, 0);

  std::vector<long> skipped(nd, 0), fb(nd, 0), preds(nd, 0);

  parallel_for(nd, config.threads, [&](std::size_t d) {
    for (int f = 0; f < folds.k; ++f) {
      FieldSnapshot training;
      training.label = format_date(panel.dates[d]);
      std::size_t present = 0;
      for (std::size_t s = 0; s < nst; ++s) {
        if (fold_index[s] == f) {
          continue;
        }
        training.stations.push_back(panel.stations[s]);
        training.values.push_back(panel.precip_at(s, d));
        if (training.values.back().has_value()) {
          ++present;
        }
      }
      if (present == 0) {
        ++skipped[d];
        continue;
      }
      const DayInterpolator unit = DayInterpolator::create(method, training, config.predict);
      const std::uint8_t used_fallback = unit.fallback() ? 1 : 0;
      for (std::size_t s = 0; s < nst; ++s) {
        if (fold_index[s] != f) {
          continue;
        }
        const std::size_t c = panel.cell(s, d);
        out.predicted[c] = unit.predict(panel.stations[s]);
        out.fallback[c] = used_fallback;
        ++preds[d];
        fb[d] += used_fallback;
      }
    }
  });

  for (std::size_t d = 0; d < nd; ++d) {
    out.skipped_units += skipped[d];
    out.fallback_count += fb[d];
    out.prediction_count += preds[d];
  }
  return out;
}

CvDailyResult cv_daily(const ObservationPanel& panel, Method method,
                       const FoldAssignment& folds, const EvalConfig& config) {
  CvDailyResult result;
  result.detail = predict_heldout_daily(panel, method, folds, config);

  std::vector<PeriodPairs> periods;
  std::map<int, FallbackTally> tally;
  const std::vector<std::size_t> order = id_order(panel.stations);
  for (std::size_t d = 0; d < panel.n_dates(); ++d) {
    PeriodPairs day;
    day.year = date_year(panel.dates[d]);
    FallbackTally& t = tally[day.year];
    for (const std::size_t s : order) {
      const std::size_t c = panel.cell(s, d);
      const std::optional<double>& pred = result.detail.predicted[c];
      const std::optional<double>& obs = panel.precip_at(s, d);
      if (!pred.has_value()) {
        continue;
      }
      ++t.predictions;
      t.fallback += result.detail.fallback[c];
      if (!obs.has_value()) {
        continue;
      }
      day.pred.push_back(*pred);
      day.obs.push_back(*obs);
    }
    if (day.pred.empty()) {
      ++result.days_skipped;
      continue;
    }
    ++result.days_used;
    periods.push_back(std::move(day));
  }

  result.rows =
      make_rows("daily", method, "P", periods, config.pooling, folds.seed, tally);
  return result;
}

std::vector<ReportRow> run_direct(const ObservationPanel& panel, IndexKind kind, Method method,
                                  const FoldAssignment& folds, const EvalConfig& config) {
  const IndexTable table = index_panel(panel, kind, config.policy, config.threshold);
  const std::vector<int> fold_index = fold_index_of(panel, folds);
  const std::size_t nst = panel.n_stations();
  const std::size_t np = table.periods.size();

  // period-major prediction matrix, filled fold by fold
  std::vector<std::vector<std::optional<double>>> predicted(np);
  std::vector<std::vector<std::uint8_t>> fell(np);
  parallel_for(np, config.threads, [&](std::size_t p) {
    predicted[p].assign(nst, std::nullopt);
    fell[p].assign(nst, 0);
    for (int f = 0; f < folds.k; ++f) {
      FieldSnapshot training;
      training.label = table.periods[p];
      std::size_t present = 0;
      for (std::size_t s = 0; s < nst; ++s) {
        if (fold_index[s] == f) {
          continue;
        }
        training.stations.push_back(panel.stations[s]);
        training.values.push_back(table.values[table.cell(s, p)]);
        if (training.values.back().has_value()) {
          ++present;
        }
      }
      if (present == 0) {
        continue;
      }
      const DayInterpolator unit = DayInterpolator::create(method, training, config.predict);
      for (std::size_t s = 0; s < nst; ++s) {
        if (fold_index[s] != f || !table.values[table.cell(s, p)].has_value()) {
          continue;
        }
        predicted[p][s] = unit.predict(panel.stations[s]);
        fell[p][s] = unit.fallback() ? 1 : 0;
      }
    }
  });

  std::vector<PeriodPairs> periods;
  std::map<int, FallbackTally> tally;
  const std::vector<std::size_t> order = id_order(panel.stations);
  for (std::size_t p = 0; p < np; ++p) {
    PeriodPairs entry;
    entry.year = year_of_period(table.periods[p]);
    FallbackTally& t = tally[entry.year];
    for (const std::size_t s : order) {
      if (!predicted[p][s].has_value()) {
        continue;
      }
      ++t.predictions;
      t.fallback += fell[p][s];
      entry.pred.push_back(*predicted[p][s]);
      entry.obs.push_back(*table.values[table.cell(s, p)]);
    }
    if (!entry.pred.empty()) {
      periods.push_back(std::move(entry));
    }
  }

  const std::string variable = kind == IndexKind::Cdd ? "CDD" : "MFP";
  return make_rows("direct", method, variable, periods, config.pooling, folds.seed, tally);
}

std::vector<ReportRow> run_two_stage(const ObservationPanel& panel, IndexKind kind,
                                     Method method, const FoldAssignment& folds,
                                     const EvalConfig& config) {
  const HoldoutDaily detail = predict_heldout_daily(panel, method, folds, config);
  const IndexTable truth = index_panel(panel, kind, config.policy, config.threshold);

  // Kriging estimates may dip below zero; daily series are clamped so the
  // index domain (precip >= 0) holds. Sub-zero estimates stay dry days.
  ObservationPanel predicted_panel;
  predicted_panel.stations = panel.stations;
  predicted_panel.dates = panel.dates;
  predicted_panel.precip.resize(detail.predicted.size());
  for (std::size_t c = 0; c < detail.predicted.size(); ++c) {
    if (detail.predicted[c].has_value()) {
      predicted_panel.precip[c] = std::max(*detail.predicted[c], 0.0);
    }
  }
  const IndexTable derived =
      index_panel(predicted_panel, kind, config.policy, config.threshold);

  std::vector<PeriodPairs> periods;
  const std::vector<std::size_t> order = id_order(panel.stations);
  for (std::size_t p = 0; p < truth.periods.size(); ++p) {
    PeriodPairs entry;
    entry.year = year_of_period(truth.periods[p]);
    for (const std::size_t s : order) {
      const std::optional<double>& pred = derived.values[derived.cell(s, p)];
      const std::optional<double>& obs = truth.values[truth.cell(s, p)];
      if (!pred.has_value() || !obs.has_value()) {
        continue;
      }
      entry.pred.push_back(*pred);
      entry.obs.push_back(*obs);
    }
    if (!entry.pred.empty()) {
      periods.push_back(std::move(entry));
    }
  }

  // Fallback exposure happens at the daily stage; attribute it by date year.
  std::map<int, FallbackTally> tally;
  for (std::size_t d = 0; d < panel.n_dates(); ++d) {
    FallbackTally& t = tally[date_year(panel.dates[d])];
    for (std::size_t s = 0; s < panel.n_stations(); ++s) {
      const std::size_t c = panel.cell(s, d);
      if (detail.predicted[c].has_value()) {
        ++t.predictions;
        t.fallback += detail.fallback[c];
      }
    }
  }

  const std::string variable = kind == IndexKind::Cdd ? "CDD" : "MFP";
  return make_rows("two-stage", method, variable, periods, config.pooling, folds.seed, tally);
}

std::vector<MomentRow> panel_moments(const ObservationPanel& panel) {
  std::vector<std::pair<int, std::vector<double>>> p_samples, t_samples;
  const std::vector<std::size_t> order = id_order(panel.stations);
  for (std::size_t d = 0; d < panel.n_dates(); ++d) {
    const int yr = date_year(panel.dates[d]);
    std::vector<double> p, t;
    for (const std::size_t s : order) {
      if (const auto& v = panel.precip_at(s, d); v.has_value()) {
        p.push_back(*v);
      }
      if (panel.has_tmax()) {
        if (const auto& v = panel.tmax[panel.cell(s, d)]; v.has_value()) {
          t.push_back(*v);
        }
      }
    }
    p_samples.emplace_back(yr, std::move(p));
    if (panel.has_tmax()) {
      t_samples.emplace_back(yr, std::move(t));
    }
  }

  std::vector<MomentRow> rows;
  append_moment_rows(rows, "P", p_samples);
  std::vector<std::pair<int, std::vector<double>>> cbrt_samples;
  cbrt_samples.reserve(p_samples.size());
  for (const auto& [yr, sample] : p_samples) {
    cbrt_samples.emplace_back(yr, cbrt_of(sample));
  }
  append_moment_rows(rows, "cbrt(P)", cbrt_samples);
  if (panel.has_tmax()) {
    append_moment_rows(rows, "T", t_samples);
  }
  return rows;
}

std::vector<MomentRow> index_moments(const IndexTable& table) {
  std::vector<std::pair<int, std::vector<double>>> samples;
  const std::vector<std::size_t> order = id_order_of_ids(table.station_ids);
  for (std::size_t p = 0; p < table.periods.size(); ++p) {
    std::vector<double> sample;
    for (const std::size_t s : order) {
      if (const auto& v = table.values[table.cell(s, p)]; v.has_value()) {
        sample.push_back(*v);
      }
    }
    samples.emplace_back(year_of_period(table.periods[p]), std::move(sample));
  }

  const std::string variable = table.kind == IndexKind::Cdd ? "CDD" : "MFP";
  std::vector<MomentRow> rows;
  append_moment_rows(rows, variable, samples);
  std::vector<std::pair<int, std::vector<double>>> cbrt_samples;
  cbrt_samples.reserve(samples.size());
  for (const auto& [yr, sample] : samples) {
    cbrt_samples.emplace_back(yr, cbrt_of(sample));
  }
  append_moment_rows(rows, "cbrt(" + variable + ")", cbrt_samples);
  return rows;
}

}  // namespace wxkrig
