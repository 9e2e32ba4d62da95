#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "wxkrig/evaluate.hpp"

namespace wxkrig {

// Defaults follow the reference analysis: IDW power 2 with 20 neighbors,
// 10 folds, Box-Cox lambda 1/3, strict dry threshold.
struct RunConfig {
  std::string stations_path;
  std::string observations_path;
  std::string output_dir = ".";

  std::vector<Method> methods = {Method::NN, Method::IDW, Method::OK, Method::UK,
                                 Method::TGK};
  IndexKind index = IndexKind::Cdd;
  std::string approach = "direct";  // direct | two-stage

  int k = 10;
  std::uint32_t seed = 42;
  double idw_power = 2.0;
  int idw_n_max = 20;
  double boxcox_lambda = 1.0 / 3.0;
  DryThresholdMode dry_threshold = DryThresholdMode::Below;
  DistanceMetric metric = DistanceMetric::Haversine;
  MissingPolicy policy = MissingPolicy::Strict;
  Pooling pooling = Pooling::PerPeriod;
  int threads = 0;
  bool fit_nugget = false;
  std::string format = "csv";  // csv | markdown
  bool offline = false;

  EvalConfig eval() const;
};

}  // namespace wxkrig
