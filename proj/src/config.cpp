#include "wxkrig/config.hpp"

namespace wxkrig {

EvalConfig RunConfig::eval() const {
  EvalConfig cfg;
  cfg.predict.idw_power = idw_power;
  cfg.predict.idw_n_max = idw_n_max;
  cfg.predict.transform.lambda = boxcox_lambda;
  cfg.predict.variogram.fit_nugget = fit_nugget;
  cfg.predict.metric = metric;
  cfg.policy = policy;
  cfg.threshold = dry_threshold;
  cfg.pooling = pooling;
  cfg.threads = threads;
  return cfg;
}

}  // namespace wxkrig
