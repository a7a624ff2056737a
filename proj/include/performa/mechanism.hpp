#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <vector>

#include "json.hpp"
#include "performa/backbone.hpp"
#include "performa/world.hpp"

namespace performa {

/// Shift mechanism parameters. tau < 0 is the adversarial regime: the
/// better a class was served, the smaller its share next round.
struct ShiftConfig {
  double tau = -1.0;
  std::optional<double> target_drop;
  std::optional<std::vector<int>> domain_filter;
};

/// Next-round label marginals softmax(stat / tau), computed in log space.
LabelMarginals induced_marginals(const SufficientStatistic& stat, double tau);

/// Markovian update: the next distribution depends on the deployed
/// model only through its statistic.
LabelMarginals apply_shift(const SufficientStatistic& stat, const ShiftConfig& config);

/// Raised when a requested accuracy drop lies outside what any tau in
/// the search bracket can induce on the given world/model pair.
struct CalibrationInfeasible : std::runtime_error {
  CalibrationInfeasible(double lo, double hi, double requested);
  double achievable_min = 0.0;
  double achievable_max = 0.0;
  double requested = 0.0;
};

/// Finds adversarial tau < 0 whose induced shift costs the model
/// `target_drop` accuracy relative to its balanced baseline. Monotone
/// bisection on log|tau| over [1e-3, 1e3] with a fixed evaluation seed;
/// the model is scored with its plain argmax rule. target_drop <= the
/// drop at the flat end of the bracket returns that end (-1e3).
double calibrate_tau(const WorldSpec& world, const Backbone& model, double target_drop,
                     int balanced_eval_n, uint64_t seed);

void to_json(nlohmann::json& j, const ShiftConfig& config);
void from_json(const nlohmann::json& j, ShiftConfig& config);

}  // namespace performa
