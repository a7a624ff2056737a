#include "performa/mechanism.hpp"

#include <cmath>
#include <string>

#include "performa/util.hpp"

namespace performa {

namespace {

constexpr double kTauBracketLo = 1e-3;  // sharpest shift searched
constexpr double kTauBracketHi = 1e3;   // flat end, marginals ~ uniform
constexpr int kMaxBisectIterations = 60;
constexpr double kDropTolerance = 5e-4;

}  // namespace

LabelMarginals induced_marginals(const SufficientStatistic& stat, double tau) {
  if (tau == 0.0) throw std::invalid_argument("induced_marginals: tau must be nonzero");
  if (stat.acc.empty()) throw std::invalid_argument("induced_marginals: empty statistic");
  for (double a : stat.acc)
    if (!(a >= 0.0 && a <= 1.0))
      throw std::invalid_argument("induced_marginals: statistic entries must lie in [0,1]");
  std::vector<double> logits(stat.acc.size());
  for (size_t i = 0; i < stat.acc.size(); ++i) logits[i] = stat.acc[i] / tau;
  return {softmax(logits)};
}

LabelMarginals apply_shift(const SufficientStatistic& stat, const ShiftConfig& config) {
  return induced_marginals(stat, config.tau);
}

CalibrationInfeasible::CalibrationInfeasible(double lo, double hi, double req)
    : std::runtime_error("calibrate_tau: target drop " + format_double(req) +
                         " outside achievable range [" + format_double(lo) + ", " +
                         format_double(hi) + "]"),
      achievable_min(lo),
      achievable_max(hi),
      requested(req) {}

double calibrate_tau(const WorldSpec& world, const Backbone& model, double target_drop,
                     int balanced_eval_n, uint64_t seed) {
  if (balanced_eval_n < 1)
    throw std::invalid_argument("calibrate_tau: balanced_eval_n must be positive");
  if (target_drop >= 1.0)
    throw std::invalid_argument("calibrate_tau: target_drop must be < 1");

  const DecisionRule argmax = [&model](const std::vector<double>& x) {
    return argmax_lowest(predict_probs(model, x).probs);
  };

  // Baseline statistic and accuracy on a balanced sample.
  const LabelMarginals balanced = uniform_marginals(world.num_classes);
  const std::vector<LabeledSample> base_sample =
      sample_with_marginals(world, balanced, balanced_eval_n, nullptr, mix_seed(seed, 1));
  const SufficientStatistic stat = class_accuracies(base_sample, world.num_classes, argmax).stat;
  const double baseline = rule_accuracy(base_sample, argmax);

  // Accuracy under the shift induced by a candidate magnitude. The
  // evaluation seed is fixed so the curve is a deterministic, nearly
  // monotone function of the magnitude.
  const uint64_t eval_seed = mix_seed(seed, 2);
  const auto drop_at = [&](double magnitude) {
    const LabelMarginals shifted = induced_marginals(stat, -magnitude);
    const std::vector<LabeledSample> sample =
        sample_with_marginals(world, shifted, balanced_eval_n, nullptr, eval_seed);
    return baseline - rule_accuracy(sample, argmax);
  };

  const double drop_sharp = drop_at(kTauBracketLo);
  const double drop_flat = drop_at(kTauBracketHi);
  if (target_drop <= 0.0 || target_drop <= drop_flat) return -kTauBracketHi;
  if (target_drop > drop_sharp)
    throw CalibrationInfeasible(std::min(drop_flat, 0.0), drop_sharp, target_drop);

  double lo = std::log(kTauBracketLo);  // drop >= target here
  double hi = std::log(kTauBracketHi);  // drop < target here
  double best_log_tau = lo;
  double best_err = std::abs(drop_sharp - target_drop);
  for (int it = 0; it < kMaxBisectIterations; ++it) {
    const double mid = 0.5 * (lo + hi);
    const double drop = drop_at(std::exp(mid));
    const double err = std::abs(drop - target_drop);
    if (err < best_err) {
      best_err = err;
      best_log_tau = mid;
    }
    if (err <= kDropTolerance) break;
    if (drop >= target_drop)
      lo = mid;
    else
      hi = mid;
  }
  return -std::exp(best_log_tau);
}

void to_json(nlohmann::json& j, const ShiftConfig& config) {
  j = nlohmann::json{{"tau", config.tau}};
  j["target_drop"] =
      config.target_drop ? nlohmann::json(*config.target_drop) : nlohmann::json();
  j["domain_filter"] =
      config.domain_filter ? nlohmann::json(*config.domain_filter) : nlohmann::json();
}

void from_json(const nlohmann::json& j, ShiftConfig& config) {
  j.at("tau").get_to(config.tau);
  config.target_drop.reset();
  config.domain_filter.reset();
  if (j.contains("target_drop") && !j["target_drop"].is_null())
    config.target_drop = j["target_drop"].get<double>();
  if (j.contains("domain_filter") && !j["domain_filter"].is_null())
    config.domain_filter = j["domain_filter"].get<std::vector<int>>();
}

}  // namespace performa
