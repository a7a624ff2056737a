#include "performa/baselines.hpp"

#include <stdexcept>

#include "performa/util.hpp"

namespace performa {

StrategyKind parse_strategy(const std::string& name) {
  if (name == "none" || name == "no-adaptation") return StrategyKind::no_adaptation;
  if (name == "oracle-dist") return StrategyKind::oracle_distribution;
  if (name == "oracle-ft") return StrategyKind::oracle_finetune;
  if (name == "pap") return StrategyKind::pap;
  throw std::invalid_argument("unknown strategy '" + name +
                              "' (expected none|oracle-dist|oracle-ft|pap)");
}

std::string strategy_name(StrategyKind kind) {
  switch (kind) {
    case StrategyKind::no_adaptation: return "none";
    case StrategyKind::oracle_distribution: return "oracle-dist";
    case StrategyKind::oracle_finetune: return "oracle-ft";
    case StrategyKind::pap: return "pap";
  }
  return "?";
}

int no_adaptation_decide(const Backbone& model, const std::vector<double>& x) {
  return argmax_lowest(predict_probs(model, x).probs);
}

int oracle_distribution_decide(const Backbone& model, const std::vector<double>& x,
                               const LabelMarginals& true_next_marginals) {
  return adjust_prediction(predict_probs(model, x), model.lambda_pre, true_next_marginals)
      .second;
}

Backbone oracle_finetune_step(const Backbone& model,
                              const std::vector<LabeledSample>& round_samples, int epochs,
                              FinetuneScope scope, double lr, uint64_t seed) {
  return finetune_linear(model, round_samples, epochs, lr, scope, seed);
}

int pap_decide(const Backbone& model, const std::vector<double>& x, const AdapterNet& net,
               const SufficientStatistic& stat_prev) {
  return adjust_prediction(predict_probs(model, x), model.lambda_pre,
                           adapter_forward(net, stat_prev))
      .second;
}

DecisionRule argmax_rule(const Backbone& model) {
  return [&model](const std::vector<double>& x) {
    return argmax_lowest(predict_probs(model, x).probs);
  };
}

DecisionRule adjusted_rule(const Backbone& model, LabelMarginals predicted_marginals) {
  return [&model, predicted = std::move(predicted_marginals)](const std::vector<double>& x) {
    return adjust_prediction(predict_probs(model, x), model.lambda_pre, predicted).second;
  };
}

}  // namespace performa
