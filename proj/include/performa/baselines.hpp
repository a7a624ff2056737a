#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "performa/adapter.hpp"
#include "performa/backbone.hpp"

namespace performa {

enum class StrategyKind { no_adaptation, oracle_distribution, oracle_finetune, pap };

StrategyKind parse_strategy(const std::string& name);
std::string strategy_name(StrategyKind kind);

/// Fixed pretrained model, no adjustment of any kind.
int no_adaptation_decide(const Backbone& model, const std::vector<double>& x);

/// Upper-bound baseline: prior correction with the true marginals of the
/// distribution being predicted on (simulator-only privilege).
int oracle_distribution_decide(const Backbone& model, const std::vector<double>& x,
                               const LabelMarginals& true_next_marginals);

/// Retrains the deployed model on the observed round sample.
Backbone oracle_finetune_step(const Backbone& model,
                              const std::vector<LabeledSample>& round_samples, int epochs,
                              FinetuneScope scope, double lr, uint64_t seed);

/// Prior correction with the adapter's marginal prediction from the
/// previously measured statistic.
int pap_decide(const Backbone& model, const std::vector<double>& x, const AdapterNet& net,
               const SufficientStatistic& stat_prev);

/// Rule factories used by the trajectory runner (batched equivalents of
/// the per-x functions above).
DecisionRule argmax_rule(const Backbone& model);
DecisionRule adjusted_rule(const Backbone& model, LabelMarginals predicted_marginals);

}  // namespace performa
