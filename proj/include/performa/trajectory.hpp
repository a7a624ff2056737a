#pragma once

#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"
#include "performa/adapter.hpp"
#include "performa/backbone.hpp"
#include "performa/baselines.hpp"
#include "performa/mechanism.hpp"
#include "performa/world.hpp"

namespace performa {

struct StrategyParams {
  StrategyKind kind = StrategyKind::pap;
  // oracle fine-tuning
  int ft_epochs = 25;
  double ft_lr = 0.1;
  FinetuneScope ft_scope = FinetuneScope::all;
  // adapter
  int hidden1 = 256;
  int hidden2 = 256;
  double adapter_lr = 1e-4;
  double buffer_decay = 0.995;
  int adapter_passes = 1;
  bool freeze_adapter = false;
};

struct TrajectorySetup {
  WorldSpec world;
  Backbone initial_model;
  std::vector<Backbone> roster;  // switch targets, looked up by id
  std::vector<std::pair<int, std::string>> switch_schedule;
  ShiftConfig shift;
  StrategyParams strategy;
  int rounds = 200;
  int train_n = 1000;
  int test_n = 2000;
  double init_alpha = 100.0;
  int restrict_domains = 0;  // m > 0: sample each round from a random m-domain subset
  bool pin_uniform = false;  // bypass the mechanism, marginals stay uniform
  uint64_t run_seed = 1;
  std::optional<AdapterNet> pretrained_adapter;
};

/// Per-round log row. predicted_marginals stays empty for strategies
/// that make no marginal prediction (and at the round-0 evaluation).
struct TrajectoryRecord {
  int round = 0;
  std::string model_id;
  SufficientStatistic stat;
  LabelMarginals true_marginals;
  std::vector<double> predicted_marginals;
  double post_deployment_accuracy = 0.0;
  double adapter_kl = 0.0;
  std::vector<std::string> wall_notes;
};

/// One trajectory = one sequential state machine. All randomness flows
/// through the owned engine, so a serialized state resumes bit-exactly.
struct TrajectoryState {
  WorldSpec world;
  std::vector<Backbone> roster;
  std::vector<std::pair<int, std::string>> switch_schedule;
  ShiftConfig shift;
  StrategyParams strategy;
  int rounds = 0;
  int train_n = 0;
  int test_n = 0;
  double init_alpha = 100.0;
  int restrict_domains = 0;
  bool pin_uniform = false;
  uint64_t run_seed = 0;

  Backbone model;
  AdapterNet adapter;
  MemoryBuffer buffer;
  LabelMarginals marginals;  // exact marginals of the distribution now being served
  std::optional<std::vector<int>> domain_filter;
  SufficientStatistic stat_prev;
  bool has_stat_prev = false;
  int round = 0;
  std::mt19937_64 rng;
};

TrajectoryState init_trajectory(const TrajectorySetup& setup);

/// Executes one deployment round: sample, update the strategy, measure
/// the deployed rule's statistic, derive the next distribution, and
/// score the post-deployment accuracy. Round 0 only evaluates the
/// initial model on the starting distribution.
TrajectoryRecord run_round(TrajectoryState& state);

std::vector<TrajectoryRecord> run_trajectory(const TrajectorySetup& setup);

/// Replaces the deployed backbone; adapter and buffer carry over.
void switch_backbone(TrajectoryState& state, const Backbone& new_model);

/// Expected post-deployment accuracy of a candidate: the adapter's
/// marginal prediction for `stat` mixed with the candidate's per-class
/// accuracies.
double anticipate_accuracy(const AdapterNet& net, const SufficientStatistic& stat,
                           const SufficientStatistic& candidate_class_accs);

/// Scores every candidate on the current sample and orders them by
/// anticipated post-deployment accuracy (descending, ties by id).
std::vector<std::pair<std::string, double>> rank_candidates(
    const AdapterNet& net, const std::vector<LabeledSample>& current_samples,
    const std::vector<Backbone>& candidates);

/// CSV layer: header round,model_id,acc,adapter_kl,true_marginals,
/// pred_marginals,stat with vectors semicolon-joined at 10 significant
/// digits.
std::string records_to_csv(const std::vector<TrajectoryRecord>& records);

nlohmann::json snapshot_state(const TrajectoryState& state);
TrajectoryState restore_state(const nlohmann::json& snapshot);

void to_json(nlohmann::json& j, const StrategyParams& params);
void from_json(const nlohmann::json& j, StrategyParams& params);

}  // namespace performa
