#pragma once

#include <cstdint>
#include <stdexcept>
#include <utility>
#include <vector>

#include "json.hpp"
#include "performa/backbone.hpp"
#include "performa/world.hpp"

namespace performa {

/// Feed-forward marginal predictor T: statistic -> label marginals.
/// Two rectifier hidden layers, softmax output, adaptive-moment
/// optimizer state carried alongside the parameters.
struct AdapterNet {
  std::vector<int> layer_sizes;  // [K, H1, H2, K]
  std::vector<std::vector<double>> weights;  // per layer, row-major out x in
  std::vector<std::vector<double>> biases;
  std::vector<std::vector<double>> moment1_w, moment2_w;
  std::vector<std::vector<double>> moment1_b, moment2_b;
  long long step = 0;

  int num_classes() const { return layer_sizes.empty() ? 0 : layer_sizes.front(); }
};

/// Fan-in-scaled symmetric initialization, zero biases, zeroed optimizer
/// state. Deterministic under the seed.
AdapterNet init_adapter(int k, int h1, int h2, uint64_t seed);

size_t parameter_count(const AdapterNet& net);

LabelMarginals adapter_forward(const AdapterNet& net, const SufficientStatistic& stat);

/// KL(target || predicted) with 0 log 0 = 0.
double kl_loss(const LabelMarginals& predicted, const LabelMarginals& target);

/// One (statistic, observed marginals) pair collected at `round`.
struct BufferEntry {
  SufficientStatistic stat;
  LabelMarginals marginals;
  int round = 0;
};

/// Ordered replay store; losses are scaled by decay^(age in rounds).
struct MemoryBuffer {
  std::vector<BufferEntry> entries;
  double decay = 0.995;

  void append(BufferEntry entry);  // rounds must be strictly increasing
  bool empty() const { return entries.empty(); }
  size_t size() const { return entries.size(); }
};

struct TrainPassResult {
  bool updated = false;       // false iff the buffer was empty
  double weighted_loss = 0.0;  // decay-weighted mean KL before the updates
};

/// One pass over the buffer: per-entry gradient step on the decayed KL
/// loss using adaptive moments (beta1 0.9, beta2 0.999, bias-corrected).
TrainPassResult train_pass(AdapterNet& net, const MemoryBuffer& buffer, double lr,
                           int current_round);

/// Flattened-gradient access used by finite-difference verification.
std::vector<double> flatten_parameters(const AdapterNet& net);
void set_flat_parameters(AdapterNet& net, const std::vector<double>& params);
std::vector<double> loss_gradient(const AdapterNet& net, const SufficientStatistic& stat,
                                  const LabelMarginals& target, double weight);

/// A class unseen in pretraining (zero prior) cannot be reweighted up.
struct ZeroPriorConflict : std::runtime_error {
  explicit ZeroPriorConflict(int cls);
  int class_index = 0;
};

/// Prior-correction rule: w_i = probs_pre_i * predicted_i / lambda_pre_i,
/// renormalized. Returns the adjusted vector and its argmax (ties broken
/// by lowest class index).
std::pair<std::vector<double>, int> adjust_prediction(const LabelMarginals& probs_pre,
                                                      const LabelMarginals& lambda_pre,
                                                      const LabelMarginals& predicted_marginals);

void to_json(nlohmann::json& j, const AdapterNet& net);
void from_json(const nlohmann::json& j, AdapterNet& net);
void to_json(nlohmann::json& j, const MemoryBuffer& buffer);
void from_json(const nlohmann::json& j, MemoryBuffer& buffer);

}  // namespace performa
