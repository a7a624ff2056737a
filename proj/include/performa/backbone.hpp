#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "performa/world.hpp"

namespace performa {

/// Per-class accuracies of a deployed model; the statistic the shift
/// mechanism and the marginal predictor consume.
struct SufficientStatistic {
  std::vector<double> acc;

  int size() const { return static_cast<int>(acc.size()); }
  double operator[](int i) const { return acc[i]; }
};

enum class BackboneKind { bayes_oracle, linear_softmax };

/// Frozen classifier abstraction: maps x to a posterior probability
/// vector and carries the label marginals of its training data.
/// Instances are immutable by convention; fine-tuning returns a copy.
struct Backbone {
  BackboneKind kind = BackboneKind::linear_softmax;
  std::string id;
  LabelMarginals lambda_pre;

  // bayes_oracle: corrupted copy of the generating world
  WorldSpec oracle_spec;
  double epsilon = 0.0;

  // linear_softmax: logits = W x + b, W row-major K x dim
  int dim = 0;
  std::vector<double> weights;
  std::vector<double> bias;

  int num_classes() const { return lambda_pre.size(); }
};

/// Exact-posterior backbone. epsilon > 0 shifts every component mean by
/// a seeded Gaussian offset of scale epsilon*sigma per coordinate, which
/// degrades the model without touching the world itself.
Backbone make_bayes_oracle(const WorldSpec& world, const LabelMarginals& lambda_pre,
                           double epsilon, uint64_t seed, std::string id);

Backbone make_linear_softmax(int num_classes, int dim, std::vector<double> weights,
                             std::vector<double> bias, LabelMarginals lambda_pre,
                             std::string id);

/// Posterior probability vector for a single input.
LabelMarginals predict_probs(const Backbone& model, std::span<const double> x);

/// A decision rule maps an input to a class index.
using DecisionRule = std::function<int(const std::vector<double>&)>;

struct ClassAccuracies {
  SufficientStatistic stat;
  std::vector<int> imputed_classes;  // classes absent from the sample (acc set to 0.5)

  bool imputed() const { return !imputed_classes.empty(); }
};

/// acc[i] = fraction of class-i samples the rule maps to i. Classes with
/// no samples get 0.5 and are reported in imputed_classes.
ClassAccuracies class_accuracies(const std::vector<LabeledSample>& samples, int k,
                                 const DecisionRule& decide);

/// Overall accuracy of a rule on a sample.
double rule_accuracy(const std::vector<LabeledSample>& samples, const DecisionRule& decide);

enum class FinetuneScope { all, last_bias_only };

/// Multinomial logistic regression via mini-batch gradient descent on
/// cross-entropy. lambda_pre is set to the empirical class frequencies
/// of the training sample. Deterministic under the seed.
Backbone train_linear(const std::vector<LabeledSample>& samples, int k, int epochs,
                      double lr, uint64_t seed, int batch_size = 64);

/// Continues gradient training on `samples` and returns a new model;
/// scope last_bias_only freezes W and refits only the bias.
Backbone finetune_linear(const Backbone& model, const std::vector<LabeledSample>& samples,
                         int epochs, double lr, FinetuneScope scope, uint64_t seed,
                         int batch_size = 64);

/// Mean cross-entropy and its gradient, exposed so the training step can
/// be checked against finite differences.
double linear_cross_entropy(const Backbone& model, const std::vector<LabeledSample>& samples);
void linear_ce_gradient(const Backbone& model, const std::vector<LabeledSample>& samples,
                        std::vector<double>& grad_w, std::vector<double>& grad_b);

void to_json(nlohmann::json& j, const Backbone& model);
void from_json(const nlohmann::json& j, Backbone& model);

}  // namespace performa
