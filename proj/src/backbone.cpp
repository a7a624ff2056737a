#include "performa/backbone.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <stdexcept>

#include "performa/util.hpp"

namespace performa {

namespace {

void check_linear_shapes(const Backbone& model) {
  const size_t k = model.lambda_pre.probs.size();
  if (model.weights.size() != k * model.dim || model.bias.size() != k)
    throw std::invalid_argument("linear backbone: weight/bias shapes inconsistent");
}

std::vector<double> linear_logits(const Backbone& model, std::span<const double> x) {
  const int k = model.num_classes();
  std::vector<double> z(model.bias);
  for (int i = 0; i < k; ++i) {
    const double* row = model.weights.data() + static_cast<size_t>(i) * model.dim;
    double acc = 0.0;
    for (int c = 0; c < model.dim; ++c) acc += row[c] * x[c];
    z[i] += acc;
  }
  return z;
}

// One pass of mini-batch gradient descent over a shuffled index set.
void sgd_epoch(Backbone& model, const std::vector<LabeledSample>& samples,
               std::vector<int>& order, double lr, bool update_weights,
               int batch_size, std::mt19937_64& rng) {
  const int k = model.num_classes();
  const int d = model.dim;
  std::shuffle(order.begin(), order.end(), rng);
  std::vector<double> grad_w(update_weights ? model.weights.size() : 0, 0.0);
  std::vector<double> grad_b(k, 0.0);
  for (size_t start = 0; start < order.size(); start += batch_size) {
    const size_t stop = std::min(order.size(), start + batch_size);
    std::fill(grad_w.begin(), grad_w.end(), 0.0);
    std::fill(grad_b.begin(), grad_b.end(), 0.0);
    for (size_t idx = start; idx < stop; ++idx) {
      const LabeledSample& s = samples[order[idx]];
      const std::vector<double> p = softmax(linear_logits(model, s.x));
      for (int i = 0; i < k; ++i) {
        const double delta = p[i] - (i == s.y ? 1.0 : 0.0);
        grad_b[i] += delta;
        if (update_weights) {
          double* gw = grad_w.data() + static_cast<size_t>(i) * d;
          for (int c = 0; c < d; ++c) gw[c] += delta * s.x[c];
        }
      }
    }
    const double scale = lr / static_cast<double>(stop - start);
    for (int i = 0; i < k; ++i) model.bias[i] -= scale * grad_b[i];
    if (update_weights)
      for (size_t w = 0; w < model.weights.size(); ++w)
        model.weights[w] -= scale * grad_w[w];
  }
}

}  // namespace

Backbone make_bayes_oracle(const WorldSpec& world, const LabelMarginals& lambda_pre,
                           double epsilon, uint64_t seed, std::string id) {
  validate_marginals(lambda_pre, "make_bayes_oracle lambda_pre");
  if (lambda_pre.size() != world.num_classes)
    throw std::invalid_argument("make_bayes_oracle: lambda_pre length != num_classes");
  if (epsilon < 0.0) throw std::invalid_argument("make_bayes_oracle: epsilon must be >= 0");

  Backbone model;
  model.kind = BackboneKind::bayes_oracle;
  model.id = std::move(id);
  model.lambda_pre = lambda_pre;
  model.oracle_spec = world;
  model.epsilon = epsilon;
  model.dim = world.feature_dim;
  if (epsilon > 0.0) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> gauss(0.0, 1.0);
    for (double& m : model.oracle_spec.means) m += epsilon * world.sigma * gauss(rng);
  }
  return model;
}

Backbone make_linear_softmax(int num_classes, int dim, std::vector<double> weights,
                             std::vector<double> bias, LabelMarginals lambda_pre,
                             std::string id) {
  if (num_classes < 1 || dim < 1)
    throw std::invalid_argument("make_linear_softmax: bad shape");
  Backbone model;
  model.kind = BackboneKind::linear_softmax;
  model.id = std::move(id);
  model.lambda_pre = std::move(lambda_pre);
  model.dim = dim;
  model.weights = std::move(weights);
  model.bias = std::move(bias);
  if (model.lambda_pre.size() != num_classes)
    throw std::invalid_argument("make_linear_softmax: lambda_pre length != num_classes");
  check_linear_shapes(model);
  return model;
}

LabelMarginals predict_probs(const Backbone& model, std::span<const double> x) {
  if (static_cast<int>(x.size()) != model.dim)
    throw std::invalid_argument("predict_probs: x has wrong dimension");
  if (model.kind == BackboneKind::bayes_oracle)
    return bayes_posterior(model.oracle_spec, model.lambda_pre, x);
  return {softmax(linear_logits(model, x))};
}

ClassAccuracies class_accuracies(const std::vector<LabeledSample>& samples, int k,
                                 const DecisionRule& decide) {
  if (k < 1) throw std::invalid_argument("class_accuracies: k must be positive");
  std::vector<double> correct(k, 0.0), total(k, 0.0);
  for (const LabeledSample& s : samples) {
    if (s.y < 0 || s.y >= k)
      throw std::invalid_argument("class_accuracies: label out of range");
    total[s.y] += 1.0;
    if (decide(s.x) == s.y) correct[s.y] += 1.0;
  }
  ClassAccuracies result;
  result.stat.acc.resize(k);
  for (int i = 0; i < k; ++i) {
    if (total[i] == 0.0) {
      result.stat.acc[i] = 0.5;  // uninformative midpoint
      result.imputed_classes.push_back(i);
    } else {
      result.stat.acc[i] = correct[i] / total[i];
    }
  }
  return result;
}

double rule_accuracy(const std::vector<LabeledSample>& samples, const DecisionRule& decide) {
  if (samples.empty()) throw std::invalid_argument("rule_accuracy: empty sample");
  size_t correct = 0;
  for (const LabeledSample& s : samples)
    if (decide(s.x) == s.y) ++correct;
  return static_cast<double>(correct) / samples.size();
}

Backbone train_linear(const std::vector<LabeledSample>& samples, int k, int epochs,
                      double lr, uint64_t seed, int batch_size) {
  if (samples.empty()) throw std::invalid_argument("train_linear: empty sample");
  if (k < 1) throw std::invalid_argument("train_linear: k must be positive");
  if (epochs < 0) throw std::invalid_argument("train_linear: negative epochs");
  if (batch_size < 1) throw std::invalid_argument("train_linear: batch_size must be positive");

  const int d = static_cast<int>(samples[0].x.size());
  Backbone model;
  model.kind = BackboneKind::linear_softmax;
  model.id = "linear";
  model.dim = d;
  model.weights.assign(static_cast<size_t>(k) * d, 0.0);
  model.bias.assign(k, 0.0);
  model.lambda_pre = empirical_marginals(samples, k);

  std::mt19937_64 rng(seed);
  std::vector<int> order(samples.size());
  std::iota(order.begin(), order.end(), 0);
  for (int e = 0; e < epochs; ++e)
    sgd_epoch(model, samples, order, lr, /*update_weights=*/true, batch_size, rng);
  return model;
}

Backbone finetune_linear(const Backbone& model, const std::vector<LabeledSample>& samples,
                         int epochs, double lr, FinetuneScope scope, uint64_t seed,
                         int batch_size) {
  if (model.kind != BackboneKind::linear_softmax)
    throw std::logic_error("finetune_linear: backbone has no trainable parameters");
  if (epochs < 0) throw std::invalid_argument("finetune_linear: negative epochs");
  Backbone tuned = model;
  if (epochs == 0 || samples.empty()) return tuned;

  std::mt19937_64 rng(seed);
  std::vector<int> order(samples.size());
  std::iota(order.begin(), order.end(), 0);
  const bool update_weights = scope == FinetuneScope::all;
  for (int e = 0; e < epochs; ++e)
    sgd_epoch(tuned, samples, order, lr, update_weights, batch_size, rng);
  return tuned;
}

double linear_cross_entropy(const Backbone& model, const std::vector<LabeledSample>& samples) {
  if (model.kind != BackboneKind::linear_softmax)
    throw std::logic_error("linear_cross_entropy: linear backbone required");
  if (samples.empty()) throw std::invalid_argument("linear_cross_entropy: empty sample");
  double loss = 0.0;
  for (const LabeledSample& s : samples) {
    const std::vector<double> z = linear_logits(model, s.x);
    loss += log_sum_exp(z) - z[s.y];
  }
  return loss / samples.size();
}

void linear_ce_gradient(const Backbone& model, const std::vector<LabeledSample>& samples,
                        std::vector<double>& grad_w, std::vector<double>& grad_b) {
  if (model.kind != BackboneKind::linear_softmax)
    throw std::logic_error("linear_ce_gradient: linear backbone required");
  if (samples.empty()) throw std::invalid_argument("linear_ce_gradient: empty sample");
  const int k = model.num_classes();
  const int d = model.dim;
  grad_w.assign(static_cast<size_t>(k) * d, 0.0);
  grad_b.assign(k, 0.0);
  for (const LabeledSample& s : samples) {
    const std::vector<double> p = softmax(linear_logits(model, s.x));
    for (int i = 0; i < k; ++i) {
      const double delta = p[i] - (i == s.y ? 1.0 : 0.0);
      grad_b[i] += delta;
      double* gw = grad_w.data() + static_cast<size_t>(i) * d;
      for (int c = 0; c < d; ++c) gw[c] += delta * s.x[c];
    }
  }
  const double inv_n = 1.0 / samples.size();
  for (double& g : grad_w) g *= inv_n;
  for (double& g : grad_b) g *= inv_n;
}

void to_json(nlohmann::json& j, const Backbone& model) {
  j = nlohmann::json{{"kind", model.kind == BackboneKind::bayes_oracle ? "bayes_oracle"
                                                                       : "linear_softmax"},
                     {"id", model.id},
                     {"lambda_pre", model.lambda_pre}};
  if (model.kind == BackboneKind::bayes_oracle) {
    j["parameters"] = {{"spec", model.oracle_spec}, {"epsilon", model.epsilon}};
  } else {
    j["parameters"] = {{"dim", model.dim}, {"weights", model.weights}, {"bias", model.bias}};
  }
}

void from_json(const nlohmann::json& j, Backbone& model) {
  const std::string kind = j.at("kind").get<std::string>();
  j.at("id").get_to(model.id);
  j.at("lambda_pre").get_to(model.lambda_pre);
  const nlohmann::json& params = j.at("parameters");
  if (kind == "bayes_oracle") {
    model.kind = BackboneKind::bayes_oracle;
    params.at("spec").get_to(model.oracle_spec);
    params.at("epsilon").get_to(model.epsilon);
    model.dim = model.oracle_spec.feature_dim;
  } else if (kind == "linear_softmax") {
    model.kind = BackboneKind::linear_softmax;
    params.at("dim").get_to(model.dim);
    params.at("weights").get_to(model.weights);
    params.at("bias").get_to(model.bias);
    check_linear_shapes(model);
  } else {
    throw std::invalid_argument("Backbone: unknown kind '" + kind + "'");
  }
}

}  // namespace performa
