#include "performa/adapter.hpp"

#include <cmath>
#include <random>
#include <string>

#include "performa/util.hpp"

namespace performa {

namespace {

constexpr double kBeta1 = 0.9;
constexpr double kBeta2 = 0.999;
constexpr double kAdamEps = 1e-8;

struct ForwardCache {
  // activations[0] is the input; activations.back() is the softmax output
  std::vector<std::vector<double>> activations;
  std::vector<std::vector<double>> pre;  // pre-activation of each layer
};

void affine(const std::vector<double>& w, const std::vector<double>& b,
            const std::vector<double>& in, std::vector<double>& out) {
  const size_t rows = b.size();
  const size_t cols = in.size();
  out.resize(rows);
  for (size_t r = 0; r < rows; ++r) {
    const double* row = w.data() + r * cols;
    double acc = b[r];
    for (size_t c = 0; c < cols; ++c) acc += row[c] * in[c];
    out[r] = acc;
  }
}

ForwardCache forward_cached(const AdapterNet& net, const std::vector<double>& input) {
  ForwardCache cache;
  const size_t layers = net.weights.size();
  cache.activations.resize(layers + 1);
  cache.pre.resize(layers);
  cache.activations[0] = input;
  for (size_t l = 0; l < layers; ++l) {
    affine(net.weights[l], net.biases[l], cache.activations[l], cache.pre[l]);
    if (l + 1 < layers) {
      cache.activations[l + 1] = cache.pre[l];
      for (double& v : cache.activations[l + 1]) v = std::max(v, 0.0);
    } else {
      cache.activations[l + 1] = softmax(cache.pre[l]);
    }
  }
  return cache;
}

struct Gradients {
  std::vector<std::vector<double>> gw, gb;
};

// Exact backprop of weight * KL(target || softmax(z)) through the net.
Gradients backward(const AdapterNet& net, const ForwardCache& cache,
                   const LabelMarginals& target, double weight) {
  const size_t layers = net.weights.size();
  Gradients grads;
  grads.gw.resize(layers);
  grads.gb.resize(layers);

  const std::vector<double>& out = cache.activations[layers];
  double target_mass = 0.0;
  for (double t : target.probs) target_mass += t;

  // d(loss)/d(logit_j) = weight * (p_j * sum(target) - target_j)
  std::vector<double> delta(out.size());
  for (size_t j = 0; j < out.size(); ++j)
    delta[j] = weight * (out[j] * target_mass - target.probs[j]);

  for (size_t l = layers; l-- > 0;) {
    const std::vector<double>& in = cache.activations[l];
    grads.gb[l] = delta;
    grads.gw[l].resize(net.weights[l].size());
    for (size_t r = 0; r < delta.size(); ++r) {
      double* gw = grads.gw[l].data() + r * in.size();
      for (size_t c = 0; c < in.size(); ++c) gw[c] = delta[r] * in[c];
    }
    if (l == 0) break;
    std::vector<double> prev(in.size(), 0.0);
    for (size_t r = 0; r < delta.size(); ++r) {
      const double* row = net.weights[l].data() + r * in.size();
      for (size_t c = 0; c < in.size(); ++c) prev[c] += row[c] * delta[r];
    }
    // rectifier mask of the previous layer
    for (size_t c = 0; c < prev.size(); ++c)
      if (cache.pre[l - 1][c] <= 0.0) prev[c] = 0.0;
    delta = std::move(prev);
  }
  return grads;
}

void adam_update(std::vector<double>& params, std::vector<double>& m1,
                 std::vector<double>& m2, const std::vector<double>& grad, double lr,
                 double corr1, double corr2) {
  for (size_t i = 0; i < params.size(); ++i) {
    m1[i] = kBeta1 * m1[i] + (1.0 - kBeta1) * grad[i];
    m2[i] = kBeta2 * m2[i] + (1.0 - kBeta2) * grad[i] * grad[i];
    params[i] -= lr * (m1[i] / corr1) / (std::sqrt(m2[i] / corr2) + kAdamEps);
  }
}

void adam_step(AdapterNet& net, const Gradients& grads, double lr) {
  ++net.step;
  const double corr1 = 1.0 - std::pow(kBeta1, static_cast<double>(net.step));
  const double corr2 = 1.0 - std::pow(kBeta2, static_cast<double>(net.step));
  for (size_t l = 0; l < net.weights.size(); ++l) {
    adam_update(net.weights[l], net.moment1_w[l], net.moment2_w[l], grads.gw[l], lr, corr1,
                corr2);
    adam_update(net.biases[l], net.moment1_b[l], net.moment2_b[l], grads.gb[l], lr, corr1,
                corr2);
  }
}

void check_stat(const AdapterNet& net, const SufficientStatistic& stat) {
  if (stat.size() != net.num_classes())
    throw std::invalid_argument("adapter: statistic length " + std::to_string(stat.size()) +
                                " != " + std::to_string(net.num_classes()));
}

}  // namespace

AdapterNet init_adapter(int k, int h1, int h2, uint64_t seed) {
  if (k < 2) throw std::invalid_argument("init_adapter: need at least 2 classes");
  if (h1 < 1 || h2 < 1) throw std::invalid_argument("init_adapter: hidden widths must be positive");

  AdapterNet net;
  net.layer_sizes = {k, h1, h2, k};
  std::mt19937_64 rng(seed);
  for (size_t l = 0; l + 1 < net.layer_sizes.size(); ++l) {
    const int fan_in = net.layer_sizes[l];
    const int fan_out = net.layer_sizes[l + 1];
    const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
    std::uniform_real_distribution<double> dist(-bound, bound);
    std::vector<double> w(static_cast<size_t>(fan_out) * fan_in);
    for (double& v : w) v = dist(rng);
    net.weights.push_back(std::move(w));
    net.biases.emplace_back(fan_out, 0.0);
    net.moment1_w.emplace_back(static_cast<size_t>(fan_out) * fan_in, 0.0);
    net.moment2_w.emplace_back(static_cast<size_t>(fan_out) * fan_in, 0.0);
    net.moment1_b.emplace_back(fan_out, 0.0);
    net.moment2_b.emplace_back(fan_out, 0.0);
  }
  return net;
}

size_t parameter_count(const AdapterNet& net) {
  size_t count = 0;
  for (size_t l = 0; l < net.weights.size(); ++l)
    count += net.weights[l].size() + net.biases[l].size();
  return count;
}

LabelMarginals adapter_forward(const AdapterNet& net, const SufficientStatistic& stat) {
  check_stat(net, stat);
  const ForwardCache cache = forward_cached(net, stat.acc);
  return {cache.activations.back()};
}

double kl_loss(const LabelMarginals& predicted, const LabelMarginals& target) {
  if (predicted.size() != target.size())
    throw std::invalid_argument("kl_loss: length mismatch");
  double loss = 0.0;
  for (int i = 0; i < target.size(); ++i) {
    if (target[i] <= 0.0) continue;
    loss += target[i] * (std::log(target[i]) - std::log(predicted[i]));
  }
  return loss;
}

void MemoryBuffer::append(BufferEntry entry) {
  if (!entries.empty() && entry.round <= entries.back().round)
    throw std::invalid_argument("MemoryBuffer: rounds must be strictly increasing");
  entries.push_back(std::move(entry));
}

TrainPassResult train_pass(AdapterNet& net, const MemoryBuffer& buffer, double lr,
                           int current_round) {
  TrainPassResult result;
  if (buffer.empty()) return result;
  result.updated = true;
  double weight_total = 0.0;
  for (const BufferEntry& entry : buffer.entries) {
    check_stat(net, entry.stat);
    if (entry.round > current_round)
      throw std::invalid_argument("train_pass: buffer entry from the future");
    const double weight = std::pow(buffer.decay, current_round - entry.round);
    const ForwardCache cache = forward_cached(net, entry.stat.acc);
    result.weighted_loss +=
        weight * kl_loss({cache.activations.back()}, entry.marginals);
    weight_total += weight;
    const Gradients grads = backward(net, cache, entry.marginals, weight);
    adam_step(net, grads, lr);
  }
  result.weighted_loss /= weight_total;
  return result;
}

std::vector<double> flatten_parameters(const AdapterNet& net) {
  std::vector<double> flat;
  flat.reserve(parameter_count(net));
  for (size_t l = 0; l < net.weights.size(); ++l) {
    flat.insert(flat.end(), net.weights[l].begin(), net.weights[l].end());
    flat.insert(flat.end(), net.biases[l].begin(), net.biases[l].end());
  }
  return flat;
}

void set_flat_parameters(AdapterNet& net, const std::vector<double>& params) {
  if (params.size() != parameter_count(net))
    throw std::invalid_argument("set_flat_parameters: size mismatch");
  size_t pos = 0;
  for (size_t l = 0; l < net.weights.size(); ++l) {
    std::copy_n(params.begin() + pos, net.weights[l].size(), net.weights[l].begin());
    pos += net.weights[l].size();
    std::copy_n(params.begin() + pos, net.biases[l].size(), net.biases[l].begin());
    pos += net.biases[l].size();
  }
}

std::vector<double> loss_gradient(const AdapterNet& net, const SufficientStatistic& stat,
                                  const LabelMarginals& target, double weight) {
  check_stat(net, stat);
  const ForwardCache cache = forward_cached(net, stat.acc);
  const Gradients grads = backward(net, cache, target, weight);
  std::vector<double> flat;
  flat.reserve(parameter_count(net));
  for (size_t l = 0; l < grads.gw.size(); ++l) {
    flat.insert(flat.end(), grads.gw[l].begin(), grads.gw[l].end());
    flat.insert(flat.end(), grads.gb[l].begin(), grads.gb[l].end());
  }
  return flat;
}

ZeroPriorConflict::ZeroPriorConflict(int cls)
    : std::runtime_error("adjust_prediction: class " + std::to_string(cls) +
                         " has zero training prior but nonzero predicted marginal"),
      class_index(cls) {}

std::pair<std::vector<double>, int> adjust_prediction(
    const LabelMarginals& probs_pre, const LabelMarginals& lambda_pre,
    const LabelMarginals& predicted_marginals) {
  const int k = probs_pre.size();
  if (lambda_pre.size() != k || predicted_marginals.size() != k)
    throw std::invalid_argument("adjust_prediction: length mismatch");
  validate_marginals(probs_pre, "adjust_prediction probs_pre");
  validate_marginals(lambda_pre, "adjust_prediction lambda_pre");
  validate_marginals(predicted_marginals, "adjust_prediction predicted_marginals");

  std::vector<double> adjusted(k, 0.0);
  double total = 0.0;
  for (int i = 0; i < k; ++i) {
    if (lambda_pre[i] <= 0.0) {
      if (predicted_marginals[i] > 0.0) throw ZeroPriorConflict(i);
      continue;
    }
    adjusted[i] = probs_pre[i] * predicted_marginals[i] / lambda_pre[i];
    total += adjusted[i];
  }
  if (!(total > 0.0))
    throw std::domain_error("adjust_prediction: adjusted weights vanish everywhere");
  for (double& w : adjusted) w /= total;
  return {adjusted, argmax_lowest(adjusted)};
}

void to_json(nlohmann::json& j, const AdapterNet& net) {
  j = nlohmann::json{{"layer_sizes", net.layer_sizes},
                     {"weights", net.weights},
                     {"biases", net.biases},
                     {"optimizer_state",
                      {{"moment1_w", net.moment1_w},
                       {"moment2_w", net.moment2_w},
                       {"moment1_b", net.moment1_b},
                       {"moment2_b", net.moment2_b}}},
                     {"step", net.step}};
}

void from_json(const nlohmann::json& j, AdapterNet& net) {
  j.at("layer_sizes").get_to(net.layer_sizes);
  j.at("weights").get_to(net.weights);
  j.at("biases").get_to(net.biases);
  const nlohmann::json& opt = j.at("optimizer_state");
  opt.at("moment1_w").get_to(net.moment1_w);
  opt.at("moment2_w").get_to(net.moment2_w);
  opt.at("moment1_b").get_to(net.moment1_b);
  opt.at("moment2_b").get_to(net.moment2_b);
  j.at("step").get_to(net.step);
}

void to_json(nlohmann::json& j, const MemoryBuffer& buffer) {
  j = nlohmann::json{{"decay", buffer.decay}, {"entries", nlohmann::json::array()}};
  for (const BufferEntry& e : buffer.entries)
    j["entries"].push_back(
        {{"stat", e.stat.acc}, {"marginals", e.marginals}, {"round", e.round}});
}

void from_json(const nlohmann::json& j, MemoryBuffer& buffer) {
  j.at("decay").get_to(buffer.decay);
  buffer.entries.clear();
  for (const nlohmann::json& e : j.at("entries")) {
    BufferEntry entry;
    e.at("stat").get_to(entry.stat.acc);
    e.at("marginals").get_to(entry.marginals);
    e.at("round").get_to(entry.round);
    buffer.entries.push_back(std::move(entry));
  }
}

}  // namespace performa
