#include "performa/world.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>
#include <string>

#include "performa/util.hpp"

namespace performa {

namespace {

constexpr double kLogDensityFloor = -700.0;  // exp() underflow guard

void check_finite(std::span<const double> x, const char* what) {
  for (double v : x)
    if (!std::isfinite(v)) throw std::invalid_argument(std::string(what) + ": non-finite input");
}

// Domain indices actually in play plus their renormalized log weights.
struct DomainView {
  std::vector<int> indices;
  std::vector<double> log_weights;
  std::vector<double> weights;
};

DomainView resolve_domains(const WorldSpec& spec, const std::vector<int>* filter) {
  DomainView view;
  if (filter == nullptr) {
    view.indices.resize(spec.num_domains);
    for (int j = 0; j < spec.num_domains; ++j) view.indices[j] = j;
  } else {
    if (filter->empty())
      throw std::invalid_argument("domain_filter: must name at least one domain");
    view.indices = *filter;
    std::sort(view.indices.begin(), view.indices.end());
    view.indices.erase(std::unique(view.indices.begin(), view.indices.end()),
                       view.indices.end());
    for (int j : view.indices)
      if (j < 0 || j >= spec.num_domains)
        throw std::invalid_argument("domain_filter: domain index out of range");
  }
  double total = 0.0;
  for (int j : view.indices) total += spec.domain_weights[j];
  if (total <= 0.0)
    throw std::invalid_argument("domain_filter: selected domains carry zero weight");
  view.weights.reserve(view.indices.size());
  view.log_weights.reserve(view.indices.size());
  for (int j : view.indices) {
    view.weights.push_back(spec.domain_weights[j] / total);
    view.log_weights.push_back(std::log(spec.domain_weights[j] / total));
  }
  return view;
}

int draw_from_cdf(std::span<const double> probs, double u) {
  double acc = 0.0;
  for (int i = 0; i < static_cast<int>(probs.size()); ++i) {
    acc += probs[i];
    if (u < acc) return i;
  }
  return static_cast<int>(probs.size()) - 1;
}

}  // namespace

bool is_valid_marginals(const LabelMarginals& m, double tol) {
  if (m.probs.empty()) return false;
  double total = 0.0;
  for (double p : m.probs) {
    if (!(p >= 0.0) || !std::isfinite(p)) return false;
    total += p;
  }
  return std::abs(total - 1.0) <= tol;
}

void validate_marginals(const LabelMarginals& m, const char* what) {
  if (!is_valid_marginals(m))
    throw std::invalid_argument(std::string(what) +
                                ": not a probability vector (negative entry or sum != 1)");
}

LabelMarginals uniform_marginals(int k) {
  if (k < 1) throw std::invalid_argument("uniform_marginals: k must be positive");
  return {std::vector<double>(k, 1.0 / k)};
}

LabelMarginals one_hot_marginals(int k, int cls) {
  if (k < 1 || cls < 0 || cls >= k)
    throw std::invalid_argument("one_hot_marginals: class index out of range");
  LabelMarginals m{std::vector<double>(k, 0.0)};
  m.probs[cls] = 1.0;
  return m;
}

std::span<const double> WorldSpec::mean_of(int cls, int domain) const {
  const size_t row = static_cast<size_t>(cls) * num_domains + domain;
  return {means.data() + row * feature_dim, static_cast<size_t>(feature_dim)};
}

WorldSpec new_world_spec(int num_classes, int num_domains, int feature_dim,
                         double overlap, double sigma, uint64_t seed) {
  if (num_classes < 2) throw std::invalid_argument("new_world_spec: need at least 2 classes");
  if (num_domains < 1) throw std::invalid_argument("new_world_spec: need at least 1 domain");
  if (feature_dim < 1) throw std::invalid_argument("new_world_spec: feature_dim must be positive");
  if (!(sigma > 0.0)) throw std::invalid_argument("new_world_spec: sigma must be positive");
  if (!(overlap > 0.0)) throw std::invalid_argument("new_world_spec: overlap must be positive");

  WorldSpec spec;
  spec.num_classes = num_classes;
  spec.num_domains = num_domains;
  spec.feature_dim = feature_dim;
  spec.sigma = sigma;
  spec.seed = seed;
  spec.means.resize(static_cast<size_t>(num_classes) * num_domains * feature_dim);
  spec.domain_weights.assign(num_domains, 1.0 / num_domains);

  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  std::normal_distribution<double> domain_jitter(0.0, 0.75 * sigma);
  const double half_width = 2.0 * sigma * overlap;

  std::vector<double> base(feature_dim);
  for (int i = 0; i < num_classes; ++i) {
    // Per-class radial factor keeps pairwise overlaps uneven.
    const double radial = 1.0 + 0.35 * unit(rng);
    for (int c = 0; c < feature_dim; ++c) base[c] = half_width * radial * unit(rng);
    for (int j = 0; j < num_domains; ++j) {
      double* m = spec.means.data() +
                  (static_cast<size_t>(i) * num_domains + j) * feature_dim;
      for (int c = 0; c < feature_dim; ++c)
        m[c] = base[c] + (j == 0 ? 0.0 : domain_jitter(rng));
    }
  }
  return spec;
}

LabelMarginals dirichlet_marginals(int k, double alpha, std::mt19937_64& rng) {
  if (k < 1) throw std::invalid_argument("dirichlet_marginals: k must be positive");
  if (!(alpha > 0.0)) throw std::invalid_argument("dirichlet_marginals: alpha must be positive");
  std::gamma_distribution<double> gamma(alpha, 1.0);
  LabelMarginals m{std::vector<double>(k)};
  double total = 0.0;
  for (int i = 0; i < k; ++i) {
    m.probs[i] = gamma(rng);
    total += m.probs[i];
  }
  for (double& p : m.probs) p /= total;
  return m;
}

LabelMarginals dirichlet_marginals(int k, double alpha, uint64_t seed) {
  std::mt19937_64 rng(seed);
  return dirichlet_marginals(k, alpha, rng);
}

std::vector<LabeledSample> sample_with_marginals(const WorldSpec& spec,
                                                 const LabelMarginals& marginals,
                                                 int n,
                                                 const std::vector<int>* domain_filter,
                                                 std::mt19937_64& rng) {
  validate_marginals(marginals, "sample_with_marginals");
  if (marginals.size() != spec.num_classes)
    throw std::invalid_argument("sample_with_marginals: marginals length != num_classes");
  if (n < 0) throw std::invalid_argument("sample_with_marginals: negative sample count");

  const DomainView domains = resolve_domains(spec, domain_filter);
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  std::normal_distribution<double> gauss(0.0, 1.0);

  std::vector<LabeledSample> out(n);
  for (int s = 0; s < n; ++s) {
    LabeledSample& sample = out[s];
    sample.y = draw_from_cdf(marginals.probs, u01(rng));
    sample.domain = domains.indices.size() == 1
                        ? domains.indices[0]
                        : domains.indices[draw_from_cdf(domains.weights, u01(rng))];
    const auto mean = spec.mean_of(sample.y, sample.domain);
    sample.x.resize(spec.feature_dim);
    for (int c = 0; c < spec.feature_dim; ++c)
      sample.x[c] = mean[c] + spec.sigma * gauss(rng);
  }
  return out;
}

std::vector<LabeledSample> sample_with_marginals(const WorldSpec& spec,
                                                 const LabelMarginals& marginals,
                                                 int n,
                                                 const std::vector<int>* domain_filter,
                                                 uint64_t seed) {
  std::mt19937_64 rng(seed);
  return sample_with_marginals(spec, marginals, n, domain_filter, rng);
}

std::vector<double> class_log_scores(const WorldSpec& spec, const LabelMarginals& prior,
                                     std::span<const double> x,
                                     const std::vector<int>* domain_filter) {
  validate_marginals(prior, "class_log_scores prior");
  if (prior.size() != spec.num_classes)
    throw std::invalid_argument("class_log_scores: prior length != num_classes");
  if (static_cast<int>(x.size()) != spec.feature_dim)
    throw std::invalid_argument("class_log_scores: x has dimension " +
                                std::to_string(x.size()) + ", expected " +
                                std::to_string(spec.feature_dim));
  check_finite(x, "class_log_scores");

  const DomainView domains = resolve_domains(spec, domain_filter);
  const double inv_two_var = 1.0 / (2.0 * spec.sigma * spec.sigma);
  const double log_norm =
      -0.5 * spec.feature_dim * std::log(2.0 * std::numbers::pi * spec.sigma * spec.sigma);

  std::vector<double> scores(spec.num_classes);
  std::vector<double> terms(domains.indices.size());
  for (int i = 0; i < spec.num_classes; ++i) {
    if (prior[i] <= 0.0) {
      scores[i] = -std::numeric_limits<double>::infinity();
      continue;
    }
    for (size_t dj = 0; dj < domains.indices.size(); ++dj) {
      const auto mean = spec.mean_of(i, domains.indices[dj]);
      double dist2 = 0.0;
      for (int c = 0; c < spec.feature_dim; ++c) {
        const double diff = x[c] - mean[c];
        dist2 += diff * diff;
      }
      const double log_density =
          std::max(log_norm - dist2 * inv_two_var, kLogDensityFloor);
      terms[dj] = domains.log_weights[dj] + log_density;
    }
    scores[i] = std::log(prior[i]) + log_sum_exp(terms);
  }
  return scores;
}

LabelMarginals bayes_posterior(const WorldSpec& spec, const LabelMarginals& prior,
                               std::span<const double> x,
                               const std::vector<int>* domain_filter) {
  return {softmax(class_log_scores(spec, prior, x, domain_filter))};
}

LabelMarginals empirical_marginals(const std::vector<LabeledSample>& samples, int k) {
  if (samples.empty()) throw std::invalid_argument("empirical_marginals: empty sample");
  if (k < 1) throw std::invalid_argument("empirical_marginals: k must be positive");
  LabelMarginals m{std::vector<double>(k, 0.0)};
  for (const LabeledSample& s : samples) {
    if (s.y < 0 || s.y >= k)
      throw std::invalid_argument("empirical_marginals: label out of range");
    m.probs[s.y] += 1.0;
  }
  for (double& p : m.probs) p /= samples.size();
  return m;
}

void to_json(nlohmann::json& j, const LabelMarginals& m) { j = m.probs; }

void from_json(const nlohmann::json& j, LabelMarginals& m) {
  m.probs = j.get<std::vector<double>>();
}

void to_json(nlohmann::json& j, const WorldSpec& spec) {
  j = nlohmann::json{{"k", spec.num_classes},
                     {"d_domains", spec.num_domains},
                     {"dim", spec.feature_dim},
                     {"sigma", spec.sigma},
                     {"means", spec.means},
                     {"domain_weights", spec.domain_weights},
                     {"seed", spec.seed}};
}

void from_json(const nlohmann::json& j, WorldSpec& spec) {
  j.at("k").get_to(spec.num_classes);
  j.at("d_domains").get_to(spec.num_domains);
  j.at("dim").get_to(spec.feature_dim);
  j.at("sigma").get_to(spec.sigma);
  j.at("means").get_to(spec.means);
  j.at("domain_weights").get_to(spec.domain_weights);
  j.at("seed").get_to(spec.seed);
  if (spec.means.size() != static_cast<size_t>(spec.num_classes) * spec.num_domains *
                               spec.feature_dim ||
      spec.domain_weights.size() != static_cast<size_t>(spec.num_domains))
    throw std::invalid_argument("WorldSpec: inconsistent array sizes in JSON");
}

}  // namespace performa
