#pragma once

#include <cstdint>
#include <optional>
#include <random>
#include <span>
#include <vector>

#include "json.hpp"

namespace performa {

/// Probability vector over classes. Entries are >= 0 and sum to 1
/// within 1e-9 whenever the object passed validate_marginals.
struct LabelMarginals {
  std::vector<double> probs;

  int size() const { return static_cast<int>(probs.size()); }
  double operator[](int i) const { return probs[i]; }
};

bool is_valid_marginals(const LabelMarginals& m, double tol = 1e-9);
void validate_marginals(const LabelMarginals& m, const char* what);
LabelMarginals uniform_marginals(int k);
LabelMarginals one_hot_marginals(int k, int cls);

struct LabeledSample {
  std::vector<double> x;
  int y = 0;
  int domain = 0;
};

/// Synthetic ground-truth environment: one isotropic Gaussian component
/// per (class, domain) pair, all sharing a single standard deviation.
/// Immutable after construction; safe to share across threads.
struct WorldSpec {
  int num_classes = 0;
  int num_domains = 1;
  int feature_dim = 0;
  double sigma = 1.0;
  std::vector<double> means;  // (K*D) rows of length feature_dim; row = class*D + domain
  std::vector<double> domain_weights;
  uint64_t seed = 0;

  std::span<const double> mean_of(int cls, int domain) const;
};

/// Builds a world with heterogeneous pairwise class overlaps. Means are
/// drawn uniformly from a hypercube whose half-width scales with
/// `overlap` (a mean-spacing scale), with a per-class radial jitter so
/// classes end up with unequal error rates. Deterministic in `seed`.
WorldSpec new_world_spec(int num_classes, int num_domains, int feature_dim,
                         double overlap, double sigma, uint64_t seed);

/// One draw from the symmetric Dirichlet(alpha) over the simplex.
LabelMarginals dirichlet_marginals(int k, double alpha, uint64_t seed);
LabelMarginals dirichlet_marginals(int k, double alpha, std::mt19937_64& rng);

/// Labels i.i.d. from `marginals`; the domain is drawn from the world's
/// domain weights renormalized over `domain_filter` when one is given.
std::vector<LabeledSample> sample_with_marginals(
    const WorldSpec& spec, const LabelMarginals& marginals, int n,
    const std::vector<int>* domain_filter, uint64_t seed);
std::vector<LabeledSample> sample_with_marginals(
    const WorldSpec& spec, const LabelMarginals& marginals, int n,
    const std::vector<int>* domain_filter, std::mt19937_64& rng);

/// Unnormalized log posterior scores: log(prior_i) plus the log mixture
/// density over the (filtered, renormalized) domains. Classes with zero
/// prior get -inf. bayes_posterior is the softmax of these scores.
std::vector<double> class_log_scores(const WorldSpec& spec,
                                     const LabelMarginals& prior,
                                     std::span<const double> x,
                                     const std::vector<int>* domain_filter = nullptr);

LabelMarginals bayes_posterior(const WorldSpec& spec, const LabelMarginals& prior,
                               std::span<const double> x,
                               const std::vector<int>* domain_filter = nullptr);

/// Empirical class frequencies of a sample (counts / n).
LabelMarginals empirical_marginals(const std::vector<LabeledSample>& samples, int k);

void to_json(nlohmann::json& j, const LabelMarginals& m);
void from_json(const nlohmann::json& j, LabelMarginals& m);
void to_json(nlohmann::json& j, const WorldSpec& spec);
void from_json(const nlohmann::json& j, WorldSpec& spec);

}  // namespace performa
