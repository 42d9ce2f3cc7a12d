#pragma once

// Desk-scale multi-domain benchmark: k Gaussian classes around unit-sphere
// means, a strong view in R^{d_s} and a weaker view in R^{d_w} obtained by a
// random projection plus extra noise.
//
//   class means   : rows of N(0, I) normalised, stream "data.means"
//   projection P  : d_w x d_s entries N(0, 1/d_w), stream "data.projection"
//                   (identity when identity_projection is set, needs d_w == d_s)
//   labels        : i mod k, shuffled, stream "data.<domain>.<split>.labels"
//   strong sample : normalize(mean_y + sigma_s * sigma_scale * g)
//   weak sample   : normalize(P strong + sigma_w * g'),
//                   noise stream "data.<domain>.<split>.noise"
//
// Means and P depend only on the spec seed, so domains share classes and the
// weak encoder and differ in noise scale only.

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "w2s/io.hpp"
#include "w2s/types.hpp"

namespace w2s {

struct DomainSpec {
  std::string name;
  double sigma_scale = 1.0;

  friend bool operator==(const DomainSpec&, const DomainSpec&) = default;
};

struct SyntheticSpec {
  std::size_t k = 20;
  std::size_t d_s = 64;
  std::size_t d_w = 16;
  std::size_t n_train = 2000;
  std::size_t n_test = 1000;
  double sigma_s = 0.35;
  double sigma_w = 0.5;
  std::uint64_t seed = 0;
  std::vector<DomainSpec> domains;
  bool identity_projection = false;

  /// Throws ConfigError; a d_w > d_s message names both fields.
  void validate() const;

  /// k=20, d_s=64, d_w=16, 2000/1000 samples, sigma 0.35/0.5, three domains
  /// with sigma_scale 1.0, 1.5, 2.0.
  static SyntheticSpec desk_default();
  /// Zero noise, d_w = d_s, identity projection: every sample is its class mean.
  static SyntheticSpec noiseless();

  friend bool operator==(const SyntheticSpec&, const SyntheticSpec&) = default;
};

/// Parses a spec document. Unknown keys, missing required keys and wrong types
/// are ConfigErrors. `identity_projection` is optional (default false).
SyntheticSpec spec_from_json(const std::string& text);
std::string spec_to_json(const SyntheticSpec& spec);

struct DomainData {
  std::string name;
  EmbeddingMatrix strong_train;
  EmbeddingMatrix strong_test;
  EmbeddingMatrix weak_train;
  EmbeddingMatrix weak_test;
  LabelSet train_labels;
  LabelSet test_labels;
};

DomainData generate_domain(const SyntheticSpec& spec, const DomainSpec& domain);

}  // namespace w2s
