#include "w2s/synthetic.hpp"

#include <cctype>
#include <cmath>
#include <set>

#include <json.hpp>

#include "w2s/error.hpp"
#include "w2s/rng.hpp"

namespace w2s {
namespace {

using Labels = std::vector<std::uint32_t>;

void normalize_in_place(std::span<double> v, const std::string& what) {
  const double n = norm(v);
  if (!(n > 0.0)) throw DomainError("cannot normalise zero vector in " + what);
  for (double& x : v) x /= n;
}

bool valid_name(const std::string& name) {
  if (name.empty()) return false;
  for (unsigned char c : name) {
    if (!(std::isalnum(c) || c == '_' || c == '-')) return false;
  }
  return true;
}

Matrix class_means(const SyntheticSpec& spec) {
  Philox rng(spec.seed, "data.means");
  Matrix means(spec.k, spec.d_s);
  for (std::size_t j = 0; j < spec.k; ++j) {
    for (double& v : means.row(j)) v = rng.normal();
    normalize_in_place(means.row(j), "class mean");
  }
  return means;
}

Matrix projection(const SyntheticSpec& spec) {
  Matrix p(spec.d_w, spec.d_s);
  if (spec.identity_projection) {
    for (std::size_t i = 0; i < spec.d_w; ++i) p(i, i) = 1.0;
    return p;
  }
  Philox rng(spec.seed, "data.projection");
  const double scale = 1.0 / std::sqrt(static_cast<double>(spec.d_w));
  for (double& v : p.values()) v = scale * rng.normal();
  return p;
}

struct Split {
  Matrix strong;
  Matrix weak;
  LabelSet labels;
};

Split generate_split(const SyntheticSpec& spec, const DomainSpec& domain, const Matrix& means,
                     const Matrix& proj, std::size_t n, const std::string& split) {
  const std::string prefix = "data." + domain.name + "." + split;
  Philox label_rng(spec.seed, prefix + ".labels");
  Philox noise(spec.seed, prefix + ".noise");

  Split out{Matrix(n, spec.d_s), Matrix(n, spec.d_w),
            LabelSet{Labels(n), LabelSet::default_names(spec.k)}};
  for (std::size_t i = 0; i < n; ++i) out.labels.labels[i] = static_cast<std::uint32_t>(i % spec.k);
  shuffle(std::span<std::uint32_t>(out.labels.labels), label_rng);

  // Noise vectors are N(0, I/d): sigma is the expected noise norm relative to
  // the unit-norm signal, independent of dimension.
  const double sigma =
      spec.sigma_s * domain.sigma_scale / std::sqrt(static_cast<double>(spec.d_s));
  const double sigma_w = spec.sigma_w / std::sqrt(static_cast<double>(spec.d_w));
  for (std::size_t i = 0; i < n; ++i) {
    const auto mean = means.row(out.labels.labels[i]);
    auto strong = out.strong.row(i);
    for (std::size_t m = 0; m < spec.d_s; ++m) strong[m] = mean[m] + sigma * noise.normal();
    normalize_in_place(strong, "strong sample");
    auto weak = out.weak.row(i);
    for (std::size_t m = 0; m < spec.d_w; ++m) {
      weak[m] = dot(proj.row(m), strong) + sigma_w * noise.normal();
    }
    normalize_in_place(weak, "weak sample");
  }
  return out;
}

}  // namespace

void SyntheticSpec::validate() const {
  if (k < 2) throw ConfigError("k must be >= 2, got " + std::to_string(k));
  if (d_s < 1 || d_w < 1) throw ConfigError("d_s and d_w must be >= 1");
  if (d_w > d_s) {
    throw ConfigError("d_w (" + std::to_string(d_w) + ") must not exceed d_s (" +
                      std::to_string(d_s) + ")");
  }
  if (identity_projection && d_w != d_s) {
    throw ConfigError("identity_projection requires d_w == d_s");
  }
  if (n_train < k) throw ConfigError("n_train must be >= k so every class appears");
  if (n_test < 5) throw ConfigError("n_test must be >= 5 for the 80/20 split");
  if (!(sigma_s >= 0.0) || !std::isfinite(sigma_s)) throw ConfigError("sigma_s must be >= 0");
  if (!(sigma_w >= 0.0) || !std::isfinite(sigma_w)) throw ConfigError("sigma_w must be >= 0");
  if (domains.empty()) throw ConfigError("spec needs at least one domain");
  std::set<std::string> seen;
  for (const auto& d : domains) {
    if (!valid_name(d.name)) {
      throw ConfigError("domain name '" + d.name + "' must be non-empty [A-Za-z0-9_-]");
    }
    if (!seen.insert(d.name).second) throw ConfigError("duplicate domain '" + d.name + "'");
    if (!(d.sigma_scale > 0.0) || !std::isfinite(d.sigma_scale)) {
      throw ConfigError("domain '" + d.name + "': sigma_scale must be > 0");
    }
  }
}

SyntheticSpec SyntheticSpec::desk_default() {
  SyntheticSpec s;
  s.domains = {{"easy", 1.0}, {"medium", 1.5}, {"hard", 2.0}};
  return s;
}

SyntheticSpec SyntheticSpec::noiseless() {
  SyntheticSpec s;
  s.k = 10;
  s.d_s = 16;
  s.d_w = 16;
  s.n_train = 500;
  s.n_test = 500;
  s.sigma_s = 0.0;
  s.sigma_w = 0.0;
  s.identity_projection = true;
  s.domains = {{"clean", 1.0}};
  return s;
}

SyntheticSpec spec_from_json(const std::string& text) {
  static const std::set<std::string> kRequired = {"k",       "d_s",     "d_w",  "n_train",
                                                  "n_test",  "sigma_s", "sigma_w", "seed",
                                                  "domains"};
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("spec is not valid JSON: ") + e.what());
  }
  if (!j.is_object()) throw ConfigError("spec must be a JSON object");
  for (const auto& [key, _] : j.items()) {
    if (!kRequired.count(key) && key != "identity_projection") {
      throw ConfigError("unknown spec key '" + key + "'");
    }
  }
  for (const auto& key : kRequired) {
    if (!j.contains(key)) throw ConfigError("spec is missing '" + key + "'");
  }
  SyntheticSpec s;
  try {
    s.k = j.at("k").get<std::size_t>();
    s.d_s = j.at("d_s").get<std::size_t>();
    s.d_w = j.at("d_w").get<std::size_t>();
    s.n_train = j.at("n_train").get<std::size_t>();
    s.n_test = j.at("n_test").get<std::size_t>();
    s.sigma_s = j.at("sigma_s").get<double>();
    s.sigma_w = j.at("sigma_w").get<double>();
    s.seed = j.at("seed").get<std::uint64_t>();
    if (j.contains("identity_projection")) {
      s.identity_projection = j.at("identity_projection").get<bool>();
    }
    for (const auto& d : j.at("domains")) {
      for (const auto& [key, _] : d.items()) {
        if (key != "name" && key != "sigma_scale") {
          throw ConfigError("unknown domain key '" + key + "'");
        }
      }
      s.domains.push_back({d.at("name").get<std::string>(), d.at("sigma_scale").get<double>()});
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("malformed spec: ") + e.what());
  }
  s.validate();
  return s;
}

std::string spec_to_json(const SyntheticSpec& s) {
  nlohmann::ordered_json j;
  j["k"] = s.k;
  j["d_s"] = s.d_s;
  j["d_w"] = s.d_w;
  j["n_train"] = s.n_train;
  j["n_test"] = s.n_test;
  j["sigma_s"] = s.sigma_s;
  j["sigma_w"] = s.sigma_w;
  j["seed"] = s.seed;
  j["identity_projection"] = s.identity_projection;
  j["domains"] = nlohmann::ordered_json::array();
  for (const auto& d : s.domains) {
    j["domains"].push_back({{"name", d.name}, {"sigma_scale", d.sigma_scale}});
  }
  return j.dump(2) + "\n";
}

DomainData generate_domain(const SyntheticSpec& spec, const DomainSpec& domain) {
  spec.validate();
  const Matrix means = class_means(spec);
  const Matrix proj = projection(spec);
  auto train = generate_split(spec, domain, means, proj, spec.n_train, "train");
  auto test = generate_split(spec, domain, means, proj, spec.n_test, "test");
  return DomainData{domain.name,
                    EmbeddingMatrix(std::move(train.strong)),
                    EmbeddingMatrix(std::move(test.strong)),
                    EmbeddingMatrix(std::move(train.weak)),
                    EmbeddingMatrix(std::move(test.weak)),
                    std::move(train.labels),
                    std::move(test.labels)};
}

}  // namespace w2s
