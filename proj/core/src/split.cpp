#include "w2s/split.hpp"

#include <json.hpp>

#include "w2s/error.hpp"
#include "w2s/rng.hpp"

namespace w2s {

std::size_t eighty_percent(std::size_t n) noexcept { return (8 * n + 5) / 10; }

SplitPlan split_test_set(std::size_t n_test, std::uint64_t seed) {
  if (n_test < 5) {
    throw ConfigError("test pool of " + std::to_string(n_test) +
                      " samples is too small to split (need >= 5)");
  }
  Philox rng(seed, "split.test");
  auto order = permutation(n_test, rng);
  const std::size_t n_hold = eighty_percent(n_test);

  SplitPlan plan;
  plan.seed = seed;
  plan.hold.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_hold));
  plan.test_prime.assign(order.begin() + static_cast<std::ptrdiff_t>(n_hold), order.end());
  return plan;
}

SplitPlan split_holdout(SplitPlan plan, std::uint64_t seed) {
  if (plan.hold.empty()) {
    throw StateError("split_holdout called before split_test_set populated hold indices");
  }
  Philox rng(seed, "split.holdout");
  auto order = plan.hold;
  shuffle(std::span<std::size_t>(order), rng);
  const std::size_t n_train = eighty_percent(order.size());
  plan.strong_train.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_train));
  plan.strong_val.assign(order.begin() + static_cast<std::ptrdiff_t>(n_train), order.end());
  return plan;
}

std::string split_plan_to_json(const SplitPlan& plan) {
  nlohmann::ordered_json j;
  j["seed"] = plan.seed;
  j["hold"] = plan.hold;
  j["test_prime"] = plan.test_prime;
  j["strong_train"] = plan.strong_train;
  j["strong_val"] = plan.strong_val;
  return j.dump(2) + "\n";
}

SplitPlan split_plan_from_json(const std::string& text) {
  try {
    const auto j = nlohmann::json::parse(text);
    SplitPlan plan;
    plan.seed = j.at("seed").get<std::uint64_t>();
    plan.hold = j.at("hold").get<std::vector<std::size_t>>();
    plan.test_prime = j.at("test_prime").get<std::vector<std::size_t>>();
    plan.strong_train = j.at("strong_train").get<std::vector<std::size_t>>();
    plan.strong_val = j.at("strong_val").get<std::vector<std::size_t>>();
    return plan;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("malformed split plan: ") + e.what());
  }
}

}  // namespace w2s
