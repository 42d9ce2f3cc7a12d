#pragma once

// Test-pool partitioning for the weak-to-strong protocol.
//
//   split_test_set: shuffle 0..n-1 with Philox(seed, "split.test"), then
//     hold = first round(0.8 n), test_prime = the rest.
//   split_holdout: shuffle a copy of hold with Philox(seed, "split.holdout"),
//     then strong_train = first round(0.8 |hold|), strong_val = the rest.
//
// round() is round-half-up, computed exactly as floor((8 n + 5) / 10).

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

namespace w2s {

struct SplitPlan {
  std::uint64_t seed = 0;
  std::vector<std::size_t> hold;
  std::vector<std::size_t> test_prime;
  std::vector<std::size_t> strong_train;
  std::vector<std::size_t> strong_val;

  bool completed() const noexcept { return !strong_train.empty() || !strong_val.empty(); }

  friend bool operator==(const SplitPlan&, const SplitPlan&) = default;
};

/// round-half-up(0.8 * n).
std::size_t eighty_percent(std::size_t n) noexcept;

/// Throws ConfigError when n_test < 5.
SplitPlan split_test_set(std::size_t n_test, std::uint64_t seed);

/// Throws StateError when `plan` has no hold indices.
SplitPlan split_holdout(SplitPlan plan, std::uint64_t seed);

/// {"seed", "hold", "test_prime", "strong_train", "strong_val"}.
std::string split_plan_to_json(const SplitPlan& plan);
SplitPlan split_plan_from_json(const std::string& text);

}  // namespace w2s
