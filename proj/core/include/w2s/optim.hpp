#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <utility>

#include "w2s/matrix.hpp"

namespace w2s {

/// Moment estimates of Adam for one parameter tensor.
struct AdamState {
  Matrix first_moment;
  Matrix second_moment;
  std::uint64_t step_count = 0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;

  AdamState() = default;
  AdamState(std::size_t rows, std::size_t cols)
      : first_moment(rows, cols), second_moment(rows, cols) {}
};

/// One bias-corrected Adam update in place. No weight decay. lr = 0 leaves
/// `params` untouched (the moments still advance).
void adam_step(Matrix& params, const Matrix& grad, AdamState& state, double lr);

enum class LrDecay { kLinearToZero, kConstant };

/// Linear warm-up from 0 to base_lr over warmup_ratio * total_steps, then
/// linear decay to 0 at total_steps (or hold base_lr).
struct LrSchedule {
  double base_lr = 1e-2;
  std::uint64_t total_steps = 1;
  double warmup_ratio = 0.1;
  LrDecay decay = LrDecay::kLinearToZero;

  void validate() const;
};

/// Throws ConfigError when step > total_steps.
double lr_at(const LrSchedule& schedule, std::uint64_t step);

/// Keeps the parameters with the highest metric seen so far. Only a strict
/// improvement replaces the snapshot, so ties keep the earlier one.
template <typename Params>
class BestModelTracker {
 public:
  /// Returns true when `params` became the new best.
  bool update(double metric, const Params& params) {
    if (best_metric_ && !(metric > *best_metric_)) return false;
    best_metric_ = metric;
    snapshot_ = params;
    return true;
  }

  bool has_snapshot() const noexcept { return snapshot_.has_value(); }
  const std::optional<double>& best_metric() const noexcept { return best_metric_; }
  const std::optional<Params>& snapshot() const noexcept { return snapshot_; }

  /// The best snapshot, or `fallback` when nothing was ever recorded.
  Params best_or(Params fallback) const {
    return snapshot_ ? *snapshot_ : std::move(fallback);
  }

 private:
  std::optional<double> best_metric_;
  std::optional<Params> snapshot_;
};

}  // namespace w2s
