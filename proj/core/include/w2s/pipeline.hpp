#pragma once

// End-to-end weak-to-strong protocol for one (domain, seed):
//   1. split D_test into D_hold (80%) and D'_test (20%)
//   2. train the weak probe on D_train with ground truth; score it on D_test
//   3. replace D_hold labels by weak logits
//   4. split D_hold 80/20 into strong_train / strong_val; train each method on
//      strong_train, select the best epoch on strong_val (weak argmax labels)
//   5. ceiling: prototype head trained with ground truth on D_hold, best
//      epoch selected on strong_val with ground truth
// Accuracies are reported on D_test and on D'_test. D_test contains D_hold,
// which the strong heads trained on, so the D'_test figure is the clean one.

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "w2s/error.hpp"
#include "w2s/models.hpp"
#include "w2s/synthetic.hpp"

namespace w2s {

/// A pipeline stage failed; what() carries domain, seed and stage.
class StageError : public Error {
 public:
  StageError(std::string domain, std::uint64_t seed, std::string stage,
             const std::string& cause);

  const std::string& domain() const noexcept { return domain_; }
  std::uint64_t seed() const noexcept { return seed_; }
  const std::string& stage() const noexcept { return stage_; }

 private:
  std::string domain_;
  std::uint64_t seed_;
  std::string stage_;
};

struct PipelineConfig {
  TrainConfig weak = TrainConfig::weak_defaults();
  /// Shared by every strong run; `loss` is overridden per method (ceiling: ce).
  TrainConfig strong = TrainConfig::strong_defaults();
  /// Prototype rows start as the mean of this many D_train anchors per class.
  std::size_t anchors_per_class = 5;
};

struct SplitAccuracy {
  double dtest = 0.0;
  double dtest_prime = 0.0;

  friend bool operator==(const SplitAccuracy&, const SplitAccuracy&) = default;
};

/// One evaluation point: accuracy on the training targets and on D'_test.
struct CurvePoint {
  std::uint64_t step = 0;
  double train_acc = 0.0;
  double test_acc = 0.0;

  friend bool operator==(const CurvePoint&, const CurvePoint&) = default;
};

struct MethodResult {
  Method method = Method::kCpl;
  SplitAccuracy accuracy;
  std::vector<CurvePoint> curve;
};

struct PipelineRun {
  std::string domain;
  std::uint64_t seed = 0;
  SplitAccuracy weak;
  SplitAccuracy ceiling;
  std::vector<CurvePoint> ceiling_curve;
  std::vector<MethodResult> methods;
};

/// cpl trains the prototype head; every baseline trains a linear probe. Both
/// start from the same anchor means (linear: W = anchors, b = 0).
bool uses_prototype_head(Method method) noexcept;

PipelineRun run_pipeline(const DomainData& data, std::span<const Method> methods,
                         const PipelineConfig& cfg, std::uint64_t seed);

PipelineRun run_pipeline(const SyntheticSpec& spec, const DomainSpec& domain,
                         std::span<const Method> methods, const PipelineConfig& cfg,
                         std::uint64_t seed);

/// Every (domain, seed) pair, domain-major. `jobs` > 1 runs pairs on that many
/// threads; results are identical to the sequential order.
std::vector<PipelineRun> run_benchmark(const SyntheticSpec& spec,
                                       std::span<const Method> methods,
                                       std::span<const std::uint64_t> seeds,
                                       const PipelineConfig& cfg, std::size_t jobs = 1);

}  // namespace w2s
