#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "w2s/io.hpp"
#include "w2s/losses.hpp"
#include "w2s/optim.hpp"
#include "w2s/types.hpp"

namespace w2s {

using Labels = std::vector<std::uint32_t>;

/// Training objective of a head.
///   kCpl       KL alignment of cosine-prototype logits to weak soft targets
///   kCe        cross-entropy on hard labels (ground truth or weak argmax)
///   kKd        KL distillation from weak soft targets (any head)
///   kAuxConf   (1 - a) ce(weak argmax) + a ce(own argmax), a ramped linearly
///   kAdaptConf confidence-gated mix of own-argmax ce and KL distillation
/// kAuxConf and kAdaptConf are reconstructions of the published baselines.
enum class Method { kCpl, kCe, kKd, kAuxConf, kAdaptConf };

std::string_view to_string(Method method) noexcept;
/// Accepts cpl, ce, kd, auxconf, adaptconf (case-insensitive).
Method parse_method(std::string_view text);

/// Alpha of the AuxConf loss: ramps 0 -> max_alpha over the first
/// ramp_fraction of training steps, then holds.
struct AuxConfSchedule {
  double max_alpha = 0.75;
  double ramp_fraction = 0.2;

  double alpha_at(std::uint64_t step, std::uint64_t total_steps) const noexcept;
};

struct TrainConfig {
  int epochs = 10;
  std::size_t batch_size = 512;
  double base_lr = 1e-2;
  Temperature tau{Temperature::kDefault};
  Method loss = Method::kCpl;
  std::uint64_t seed = 0;
  double warmup_ratio = 0.1;
  LrDecay decay = LrDecay::kLinearToZero;
  KlDirection kl_direction = KlDirection::kWeakToStrong;
  AuxConfSchedule aux_conf;

  /// Throws ConfigError (epochs >= 1, batch_size >= 1, valid schedule, ...).
  void validate() const;

  /// 3 epochs, batch 512, lr 1e-3, CE at tau = 1.
  static TrainConfig weak_defaults();
  /// 10 epochs, batch 512, lr 1e-2, CPL at tau = 2.
  static TrainConfig strong_defaults();
};

struct WeakModel {
  LinearProbe probe;

  std::size_t classes() const noexcept { return probe.classes(); }
  std::size_t dim() const noexcept { return probe.dim(); }
};

class StrongHead {
 public:
  using Variant = std::variant<PrototypeMatrix, LinearProbe>;

  static StrongHead prototype(PrototypeMatrix prototypes);
  static StrongHead linear(LinearProbe probe);

  bool is_prototype() const noexcept;
  const PrototypeMatrix& prototypes() const;
  const LinearProbe& probe() const;
  Variant& variant() noexcept { return head_; }
  const Variant& variant() const noexcept { return head_; }

  std::size_t classes() const noexcept;
  std::size_t dim() const noexcept;

  std::vector<double> logits(std::span<const double> r) const;
  LogitMatrix logits(const EmbeddingMatrix& embeddings) const;

  friend bool operator==(const StrongHead&, const StrongHead&) = default;

 private:
  explicit StrongHead(Variant head) : head_(std::move(head)) {}
  Variant head_;
};

/// Either weak logits (soft targets) or hard class labels.
using Supervision = std::variant<LogitMatrix, Labels>;

struct ValidationSet {
  const EmbeddingMatrix& embeddings;
  std::span<const std::uint32_t> labels;
};

struct StepEvent {
  std::uint64_t step = 0;  // 1-based count of completed updates
  double loss = 0.0;       // mean batch loss before the update
  double lr = 0.0;
};

struct EpochEvent {
  int epoch = 0;  // 1-based
  std::uint64_t step = 0;
  std::optional<double> val_accuracy;
  const StrongHead& head;
};

struct TrainObserver {
  std::function<void(const StepEvent&)> on_step;
  std::function<void(const EpochEvent&)> on_epoch;
};

// --- prototype initialisation ------------------------------------------------

/// Loads a k x d matrix (e.g. exported text embeddings) verbatim.
PrototypeMatrix init_prototypes_from_file(const std::filesystem::path& path,
                                          std::size_t k, std::size_t d);

/// Row i = mean of the first `per_class` embeddings labelled i. Throws
/// ConfigError listing every class without an anchor.
PrototypeMatrix init_prototypes_from_anchors(const EmbeddingMatrix& embeddings,
                                             std::span<const std::uint32_t> labels,
                                             std::size_t k, std::size_t per_class);

// --- training ------------------------------------------------------------------

/// Mini-batch Adam on cross-entropy from zero init. No best-model selection.
WeakModel train_weak(const EmbeddingMatrix& embeddings, const LabelSet& labels,
                     const TrainConfig& cfg, const TrainObserver* observer = nullptr);

/// Pre-softmax weak logits W r + b for every row.
LogitMatrix weak_supervise(const WeakModel& model, const EmbeddingMatrix& embeddings);

/// Fine-tunes `head` on `train`. Only the head's parameters change. When
/// `validation` is given, argmax accuracy is measured after every epoch and
/// the best epoch's parameters are returned (strict improvement; earliest
/// wins ties); otherwise the final parameters are returned.
///
/// Throws ConfigError before any compute when the loss and supervision kind
/// are incompatible: kCpl needs a prototype head; kCpl/kKd/kAuxConf/kAdaptConf
/// need weak logits; kCe takes labels or weak logits (reduced to argmax).
StrongHead train_strong(StrongHead head, const EmbeddingMatrix& train,
                        const Supervision& supervision,
                        const std::optional<ValidationSet>& validation,
                        const TrainConfig& cfg, const TrainObserver* observer = nullptr);

/// Row-wise argmax of the head's logits; ties go to the lowest index.
Labels predict(const StrongHead& head, const EmbeddingMatrix& embeddings);

/// Row-wise argmax of logits.
Labels argmax_rows(const Matrix& logits);

double evaluate_accuracy(std::span<const std::uint32_t> predictions,
                         std::span<const std::uint32_t> labels);

// --- checkpoints ---------------------------------------------------------------
//
// <stem>.w2sm holds C or W; <stem>.json is {"variant", "k", "d", "bias"} with
// variant "prototype" or "linear" and bias null for prototypes.

void save_head(const std::filesystem::path& stem, const StrongHead& head);
StrongHead load_head(const std::filesystem::path& stem);

/// Strips a trailing .json / .w2sm so either file names the checkpoint.
std::filesystem::path checkpoint_stem(const std::filesystem::path& path);

}  // namespace w2s
