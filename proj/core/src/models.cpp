#include "w2s/models.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <string>

#include "w2s/error.hpp"
#include "w2s/rng.hpp"

namespace w2s {

std::string_view to_string(Method method) noexcept {
  switch (method) {
    case Method::kCpl: return "cpl";
    case Method::kCe: return "ce";
    case Method::kKd: return "kd";
    case Method::kAuxConf: return "auxconf";
    case Method::kAdaptConf: return "adaptconf";
  }
  return "unknown";
}

Method parse_method(std::string_view text) {
  std::string lower(text);
  std::transform(lower.begin(), lower.end(), lower.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  for (Method m : {Method::kCpl, Method::kCe, Method::kKd, Method::kAuxConf,
                   Method::kAdaptConf}) {
    if (lower == to_string(m)) return m;
  }
  throw ConfigError("unknown method '" + std::string(text) +
                    "' (expected cpl, ce, kd, auxconf or adaptconf)");
}

double AuxConfSchedule::alpha_at(std::uint64_t step,
                                 std::uint64_t total_steps) const noexcept {
  const double ramp = ramp_fraction * static_cast<double>(total_steps);
  if (!(ramp > 0.0)) return max_alpha;
  return max_alpha * std::min(1.0, static_cast<double>(step) / ramp);
}

void TrainConfig::validate() const {
  if (epochs < 1) throw ConfigError("epochs must be >= 1, got " + std::to_string(epochs));
  if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
  if (!(base_lr > 0.0) || !std::isfinite(base_lr)) {
    throw ConfigError("base_lr must be finite and > 0");
  }
  if (!(warmup_ratio >= 0.0 && warmup_ratio < 1.0)) {
    throw ConfigError("warmup_ratio must lie in [0, 1)");
  }
  if (!(aux_conf.max_alpha >= 0.0 && aux_conf.max_alpha <= 1.0)) {
    throw ConfigError("auxconf max_alpha must lie in [0, 1]");
  }
  if (!(aux_conf.ramp_fraction >= 0.0 && aux_conf.ramp_fraction <= 1.0)) {
    throw ConfigError("auxconf ramp_fraction must lie in [0, 1]");
  }
}

TrainConfig TrainConfig::weak_defaults() {
  TrainConfig cfg;
  cfg.epochs = 3;
  cfg.batch_size = 512;
  cfg.base_lr = 1e-3;
  cfg.tau = Temperature(1.0);
  cfg.loss = Method::kCe;
  return cfg;
}

TrainConfig TrainConfig::strong_defaults() { return TrainConfig{}; }

// --- StrongHead ----------------------------------------------------------------

StrongHead StrongHead::prototype(PrototypeMatrix prototypes) {
  return StrongHead(Variant(std::move(prototypes)));
}

StrongHead StrongHead::linear(LinearProbe probe) { return StrongHead(Variant(std::move(probe))); }

bool StrongHead::is_prototype() const noexcept {
  return std::holds_alternative<PrototypeMatrix>(head_);
}

const PrototypeMatrix& StrongHead::prototypes() const {
  if (!is_prototype()) throw ConfigError("head is a linear probe, not prototypes");
  return std::get<PrototypeMatrix>(head_);
}

const LinearProbe& StrongHead::probe() const {
  if (is_prototype()) throw ConfigError("head is prototypes, not a linear probe");
  return std::get<LinearProbe>(head_);
}

std::size_t StrongHead::classes() const noexcept {
  return std::visit([](const auto& h) { return h.classes(); }, head_);
}

std::size_t StrongHead::dim() const noexcept {
  return std::visit([](const auto& h) { return h.dim(); }, head_);
}

std::vector<double> StrongHead::logits(std::span<const double> r) const {
  if (is_prototype()) return cosine_logits(std::get<PrototypeMatrix>(head_), r);
  return lp_logits(std::get<LinearProbe>(head_), r);
}

LogitMatrix StrongHead::logits(const EmbeddingMatrix& embeddings) const {
  if (is_prototype()) return cosine_logits(std::get<PrototypeMatrix>(head_), embeddings);
  return lp_logits(std::get<LinearProbe>(head_), embeddings, LogitSource::kStrong);
}

// --- initialisation --------------------------------------------------------------

PrototypeMatrix init_prototypes_from_file(const std::filesystem::path& path,
                                          std::size_t k, std::size_t d) {
  Matrix m = read_matrix(path);
  if (m.rows() != k || m.cols() != d) {
    throw ShapeError(path.string() + " holds a " + std::to_string(m.rows()) + "x" +
                     std::to_string(m.cols()) + " matrix, expected " + std::to_string(k) +
                     "x" + std::to_string(d));
  }
  return PrototypeMatrix(std::move(m));
}

PrototypeMatrix init_prototypes_from_anchors(const EmbeddingMatrix& embeddings,
                                             std::span<const std::uint32_t> labels,
                                             std::size_t k, std::size_t per_class) {
  if (labels.size() != embeddings.samples()) {
    throw ShapeError("anchors: " + std::to_string(labels.size()) + " labels for " +
                     std::to_string(embeddings.samples()) + " embeddings");
  }
  if (per_class == 0) throw ConfigError("anchors: per_class must be >= 1");
  Matrix sums(k, embeddings.dim());
  std::vector<std::size_t> counts(k, 0);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const std::uint32_t y = labels[i];
    if (y >= k) {
      throw IndexError("anchor label " + std::to_string(y) + " out of range for " +
                       std::to_string(k) + " classes");
    }
    if (counts[y] == per_class) continue;
    ++counts[y];
    auto dst = sums.row(y);
    const auto src = embeddings.row(i);
    for (std::size_t m = 0; m < dst.size(); ++m) dst[m] += src[m];
  }
  std::string missing;
  for (std::size_t j = 0; j < k; ++j) {
    if (counts[j] == 0) missing += (missing.empty() ? "" : ", ") + std::to_string(j);
  }
  if (!missing.empty()) throw ConfigError("anchors: no example for classes " + missing);
  for (std::size_t j = 0; j < k; ++j) {
    for (double& v : sums.row(j)) v /= static_cast<double>(counts[j]);
  }
  return PrototypeMatrix(std::move(sums));
}

// --- training loop ---------------------------------------------------------------

namespace {

bool needs_soft_targets(Method m) { return m != Method::kCe; }

void check_compatibility(const StrongHead& head, const Supervision& supervision,
                         const TrainConfig& cfg) {
  const bool has_logits = std::holds_alternative<LogitMatrix>(supervision);
  if (cfg.loss == Method::kCpl && !head.is_prototype()) {
    throw ConfigError("loss cpl requires a prototype head");
  }
  if (needs_soft_targets(cfg.loss) && !has_logits) {
    throw ConfigError("loss " + std::string(to_string(cfg.loss)) +
                      " needs weak logits, but only hard labels were supplied");
  }
}

// Hard labels for CE / AuxConf, weak logits for the KL-based losses.
struct Targets {
  const Matrix* weak_logits = nullptr;
  Labels hard;
};

Targets make_targets(const Supervision& supervision, std::size_t n, std::size_t k) {
  Targets t;
  if (const auto* logits = std::get_if<LogitMatrix>(&supervision)) {
    if (logits->samples() != n || logits->classes() != k) {
      throw ShapeError("supervision logits are " + std::to_string(logits->samples()) + "x" +
                       std::to_string(logits->classes()) + ", expected " +
                       std::to_string(n) + "x" + std::to_string(k));
    }
    t.weak_logits = &logits->data;
    t.hard = argmax_rows(logits->data);
  } else {
    t.hard = std::get<Labels>(supervision);
    if (t.hard.size() != n) {
      throw ShapeError(std::to_string(t.hard.size()) + " labels for " + std::to_string(n) +
                       " training samples");
    }
    for (std::uint32_t y : t.hard) {
      if (y >= k) {
        throw IndexError("label " + std::to_string(y) + " out of range for " +
                         std::to_string(k) + " classes");
      }
    }
  }
  return t;
}

LogitLoss sample_loss(const TrainConfig& cfg, std::span<const double> z_s,
                      const Targets& targets, std::size_t i, double alpha) {
  switch (cfg.loss) {
    case Method::kCpl:
    case Method::kKd:
      return kd_loss_grad(z_s, targets.weak_logits->row(i), cfg.tau, cfg.kl_direction);
    case Method::kCe:
      return ce_loss_grad(z_s, targets.hard[i], cfg.tau);
    case Method::kAuxConf:
      return aux_conf_loss_grad(z_s, targets.hard[i], alpha, cfg.tau);
    case Method::kAdaptConf:
      return adapt_conf_loss_grad(z_s, targets.weak_logits->row(i), cfg.tau);
  }
  throw ConfigError("unhandled loss");
}

struct Optimizer {
  AdamState main;
  AdamState bias;
};

// One mini-batch update; returns the mean loss before the update.
double update_batch(StrongHead& head, const EmbeddingMatrix& train,
                    std::span<const std::size_t> batch, const Targets& targets,
                    const TrainConfig& cfg, double alpha, double lr, Optimizer& opt) {
  const double inv = 1.0 / static_cast<double>(batch.size());
  double total = 0.0;
  if (head.is_prototype()) {
    auto& protos = std::get<PrototypeMatrix>(head.variant());
    Matrix grad(protos.classes(), protos.dim());
    for (std::size_t i : batch) {
      const auto r = train.row(i);
      const auto z = cosine_logits(protos, r);
      const auto loss = sample_loss(cfg, z, targets, i, alpha);
      total += loss.value;
      accumulate_cosine_grad(protos, r, z, loss.grad, 1.0, grad);
    }
    for (double& v : grad.values()) v *= inv;
    Matrix params = protos.matrix();
    adam_step(params, grad, opt.main, lr);
    protos.assign(std::move(params));
  } else {
    auto& probe = std::get<LinearProbe>(head.variant());
    Matrix grad_w(probe.classes(), probe.dim());
    std::vector<double> grad_b(probe.classes(), 0.0);
    for (std::size_t i : batch) {
      const auto r = train.row(i);
      const auto z = lp_logits(probe, r);
      const auto loss = sample_loss(cfg, z, targets, i, alpha);
      total += loss.value;
      accumulate_linear_grad(r, loss.grad, 1.0, grad_w, grad_b);
    }
    for (double& v : grad_w.values()) v *= inv;
    for (double& v : grad_b) v *= inv;
    adam_step(probe.weights, grad_w, opt.main, lr);
    const std::size_t k = probe.bias.size();
    Matrix bias(1, k, std::move(probe.bias));
    adam_step(bias, Matrix(1, k, std::move(grad_b)), opt.bias, lr);
    probe.bias.assign(bias.values().begin(), bias.values().end());
    if (!probe.weights.all_finite()) throw DomainError("linear probe diverged (non-finite weight)");
  }
  return total * inv;
}

StrongHead run_training(StrongHead head, const EmbeddingMatrix& train,
                        const Supervision& supervision,
                        const std::optional<ValidationSet>& validation,
                        const TrainConfig& cfg, const TrainObserver* observer) {
  cfg.validate();
  check_compatibility(head, supervision, cfg);
  if (train.dim() != head.dim()) {
    throw ShapeError("training embeddings have dimension " + std::to_string(train.dim()) +
                     ", head expects " + std::to_string(head.dim()));
  }
  if (validation) {
    if (validation->embeddings.dim() != head.dim()) {
      throw ShapeError("validation embeddings have the wrong dimension");
    }
    if (validation->labels.size() != validation->embeddings.samples()) {
      throw ShapeError("validation labels and embeddings differ in length");
    }
  }
  const Targets targets = make_targets(supervision, train.samples(), head.classes());

  const std::size_t n = train.samples();
  const std::size_t steps_per_epoch = (n + cfg.batch_size - 1) / cfg.batch_size;
  LrSchedule schedule;
  schedule.base_lr = cfg.base_lr;
  schedule.total_steps = static_cast<std::uint64_t>(cfg.epochs) * steps_per_epoch;
  schedule.warmup_ratio = cfg.warmup_ratio;
  schedule.decay = cfg.decay;

  Philox batch_rng(cfg.seed, "batching");
  Optimizer opt;
  BestModelTracker<StrongHead> tracker;
  std::uint64_t step = 0;

  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    const auto order = permutation(n, batch_rng);
    for (std::size_t start = 0; start < n; start += cfg.batch_size) {
      const std::size_t stop = std::min(n, start + cfg.batch_size);
      const std::span<const std::size_t> batch(order.data() + start, stop - start);
      const double lr = lr_at(schedule, step);
      const double alpha = cfg.aux_conf.alpha_at(step, schedule.total_steps);
      const double loss = update_batch(head, train, batch, targets, cfg, alpha, lr, opt);
      ++step;
      if (observer && observer->on_step) observer->on_step({step, loss, lr});
    }
    std::optional<double> val_acc;
    if (validation) {
      val_acc = evaluate_accuracy(predict(head, validation->embeddings), validation->labels);
      tracker.update(*val_acc, head);
    }
    if (observer && observer->on_epoch) observer->on_epoch({epoch, step, val_acc, head});
  }
  return tracker.best_or(std::move(head));
}

}  // namespace

WeakModel train_weak(const EmbeddingMatrix& embeddings, const LabelSet& labels,
                     const TrainConfig& cfg, const TrainObserver* observer) {
  if (cfg.loss != Method::kCe) throw ConfigError("the weak model trains with ce only");
  if (labels.size() != embeddings.samples()) {
    throw ShapeError(std::to_string(labels.size()) + " labels for " +
                     std::to_string(embeddings.samples()) + " weak training samples");
  }
  if (labels.classes() < 2) throw ConfigError("weak model needs at least 2 classes");
  labels.validate();
  auto head = StrongHead::linear(LinearProbe::zeros(labels.classes(), embeddings.dim()));
  head = run_training(std::move(head), embeddings, Supervision(labels.labels), std::nullopt,
                      cfg, observer);
  return WeakModel{head.probe()};
}

LogitMatrix weak_supervise(const WeakModel& model, const EmbeddingMatrix& embeddings) {
  return lp_logits(model.probe, embeddings, LogitSource::kWeak);
}

StrongHead train_strong(StrongHead head, const EmbeddingMatrix& train,
                        const Supervision& supervision,
                        const std::optional<ValidationSet>& validation,
                        const TrainConfig& cfg, const TrainObserver* observer) {
  return run_training(std::move(head), train, supervision, validation, cfg, observer);
}

Labels argmax_rows(const Matrix& logits) {
  Labels out(logits.rows());
  for (std::size_t i = 0; i < logits.rows(); ++i) {
    out[i] = static_cast<std::uint32_t>(argmax(logits.row(i)));
  }
  return out;
}

Labels predict(const StrongHead& head, const EmbeddingMatrix& embeddings) {
  return argmax_rows(head.logits(embeddings).data);
}

double evaluate_accuracy(std::span<const std::uint32_t> predictions,
                         std::span<const std::uint32_t> labels) {
  if (predictions.size() != labels.size()) {
    throw ShapeError(std::to_string(predictions.size()) + " predictions for " +
                     std::to_string(labels.size()) + " labels");
  }
  if (labels.empty()) throw DomainError("accuracy of an empty set is undefined");
  std::size_t hits = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) hits += predictions[i] == labels[i];
  return static_cast<double>(hits) / static_cast<double>(labels.size());
}

}  // namespace w2s
