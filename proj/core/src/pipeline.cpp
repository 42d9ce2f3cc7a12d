#include "w2s/pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <exception>
#include <mutex>
#include <optional>
#include <thread>

#include "w2s/rng.hpp"
#include "w2s/split.hpp"

namespace w2s {

StageError::StageError(std::string domain, std::uint64_t seed, std::string stage,
                       const std::string& cause)
    : Error("domain '" + domain + "', seed " + std::to_string(seed) + ", stage '" + stage +
            "': " + cause),
      domain_(std::move(domain)),
      seed_(seed),
      stage_(std::move(stage)) {}

bool uses_prototype_head(Method method) noexcept { return method == Method::kCpl; }

namespace {

Labels gather_labels(const Labels& labels, std::span<const std::size_t> indices) {
  Labels out(indices.size());
  for (std::size_t i = 0; i < indices.size(); ++i) out[i] = labels[indices[i]];
  return out;
}

SplitAccuracy score(const Labels& predictions, const Labels& truth,
                    std::span<const std::size_t> test_prime) {
  return {evaluate_accuracy(predictions, truth),
          evaluate_accuracy(gather_labels(predictions, test_prime),
                            gather_labels(truth, test_prime))};
}

// Anchors drawn in a seeded order from D_train.
PrototypeMatrix anchor_prototypes(const DomainData& data, std::size_t per_class,
                                  std::uint64_t seed) {
  Philox rng(seed, "init.anchors");
  const auto order = permutation(data.strong_train.samples(), rng);
  const auto embeddings = data.strong_train.gather(order);
  const auto labels = gather_labels(data.train_labels.labels, order);
  return init_prototypes_from_anchors(embeddings, labels, data.train_labels.classes(),
                                      per_class);
}

// Linear heads start from the same anchors: W = prototypes, b = 0.
LinearProbe anchor_probe(const PrototypeMatrix& anchors) {
  return LinearProbe(anchors.matrix(), std::vector<double>(anchors.classes(), 0.0));
}

template <typename Fn>
auto stage(const std::string& domain, std::uint64_t seed, const std::string& name, Fn&& fn) {
  try {
    return fn();
  } catch (const StageError&) {
    throw;
  } catch (const std::exception& e) {
    throw StageError(domain, seed, name, e.what());
  }
}

}  // namespace

PipelineRun run_pipeline(const DomainData& data, std::span<const Method> methods,
                         const PipelineConfig& cfg, std::uint64_t seed) {
  const std::string& domain = data.name;
  PipelineRun run;
  run.domain = domain;
  run.seed = seed;

  const Labels& truth = data.test_labels.labels;

  // (1) D_test -> D_hold / D'_test
  SplitPlan plan = stage(domain, seed, "split", [&] {
    return split_test_set(data.strong_test.samples(), seed);
  });
  const auto test_prime_strong = data.strong_test.gather(plan.test_prime);
  const auto test_prime_truth = gather_labels(truth, plan.test_prime);

  // (2) weak model on D_train
  const WeakModel weak = stage(domain, seed, "train_weak", [&] {
    TrainConfig wcfg = cfg.weak;
    wcfg.seed = seed;
    return train_weak(data.weak_train, data.train_labels, wcfg);
  });
  const LogitMatrix weak_test_logits = weak_supervise(weak, data.weak_test);
  run.weak = score(argmax_rows(weak_test_logits.data), truth, plan.test_prime);

  // (3) + (4) weak supervision on D_hold, then strong_train / strong_val
  plan = stage(domain, seed, "split_holdout", [&] { return split_holdout(plan, seed); });
  const auto train_x = data.strong_test.gather(plan.strong_train);
  const auto val_x = data.strong_test.gather(plan.strong_val);
  const LogitMatrix train_logits{weak_test_logits.data.gather_rows(plan.strong_train),
                                 LogitSource::kWeak};
  const Labels train_pseudo = argmax_rows(train_logits.data);
  const Labels val_pseudo =
      argmax_rows(weak_test_logits.data.gather_rows(plan.strong_val));

  const PrototypeMatrix anchors = stage(domain, seed, "init_prototypes", [&] {
    return anchor_prototypes(data, cfg.anchors_per_class, seed);
  });

  auto curve_observer = [&](std::vector<CurvePoint>& curve, const EmbeddingMatrix& fit_x,
                            const Labels& fit_targets) {
    TrainObserver obs;
    obs.on_epoch = [&curve, &fit_x, &fit_targets, &test_prime_strong,
                    &test_prime_truth](const EpochEvent& e) {
      curve.push_back({e.step, evaluate_accuracy(predict(e.head, fit_x), fit_targets),
                       evaluate_accuracy(predict(e.head, test_prime_strong), test_prime_truth)});
    };
    return obs;
  };

  for (Method method : methods) {
    MethodResult result;
    result.method = method;
    const std::string name = "train_strong:" + std::string(to_string(method));
    const StrongHead head = stage(domain, seed, name, [&] {
      TrainConfig scfg = cfg.strong;
      scfg.loss = method;
      scfg.seed = seed;
      StrongHead init = uses_prototype_head(method) ? StrongHead::prototype(anchors)
                                                    : StrongHead::linear(anchor_probe(anchors));
      const auto obs = curve_observer(result.curve, train_x, train_pseudo);
      return train_strong(std::move(init), train_x, train_logits,
                          ValidationSet{val_x, val_pseudo}, scfg, &obs);
    });
    result.accuracy = score(predict(head, data.strong_test), truth, plan.test_prime);
    run.methods.push_back(std::move(result));
  }

  // (5) ceiling: ground truth on the whole of D_hold
  const StrongHead ceiling = stage(domain, seed, "ceiling", [&] {
    TrainConfig ccfg = cfg.strong;
    ccfg.loss = Method::kCe;
    ccfg.seed = seed;
    const auto hold_x = data.strong_test.gather(plan.hold);
    const auto hold_truth = gather_labels(truth, plan.hold);
    const auto val_truth = gather_labels(truth, plan.strong_val);
    const auto obs = curve_observer(run.ceiling_curve, hold_x, hold_truth);
    return train_strong(StrongHead::prototype(anchors), hold_x, Supervision(hold_truth),
                        ValidationSet{val_x, val_truth}, ccfg, &obs);
  });
  run.ceiling = score(predict(ceiling, data.strong_test), truth, plan.test_prime);
  return run;
}

PipelineRun run_pipeline(const SyntheticSpec& spec, const DomainSpec& domain,
                         std::span<const Method> methods, const PipelineConfig& cfg,
                         std::uint64_t seed) {
  const DomainData data = stage(domain.name, seed, "generate",
                                [&] { return generate_domain(spec, domain); });
  return run_pipeline(data, methods, cfg, seed);
}

std::vector<PipelineRun> run_benchmark(const SyntheticSpec& spec,
                                       std::span<const Method> methods,
                                       std::span<const std::uint64_t> seeds,
                                       const PipelineConfig& cfg, std::size_t jobs) {
  if (methods.empty()) throw ConfigError("benchmark needs at least one method");
  if (seeds.empty()) throw ConfigError("benchmark needs at least one seed");
  spec.validate();
  cfg.weak.validate();
  cfg.strong.validate();

  std::vector<DomainData> domains;
  domains.reserve(spec.domains.size());
  for (const auto& d : spec.domains) {
    domains.push_back(stage(d.name, spec.seed, "generate",
                            [&] { return generate_domain(spec, d); }));
  }

  const std::size_t total = domains.size() * seeds.size();
  std::vector<std::optional<PipelineRun>> results(total);
  std::atomic<std::size_t> next{0};
  std::atomic<bool> failed{false};
  std::exception_ptr first_error;
  std::size_t first_error_index = total;
  std::mutex error_mutex;

  auto worker = [&] {
    while (true) {
      const std::size_t task = next.fetch_add(1);
      if (task >= total || failed.load()) return;
      const auto& data = domains[task / seeds.size()];
      const std::uint64_t seed = seeds[task % seeds.size()];
      try {
        results[task] = run_pipeline(data, methods, cfg, seed);
      } catch (...) {
        failed.store(true);
        std::lock_guard lock(error_mutex);
        // Report the earliest failing pair regardless of thread timing.
        if (task < first_error_index) {
          first_error_index = task;
          first_error = std::current_exception();
        }
      }
    }
  };

  const std::size_t threads = std::max<std::size_t>(1, std::min(jobs, total));
  if (threads == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t t = 0; t < threads; ++t) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }
  if (first_error) std::rethrow_exception(first_error);

  std::vector<PipelineRun> runs;
  runs.reserve(total);
  for (auto& r : results) runs.push_back(std::move(*r));
  return runs;
}

}  // namespace w2s
