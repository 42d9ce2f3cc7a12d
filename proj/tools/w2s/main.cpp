// w2s: command-line front end for the weak-to-strong pipeline.
//
// Exit codes: 0 success, 2 usage or configuration error, 1 runtime failure.

#include <charconv>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "run_config.hpp"
#include "w2s/error.hpp"
#include "w2s/io.hpp"
#include "w2s/models.hpp"
#include "w2s/pipeline.hpp"
#include "w2s/report.hpp"
#include "w2s/synthetic.hpp"

namespace fs = std::filesystem;

namespace {

using namespace w2s;

// Raised for flag combinations CLI11 cannot express.
class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class Level { kError, kWarn, kInfo, kDebug };

struct Globals {
  std::uint64_t seed = 0;
  bool seed_given = false;
  fs::path out = ".";
  std::string log_level = "info";
  std::optional<fs::path> config;

  Level level() const {
    if (log_level == "error") return Level::kError;
    if (log_level == "warn") return Level::kWarn;
    if (log_level == "debug") return Level::kDebug;
    return Level::kInfo;
  }
};

Globals g;

void log(Level level, const std::string& line) {
  if (level <= g.level()) std::cerr << line << '\n';
}

std::string fixed4(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4f", v);
  return buf;
}

// Training flags shared by train-weak, train-strong and bench. Each is applied
// only when given, on top of defaults and --config.
struct TrainFlags {
  std::optional<int> epochs;
  std::optional<std::size_t> batch_size;
  std::optional<double> lr;
  std::optional<double> warmup_ratio;
  std::optional<std::string> decay;
  std::optional<double> tau;
  std::optional<std::string> loss;
  std::optional<std::string> kl;

  void add_common(CLI::App* app) {
    app->add_option("--epochs", epochs, "Training epochs");
    app->add_option("--batch-size", batch_size, "Mini-batch size");
    app->add_option("--lr", lr, "Peak learning rate");
    app->add_option("--warmup-ratio", warmup_ratio, "Fraction of steps spent warming up");
    app->add_option("--decay", decay, "Schedule after warm-up")
        ->check(CLI::IsMember({"linear_to_zero", "constant"}));
  }

  void add_strong(CLI::App* app) {
    add_common(app);
    app->add_option("--tau", tau, "Softmax temperature");
    app->add_option("--kl", kl, "KL direction")
        ->check(CLI::IsMember({"weak_to_strong", "strong_to_weak"}));
  }

  void apply(TrainConfig& cfg) const {
    if (epochs) cfg.epochs = *epochs;
    if (batch_size) cfg.batch_size = *batch_size;
    if (lr) cfg.base_lr = *lr;
    if (warmup_ratio) cfg.warmup_ratio = *warmup_ratio;
    if (decay) cfg.decay = cli::parse_decay(*decay);
    if (tau) cfg.tau = Temperature(*tau);
    if (loss) cfg.loss = parse_method(*loss);
    if (kl) cfg.kl_direction = cli::parse_kl_direction(*kl);
  }
};

// Defaults, then --config, then flags; DomainError from a bad value becomes a
// configuration error.
struct Resolved {
  TrainConfig train;
  TrainConfig weak;
};

Resolved resolve(const TrainConfig& base, const TrainConfig& weak_base, const TrainFlags& flags) {
  try {
    Resolved r{base, weak_base};
    if (g.config) {
      auto rc = cli::load_run_config(*g.config, base, weak_base);
      r.train = rc.train;
      if (rc.weak) r.weak = *rc.weak;
    }
    flags.apply(r.train);
    if (g.seed_given || !g.config) r.train.seed = g.seed;
    r.weak.seed = r.train.seed;
    r.train.validate();
    r.weak.validate();
    return r;
  } catch (const DomainError& e) {
    throw ConfigError(e.what());
  }
}

fs::path out_path(const std::string& name) {
  fs::create_directories(g.out);
  return g.out / name;
}

SyntheticSpec load_spec(const std::optional<fs::path>& path) {
  SyntheticSpec spec = path ? spec_from_json(read_text(*path)) : SyntheticSpec::desk_default();
  if (g.seed_given) spec.seed = g.seed;
  spec.validate();
  return spec;
}

void on_epoch_log(const char* what, TrainObserver& obs) {
  obs.on_epoch = [what](const EpochEvent& e) {
    std::string line = std::string(what) + ": epoch " + std::to_string(e.epoch) + " step " +
                       std::to_string(e.step);
    if (e.val_accuracy) line += " val_acc " + fixed4(*e.val_accuracy);
    log(Level::kInfo, line);
  };
}

// A checkpoint argument names <stem>, <stem>.json or <stem>.w2sm.
std::string checkpoint_exists(const std::string& arg) {
  const fs::path stem = checkpoint_stem(arg);
  for (const char* ext : {".json", ".w2sm"}) {
    fs::path p = stem;
    p += ext;
    if (!fs::exists(p)) return "checkpoint file not found: " + p.string();
  }
  return {};
}

std::vector<std::uint64_t> parse_seeds(const std::string& text) {
  auto number = [&](std::string_view s) {
    std::uint64_t v = 0;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc{} || ptr != s.data() + s.size() || s.empty())
      throw UsageError("--seeds: cannot parse '" + std::string(s) + "'");
    return v;
  };
  std::vector<std::uint64_t> seeds;
  if (const auto dots = text.find(".."); dots != std::string::npos) {
    const auto lo = number(std::string_view(text).substr(0, dots));
    const auto hi = number(std::string_view(text).substr(dots + 2));
    if (hi < lo) throw UsageError("--seeds: empty range " + text);
    for (auto s = lo; s <= hi; ++s) seeds.push_back(s);
    return seeds;
  }
  std::stringstream ss(text);
  for (std::string item; std::getline(ss, item, ',');) seeds.push_back(number(item));
  if (seeds.empty()) throw UsageError("--seeds: no seeds given");
  return seeds;
}

std::vector<Method> parse_methods(const std::string& text) {
  std::vector<Method> methods;
  std::stringstream ss(text);
  for (std::string item; std::getline(ss, item, ',');) {
    const Method m = parse_method(item);
    if (std::find(methods.begin(), methods.end(), m) != methods.end())
      throw UsageError("--methods lists " + item + " twice");
    methods.push_back(m);
  }
  if (methods.empty()) throw UsageError("--methods: no methods given");
  return methods;
}

// --- gen -------------------------------------------------------------------------

struct GenArgs {
  std::optional<fs::path> spec;
};

int run_gen(const GenArgs& a) {
  const SyntheticSpec spec = load_spec(a.spec);
  for (const auto& dom : spec.domains) {
    const DomainData d = generate_domain(spec, dom);
    const std::string& n = dom.name;
    write_matrix(out_path(n + ".strong.train.w2sm"), d.strong_train.matrix());
    write_matrix(out_path(n + ".strong.test.w2sm"), d.strong_test.matrix());
    write_matrix(out_path(n + ".weak.train.w2sm"), d.weak_train.matrix());
    write_matrix(out_path(n + ".weak.test.w2sm"), d.weak_test.matrix());
    write_labels(out_path(n + ".train.w2sl"), d.train_labels);
    write_labels(out_path(n + ".test.w2sl"), d.test_labels);
    log(Level::kInfo, "gen: domain " + n + " sigma_scale " + format_number(dom.sigma_scale));
  }
  std::cout << "gen: " << spec.domains.size() << " domains, k=" << spec.k << " d_s=" << spec.d_s
            << " d_w=" << spec.d_w << ", seed " << spec.seed << " -> " << g.out.string() << '\n';
  return 0;
}

// --- train-weak ------------------------------------------------------------------

struct TrainWeakArgs {
  fs::path embeddings, labels;
  std::string name = "weak";
  TrainFlags flags;
};

int run_train_weak(const TrainWeakArgs& a) {
  const Resolved r = resolve(TrainConfig::weak_defaults(), TrainConfig::weak_defaults(), a.flags);
  TrainConfig cfg = r.train;
  if (cfg.loss != Method::kCe) throw UsageError("the weak model trains with --loss ce only");
  const EmbeddingMatrix x(read_matrix(a.embeddings));
  const LabelSet y = read_labels(a.labels);
  TrainObserver obs;
  on_epoch_log("train-weak", obs);
  const WeakModel model = train_weak(x, y, cfg, &obs);
  const double acc = evaluate_accuracy(argmax_rows(weak_supervise(model, x).data), y.labels);
  const fs::path stem = out_path(a.name);
  save_head(stem, StrongHead::linear(model.probe));
  std::cout << "train-weak: train accuracy " << fixed4(acc) << " (n=" << x.samples()
            << ", k=" << model.classes() << ") -> " << stem.string() << '\n';
  return 0;
}

// --- supervise -------------------------------------------------------------------

struct SuperviseArgs {
  std::string model;
  fs::path embeddings;
  std::string output = "weak_logits.w2sm";
};

int run_supervise(const SuperviseArgs& a) {
  const StrongHead head = load_head(checkpoint_stem(a.model));
  if (head.is_prototype()) throw UsageError("--model must be a linear (weak) checkpoint");
  const EmbeddingMatrix x(read_matrix(a.embeddings));
  const LogitMatrix z = weak_supervise(WeakModel{head.probe()}, x);
  const fs::path path = out_path(a.output);
  write_matrix(path, z.data);
  std::cout << "supervise: " << z.samples() << "x" << z.classes() << " weak logits -> "
            << path.string() << '\n';
  return 0;
}

// --- train-strong ----------------------------------------------------------------

struct TrainStrongArgs {
  fs::path embeddings;
  std::optional<fs::path> logits, labels;
  std::optional<std::string> head;
  std::optional<fs::path> init, anchor_embeddings, anchor_labels;
  std::size_t per_class = 5;
  std::optional<fs::path> val_embeddings, val_labels;
  std::string name = "strong";
  TrainFlags flags;
};

int run_train_strong(const TrainStrongArgs& a) {
  const Resolved r =
      resolve(TrainConfig::strong_defaults(), TrainConfig::weak_defaults(), a.flags);
  const TrainConfig& cfg = r.train;
  const std::string loss(to_string(cfg.loss));
  if (a.labels && cfg.loss != Method::kCe)
    throw UsageError("--loss " + loss + " needs weak logits (--logits), got --labels");
  if (!a.logits && !a.labels) throw UsageError("one of --logits or --labels is required");
  const bool prototype = a.head ? *a.head == "prototype" : uses_prototype_head(cfg.loss);
  if (cfg.loss == Method::kCpl && !prototype)
    throw UsageError("--loss cpl needs --head prototype");
  if (!a.init && !a.anchor_embeddings)
    throw UsageError("one of --init or --anchor-embeddings is required");

  const EmbeddingMatrix x(read_matrix(a.embeddings));
  Supervision supervision = Labels{};
  std::size_t k = 0;
  if (a.logits) {
    LogitMatrix z{read_matrix(*a.logits), LogitSource::kWeak};
    k = z.classes();
    supervision = std::move(z);
  } else {
    LabelSet y = read_labels(*a.labels);
    k = y.classes();
    supervision = std::move(y.labels);
  }

  PrototypeMatrix init = [&] {
    if (a.init) return init_prototypes_from_file(*a.init, k, x.dim());
    const EmbeddingMatrix ax(read_matrix(*a.anchor_embeddings));
    const LabelSet ay = read_labels(*a.anchor_labels);
    return init_prototypes_from_anchors(ax, ay.labels, k, a.per_class);
  }();
  StrongHead head = prototype
                        ? StrongHead::prototype(std::move(init))
                        : StrongHead::linear(LinearProbe(init.matrix(), std::vector<double>(k, 0.0)));

  std::optional<EmbeddingMatrix> vx;
  LabelSet vy;
  std::optional<ValidationSet> validation;
  if (a.val_embeddings) {
    vx.emplace(read_matrix(*a.val_embeddings));
    vy = read_labels(*a.val_labels);
    validation.emplace(ValidationSet{*vx, vy.labels});
  }

  TrainObserver obs;
  on_epoch_log("train-strong", obs);
  std::optional<double> best;
  auto log_epoch = obs.on_epoch;
  obs.on_epoch = [&](const EpochEvent& e) {
    log_epoch(e);
    if (e.val_accuracy && (!best || *e.val_accuracy > *best)) best = e.val_accuracy;
  };
  obs.on_step = [](const StepEvent& e) {
    log(Level::kDebug, "train-strong: step " + std::to_string(e.step) + " loss " +
                           format_number(e.loss) + " lr " + format_number(e.lr));
  };
  const StrongHead out = train_strong(std::move(head), x, supervision, validation, cfg, &obs);
  const fs::path stem = out_path(a.name);
  save_head(stem, out);
  std::cout << "train-strong: loss " << loss << ", "
            << (out.is_prototype() ? "prototype" : "linear") << " head";
  if (best) std::cout << ", best val accuracy " << fixed4(*best);
  std::cout << " -> " << stem.string() << '\n';
  return 0;
}

// --- eval ------------------------------------------------------------------------

struct EvalArgs {
  std::string model;
  fs::path embeddings, labels;
  std::string metrics = "metrics.json";
};

int run_eval(const EvalArgs& a) {
  const StrongHead head = load_head(checkpoint_stem(a.model));
  const EmbeddingMatrix x(read_matrix(a.embeddings));
  const LabelSet y = read_labels(a.labels);
  const double acc = evaluate_accuracy(predict(head, x), y.labels);
  nlohmann::ordered_json j;
  j["model"] = checkpoint_stem(a.model).string();
  j["embeddings"] = a.embeddings.string();
  j["samples"] = x.samples();
  j["accuracy"] = acc;
  const fs::path path = out_path(a.metrics);
  write_text(path, j.dump(2) + "\n");
  std::cout << "eval: accuracy " << fixed4(acc) << " (n=" << x.samples() << ") -> "
            << path.string() << '\n';
  return 0;
}

// --- bench -----------------------------------------------------------------------

struct BenchArgs {
  std::optional<fs::path> spec;
  std::string methods = "cpl,ce,kd,auxconf,adaptconf";
  std::string seeds = "0..4";
  std::size_t jobs = 1;
  std::size_t anchors_per_class = 5;
  TrainFlags flags;
};

int run_bench(const BenchArgs& a) {
  const auto methods = parse_methods(a.methods);
  const auto seeds = parse_seeds(a.seeds);
  const SyntheticSpec spec = load_spec(a.spec);
  const Resolved r =
      resolve(TrainConfig::strong_defaults(), TrainConfig::weak_defaults(), a.flags);
  PipelineConfig cfg;
  cfg.strong = r.train;
  cfg.weak = r.weak;
  cfg.anchors_per_class = a.anchors_per_class;

  const RunReport report = aggregate(run_benchmark(spec, methods, seeds, cfg, a.jobs));
  fs::create_directories(g.out);
  emit_report(report, ReportFormat::kCsv, g.out);
  emit_report(report, ReportFormat::kJson, g.out);

  auto describe = [](const DomainRow& row) {
    std::string line = row.domain + ": weak " + fixed4(row.weak.dtest_prime);
    for (const auto& m : row.methods) line += " " + m.method + " " + fixed4(m.accuracy.dtest_prime);
    line += " ceiling " + fixed4(row.ceiling.dtest_prime);
    if (row.delta) line += " delta " + fixed4(*row.delta);
    return line;
  };
  for (const auto& row : report.rows) log(Level::kInfo, "bench: " + describe(row));
  std::cout << "bench: " << report.rows.size() << " domains x " << seeds.size() << " seeds, "
            << describe(report.average) << " -> " << g.out.string() << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Weak-to-strong training with class prototypes on frozen embeddings"};
  app.require_subcommand(1);
  app.fallthrough();
  app.add_option("--seed", g.seed, "Seed for every random stream")
      ->each([](const std::string&) { g.seed_given = true; });
  app.add_option("--out", g.out, "Output directory");
  app.add_option("--log-level", g.log_level, "error, warn, info or debug")
      ->check(CLI::IsMember({"error", "warn", "info", "debug"}));
  app.add_option("--config", g.config, "JSON file with training settings")
      ->check(CLI::ExistingFile);

  GenArgs gen;
  auto* gen_cmd = app.add_subcommand("gen", "Write a synthetic benchmark to --out");
  gen_cmd->add_option("--spec", gen.spec, "Spec JSON (default: desk-scale spec)")
      ->check(CLI::ExistingFile);

  TrainWeakArgs tw;
  auto* tw_cmd = app.add_subcommand("train-weak", "Train the weak linear probe on ground truth");
  tw_cmd->add_option("--embeddings", tw.embeddings, "Weak training embeddings (.w2sm)")
      ->required()->check(CLI::ExistingFile);
  tw_cmd->add_option("--labels", tw.labels, "Training labels (.w2sl)")
      ->required()->check(CLI::ExistingFile);
  tw_cmd->add_option("--name", tw.name, "Checkpoint stem inside --out");
  tw.flags.add_common(tw_cmd);

  SuperviseArgs sv;
  auto* sv_cmd = app.add_subcommand("supervise", "Write weak-model logits for a set of embeddings");
  sv_cmd->add_option("--model", sv.model, "Weak checkpoint")->required()->check(checkpoint_exists);
  sv_cmd->add_option("--embeddings", sv.embeddings, "Weak embeddings (.w2sm)")
      ->required()->check(CLI::ExistingFile);
  sv_cmd->add_option("--output", sv.output, "Logit file name inside --out");

  TrainStrongArgs ts;
  auto* ts_cmd = app.add_subcommand("train-strong", "Train a strong head on weak logits or labels");
  ts_cmd->add_option("--embeddings", ts.embeddings, "Strong training embeddings (.w2sm)")
      ->required()->check(CLI::ExistingFile);
  auto* logits_opt = ts_cmd->add_option("--logits", ts.logits, "Weak logits (.w2sm)")
                         ->check(CLI::ExistingFile);
  auto* labels_opt = ts_cmd->add_option("--labels", ts.labels, "Hard labels (.w2sl)")
                         ->check(CLI::ExistingFile);
  logits_opt->excludes(labels_opt);
  ts_cmd->add_option("--loss", ts.flags.loss, "cpl, ce, kd, auxconf or adaptconf")
      ->check(CLI::IsMember({"cpl", "ce", "kd", "auxconf", "adaptconf"}, CLI::ignore_case));
  ts_cmd->add_option("--head", ts.head, "prototype or linear (default follows --loss)")
      ->check(CLI::IsMember({"prototype", "linear"}));
  auto* init_opt = ts_cmd->add_option("--init", ts.init, "Initial prototypes (.w2sm, k x d)")
                       ->check(CLI::ExistingFile);
  auto* ax_opt = ts_cmd->add_option("--anchor-embeddings", ts.anchor_embeddings,
                                    "Labelled embeddings used to initialise prototypes")
                     ->check(CLI::ExistingFile);
  auto* ay_opt = ts_cmd->add_option("--anchor-labels", ts.anchor_labels, "Labels for the anchors")
                     ->check(CLI::ExistingFile);
  init_opt->excludes(ax_opt);
  ax_opt->needs(ay_opt);
  ay_opt->needs(ax_opt);
  ts_cmd->add_option("--per-class", ts.per_class, "Anchors averaged per class")
      ->check(CLI::PositiveNumber);
  auto* vx_opt = ts_cmd->add_option("--val-embeddings", ts.val_embeddings, "Validation embeddings")
                     ->check(CLI::ExistingFile);
  auto* vy_opt = ts_cmd->add_option("--val-labels", ts.val_labels, "Validation labels")
                     ->check(CLI::ExistingFile);
  vx_opt->needs(vy_opt);
  vy_opt->needs(vx_opt);
  ts_cmd->add_option("--name", ts.name, "Checkpoint stem inside --out");
  ts.flags.add_strong(ts_cmd);

  EvalArgs ev;
  auto* ev_cmd = app.add_subcommand("eval", "Score a checkpoint and write metrics JSON");
  ev_cmd->add_option("--model", ev.model, "Checkpoint")->required()->check(checkpoint_exists);
  ev_cmd->add_option("--embeddings", ev.embeddings, "Embeddings (.w2sm)")
      ->required()->check(CLI::ExistingFile);
  ev_cmd->add_option("--labels", ev.labels, "Labels (.w2sl)")->required()->check(CLI::ExistingFile);
  ev_cmd->add_option("--metrics", ev.metrics, "Metrics file name inside --out");

  BenchArgs bn;
  auto* bn_cmd = app.add_subcommand("bench", "Run the full pipeline over domains and seeds");
  bn_cmd->add_option("--spec", bn.spec, "Spec JSON (default: desk-scale spec)")
      ->check(CLI::ExistingFile);
  bn_cmd->add_option("--methods", bn.methods, "Comma-separated methods");
  bn_cmd->add_option("--seeds", bn.seeds, "Range a..b or comma-separated list");
  bn_cmd->add_option("--jobs", bn.jobs, "Parallel (domain, seed) runs")->check(CLI::PositiveNumber);
  bn_cmd->add_option("--anchors-per-class", bn.anchors_per_class, "Anchors per class")
      ->check(CLI::PositiveNumber);
  bn.flags.add_strong(bn_cmd);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (*gen_cmd) return run_gen(gen);
    if (*tw_cmd) return run_train_weak(tw);
    if (*sv_cmd) return run_supervise(sv);
    if (*ts_cmd) return run_train_strong(ts);
    if (*ev_cmd) return run_eval(ev);
    if (*bn_cmd) return run_bench(bn);
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const ParseError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const ShapeError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const IndexError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 2;
}
