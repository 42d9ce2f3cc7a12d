// Acceptance suite: one PASS/FAIL line per criterion; exits 1 if any fails.

#include <sys/wait.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <functional>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "support/convert.hpp"
#include "support/oracles.hpp"
#include "w2s/error.hpp"
#include "w2s/io.hpp"
#include "w2s/losses.hpp"
#include "w2s/pipeline.hpp"
#include "w2s/report.hpp"
#include "w2s/split.hpp"
#include "w2s/synthetic.hpp"

#ifndef W2S_CLI_PATH
#error "W2S_CLI_PATH must name the w2s executable"
#endif

namespace {

using namespace w2s;
namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;
using testing::to_matrix;

// Tolerances and budgets.
constexpr double kGradRelTol = 1e-4;
constexpr long double kGradFdStep = 1e-3L;
constexpr double kGradBudgetSec = 10.0;
constexpr double kKlZeroTol = 1e-12;
constexpr double kKlOracleTol = 1e-10;
constexpr double kOrthoRelTol = 1e-8;
constexpr double kTrainLossTol = 1e-6;
constexpr long double kTrainFdStep = 1e-5L;
constexpr double kTrainLr = 1.0;
constexpr double kTrainBudgetSec = 5.0;
constexpr double kCeilingSlack = 0.02;
constexpr double kBenchBudgetSec = 120.0;
constexpr double kNoiselessCeilingMin = 0.99;
constexpr double kInvarianceTol = 1e-12;

struct Outcome {
  int id;
  bool pass;
  std::string line;
};

std::vector<Outcome> outcomes;

void report(int id, const std::string& name, bool pass, const std::string& detail) {
  outcomes.push_back({id, pass, name + " (" + detail + ")"});
}

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

double rel_err(double a, double b) {
  const double s = std::max(std::abs(a), std::abs(b));
  return s == 0.0 ? 0.0 : std::abs(a - b) / s;
}

// --- 1 and 3: gradient and orthogonality ---------------------------------------

struct GradInstance {
  oracle::Mat c, x, zw;
  double tau;
};

std::vector<GradInstance> gradient_instances() {
  const double taus[] = {0.5, 1.0, 2.0, 4.0};
  std::vector<GradInstance> out;
  for (int i = 0; i < 100; ++i) {
    std::mt19937_64 gen(static_cast<std::uint64_t>(i));
    std::uniform_int_distribution<int> k(2, 10), d(2, 16), b(1, 32);
    const int kk = k(gen), dd = d(gen), bb = b(gen);
    out.push_back({oracle::random_mat(kk, dd, gen), oracle::random_mat(bb, dd, gen),
                   oracle::random_mat(bb, kk, gen), taus[i % 4]});
  }
  return out;
}

void criteria_1_and_3() {
  const auto t0 = Clock::now();
  const auto instances = gradient_instances();
  double worst = 0.0, worst_fine = 0.0, worst_ortho = 0.0, largest_over = 0.0, largest = 0.0;
  std::size_t elements = 0, over = 0;
  for (const auto& inst : instances) {
    const PrototypeMatrix c(to_matrix(inst.c));
    const Matrix g = cpl_grad(c, EmbeddingMatrix(to_matrix(inst.x)),
                              {to_matrix(inst.zw), LogitSource::kWeak}, Temperature(inst.tau));
    const auto fd = oracle::fd_cpl_grad(inst.c, inst.x, inst.zw, inst.tau, kGradFdStep);
    const auto fine = oracle::fd_cpl_grad(inst.c, inst.x, inst.zw, inst.tau, kGradFdStep / 100);
    for (std::size_t j = 0; j < g.rows(); ++j) {
      for (std::size_t m = 0; m < g.cols(); ++m) {
        const double e = rel_err(g(j, m), static_cast<double>(fd[j][m]));
        worst = std::max(worst, e);
        worst_fine = std::max(worst_fine, rel_err(g(j, m), static_cast<double>(fine[j][m])));
        ++elements;
        largest = std::max(largest, std::abs(g(j, m)));
        if (e > kGradRelTol) {
          ++over;
          largest_over = std::max(largest_over, std::abs(g(j, m)));
        }
      }
      const double denom = norm(g.row(j)) * norm(c.row(j));
      if (denom > 0) worst_ortho = std::max(worst_ortho, std::abs(dot(g.row(j), c.row(j))) / denom);
    }
  }
  const double secs = seconds_since(t0);
  report(1, "cpl_grad vs central differences", worst <= kGradRelTol && secs <= kGradBudgetSec,
         "worst elementwise rel err " + fmt("%.3e", worst) + " at h=1e-3, " +
             std::to_string(over) + " of " + std::to_string(elements) + " elements above " +
             fmt("%.0e", kGradRelTol) + " (largest such |g| " + fmt("%.2e", largest_over) +
             ", largest |g| overall " + fmt("%.2e", largest) + "); at h=1e-5 worst " + fmt("%.3e", worst_fine) + "; " +
             fmt("%.2f", secs) + " s");
  report(3, "gradient rows orthogonal to prototypes", worst_ortho <= kOrthoRelTol,
         "worst |<g_j, C_j>| / (|g_j| |C_j|) = " + fmt("%.3e", worst_ortho));
}

// --- 2: KL properties ----------------------------------------------------------

void criterion_2() {
  std::mt19937_64 gen(2);
  std::size_t negatives = 0;
  double worst_zero = 0.0, worst_oracle = 0.0;
  const double taus[] = {0.5, 1.0, 2.0, 4.0};
  for (int i = 0; i < 1000; ++i) {
    const double tau = taus[i % 4];
    const std::size_t k = 2 + i % 9;
    const auto zs = oracle::random_mat(1, k, gen, 3.0)[0];
    const auto zw = oracle::random_mat(1, k, gen, 3.0)[0];
    const std::vector<double> s(zs.begin(), zs.end()), w(zw.begin(), zw.end());
    const double kd = kd_loss(s, w, Temperature(tau));
    const double kd_rev = kd_loss(s, w, Temperature(tau), KlDirection::kStrongToWeak);
    negatives += (kd < 0) + (kd_rev < 0);
    worst_zero = std::max({worst_zero, kd_loss(s, s, Temperature(tau)),
                           kd_loss(w, w, Temperature(tau), KlDirection::kStrongToWeak)});
    const long double expect =
        oracle::kl(oracle::softmax(zw, tau), oracle::softmax(zs, tau));
    worst_oracle = std::max(worst_oracle, std::abs(kd - static_cast<double>(expect)));

    // cpl_loss on a random prototype head; identical inputs use its own logits.
    const auto c = oracle::random_mat(k, 6, gen);
    const auto r = oracle::random_mat(1, 6, gen)[0];
    const PrototypeMatrix protos(to_matrix(c));
    const std::vector<double> rv(r.begin(), r.end());
    const double cpl = cpl_loss(protos, rv, w, Temperature(tau));
    negatives += cpl < 0;
    worst_zero = std::max(worst_zero, cpl_loss(protos, rv, cosine_logits(protos, rv),
                                               Temperature(tau)));
    const long double cexpect =
        oracle::kl(oracle::softmax(zw, tau), oracle::softmax(oracle::cosine(c, r), tau));
    worst_oracle = std::max(worst_oracle, std::abs(cpl - static_cast<double>(cexpect)));
  }
  const bool pass = negatives == 0 && worst_zero <= kKlZeroTol && worst_oracle <= kKlOracleTol;
  report(2, "KL nonnegative, zero on identical inputs, matches direct sum", pass,
         std::to_string(negatives) + " negative values, worst identical " +
             fmt("%.3e", worst_zero) + ", worst oracle gap " + fmt("%.3e", worst_oracle));
}

// --- 4: oracle-equivalent training ---------------------------------------------

void criterion_4() {
  const auto t0 = Clock::now();
  std::mt19937_64 gen(0);
  const std::size_t n = 32, k = 3, d = 4;
  const auto c0 = oracle::random_mat(k, d, gen);
  const auto x = oracle::random_mat(n, d, gen);
  const auto zw = oracle::random_mat(n, k, gen, 2.0);
  const Temperature tau(2.0);

  // Library: analytic gradient, matrix update.
  PrototypeMatrix c(to_matrix(c0));
  const EmbeddingMatrix emb(to_matrix(x));
  const LogitMatrix logits{to_matrix(zw), LogitSource::kWeak};
  std::vector<double> lib;
  for (int step = 0; step < 50; ++step) {
    lib.push_back(cpl_batch_loss(c, emb, logits, tau));
    Matrix p = c.matrix();
    const Matrix g = cpl_grad(c, emb, logits, tau);
    for (std::size_t i = 0; i < p.size(); ++i) p.values()[i] -= kTrainLr * g.values()[i];
    c.assign(std::move(p));
  }

  // Oracle: scalar loops, finite-difference gradient.
  auto co = c0;
  double worst = 0.0;
  for (int step = 0; step < 50; ++step) {
    const long double loss = oracle::cpl_batch_loss(co, x, zw, tau.value());
    worst = std::max(worst, std::abs(lib[step] - static_cast<double>(loss)));
    const auto g = oracle::fd_cpl_grad(co, x, zw, tau.value(), kTrainFdStep);
    for (std::size_t j = 0; j < k; ++j)
      for (std::size_t m = 0; m < d; ++m) co[j][m] -= static_cast<long double>(kTrainLr) * g[j][m];
  }
  const double secs = seconds_since(t0);
  report(4, "50-step CPL descent matches finite-difference trainer",
         worst <= kTrainLossTol && secs <= kTrainBudgetSec,
         "loss " + fmt("%.6f", lib.front()) + " -> " + fmt("%.6f", lib.back()) +
             ", worst per-step gap " + fmt("%.3e", worst) + ", " + fmt("%.2f", secs) + " s");
}

// --- 5 and 6: benchmark ordering, ceiling sanity -------------------------------

const std::vector<Method> kMethods{Method::kCpl, Method::kCe, Method::kKd, Method::kAuxConf,
                                   Method::kAdaptConf};

double method_acc(const DomainRow& row, const std::string& name) {
  for (const auto& m : row.methods)
    if (m.method == name) return m.accuracy.dtest_prime;
  return std::nan("");
}

void criterion_5() {
  const auto t0 = Clock::now();
  const std::vector<std::uint64_t> seeds{0, 1, 2, 3, 4};
  const RunReport r =
      aggregate(run_benchmark(SyntheticSpec::desk_default(), kMethods, seeds, PipelineConfig{}, 1));
  const double secs = seconds_since(t0);
  const double weak = r.average.weak.dtest_prime;
  const double cpl = method_acc(r.average, "cpl");
  const double ce = method_acc(r.average, "ce");
  const double ceiling = r.average.ceiling.dtest_prime;
  const bool pass = weak < cpl && cpl <= ceiling + kCeilingSlack && cpl >= ce &&
                    secs <= kBenchBudgetSec;
  std::string detail = "D'_test means: weak " + fmt("%.4f", weak) + ", cpl " + fmt("%.4f", cpl);
  for (const char* m : {"ce", "kd", "auxconf", "adaptconf"})
    detail += ", " + std::string(m) + " " + fmt("%.4f", method_acc(r.average, m));
  detail += ", ceiling " + fmt("%.4f", ceiling) + ", delta " +
            fmt("%.4f", r.average.delta.value_or(std::nan(""))) + ", " + fmt("%.1f", secs) +
            " s single thread";
  report(5, "weak < CPL <= ceiling + 0.02 and CPL >= CE on the default spec", pass, detail);
}

void criterion_6() {
  const SyntheticSpec spec = SyntheticSpec::noiseless();
  const DomainData data = generate_domain(spec, spec.domains.front());
  const std::vector<Method> none;
  PipelineConfig cfg;
  double lowest = 1.0;
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    lowest = std::min(lowest, run_pipeline(data, none, cfg, seed).ceiling.dtest_prime);
  }
  report(6, "ceiling on noiseless spec within 10 epochs", lowest >= kNoiselessCeilingMin,
         "lowest D'_test accuracy over seeds 0-4: " + fmt("%.4f", lowest) + " after " +
             std::to_string(cfg.strong.epochs) + " epochs");
}

// --- 7: split protocol ---------------------------------------------------------

void criterion_7() {
  std::size_t violations = 0, checked = 0;
  for (std::size_t n = 5; n <= 400; n += 7) {
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
      ++checked;
      const SplitPlan a = split_holdout(split_test_set(n, seed), seed);
      const SplitPlan b = split_holdout(split_test_set(n, seed), seed);
      const auto round80 = [](std::size_t m) {
        return static_cast<std::size_t>(std::floor(0.8L * m + 0.5L));
      };
      bool ok = a.hold.size() == round80(n) && a.test_prime.size() == n - round80(n) &&
                a.strong_train.size() == round80(a.hold.size()) &&
                a.strong_val.size() == a.hold.size() - round80(a.hold.size());
      std::set<std::size_t> all;
      for (auto* v : {&a.strong_train, &a.strong_val, &a.test_prime}) all.insert(v->begin(), v->end());
      ok = ok && all.size() == n && *all.rbegin() == n - 1;
      std::set<std::size_t> hold(a.hold.begin(), a.hold.end()), inner(a.strong_train.begin(),
                                                                         a.strong_train.end());
      inner.insert(a.strong_val.begin(), a.strong_val.end());
      ok = ok && hold == inner;
      ok = ok && split_plan_to_json(a) == split_plan_to_json(b);
      violations += !ok;
    }
  }
  report(7, "split sizes round-half-up, disjoint, byte-identical per seed", violations == 0,
         std::to_string(checked) + " plans, " + std::to_string(violations) + " violations");
}

// --- 8: formats ----------------------------------------------------------------

ParseFailure failure_of(const std::vector<std::byte>& bytes) {
  try {
    decode_matrix(bytes);
  } catch (const ParseError& e) {
    return e.failure();
  }
  return ParseFailure::kBadFooter;  // no error is itself a failure of the check
}

void criterion_8() {
  const fs::path dir = fs::temp_directory_path() / "w2s_acceptance_formats";
  fs::remove_all(dir);
  fs::create_directories(dir);
  std::mt19937_64 gen(8);
  std::uniform_int_distribution<std::size_t> dim(1, 12);
  std::uniform_int_distribution<std::uint32_t> bits;
  std::size_t mismatches = 0;
  for (int i = 0; i < 1000; ++i) {
    const std::size_t rows = dim(gen), cols = dim(gen);
    Matrix m(rows, cols);
    for (double& v : m.values()) {
      float f;
      do {
        const std::uint32_t b = bits(gen);
        std::memcpy(&f, &b, sizeof f);
      } while (!std::isfinite(f));
      v = f;
    }
    const fs::path mp = dir / "m.w2sm";
    write_matrix(mp, m);
    const Matrix back = read_matrix(mp);
    mismatches += !(back == m) || read_file(mp) != encode_matrix(back) ||
                  fs::file_size(mp) != 24 + 4 * rows * cols;

    const std::size_t k = 2 + i % 30;
    LabelSet y{{}, LabelSet::default_names(k)};
    for (std::size_t j = 0; j < rows * cols; ++j) y.labels.push_back(bits(gen) % k);
    const fs::path lp = dir / "y.w2sl";
    write_labels(lp, y);
    mismatches += !(read_labels(lp) == y) || read_file(lp) != encode_labels(y);
  }
  fs::remove_all(dir);

  const auto good = encode_matrix(Matrix(3, 2, 0.5));
  auto magic = good, version = good, truncated = good;
  magic[1] = std::byte{'X'};
  version[4] = std::byte{7};
  truncated.pop_back();
  const ParseFailure fm = failure_of(magic), fv = failure_of(version), ft = failure_of(truncated);
  const bool distinct = fm == ParseFailure::kBadMagic && fv == ParseFailure::kBadVersion &&
                        ft == ParseFailure::kTruncated;
  report(8, "format round trip and distinct corruption errors", mismatches == 0 && distinct,
         "1000 matrices and label sets, " + std::to_string(mismatches) + " mismatches; errors: " +
             to_string(fm) + ", " + to_string(fv) + ", " + to_string(ft));
}

// --- 9: end-to-end determinism -------------------------------------------------

int run_cli(const std::string& args) {
  const std::string cmd = std::string(W2S_CLI_PATH) + " " + args + " > /dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

void criterion_9() {
  const fs::path base = fs::temp_directory_path() / "w2s_acceptance_bench";
  fs::remove_all(base);
  const std::string flags = " bench --methods cpl,ce,kd,auxconf,adaptconf --seeds 0..4";
  const int a = run_cli("--seed 0 --out " + (base / "a").string() + flags);
  const int b = run_cli("--seed 0 --out " + (base / "b").string() + flags);
  std::size_t files = 0, differing = 0;
  if (a == 0 && b == 0) {
    ++files;
    differing += read_file(base / "a" / "report.csv") != read_file(base / "b" / "report.csv");
    for (const auto& e : fs::directory_iterator(base / "a" / "curves")) {
      ++files;
      const fs::path other = base / "b" / "curves" / e.path().filename();
      differing += !fs::exists(other) || read_file(e.path()) != read_file(other);
    }
    std::size_t other_count = 0;
    for ([[maybe_unused]] const auto& e : fs::directory_iterator(base / "b" / "curves")) ++other_count;
    differing += other_count + 1 != files;
  }
  fs::remove_all(base);
  report(9, "two bench runs give byte-identical report.csv and curves",
         a == 0 && b == 0 && differing == 0 && files > 1,
         "exit codes " + std::to_string(a) + "/" + std::to_string(b) + ", " +
             std::to_string(files) + " files compared, " + std::to_string(differing) +
             " differ");
}

// --- 10: invariances -----------------------------------------------------------

void criterion_10() {
  std::mt19937_64 gen(10);
  std::uniform_real_distribution<double> tau_dist(0.01, 100.0), scale(1e-3, 1e3),
      shift(-1e3, 1e3);
  std::size_t argmax_bad = 0, scale_bad = 0, shift_bad = 0, loss_bad = 0, ties = 0;
  for (int i = 0; i < 1000; ++i) {
    const std::size_t k = 2 + i % 12;
    const auto z = oracle::random_mat(1, k, gen, 4.0)[0];
    const std::vector<double> zd(z.begin(), z.end());
    const Temperature tau(tau_dist(gen));
    auto sorted = zd;
    std::sort(sorted.begin(), sorted.end());
    if (sorted[k - 1] == sorted[k - 2]) {
      ++ties;
    } else {
      argmax_bad += argmax(soften(zd, tau)) != argmax(zd);
    }

    const double c = shift(gen);
    auto shifted = zd;
    for (double& v : shifted) v += c;
    const auto p = soften(zd, tau), q = soften(shifted, tau);
    for (std::size_t j = 0; j < k; ++j) shift_bad += std::abs(p[j] - q[j]) > kInvarianceTol;

    const PrototypeMatrix protos(to_matrix(oracle::random_mat(k, 8, gen)));
    const auto r = oracle::random_mat(1, 8, gen)[0];
    std::vector<double> rv(r.begin(), r.end()), rs = rv;
    const double s = scale(gen);
    for (double& v : rs) v *= s;
    const auto a = cosine_logits(protos, rv), b = cosine_logits(protos, rs);
    for (std::size_t j = 0; j < k; ++j) scale_bad += std::abs(a[j] - b[j]) > kInvarianceTol;
    const std::vector<double> zw(zd.begin(), zd.end());
    loss_bad += std::abs(cpl_loss(protos, rv, zw, tau) - cpl_loss(protos, rs, zw, tau)) >
                kInvarianceTol;
  }
  const std::size_t total = argmax_bad + scale_bad + shift_bad + loss_bad;
  report(10, "argmax/temperature, cosine scale, softmax shift invariances", total == 0,
         "1000 instances each; violations: argmax " + std::to_string(argmax_bad) + " (" +
             std::to_string(ties) + " ties skipped), cosine scale " + std::to_string(scale_bad) +
             ", shift " + std::to_string(shift_bad) + ", cpl_loss scale " +
             std::to_string(loss_bad));
}

}  // namespace

int main() {
  const std::vector<std::function<void()>> checks{criteria_1_and_3, criterion_2, criterion_4,
                                                  criterion_5,      criterion_6, criterion_7,
                                                  criterion_8,      criterion_9, criterion_10};
  int failures = 0;
  for (const auto& check : checks) {
    try {
      check();
    } catch (const std::exception& e) {
      std::printf("FAIL criterion check threw: %s\n", e.what());
      ++failures;
    }
  }
  std::sort(outcomes.begin(), outcomes.end(),
            [](const Outcome& a, const Outcome& b) { return a.id < b.id; });
  for (const auto& o : outcomes) {
    std::printf("%s criterion %d: %s\n", o.pass ? "PASS" : "FAIL", o.id, o.line.c_str());
    failures += !o.pass;
  }
  std::printf("%d criteria failed\n", failures);
  return failures == 0 ? 0 : 1;
}
