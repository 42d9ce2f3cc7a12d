#pragma once

// Aggregated benchmark results.
//
// report.csv columns: domain,method,acc_dtest,acc_dtestprime,weak,ceiling,delta
//   one row per (domain, method), accuracies averaged over seeds, followed by
//   one "average" row per method (mean over domains). weak and ceiling are
//   D'_test accuracies. delta is filled on cpl rows only:
//   cpl - max(other methods) on D'_test; empty when there is no comparator.
// curves/<domain>.<method>.seed<seed>.csv columns: step,train_acc,test_acc
//   (method "ceiling" for the ground-truth run).

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "w2s/pipeline.hpp"

namespace w2s {

struct MethodAccuracy {
  std::string method;
  SplitAccuracy accuracy;

  friend bool operator==(const MethodAccuracy&, const MethodAccuracy&) = default;
};

struct DomainRow {
  std::string domain;
  SplitAccuracy weak;
  SplitAccuracy ceiling;
  std::vector<MethodAccuracy> methods;
  /// cpl - best other method, on D'_test and on D_test.
  std::optional<double> delta;
  std::optional<double> delta_dtest;

  friend bool operator==(const DomainRow&, const DomainRow&) = default;
};

struct CurveSeries {
  std::string domain;
  std::string method;
  std::uint64_t seed = 0;
  std::vector<CurvePoint> points;

  friend bool operator==(const CurveSeries&, const CurveSeries&) = default;
};

struct RunReport {
  std::vector<std::string> methods;
  std::vector<std::uint64_t> seeds;
  std::vector<DomainRow> rows;
  DomainRow average;  // domain = "average"
  std::vector<CurveSeries> curves;

  friend bool operator==(const RunReport&, const RunReport&) = default;
};

/// Averages runs over seeds per domain, then over domains. Throws ConfigError
/// for an empty or ragged set of runs.
RunReport aggregate(const std::vector<PipelineRun>& runs);

/// cpl minus the best non-cpl method; nullopt without both.
std::optional<double> delta_of(const std::vector<MethodAccuracy>& methods, bool dtest_prime);

enum class ReportFormat { kCsv, kJson };

std::string report_to_csv(const RunReport& report);
std::string report_to_json(const RunReport& report);
RunReport report_from_json(const std::string& text);
std::string curve_to_csv(const CurveSeries& curve);

/// Writes report.csv or report.json into `out_dir`, plus curves/ with one CSV
/// per series. Returns the report file path.
std::filesystem::path emit_report(const RunReport& report, ReportFormat format,
                                  const std::filesystem::path& out_dir);

/// Shortest round-trip decimal form used in every CSV.
std::string format_number(double value);

}  // namespace w2s
