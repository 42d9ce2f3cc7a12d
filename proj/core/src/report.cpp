#include "w2s/report.hpp"

#include <algorithm>
#include <charconv>
#include <map>

#include <json.hpp>

#include "w2s/error.hpp"
#include "w2s/io.hpp"

namespace w2s {
namespace {

struct Mean {
  double dtest = 0.0;
  double dtest_prime = 0.0;
  std::size_t count = 0;

  void add(const SplitAccuracy& a) {
    dtest += a.dtest;
    dtest_prime += a.dtest_prime;
    ++count;
  }
  SplitAccuracy value() const {
    const double n = static_cast<double>(count);
    return {dtest / n, dtest_prime / n};
  }
};

void fill_delta(DomainRow& row) {
  row.delta = delta_of(row.methods, true);
  row.delta_dtest = delta_of(row.methods, false);
}

nlohmann::ordered_json split_json(const SplitAccuracy& a) {
  return {{"dtest", a.dtest}, {"dtest_prime", a.dtest_prime}};
}

SplitAccuracy split_from(const nlohmann::json& j) {
  return {j.at("dtest").get<double>(), j.at("dtest_prime").get<double>()};
}

nlohmann::ordered_json optional_json(const std::optional<double>& v) {
  return v ? nlohmann::ordered_json(*v) : nlohmann::ordered_json(nullptr);
}

std::optional<double> optional_from(const nlohmann::json& j) {
  if (j.is_null()) return std::nullopt;
  return j.get<double>();
}

nlohmann::ordered_json row_json(const DomainRow& row) {
  nlohmann::ordered_json j;
  j["domain"] = row.domain;
  j["weak"] = split_json(row.weak);
  j["ceiling"] = split_json(row.ceiling);
  j["methods"] = nlohmann::ordered_json::array();
  for (const auto& m : row.methods) {
    j["methods"].push_back({{"method", m.method}, {"accuracy", split_json(m.accuracy)}});
  }
  j["delta"] = optional_json(row.delta);
  j["delta_dtest"] = optional_json(row.delta_dtest);
  return j;
}

DomainRow row_from(const nlohmann::json& j) {
  DomainRow row;
  row.domain = j.at("domain").get<std::string>();
  row.weak = split_from(j.at("weak"));
  row.ceiling = split_from(j.at("ceiling"));
  for (const auto& m : j.at("methods")) {
    row.methods.push_back({m.at("method").get<std::string>(), split_from(m.at("accuracy"))});
  }
  row.delta = optional_from(j.at("delta"));
  row.delta_dtest = optional_from(j.at("delta_dtest"));
  return row;
}

}  // namespace

std::string format_number(double value) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), value);
  return std::string(buf, res.ptr);
}

std::optional<double> delta_of(const std::vector<MethodAccuracy>& methods, bool dtest_prime) {
  std::optional<double> cpl;
  std::optional<double> best_other;
  for (const auto& m : methods) {
    const double v = dtest_prime ? m.accuracy.dtest_prime : m.accuracy.dtest;
    if (m.method == "cpl") {
      cpl = v;
    } else {
      best_other = best_other ? std::max(*best_other, v) : v;
    }
  }
  if (!cpl || !best_other) return std::nullopt;
  return *cpl - *best_other;
}

RunReport aggregate(const std::vector<PipelineRun>& runs) {
  if (runs.empty()) throw ConfigError("cannot aggregate an empty set of runs");
  RunReport report;
  for (const auto& m : runs.front().methods) report.methods.emplace_back(to_string(m.method));

  std::vector<std::string> domains;
  for (const auto& run : runs) {
    if (std::find(domains.begin(), domains.end(), run.domain) == domains.end()) {
      domains.push_back(run.domain);
    }
    if (std::find(report.seeds.begin(), report.seeds.end(), run.seed) == report.seeds.end()) {
      report.seeds.push_back(run.seed);
    }
  }

  for (const auto& domain : domains) {
    Mean weak, ceiling;
    std::vector<Mean> methods(report.methods.size());
    for (const auto& run : runs) {
      if (run.domain != domain) continue;
      if (run.methods.size() != report.methods.size()) {
        throw ConfigError("runs disagree on the method list");
      }
      weak.add(run.weak);
      ceiling.add(run.ceiling);
      for (std::size_t m = 0; m < run.methods.size(); ++m) {
        if (to_string(run.methods[m].method) != report.methods[m]) {
          throw ConfigError("runs disagree on the method order");
        }
        methods[m].add(run.methods[m].accuracy);
      }
    }
    DomainRow row;
    row.domain = domain;
    row.weak = weak.value();
    row.ceiling = ceiling.value();
    for (std::size_t m = 0; m < methods.size(); ++m) {
      row.methods.push_back({report.methods[m], methods[m].value()});
    }
    fill_delta(row);
    report.rows.push_back(std::move(row));
  }

  Mean weak, ceiling;
  std::vector<Mean> methods(report.methods.size());
  for (const auto& row : report.rows) {
    weak.add(row.weak);
    ceiling.add(row.ceiling);
    for (std::size_t m = 0; m < methods.size(); ++m) methods[m].add(row.methods[m].accuracy);
  }
  report.average.domain = "average";
  report.average.weak = weak.value();
  report.average.ceiling = ceiling.value();
  for (std::size_t m = 0; m < methods.size(); ++m) {
    report.average.methods.push_back({report.methods[m], methods[m].value()});
  }
  fill_delta(report.average);

  for (const auto& run : runs) {
    for (const auto& m : run.methods) {
      report.curves.push_back({run.domain, std::string(to_string(m.method)), run.seed, m.curve});
    }
    report.curves.push_back({run.domain, "ceiling", run.seed, run.ceiling_curve});
  }
  return report;
}

std::string report_to_csv(const RunReport& report) {
  std::string out = "domain,method,acc_dtest,acc_dtestprime,weak,ceiling,delta\n";
  auto emit = [&out](const DomainRow& row) {
    for (const auto& m : row.methods) {
      out += row.domain + "," + m.method + "," + format_number(m.accuracy.dtest) + "," +
             format_number(m.accuracy.dtest_prime) + "," + format_number(row.weak.dtest_prime) +
             "," + format_number(row.ceiling.dtest_prime) + ",";
      if (m.method == "cpl" && row.delta) out += format_number(*row.delta);
      out += "\n";
    }
  };
  for (const auto& row : report.rows) emit(row);
  emit(report.average);
  return out;
}

std::string report_to_json(const RunReport& report) {
  nlohmann::ordered_json j;
  j["methods"] = report.methods;
  j["seeds"] = report.seeds;
  j["rows"] = nlohmann::ordered_json::array();
  for (const auto& row : report.rows) j["rows"].push_back(row_json(row));
  j["average"] = row_json(report.average);
  j["curves"] = nlohmann::ordered_json::array();
  for (const auto& c : report.curves) {
    nlohmann::ordered_json cj;
    cj["domain"] = c.domain;
    cj["method"] = c.method;
    cj["seed"] = c.seed;
    cj["points"] = nlohmann::ordered_json::array();
    for (const auto& p : c.points) {
      cj["points"].push_back({{"step", p.step}, {"train_acc", p.train_acc}, {"test_acc", p.test_acc}});
    }
    j["curves"].push_back(std::move(cj));
  }
  return j.dump(2) + "\n";
}

RunReport report_from_json(const std::string& text) {
  try {
    const auto j = nlohmann::json::parse(text);
    RunReport report;
    report.methods = j.at("methods").get<std::vector<std::string>>();
    report.seeds = j.at("seeds").get<std::vector<std::uint64_t>>();
    for (const auto& row : j.at("rows")) report.rows.push_back(row_from(row));
    report.average = row_from(j.at("average"));
    for (const auto& cj : j.at("curves")) {
      CurveSeries c;
      c.domain = cj.at("domain").get<std::string>();
      c.method = cj.at("method").get<std::string>();
      c.seed = cj.at("seed").get<std::uint64_t>();
      for (const auto& p : cj.at("points")) {
        c.points.push_back({p.at("step").get<std::uint64_t>(), p.at("train_acc").get<double>(),
                            p.at("test_acc").get<double>()});
      }
      report.curves.push_back(std::move(c));
    }
    return report;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("malformed report: ") + e.what());
  }
}

std::string curve_to_csv(const CurveSeries& curve) {
  std::string out = "step,train_acc,test_acc\n";
  for (const auto& p : curve.points) {
    out += std::to_string(p.step) + "," + format_number(p.train_acc) + "," +
           format_number(p.test_acc) + "\n";
  }
  return out;
}

std::filesystem::path emit_report(const RunReport& report, ReportFormat format,
                                  const std::filesystem::path& out_dir) {
  if (report.rows.empty()) throw ConfigError("cannot emit an empty report");
  std::error_code ec;
  std::filesystem::create_directories(out_dir / "curves", ec);
  if (ec) throw IoError("cannot create directory (" + ec.message() + ")", (out_dir / "curves").string());
  for (const auto& c : report.curves) {
    write_text(out_dir / "curves" /
                   (c.domain + "." + c.method + ".seed" + std::to_string(c.seed) + ".csv"),
               curve_to_csv(c));
  }
  const auto path =
      out_dir / (format == ReportFormat::kCsv ? "report.csv" : "report.json");
  write_text(path, format == ReportFormat::kCsv ? report_to_csv(report) : report_to_json(report));
  return path;
}

}  // namespace w2s
