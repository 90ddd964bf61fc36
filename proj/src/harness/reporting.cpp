#include <json.hpp>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "mdpt/harness/experiment.hpp"

namespace mdpt::harness {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct PointRow {
  std::string id;
  json point;
  json metrics;
  double overall = 0.0;
};

std::vector<PointRow> collect_points(const std::string& run_dir) {
  std::vector<PointRow> rows;
  const fs::path points = fs::path(run_dir) / "points";
  if (!fs::exists(points)) return rows;
  std::vector<fs::path> dirs;
  for (const auto& entry : fs::directory_iterator(points))
    if (entry.is_directory()) dirs.push_back(entry.path());
  std::sort(dirs.begin(), dirs.end());
  for (const auto& dir : dirs) {
    const fs::path metrics_path = dir / "metrics.json";
    if (!fs::exists(metrics_path)) continue;
    std::ifstream in(metrics_path);
    PointRow row;
    in >> row.metrics;
    row.id = row.metrics.at("point_id").get<std::string>();
    row.point = row.metrics.at("point");
    row.overall = row.metrics.at("overall_loss").get<double>();
    rows.push_back(std::move(row));
  }
  return rows;
}

// Monotonicity over a lambda sweep: domain-A forgetting must not increase and
// domain-B final loss must not decrease with lambda; one adjacent violation
// is tolerated per sequence.
bool mostly_monotone(const std::vector<double>& v, bool non_increasing) {
  int violations = 0;
  for (size_t i = 1; i < v.size(); ++i) {
    const bool bad = non_increasing ? v[i] > v[i - 1] : v[i] < v[i - 1];
    if (bad) ++violations;
  }
  return violations <= 1;
}

json lambda_sweep_checks(const std::vector<PointRow>& rows, const std::string& first_domain,
                         const std::string& last_domain) {
  // Group ewc points by everything except lambda.
  std::map<std::string, std::vector<const PointRow*>> groups;
  for (const auto& row : rows) {
    if (row.point.at("mode").get<std::string>() != "ewc") continue;
    std::ostringstream key;
    key << row.point.at("strategy").get<std::string>() << "|"
        << row.point.at("fisher_fraction").get<double>() << "|"
        << row.point.at("pca_dim").get<size_t>() << "|" << row.point.at("gmm_k").get<size_t>()
        << "|seed" << row.point.at("seed").get<uint64_t>();
    groups[key.str()].push_back(&row);
  }
  json checks = json::array();
  for (auto& [key, members] : groups) {
    if (members.size() < 2) continue;
    std::sort(members.begin(), members.end(), [](const PointRow* a, const PointRow* b) {
      return a->point.at("lambda").get<double>() < b->point.at("lambda").get<double>();
    });
    std::vector<double> lambdas, forgetting, final_b;
    for (const auto* m : members) {
      lambdas.push_back(m->point.at("lambda").get<double>());
      forgetting.push_back(m->metrics.at("forgetting").at(first_domain).get<double>());
      final_b.push_back(m->metrics.at("final_loss").at(last_domain).get<double>());
    }
    json c;
    c["group"] = key;
    c["lambdas"] = lambdas;
    c["forgetting_" + first_domain] = forgetting;
    c["final_" + last_domain] = final_b;
    c["forgetting_non_increasing"] = mostly_monotone(forgetting, true);
    c["final_non_decreasing"] = mostly_monotone(final_b, false);
    c["pass"] = c["forgetting_non_increasing"].get<bool>() &&
                c["final_non_decreasing"].get<bool>();
    checks.push_back(c);
  }
  return checks;
}

std::string fmt(double v) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(4) << v;
  return os.str();
}

}  // namespace

void write_run_report(const std::string& run_dir) {
  std::vector<std::string> domains;
  {
    std::ifstream cin(run_dir + "/config.json");
    if (cin) {
      json cj;
      cin >> cj;
      domains = cj.at("domains").get<std::vector<std::string>>();
    }
  }
  auto rows = collect_points(run_dir);
  std::sort(rows.begin(), rows.end(),
            [](const PointRow& a, const PointRow& b) { return a.overall < b.overall; });

  json report;
  report["run_dir"] = run_dir;
  json jrows = json::array();
  for (const auto& row : rows) {
    json r;
    r["point_id"] = row.id;
    r["point"] = row.point;
    r["base_loss"] = row.metrics.at("base_loss");
    r["final_loss"] = row.metrics.at("final_loss");
    r["forgetting"] = row.metrics.at("forgetting");
    r["overall_loss"] = row.metrics.at("overall_loss");
    if (row.metrics.contains("probe")) r["probe"] = row.metrics.at("probe");
    r["base_checkpoint"] = row.metrics.at("base_checkpoint");
    r["stages"] = row.metrics.at("stages");
    jrows.push_back(r);
  }
  report["rows"] = jrows;
  if (!domains.empty() && !rows.empty())
    report["lambda_sweep"] = lambda_sweep_checks(rows, domains.front(), domains.back());

  {
    std::ofstream out(run_dir + "/report.json");
    out << report.dump(2) << "\n";
  }

  // CSV: one row per point, final losses and deltas per domain.
  {
    std::ofstream out(run_dir + "/report.csv");
    out << "point_id,mode,lambda,rho,fisher_fraction,replay_ratio,strategy,seed";
    for (const auto& d : domains) out << ",final_" << d << ",forgetting_" << d;
    out << ",overall_loss\n";
    out.precision(17);
    for (const auto& row : rows) {
      out << row.id << "," << row.point.at("mode").get<std::string>() << ","
          << row.point.at("lambda").get<double>() << "," << row.point.at("rho").get<double>()
          << "," << row.point.at("fisher_fraction").get<double>() << ","
          << row.point.at("replay_ratio").get<double>() << ","
          << row.point.at("strategy").get<std::string>() << ","
          << row.point.at("seed").get<uint64_t>();
      for (const auto& d : domains) {
        out << "," << row.metrics.at("final_loss").at(d).get<double>() << ","
            << row.metrics.at("forgetting").at(d).get<double>();
      }
      out << "," << row.overall << "\n";
    }
  }

  // Human table, ranked by overall loss (lower is better).
  {
    std::ofstream out(run_dir + "/report.txt");
    out << std::left << std::setw(34) << "point" << std::setw(14) << "mode";
    for (const auto& d : domains) out << std::right << std::setw(12) << (d + " loss");
    for (const auto& d : domains) out << std::right << std::setw(12) << ("d " + d);
    out << std::right << std::setw(12) << "overall" << "\n";
    out << std::string(34 + 14 + domains.size() * 24 + 12, '-') << "\n";
    for (const auto& row : rows) {
      out << std::left << std::setw(34) << row.id << std::setw(14)
          << row.point.at("mode").get<std::string>();
      for (const auto& d : domains)
        out << std::right << std::setw(12)
            << fmt(row.metrics.at("final_loss").at(d).get<double>());
      for (const auto& d : domains)
        out << std::right << std::setw(12)
            << fmt(row.metrics.at("forgetting").at(d).get<double>());
      out << std::right << std::setw(12) << fmt(row.overall) << "\n";
    }
    if (report.contains("lambda_sweep")) {
      out << "\nlambda sweep checks (forgetting non-increasing / final non-decreasing):\n";
      for (const auto& c : report.at("lambda_sweep")) {
        out << "  [" << (c.at("pass").get<bool>() ? "pass" : "FAIL") << "] "
            << c.at("group").get<std::string>() << "\n";
      }
    }
  }
}

}  // namespace mdpt::harness
