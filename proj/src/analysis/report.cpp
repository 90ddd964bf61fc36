#include "mdpt/analysis/report.hpp"

#include <json.hpp>

#include <fstream>
#include <iomanip>
#include <sstream>
#include <stdexcept>

namespace mdpt::analysis {

namespace {

std::string domain_of(const std::string& task) {
  const size_t slash = task.find('/');
  return slash == std::string::npos ? task : task.substr(0, slash);
}

double error_of(double metric, ErrorConvention conv) {
  return conv == ErrorConvention::kComplement100 ? 100.0 - metric : metric;
}

}  // namespace

ExperimentReport forgetting_report(const std::map<std::string, double>& before,
                                   const std::map<std::string, double>& after,
                                   ErrorConvention convention) {
  if (before.size() != after.size())
    throw std::invalid_argument("forgetting_report: task key sets differ in size");
  ExperimentReport r;
  r.convention = convention;
  r.before = before;
  r.after = after;

  std::map<std::string, std::pair<double, size_t>> dom_before, dom_after;
  for (const auto& [task, b] : before) {
    auto it = after.find(task);
    if (it == after.end())
      throw std::invalid_argument("forgetting_report: task " + task + " missing in after map");
    const double a = it->second;
    r.delta[task] = b - a;
    const std::string dom = domain_of(task);
    dom_before[dom].first += b;
    dom_before[dom].second += 1;
    dom_after[dom].first += a;
    dom_after[dom].second += 1;
    const double err_b = error_of(b, convention);
    const double err_a = error_of(a, convention);
    if (err_b > 0.0) r.relative_error_increase[task] = (err_a - err_b) / err_b;
  }
  for (const auto& [dom, acc] : dom_before) {
    const double avg_b = acc.first / static_cast<double>(acc.second);
    const double avg_a = dom_after[dom].first / static_cast<double>(dom_after[dom].second);
    r.domain_avg_before[dom] = avg_b;
    r.domain_avg_after[dom] = avg_a;
    r.domain_avg_delta[dom] = avg_b - avg_a;
  }
  return r;
}

std::string report_table(const ExperimentReport& r) {
  size_t width = 10;
  for (const auto& [task, v] : r.before) width = std::max(width, task.size() + 2);
  std::ostringstream os;
  os << std::left << std::setw(static_cast<int>(width)) << "Task" << std::right
     << std::setw(12) << "Before" << std::setw(12) << "After" << std::setw(12) << "Delta"
     << "\n";
  os << std::string(width + 36, '-') << "\n";
  os << std::fixed << std::setprecision(4);
  for (const auto& [task, b] : r.before) {
    os << std::left << std::setw(static_cast<int>(width)) << task << std::right
       << std::setw(12) << b << std::setw(12) << r.after.at(task) << std::setw(12)
       << r.delta.at(task) << "\n";
  }
  os << std::string(width + 36, '-') << "\n";
  for (const auto& [dom, b] : r.domain_avg_before) {
    os << std::left << std::setw(static_cast<int>(width)) << (dom + " avg") << std::right
       << std::setw(12) << b << std::setw(12) << r.domain_avg_after.at(dom) << std::setw(12)
       << r.domain_avg_delta.at(dom) << "\n";
  }
  return os.str();
}

std::string report_json(const ExperimentReport& r) {
  nlohmann::json j;
  j["before"] = r.before;
  j["after"] = r.after;
  j["delta"] = r.delta;
  j["domain_avg_before"] = r.domain_avg_before;
  j["domain_avg_after"] = r.domain_avg_after;
  j["domain_avg_delta"] = r.domain_avg_delta;
  j["relative_error_increase"] = r.relative_error_increase;
  j["error_convention"] =
      r.convention == ErrorConvention::kComplement100 ? "complement_100" : "identity";
  return j.dump(2);
}

void write_report(const ExperimentReport& r, const std::string& path_prefix) {
  {
    std::ofstream out(path_prefix + ".json");
    if (!out) throw std::runtime_error("cannot write report: " + path_prefix + ".json");
    out << report_json(r) << "\n";
  }
  {
    std::ofstream out(path_prefix + ".txt");
    if (!out) throw std::runtime_error("cannot write report: " + path_prefix + ".txt");
    out << report_table(r);
  }
}

}  // namespace mdpt::analysis
