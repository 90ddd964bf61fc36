#pragma once

#include <map>
#include <string>

namespace mdpt::analysis {

// How to convert a metric into an error value for relative-error reporting:
// complement-of-100 for percentage scores, identity for loss-like metrics.
enum class ErrorConvention { kComplement100, kIdentity };

// Per-task delta rows in the motivation-table layout. Task keys may carry a
// "domain/" prefix; per-domain averages group by that prefix.
struct ExperimentReport {
  std::map<std::string, double> before;
  std::map<std::string, double> after;
  std::map<std::string, double> delta;  // before - after; positive = dropped
  std::map<std::string, double> domain_avg_before;
  std::map<std::string, double> domain_avg_after;
  std::map<std::string, double> domain_avg_delta;
  // (err_after - err_before) / err_before per task; emitted only where the
  // baseline error is positive.
  std::map<std::string, double> relative_error_increase;
  ErrorConvention convention = ErrorConvention::kComplement100;
};

ExperimentReport forgetting_report(const std::map<std::string, double>& before,
                                   const std::map<std::string, double>& after,
                                   ErrorConvention convention = ErrorConvention::kComplement100);

std::string report_table(const ExperimentReport& report);      // aligned text
std::string report_json(const ExperimentReport& report);       // machine form
void write_report(const ExperimentReport& report, const std::string& path_prefix);

}  // namespace mdpt::analysis
