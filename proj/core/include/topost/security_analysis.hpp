#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "topost/grid.hpp"
#include "topost/superposition.hpp"

namespace topost {

enum class ContingencyStatus : std::uint8_t {
  ok,
  islanding,    // outage splits the target topology
  degenerate,   // beta system singular or observable vanishing
  skipped,      // branch already open in the target
  independent,  // filter: every |beta - 1| within epsilon, not superposed
};

std::string_view to_string(ContingencyStatus status);

struct ContingencyResult {
  std::string branch;
  ContingencyStatus status = ContingencyStatus::ok;
  std::vector<double> flows;  // per branch of the case, only when ok
  std::vector<double> betas;  // action changes first, contingency last
  double alpha = 0.0;
  std::string detail;
};

struct ScreeningTiming {
  double basis = 0.0;      // reference factorization + action basis
  double unitary = 0.0;    // contingency outage states (sum)
  double beta = 0.0;       // coefficient matrices + solves (sum)
  double superpose = 0.0;  // superposition (sum)
  double total = 0.0;      // wall clock
  std::vector<double> per_contingency_beta;
};

struct ScreeningReport {
  std::string method;
  std::vector<ContingencyResult> results;
  std::vector<double> worst_abs_flow;  // per branch, max over ok results
  ScreeningTiming timing;

  std::size_t count(ContingencyStatus status) const;
  /// Median per-contingency beta time over ok contingencies.
  double median_beta_seconds() const;
};

struct ScreeningOptions {
  unsigned jobs = 1;
  std::optional<double> independence_filter;  // epsilon, e.g. 1e-3
};

inline constexpr double default_filter_epsilon = 1e-3;

/// N-1 screen of the target topology reference + action. One action basis
/// on the reference, one outage state per contingency from the reference
/// factorization, one (N+1) beta system per contingency.
ScreeningReport run_n1(const Grid& reference, const ChangeSet& action, const std::vector<std::string>& contingencies,
                       const ScreeningOptions& options = {});

/// Baseline: apply action + outage and refactorize for every contingency.
ScreeningReport run_n1_baseline(const Grid& reference, const ChangeSet& action,
                                const std::vector<std::string>& contingencies, unsigned jobs = 1);

struct OracleDiff {
  double max_abs_diff = 0.0;
  double mean_abs_diff = 0.0;
  std::size_t compared = 0;
  std::vector<std::string> status_mismatches;
  double st_seconds = 0.0;
  double oracle_seconds = 0.0;
};

OracleDiff compare_with_oracle(const ScreeningReport& report, const Grid& reference, const ChangeSet& action,
                               const std::vector<std::string>& contingencies);
OracleDiff compare_reports(const ScreeningReport& st, const ScreeningReport& oracle);

/// Runs fn(i) for i in [0, n) on up to `jobs` threads.
void parallel_for(std::size_t n, unsigned jobs, const std::function<void(std::size_t)>& fn);

}  // namespace topost
