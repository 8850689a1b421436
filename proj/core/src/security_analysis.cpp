#include "topost/security_analysis.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <exception>
#include <mutex>
#include <thread>

#include "topost/dc_solver.hpp"
#include "topost/errors.hpp"

namespace topost {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

bool recoverable(ErrorKind kind) {
  return kind == ErrorKind::singular_matrix || kind == ErrorKind::degenerate_observable ||
         kind == ErrorKind::self_check_failed || kind == ErrorKind::islanding_outage ||
         kind == ErrorKind::singular_system;
}

void finish(ScreeningReport& report, std::size_t branches) {
  report.worst_abs_flow.assign(branches, 0.0);
  for (const auto& r : report.results) {
    if (r.status != ContingencyStatus::ok) continue;
    for (std::size_t l = 0; l < branches; ++l) {
      report.worst_abs_flow[l] = std::max(report.worst_abs_flow[l], std::abs(r.flows[l]));
    }
  }
}

void require_known(const Grid& grid, const std::vector<std::string>& contingencies) {
  for (const auto& id : contingencies) (void)grid.branch_index(id);
}

}  // namespace

std::string_view to_string(ContingencyStatus status) {
  switch (status) {
    case ContingencyStatus::ok: return "ok";
    case ContingencyStatus::islanding: return "islanding";
    case ContingencyStatus::degenerate: return "degenerate";
    case ContingencyStatus::skipped: return "skipped";
    case ContingencyStatus::independent: return "independent";
  }
  return "?";
}

std::size_t ScreeningReport::count(ContingencyStatus status) const {
  return static_cast<std::size_t>(
      std::count_if(results.begin(), results.end(), [&](const auto& r) { return r.status == status; }));
}

double ScreeningReport::median_beta_seconds() const {
  std::vector<double> t;
  for (std::size_t i = 0; i < results.size() && i < timing.per_contingency_beta.size(); ++i) {
    if (results[i].status == ContingencyStatus::ok) t.push_back(timing.per_contingency_beta[i]);
  }
  if (t.empty()) return 0.0;
  std::nth_element(t.begin(), t.begin() + static_cast<std::ptrdiff_t>(t.size() / 2), t.end());
  return t[t.size() / 2];
}

void parallel_for(std::size_t n, unsigned jobs, const std::function<void(std::size_t)>& fn) {
  const auto workers = static_cast<std::size_t>(std::max(1u, jobs));
  if (workers == 1 || n <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  auto work = [&] {
    for (std::size_t i = next++; i < n; i = next++) {
      try {
        fn(i);
      } catch (...) {
        std::lock_guard lock(failure_mutex);
        if (!failure) failure = std::current_exception();
      }
    }
  };
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w < std::min(workers, n); ++w) pool.emplace_back(work);
  for (auto& t : pool) t.join();
  if (failure) std::rethrow_exception(failure);
}

ScreeningReport run_n1(const Grid& reference, const ChangeSet& action, const std::vector<std::string>& contingencies,
                       const ScreeningOptions& options) {
  const auto start = Clock::now();
  require_known(reference, contingencies);
  const Grid target = apply_change_set(reference, action);
  const auto target_bridges = bridge_branches(target);

  const DcFactorization fact(std::make_shared<const Grid>(reference));
  const SolvedState ref_state = fact.solve();
  const StBasis basis = build_basis(fact, action);
  const auto ref_bridges = bridge_branches(reference);
  std::optional<CoefficientSystem> action_system;
  try {
    action_system = coefficient_matrix(basis);
  } catch (const Error& e) {
    if (!recoverable(e.kind())) throw;
  }

  ScreeningReport report;
  report.method = "ext_st";
  report.timing.basis = seconds_since(start);
  report.results.resize(contingencies.size());
  std::vector<double> unitary(contingencies.size(), 0.0);
  std::vector<double> beta(contingencies.size(), 0.0);
  std::vector<double> superpose(contingencies.size(), 0.0);

  parallel_for(contingencies.size(), options.jobs, [&](std::size_t i) {
    auto& res = report.results[i];
    res.branch = contingencies[i];
    const auto idx = target.branch_index(res.branch);
    if (!target.branches()[idx].connected()) {
      res.status = ContingencyStatus::skipped;
      res.detail = "branch is open in the target topology";
      return;
    }
    if (target_bridges[idx]) {
      res.status = ContingencyStatus::islanding;
      res.detail = "outage islands the target topology";
      return;
    }
    try {
      auto t = Clock::now();
      StBasis local = basis;
      bool closes_action_reconnect = false;
      for (std::size_t k = 0; k < action.size(); ++k) {
        const auto* r = std::get_if<Reconnect>(&action[k]);
        if (r && r->branch == res.branch) {
          std::vector<std::size_t> keep;
          for (std::size_t j = 0; j < action.size(); ++j) {
            if (j != k) keep.push_back(j);
          }
          local = basis.subset(keep);
          closes_action_reconnect = true;
        }
      }
      if (!closes_action_reconnect) {
        if (ref_bridges[idx]) {
          res.status = ContingencyStatus::degenerate;
          res.detail = "outage islands the reference topology; no unitary state exists";
          return;
        }
        const TopologyChange outage = Disconnect{res.branch};
        local = basis.with(BasisEntry{outage, std::make_shared<const SolvedState>(outage_state(fact, ref_state, idx)),
                                      Observable::for_change(reference, outage)});
      }
      unitary[i] = seconds_since(t);

      t = Clock::now();
      const auto solution = solve_betas(closes_action_reconnect || !action_system
                                            ? coefficient_matrix(local)
                                            : extend_coefficients(*action_system, local));
      beta[i] = seconds_since(t);
      res.betas = solution.betas;
      res.alpha = solution.alpha;
      if (options.independence_filter) {
        const double eps = *options.independence_filter;
        const bool all_one = std::all_of(solution.betas.begin(), solution.betas.end(),
                                         [&](double b) { return std::abs(b - 1.0) <= eps; });
        if (all_one) {
          res.status = ContingencyStatus::independent;
          return;
        }
      }
      t = Clock::now();
      res.flows = superpose_flows(local, solution);
      superpose[i] = seconds_since(t);
      res.status = ContingencyStatus::ok;
    } catch (const Error& e) {
      if (!recoverable(e.kind())) throw;
      res.status = ContingencyStatus::degenerate;
      res.flows.clear();
      res.detail = e.what();
    }
  });

  for (std::size_t i = 0; i < contingencies.size(); ++i) {
    report.timing.unitary += unitary[i];
    report.timing.beta += beta[i];
    report.timing.superpose += superpose[i];
  }
  report.timing.per_contingency_beta = std::move(beta);
  finish(report, reference.branch_count());
  report.timing.total = seconds_since(start);
  return report;
}

ScreeningReport run_n1_baseline(const Grid& reference, const ChangeSet& action,
                                const std::vector<std::string>& contingencies, unsigned jobs) {
  const auto start = Clock::now();
  require_known(reference, contingencies);
  const Grid target = apply_change_set(reference, action);

  ScreeningReport report;
  report.method = "oracle";
  report.results.resize(contingencies.size());
  std::vector<double> solve(contingencies.size(), 0.0);
  parallel_for(contingencies.size(), jobs, [&](std::size_t i) {
    auto& res = report.results[i];
    res.branch = contingencies[i];
    if (!target.branches()[target.branch_index(res.branch)].connected()) {
      res.status = ContingencyStatus::skipped;
      res.detail = "branch is open in the target topology";
      return;
    }
    const auto t = Clock::now();
    const TopologyChange outage = Disconnect{res.branch};
    try {
      res.flows = solve_dc(apply_change_set(target, std::span(&outage, 1))).flow;
      res.status = ContingencyStatus::ok;
    } catch (const Error& e) {
      if (e.kind() != ErrorKind::grid_disconnected && e.kind() != ErrorKind::singular_system) throw;
      res.status = ContingencyStatus::islanding;
      res.detail = e.what();
    }
    solve[i] = seconds_since(t);
  });
  report.timing.per_contingency_beta = std::move(solve);
  finish(report, reference.branch_count());
  report.timing.total = seconds_since(start);
  return report;
}

OracleDiff compare_reports(const ScreeningReport& st, const ScreeningReport& oracle) {
  if (st.results.size() != oracle.results.size()) {
    throw Error(ErrorKind::invalid_argument, "reports cover different contingency lists");
  }
  OracleDiff diff;
  double sum = 0.0;
  std::size_t values = 0;
  for (std::size_t i = 0; i < st.results.size(); ++i) {
    const auto& a = st.results[i];
    const auto& b = oracle.results[i];
    if (a.status == ContingencyStatus::independent) continue;
    if (a.status != b.status) {
      diff.status_mismatches.push_back(a.branch);
      continue;
    }
    if (a.status != ContingencyStatus::ok) continue;
    ++diff.compared;
    for (std::size_t l = 0; l < a.flows.size(); ++l) {
      const double d = std::abs(a.flows[l] - b.flows[l]);
      diff.max_abs_diff = std::max(diff.max_abs_diff, d);
      sum += d;
      ++values;
    }
  }
  diff.mean_abs_diff = values ? sum / static_cast<double>(values) : 0.0;
  diff.st_seconds = st.timing.total;
  diff.oracle_seconds = oracle.timing.total;
  return diff;
}

OracleDiff compare_with_oracle(const ScreeningReport& report, const Grid& reference, const ChangeSet& action,
                               const std::vector<std::string>& contingencies) {
  return compare_reports(report, run_n1_baseline(reference, action, contingencies));
}

}  // namespace topost
