#include "cli.hpp"

#include <CLI11.hpp>
#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <random>
#include <sstream>

#include "topost/case_io.hpp"
#include "topost/dc_solver.hpp"
#include "topost/errors.hpp"
#include "topost/random_actions.hpp"
#include "topost/security_analysis.hpp"
#include "topost/superposition.hpp"

namespace topost::cli {

namespace fs = std::filesystem;

namespace {

using Clock = std::chrono::steady_clock;

int exit_code_for(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::parse_error:
    case ErrorKind::schema_error:
    case ErrorKind::unknown_id:
    case ErrorKind::unsupported_feature:
    case ErrorKind::duplicate_change:
    case ErrorKind::invalid_argument:
      return exit_parse;
    default:
      return exit_topology;
  }
}

/// Warm-up, then the median wall time of `reps` runs.
template <class F>
double median_seconds(int reps, F&& fn) {
  fn();
  std::vector<double> t;
  for (int r = 0; r < std::max(reps, 1); ++r) {
    const auto start = Clock::now();
    fn();
    t.push_back(std::chrono::duration<double>(Clock::now() - start).count());
  }
  std::nth_element(t.begin(), t.begin() + static_cast<std::ptrdiff_t>(t.size() / 2), t.end());
  return t[t.size() / 2];
}

// Output sinks: the main table goes to --out or stdout, side tables to
// "<out>.<suffix>.csv" or stderr.
class Sinks {
 public:
  Sinks(const CliConfig& config, std::ostream& out, std::ostream& err) : config_(config), out_(out), err_(err) {
    if (config.out_path) {
      main_.open(*config.out_path);
      if (!main_) throw Error(ErrorKind::invalid_argument, "cannot write " + *config.out_path);
    }
  }

  std::ostream& main() { return config_.out_path ? static_cast<std::ostream&>(main_) : out_; }

  void side(const std::string& suffix, const std::string& text) {
    if (!config_.out_path) {
      err_ << text;
      return;
    }
    fs::path p(*config_.out_path);
    p.replace_extension();
    std::ofstream f(p.string() + "." + suffix + ".csv");
    f << text;
  }

 private:
  const CliConfig& config_;
  std::ostream& out_;
  std::ostream& err_;
  std::ofstream main_;
};

struct Problem {
  std::string name;
  Grid reference;
  ChangeSet changes;
  ScenarioFile scenario;
};

std::string stem(const std::string& path) { return fs::path(path).stem().string(); }

Problem load_problem(const CliConfig& config, int default_changes) {
  Problem p;
  if (config.scenario_path) {
    std::optional<fs::path> override_path;
    if (config.case_path) override_path = *config.case_path;
    auto loaded = read_scenario(*config.scenario_path, override_path);
    p.name = loaded.scenario.name;
    p.reference = std::move(loaded.reference);
    p.changes = loaded.scenario.changes;
    p.scenario = std::move(loaded.scenario);
    return p;
  }
  if (!config.case_path) throw Error(ErrorKind::invalid_argument, "--case or --scenario is required");
  std::vector<std::string> warnings;
  p.reference = read_matpower(*config.case_path, &warnings);
  p.name = stem(*config.case_path);
  p.scenario.name = p.name;
  p.scenario.all_contingencies = true;
  const int size = config.changes >= 0 ? config.changes : default_changes;
  if (size > 0) {
    std::mt19937_64 rng(config.seed);
    const ChangeKind kinds[] = {ChangeKind::disconnect, ChangeKind::split};
    auto set = random_change_set(p.reference, static_cast<std::size_t>(size), rng, kinds);
    if (!set) throw Error(ErrorKind::invalid_argument, "no connected random change set found");
    p.changes = std::move(*set);
  }
  return p;
}

double tolerance_of(const CliConfig& config, const Problem& p) {
  return config.tolerance.value_or(p.scenario.options.tolerance);
}

std::string join_changes(const ChangeSet& changes) {
  std::string s;
  for (const auto& c : changes) s += (s.empty() ? "" : " ") + describe(c);
  return s.empty() ? "(none)" : s;
}

}  // namespace

int cmd_solve(const CliConfig& config, std::ostream& out, std::ostream& err) {
  const Problem p = load_problem(config, 0);
  const auto target = std::make_shared<const Grid>(apply_change_set(p.reference, p.changes));
  const auto state = solve_dc(target);
  std::vector<FlowRow> rows;
  for (std::size_t l = 0; l < target->branch_count(); ++l) {
    rows.push_back({p.name, target->branches()[l].id, "oracle", state.flow[l], 0.0});
  }
  Sinks sinks(config, out, err);
  write_flow_csv(sinks.main(), rows);
  return exit_ok;
}

int cmd_apply(const CliConfig& config, std::ostream& out, std::ostream& err) {
  const Problem p = load_problem(config, 2);
  const double tol = tolerance_of(config, p);
  auto reference = std::make_shared<const Grid>(p.reference);

  const auto oracle_grid = std::make_shared<const Grid>(apply_change_set(*reference, p.changes));
  const auto oracle = solve_dc(oracle_grid);
  const auto st = evaluate_change_set(reference, p.changes);

  std::vector<FlowRow> rows;
  double worst = 0.0;
  for (std::size_t l = 0; l < reference->branch_count(); ++l) {
    const double diff = std::abs(st.state.flow[l] - oracle.flow[l]);
    worst = std::max(worst, diff);
    const auto& id = reference->branches()[l].id;
    rows.push_back({p.name, id, "ext_st", st.state.flow[l], diff});
    rows.push_back({p.name, id, "oracle", oracle.flow[l], diff});
  }

  const double t_st = median_seconds(config.reps, [&] {
    auto solution = solve_betas(coefficient_matrix(st.basis));
    return superpose_flows(st.basis, solution).size();
  });
  const double t_basis = median_seconds(config.reps, [&] { return build_basis(reference, p.changes).size(); });
  const double t_oracle = median_seconds(config.reps, [&] {
    auto grid = std::make_shared<const Grid>(apply_change_set(*reference, p.changes));
    return solve_dc(grid).flow.size();
  });

  Sinks sinks(config, out, err);
  write_flow_csv(sinks.main(), rows);
  std::ostringstream timing;
  write_timing_csv(timing, {{p.name, "ext_st", t_st}, {p.name, "ext_st_basis", t_basis}, {p.name, "oracle", t_oracle}});
  sinks.side("timing", timing.str());
  err << "changes: " << join_changes(p.changes) << "\n"
      << "max_abs_diff: " << format_number(worst) << " (tolerance " << format_number(tol) << ")\n"
      << "speedup: " << format_number(t_oracle / t_st) << "\n";
  if (!(worst <= tol)) {
    err << "error: superposed flows differ from the full re-solve beyond tolerance\n";
    return exit_tolerance;
  }
  return exit_ok;
}

int cmd_betas(const CliConfig& config, std::ostream& out, std::ostream& err) {
  const Problem p = load_problem(config, 2);
  const double tol = tolerance_of(config, p);
  auto reference = std::make_shared<const Grid>(p.reference);
  const auto st = evaluate_change_set(reference, p.changes);
  const auto oracle = solve_dc(std::make_shared<const Grid>(apply_change_set(*reference, p.changes)));
  double worst = 0.0;
  for (std::size_t l = 0; l < oracle.flow.size(); ++l) {
    worst = std::max(worst, std::abs(st.state.flow[l] - oracle.flow[l]));
  }

  const auto& sol = st.solution;
  const auto independent = independent_changes(sol);
  Sinks sinks(config, out, err);
  auto& o = sinks.main();
  o << "change,kind,beta,independent\n";
  for (std::size_t k = 0; k < sol.betas.size(); ++k) {
    const auto& c = st.basis.entries()[k].change;
    o << describe(c) << ',' << to_string(kind_of(c)) << ',' << format_number(sol.betas[k]) << ','
      << (independent[k] ? "yes" : "no") << '\n';
  }
  o << "alpha,reference," << format_number(sol.alpha) << ",\n";
  o << "interacting_a,interacting_b,coupling\n";
  for (std::size_t i = 0; i < sol.betas.size(); ++i) {
    for (std::size_t j = i + 1; j < sol.betas.size(); ++j) {
      const auto ii = static_cast<Eigen::Index>(i);
      const auto jj = static_cast<Eigen::Index>(j);
      const double coupling = std::max(std::abs(sol.matrix(ii, jj)), std::abs(sol.matrix(jj, ii)));
      if (coupling > independence_threshold) {
        o << describe(st.basis.entries()[i].change) << ',' << describe(st.basis.entries()[j].change) << ','
          << format_number(coupling) << '\n';
      }
    }
  }
  err << "max_abs_diff: " << format_number(worst) << "\n";
  return worst <= tol ? exit_ok : exit_tolerance;
}

int cmd_n1(const CliConfig& config, std::ostream& out, std::ostream& err) {
  const Problem p = load_problem(config, 0);
  const double tol = tolerance_of(config, p);
  const Grid target = apply_change_set(p.reference, p.changes);
  const auto contingencies = scenario_contingencies(p.scenario, target);

  ScreeningOptions options;
  options.jobs = config.jobs;
  options.independence_filter = config.filter ? config.filter : p.scenario.options.independence_filter;
  const auto report = run_n1(p.reference, p.changes, contingencies, options);
  std::optional<ScreeningReport> baseline;
  if (config.oracle) baseline = run_n1_baseline(p.reference, p.changes, contingencies, config.jobs);

  std::vector<FlowRow> rows;
  for (std::size_t i = 0; i < report.results.size(); ++i) {
    const auto& r = report.results[i];
    if (r.status != ContingencyStatus::ok) continue;
    const std::string label = p.name + "/" + r.branch;
    const bool compare = baseline && baseline->results[i].status == ContingencyStatus::ok;
    for (std::size_t l = 0; l < r.flows.size(); ++l) {
      const double ref = compare ? baseline->results[i].flows[l] : r.flows[l];
      const double diff = std::abs(r.flows[l] - ref);
      const auto& id = p.reference.branches()[l].id;
      rows.push_back({label, id, "ext_st", r.flows[l], diff});
      if (compare) rows.push_back({label, id, "oracle", ref, diff});
    }
  }

  Sinks sinks(config, out, err);
  write_flow_csv(sinks.main(), rows);

  std::ostringstream status;
  status << "case,contingency,status,alpha,betas\n";
  for (const auto& r : report.results) {
    status << p.name << ',' << r.branch << ',' << to_string(r.status) << ','
           << (r.betas.empty() ? "" : format_number(r.alpha)) << ',';
    for (std::size_t k = 0; k < r.betas.size(); ++k) status << (k ? " " : "") << format_number(r.betas[k]);
    status << '\n';
  }
  sinks.side("status", status.str());

  std::vector<TimingRow> timing{{p.name, "ext_st", report.timing.total},
                                {p.name, "ext_st_basis", report.timing.basis},
                                {p.name, "ext_st_beta_median", report.median_beta_seconds()}};
  if (baseline) timing.push_back({p.name, "oracle", baseline->timing.total});
  std::ostringstream t;
  write_timing_csv(t, timing);
  sinks.side("timing", t.str());

  err << "action: " << join_changes(p.changes) << "\n"
      << "contingencies: " << contingencies.size() << " ok=" << report.count(ContingencyStatus::ok)
      << " islanding=" << report.count(ContingencyStatus::islanding)
      << " degenerate=" << report.count(ContingencyStatus::degenerate)
      << " skipped=" << report.count(ContingencyStatus::skipped)
      << " independent=" << report.count(ContingencyStatus::independent) << "\n";
  if (baseline) {
    const auto diff = compare_reports(report, *baseline);
    err << "max_abs_diff: " << format_number(diff.max_abs_diff) << " (tolerance " << format_number(tol) << ")\n";
    for (const auto& m : diff.status_mismatches) err << "warning: status differs from the oracle for " << m << "\n";
    if (!(diff.max_abs_diff <= tol)) {
      err << "error: screening flows differ from the full re-solve beyond tolerance\n";
      return exit_tolerance;
    }
  }
  return exit_ok;
}

int cmd_bench(const CliConfig& config, std::ostream& out, std::ostream& err) {
  auto cases = config.cases;
  if (cases.empty() && config.case_path) cases.push_back(*config.case_path);
  if (cases.empty()) throw Error(ErrorKind::invalid_argument, "bench needs --cases");

  struct Entry {
    std::string name;
    std::size_t buses;
    double st, baseline, st_beta;
  };
  std::vector<Entry> entries;
  for (const auto& path : cases) {
    CliConfig one = config;
    one.scenario_path.reset();
    one.case_path = path;
    const Problem p = load_problem(one, 2);
    const Grid target = apply_change_set(p.reference, p.changes);
    const auto contingencies = scenario_contingencies(p.scenario, target);
    ScreeningOptions options;
    options.jobs = config.jobs;
    double beta = 0.0;
    const double st = median_seconds(config.reps, [&] {
      auto r = run_n1(p.reference, p.changes, contingencies, options);
      beta = r.median_beta_seconds();
    });
    const double base = median_seconds(config.reps, [&] {
      run_n1_baseline(p.reference, p.changes, contingencies, config.jobs);
    });
    entries.push_back({p.name, p.reference.bus_count(), st, base, beta});
    err << p.name << ": " << p.reference.bus_count() << " buses, action " << join_changes(p.changes) << ", "
        << contingencies.size() << " contingencies, speedup " << format_number(base / st) << "\n";
  }
  std::stable_sort(entries.begin(), entries.end(), [](const Entry& a, const Entry& b) { return a.buses < b.buses; });

  std::vector<TimingRow> rows;
  std::ostringstream plot;
  plot << "buses,method,seconds\n";
  for (const auto& e : entries) {
    rows.push_back({e.name, "ext_st", e.st});
    rows.push_back({e.name, "baseline", e.baseline});
    plot << e.buses << ",ext_st," << format_number(e.st) << '\n';
    plot << e.buses << ",baseline," << format_number(e.baseline) << '\n';
  }
  Sinks sinks(config, out, err);
  write_timing_csv(sinks.main(), rows);
  sinks.side("plot", plot.str());
  std::ostringstream beta;
  beta << "case,method,seconds\n";
  for (const auto& e : entries) beta << e.name << ",ext_st_beta_median," << format_number(e.st_beta) << '\n';
  sinks.side("beta", beta.str());
  return exit_ok;
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"DC power flow under topology changes via the extended superposition theorem", "topost"};
  app.require_subcommand(1);
  CliConfig config;

  auto common = [&](CLI::App* sub) {
    sub->add_option("--case", config.case_path, "MATPOWER case file");
    sub->add_option("--scenario", config.scenario_path, "scenario JSON");
    sub->add_option("--out", config.out_path, "output CSV (default stdout)");
    sub->add_option("--tol", config.tolerance, "max |ST - oracle| flow difference, per-unit")
        ->check(CLI::PositiveNumber);
    sub->add_option("--jobs", config.jobs, "worker threads")->check(CLI::Range(1u, 1024u));
    sub->add_option("--seed", config.seed, "seed for random actions");
    sub->add_option("--changes", config.changes, "random action size when no scenario is given")
        ->check(CLI::NonNegativeNumber);
    sub->add_option("--reps", config.reps, "timing repetitions after one warm-up")->check(CLI::Range(1, 1000));
  };
  auto* solve = app.add_subcommand("solve", "full DC solve, one flow row per branch");
  auto* apply = app.add_subcommand("apply", "superposition vs full re-solve for a change set");
  auto* betas = app.add_subcommand("betas", "beta coefficients and independence flags");
  auto* n1 = app.add_subcommand("n1", "N-1 screening after the action");
  auto* bench = app.add_subcommand("bench", "N-1 timing, superposition vs refactorization per contingency");
  for (auto* sub : {solve, apply, betas, n1, bench}) common(sub);
  n1->add_option("--filter", config.filter, "skip contingencies whose betas all stay within epsilon of 1")
      ->expected(0, 1)
      ->default_str(format_number(default_filter_epsilon));
  n1->add_flag("!--no-oracle", config.oracle, "skip the full re-solve comparison");
  bench->add_option("--cases", config.cases, "case files")->check(CLI::ExistingFile);

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    for (auto* sub : app.get_subcommands()) out << sub->help();
    return exit_ok;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n";
    return exit_parse;
  }
  if (n1->count("--filter") && !config.filter) config.filter = default_filter_epsilon;
  config.subcommand = app.get_subcommands().front()->get_name();

  try {
    if (config.subcommand == "solve") return cmd_solve(config, out, err);
    if (config.subcommand == "apply") return cmd_apply(config, out, err);
    if (config.subcommand == "betas") return cmd_betas(config, out, err);
    if (config.subcommand == "n1") return cmd_n1(config, out, err);
    return cmd_bench(config, out, err);
  } catch (const Error& e) {
    err << "error (" << to_string(e.kind()) << "): " << e.what() << "\n";
    return exit_code_for(e.kind());
  }
}

}  // namespace topost::cli
