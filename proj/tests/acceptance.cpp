// Acceptance suite: one PASS/FAIL line per criterion, exit status 1 when any
// criterion fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "cli.hpp"
#include "topost/case_io.hpp"
#include "topost/errors.hpp"
#include "topost/random_actions.hpp"
#include "topost/security_analysis.hpp"
#include "topost/superposition.hpp"

namespace fs = std::filesystem;
using namespace topost;

namespace {

// Pinned tolerances.
constexpr double oracle_bar = 1e-4;
constexpr double oracle_internal_bar = 1e-8;
constexpr double reduction_bar = 1e-10;
constexpr double cancelling_bar = 1e-10;
constexpr double inverse_bar = 1e-9;
constexpr double distant_max = 0.05;
constexpr double close_min = 0.2;
constexpr double beta_growth_max = 3.0;
constexpr int random_sets_per_case = 200;
constexpr int inverse_sets = 50;
constexpr int timing_reps = 3;

struct Outcome {
  bool pass = false;
  std::string detail;
};

fs::path data(const std::string& name) { return fs::path(TOPOST_DATA_DIR) / name; }
Grid load(const std::string& name) { return read_matpower(data(name + ".m")); }

std::string num(double v) { return format_number(v); }

double max_diff(const std::vector<double>& a, const std::vector<double>& b) {
  double worst = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) worst = std::max(worst, std::abs(a[i] - b[i]));
  return worst;
}

template <class F>
double seconds(F&& fn) {
  const auto start = std::chrono::steady_clock::now();
  fn();
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

template <class F>
double median_seconds(int reps, F&& fn) {
  fn();
  std::vector<double> t;
  for (int i = 0; i < reps; ++i) t.push_back(seconds(fn));
  std::sort(t.begin(), t.end());
  return t[t.size() / 2];
}

Outcome oracle_equivalence() {
  double worst = 0.0;
  int sets = 0, failures = 0;
  std::set<ChangeKind> kinds;
  int mixed = 0;
  std::string first_failure;
  for (const char* name : {"case14", "case118"}) {
    const Grid base = load(name);
    std::mt19937_64 rng(2024);
    int made = 0;
    while (made < random_sets_per_case) {
      const auto ref = std::make_shared<const Grid>(apply_change_set(base, random_reference(base, 2, 2, rng)));
      const std::size_t size = 1 + rng() % 4;
      const auto changes = random_change_set(*ref, size, rng);
      if (!changes) continue;
      ++made;
      ++sets;
      std::set<ChangeKind> here;
      for (const auto& c : *changes) here.insert(kind_of(c));
      kinds.insert(here.begin(), here.end());
      if (here.size() > 1) ++mixed;
      try {
        const auto st = evaluate_change_set(ref, *changes);
        const auto oracle = solve_dc(apply_change_set(*ref, *changes));
        worst = std::max(worst, max_diff(st.state.flow, oracle.flow));
      } catch (const Error& e) {
        if (failures++ == 0) first_failure = e.what();
      }
    }
  }
  std::ostringstream d;
  d << sets << " sets, " << kinds.size() << "/4 kinds, " << mixed << " mixed, max |ST - oracle| " << num(worst)
    << " (bar " << num(oracle_bar) << ", internal " << num(oracle_internal_bar) << ")";
  if (failures) d << ", " << failures << " raised: " << first_failure;
  return {failures == 0 && kinds.size() == 4 && mixed > 0 && worst <= oracle_bar, d.str()};
}

Outcome single_change_reductions() {
  const Grid g = load("case14");
  const auto ref = std::make_shared<const Grid>(g);
  const DcFactorization fact(ref);
  const auto ref_state = fact.solve();
  const auto bridges = bridge_branches(g);
  double worst_flow = 0.0, worst_coef = 0.0;
  int checked = 0;
  for (std::size_t o = 0; o < g.branch_count(); ++o) {
    if (bridges[o] || !g.branches()[o].connected()) continue;
    const auto& id = g.branches()[o].id;
    const auto st = evaluate_change_set(ref, ChangeSet{Disconnect{id}});
    worst_coef = std::max({worst_coef, std::abs(st.solution.betas[0] - 1.0), std::abs(st.solution.alpha)});
    const auto row = lodf(fact, id);
    std::vector<double> expected(g.branch_count());
    for (std::size_t l = 0; l < g.branch_count(); ++l) {
      expected[l] = l == o ? 0.0 : ref_state.flow[l] + row.factors[l] * ref_state.flow[o];
    }
    worst_flow = std::max(worst_flow, max_diff(st.state.flow, expected));
    ++checked;
  }
  std::ostringstream d;
  d << checked << " non-bridge outages, max |beta - 1|, |alpha| " << num(worst_coef) << ", max |ST - LODF update| "
    << num(worst_flow) << " (bar " << num(reduction_bar) << ")";
  return {checked > 0 && worst_coef <= reduction_bar && worst_flow <= reduction_bar, d.str()};
}

Outcome cancelling_flow() {
  const Grid g = load("case14");
  std::vector<std::string> live;
  for (const auto& br : g.branches()) {
    if (br.connected()) live.push_back(br.id);
  }
  double worst_flow = 0.0, worst_vt = 0.0;
  int pairs = 0, triples = 0, islanding = 0;
  auto check = [&](const std::vector<std::string>& outages) {
    ChangeSet changes;
    for (const auto& o : outages) changes.push_back(Disconnect{o});
    if (connected_components(apply_change_set_unchecked(g, changes)).count > 1) {
      ++islanding;
      return;
    }
    const auto r = verify_cancelling_flow_model(g, outages);
    worst_flow = std::max(worst_flow, r.max_flow_deviation);
    worst_vt = std::max(worst_vt, r.max_induced_deviation);
    (outages.size() == 2 ? pairs : triples)++;
  };
  const std::size_t n = live.size();
  for (std::size_t a = 0; a < n; ++a) {
    for (std::size_t b = a + 1; b < n; ++b) {
      check({live[a], live[b]});
      for (std::size_t c = b + 1; c < n; ++c) check({live[a], live[b], live[c]});
    }
  }
  std::ostringstream d;
  d << pairs << " pairs, " << triples << " triples (" << islanding << " islanding sets skipped), max flow deviation "
    << num(worst_flow) << ", max |vt + cf| " << num(worst_vt) << " (bar " << num(cancelling_bar) << ")";
  return {pairs > 0 && triples > 0 && worst_flow <= cancelling_bar && worst_vt <= cancelling_bar, d.str()};
}

// Forward pair O = {o1, o2} on the reference, inverse pair C = {reconnect o1,
// reconnect o2} on the target. The unitary state of reconnecting o1 from the
// target is the reference with o2 open, so the coefficients pair up crosswise.
Outcome inverse_pairs() {
  const Grid g = load("case14");
  const auto ref = std::make_shared<const Grid>(g);
  std::mt19937_64 rng(77);
  const ChangeKind only_disconnect[] = {ChangeKind::disconnect};
  double worst = 0.0, worst_same_index = 0.0;
  int checked = 0;
  while (checked < inverse_sets) {
    const auto pair = random_change_set(g, 2, rng, only_disconnect);
    if (!pair) continue;
    const auto fwd = evaluate_change_set(ref, *pair);
    const auto target = std::make_shared<const Grid>(apply_change_set(g, *pair));
    const ChangeSet back{Reconnect{target_of((*pair)[0])}, Reconnect{target_of((*pair)[1])}};
    const auto inv = evaluate_change_set(target, back);
    const auto& o = fwd.solution;
    const auto& c = inv.solution;
    auto rel = [](double got, double want) { return std::abs(got - want) / std::max(1.0, std::abs(want)); };
    worst = std::max({worst, rel(c.alpha, 1.0 / o.alpha), rel(c.betas[0], -o.betas[1] / o.alpha),
                      rel(c.betas[1], -o.betas[0] / o.alpha)});
    worst_same_index = std::max({worst_same_index, rel(c.betas[0], -o.betas[0] / o.alpha),
                                 rel(c.betas[1], -o.betas[1] / o.alpha)});
    ++checked;
  }
  std::ostringstream d;
  d << checked << " disconnection pairs, max deviation of alpha_C = 1/alpha_O and beta_C = -beta_O/alpha_O "
    << "(cross-indexed) " << num(worst) << " (bar " << num(inverse_bar) << "); same-index pairing deviates up to "
    << num(worst_same_index);
  return {checked == inverse_sets && worst <= inverse_bar, d.str()};
}

std::vector<double> scenario_betas(const std::string& name, double* alpha = nullptr) {
  const auto loaded = read_scenario(data("scenarios/" + name + ".json"));
  const auto r = evaluate_change_set(std::make_shared<const Grid>(loaded.reference), loaded.scenario.changes);
  if (alpha) *alpha = r.solution.alpha;
  return r.solution.betas;
}

std::string join(const std::vector<double>& v) {
  std::string s;
  for (double x : v) s += (s.empty() ? "" : " ") + num(x);
  return s;
}

Outcome beta_interpretability() {
  const auto distant = scenario_betas("pair_distant");
  const auto close = scenario_betas("pair_close");
  const auto weak_pair = scenario_betas("pair_weak_flow");
  bool ok = distant.size() == 2 && close.size() == 2;
  for (double b : distant) ok = ok && std::abs(b - 1.0) <= distant_max;
  for (double b : close) ok = ok && std::abs(b - 1.0) >= close_min;
  std::ostringstream d;
  d << "distant l_2-3 + l_6-12 betas " << join(distant) << " (|beta - 1| <= " << num(distant_max)
    << "), close l_2-3 + l_2-4 betas " << join(close) << " (|beta - 1| >= " << num(close_min)
    << "); reported only: l_2-3 + l_12-13 betas " << join(weak_pair);
  return {ok, d.str()};
}

Outcome scaling() {
  struct Row {
    std::string name;
    std::size_t buses;
    double st, baseline, beta, per_contingency;
  };
  std::vector<Row> rows;
  for (const char* name : {"case14", "case118", "case300", "case1354pegase"}) {
    if (!fs::exists(data(std::string(name) + ".m"))) continue;
    const Grid g = load(name);
    std::mt19937_64 rng(1);
    const ChangeKind only_disconnect[] = {ChangeKind::disconnect};
    const auto action = random_change_set(g, 2, rng, only_disconnect);
    if (!action) return {false, std::string("no 2-change action on ") + name};
    std::vector<std::string> ids;
    for (const auto& br : g.branches()) ids.push_back(br.id);
    double beta = 0.0, per = 0.0;
    const double st = median_seconds(timing_reps, [&] {
      const auto r = run_n1(g, *action, ids);
      beta = r.median_beta_seconds();
      per = (r.timing.total - r.timing.basis) / static_cast<double>(ids.size());
    });
    const double base = median_seconds(timing_reps, [&] { run_n1_baseline(g, *action, ids); });
    rows.push_back({name, g.bus_count(), st, base, beta, per});
  }
  bool ok = true;
  std::ostringstream d;
  const Row* r118 = nullptr;
  const Row* large = nullptr;
  for (const auto& r : rows) {
    if (r.buses >= 100) ok = ok && r.st < r.baseline;
    if (r.name == "case118") r118 = &r;
    if (r.buses >= 1000) large = &r;
    d << r.name << " st " << num(r.st) << " s vs baseline " << num(r.baseline) << " s (x" << num(r.baseline / r.st)
      << "), beta/contingency " << num(r.beta) << " s; ";
  }
  if (r118 && large) {
    const double growth = large->beta / r118->beta;
    ok = ok && growth <= beta_growth_max;
    d << "beta/contingency growth 118 -> " << large->buses << ": x" << num(growth) << " (max x"
      << num(beta_growth_max) << "); full per-contingency growth x" << num(large->per_contingency / r118->per_contingency)
      << ", baseline growth x" << num(large->baseline / r118->baseline) << " (reported)";
  } else {
    ok = false;
    d << "missing case118 or a 1000+ bus case";
  }
  return {ok, d.str()};
}

Outcome reference_configurations() {
  std::ostringstream d;
  d << "no published coefficient snapshot available; oracle equivalence on the case14 configurations:";
  bool ok = true;
  for (const char* name : {"double_disconnect", "double_reconnect", "double_split", "double_split_injection",
                           "double_merge", "mixed_four_kinds"}) {
    const auto loaded = read_scenario(data(std::string("scenarios/") + name + ".json"));
    const auto ref = std::make_shared<const Grid>(loaded.reference);
    const auto st = evaluate_change_set(ref, loaded.scenario.changes);
    const auto oracle = solve_dc(apply_change_set(*ref, loaded.scenario.changes));
    const double diff = max_diff(st.state.flow, oracle.flow);
    ok = ok && diff <= oracle_bar;
    d << " " << name << " betas [" << join(st.solution.betas) << "] diff " << num(diff) << ";";
  }
  return {ok, d.str()};
}

std::string slurp(const fs::path& p) {
  std::ifstream f(p);
  std::stringstream s;
  s << f.rdbuf();
  return s.str();
}

Outcome determinism() {
  const auto dir = fs::temp_directory_path() / "topost_acceptance";
  fs::create_directories(dir);
  std::vector<std::string> problems;
  for (const std::string cmd : {"apply", "n1"}) {
    std::string first_main, first_status;
    int runs = 0;
    for (const std::string jobs : {"1", "8", "1", "8"}) {
      const auto out = dir / (cmd + "_" + std::to_string(runs) + ".csv");
      std::ostringstream o, e;
      const int code = cli::run({cmd, "--case", data("case118.m").string(), "--seed", "42", "--changes", "3", "--jobs",
                                 jobs, "--reps", "1", "--out", out.string()},
                                o, e);
      if (code != 0) {
        problems.push_back(cmd + " exit " + std::to_string(code));
        break;
      }
      const std::string main = slurp(out);
      const std::string status = cmd == "n1" ? slurp(dir / (cmd + "_" + std::to_string(runs) + ".status.csv")) : "";
      if (runs == 0) {
        first_main = main;
        first_status = status;
      } else if (main != first_main || status != first_status) {
        problems.push_back(cmd + " run " + std::to_string(runs) + " with --jobs " + jobs + " differs");
      }
      ++runs;
    }
  }
  std::string detail = "apply and n1 on case118, seed 42, jobs 1/8/1/8: ";
  detail += problems.empty() ? "byte-identical non-timing output" : problems.front();
  return {problems.empty(), detail};
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"oracle_equivalence", oracle_equivalence},
      {"single_change_reductions", single_change_reductions},
      {"cancelling_flow_model", cancelling_flow},
      {"inverse_pair_identities", inverse_pairs},
      {"beta_interpretability", beta_interpretability},
      {"security_analysis_scaling", scaling},
      {"reference_configurations", reference_configurations},
      {"determinism", determinism},
  };
  int failed = 0;
  for (const auto& [name, fn] : criteria) {
    Outcome r;
    double t = 0.0;
    try {
      t = seconds([&] { r = fn(); });
    } catch (const std::exception& e) {
      r = {false, std::string("raised: ") + e.what()};
    }
    std::printf("%s %s (%.1f s): %s\n", r.pass ? "PASS" : "FAIL", name.c_str(), t, r.detail.c_str());
    std::fflush(stdout);
    failed += r.pass ? 0 : 1;
  }
  return failed == 0 ? 0 : 1;
}
