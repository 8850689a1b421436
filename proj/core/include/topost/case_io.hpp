#pragma once

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "topost/grid.hpp"

namespace topost {

/// Parses the DC subset of a MATPOWER version 2 case: baseMVA, bus (id,
/// type, Pd), gen (bus, Pg, status) and branch (from, to, x, status).
/// Injections become Pg - Pd in per-unit; the slack injection is set to
/// balance the others. Bus `n` gets id "n" and substation "sub_n", branches
/// are named "l_<from>-<to>" ("#k" appended for the k-th parallel branch),
/// each bus carries one injection "inj_<n>".
Grid parse_matpower(std::string_view text, std::vector<std::string>* warnings = nullptr);
Grid read_matpower(const std::filesystem::path& path, std::vector<std::string>* warnings = nullptr);

/// Writes an unsplit grid back to MATPOWER text (Pd carries the negated net
/// injection, no generator rows except a slack placeholder).
std::string write_matpower(const Grid& grid, std::string_view name = "exported");

struct SolverOptions {
  double tolerance = 1e-8;
  std::optional<double> independence_filter;  // security analysis beta filter
};

/// Scenario file (JSON, "version": 1):
/// {
///   "version": 1,
///   "name": "row0",
///   "case": "case14.m",                      (relative to the scenario file)
///   "reference": [ change, ... ],            (optional, applied to the case first)
///   "changes": [ change, ... ],
///   "contingencies": ["l_1-2", ...] | "all", (optional)
///   "options": {"tolerance": 1e-8, "independence_filter": 1e-3}
/// }
/// change: {"kind": "disconnect"|"reconnect", "branch": id}
///       | {"kind": "split", "substation": id, "busbar2": [{"branch": id} | {"injection": id}]}
///       | {"kind": "merge", "substation": id}
struct ScenarioFile {
  int version = 1;
  std::string name;
  std::string case_path;
  ChangeSet reference;
  ChangeSet changes;
  bool all_contingencies = false;
  std::vector<std::string> contingencies;
  SolverOptions options;
};

/// Schema validation only (SchemaError).
ScenarioFile parse_scenario(std::string_view json_text);

/// Schema validation plus id resolution against the case grid (UnknownId).
/// `grid` is the case as loaded, before the reference changes.
ScenarioFile load_scenario(std::string_view json_text, const Grid& grid);

/// Throws UnknownId for ids absent from the grid. Reference changes are
/// checked against `grid`, action changes and contingencies against the
/// reference topology.
void resolve_scenario(const ScenarioFile& scenario, const Grid& grid);

std::string scenario_to_json(const ScenarioFile& scenario);

/// Case grid and reference topology of a scenario file on disk.
struct LoadedScenario {
  ScenarioFile scenario;
  Grid case_grid;
  Grid reference;
};
LoadedScenario read_scenario(const std::filesystem::path& path,
                             const std::optional<std::filesystem::path>& case_override = std::nullopt);

/// Contingency list of a scenario: every branch connected in the target
/// topology when "all" was requested.
std::vector<std::string> scenario_contingencies(const ScenarioFile& scenario, const Grid& target);

// Result tables. Numbers use 12 significant digits.
struct FlowRow {
  std::string case_label;
  std::string branch;
  std::string method;
  double flow = 0.0;
  double abs_diff = 0.0;
};

struct TimingRow {
  std::string case_label;
  std::string method;
  double seconds = 0.0;
};

std::string format_number(double value);
void write_flow_csv(std::ostream& out, const std::vector<FlowRow>& rows);
void write_timing_csv(std::ostream& out, const std::vector<TimingRow>& rows);

/// Per-unit to MW with the grid base.
inline double to_mw(const Grid& grid, double per_unit) { return per_unit * grid.base_mva(); }

}  // namespace topost
