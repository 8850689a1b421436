#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace topost::cli {

enum ExitCode : int { exit_ok = 0, exit_parse = 1, exit_topology = 2, exit_tolerance = 3 };

struct CliConfig {
  std::string subcommand;
  std::optional<std::string> case_path;
  std::optional<std::string> scenario_path;
  std::optional<std::string> out_path;
  std::optional<double> tolerance;
  unsigned jobs = 1;
  std::uint64_t seed = 0;

  std::vector<std::string> cases;  // bench
  int changes = -1;                // random action size when no scenario is given
  int reps = 5;
  std::optional<double> filter;    // n1 independence filter epsilon
  bool oracle = true;              // n1 comparison against the full re-solve
};

/// Parses argv-style arguments (without the program name) and runs the
/// subcommand. Tables go to --out or `out`; timing and diagnostics to `err`
/// unless --out names a file, in which case timing lands next to it.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

int cmd_solve(const CliConfig& config, std::ostream& out, std::ostream& err);
int cmd_apply(const CliConfig& config, std::ostream& out, std::ostream& err);
int cmd_betas(const CliConfig& config, std::ostream& out, std::ostream& err);
int cmd_n1(const CliConfig& config, std::ostream& out, std::ostream& err);
int cmd_bench(const CliConfig& config, std::ostream& out, std::ostream& err);

}  // namespace topost::cli
