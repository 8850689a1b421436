#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <unistd.h>

#include "cli.hpp"
#include "fixtures.hpp"

namespace topost {
namespace {

namespace fs = std::filesystem;
using test::data_path;

struct Run {
  int code;
  std::string out;
  std::string err;
};

Run run(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = cli::run(args, out, err);
  return {code, out.str(), err.str()};
}

std::vector<std::string> lines(const std::string& text) {
  std::vector<std::string> out;
  std::istringstream in(text);
  for (std::string l; std::getline(in, l);) out.push_back(l);
  return out;
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> cells;
  std::istringstream in(line);
  for (std::string c; std::getline(in, c, ',');) cells.push_back(c);
  if (!line.empty() && line.back() == ',') cells.emplace_back();
  return cells;
}

std::string slurp(const fs::path& p) {
  std::ifstream f(p);
  std::stringstream s;
  s << f.rdbuf();
  return s.str();
}

fs::path temp_dir() {
  const auto dir = fs::temp_directory_path() / ("topost_cli_test_" + std::to_string(::getpid()));
  fs::create_directories(dir);
  return dir;
}

std::string scenario(const std::string& name) { return data_path("scenarios/" + name + ".json").string(); }

TEST(Cli, SolveCase14) {
  const auto r = run({"solve", "--case", data_path("case14.m").string()});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto rows = lines(r.out);
  ASSERT_EQ(rows.size(), 21u);
  EXPECT_EQ(rows[0], "case,branch,method,flow,abs_diff");
  EXPECT_EQ(split_csv(rows[1]).size(), 5u);
  EXPECT_EQ(split_csv(rows[1])[0], "case14");
}

TEST(Cli, MalformedCaseIsParseError) {
  const auto dir = temp_dir();
  const auto path = dir / "broken.m";
  std::ofstream(path) << "function mpc = broken\nmpc.version = '2';\nmpc.baseMVA = 100;\nmpc.bus = [\n"
                         "1 3 0 0 0 0 1 1 0 135 1 1.06 0.94;\n2 1 x 0 0 0 1 1 0 135 1 1.06 0.94;\n];\n";
  const auto r = run({"solve", "--case", path.string()});
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.err.find("line 6"), std::string::npos) << r.err;
}

TEST(Cli, DisconnectedCaseIsTopologyError) {
  const auto dir = temp_dir();
  const auto path = dir / "islands.m";
  std::ofstream(path) << "mpc.version = '2';\nmpc.baseMVA = 100;\n"
                         "mpc.bus = [\n1 3 0 0 0 0 1 1 0 1 1 1 1;\n2 1 10 0 0 0 1 1 0 1 1 1 1;\n"
                         "3 1 0 0 0 0 1 1 0 1 1 1 1;\n4 1 0 0 0 0 1 1 0 1 1 1 1;\n];\n"
                         "mpc.gen = [\n1 10 0 0 0 1 100 1 100 0;\n];\n"
                         "mpc.branch = [\n1 2 0 0.1 0 0 0 0 0 0 1 -360 360;\n3 4 0 0.1 0 0 0 0 0 0 1 -360 360;\n];\n";
  const auto r = run({"solve", "--case", path.string()});
  EXPECT_EQ(r.code, 2) << r.err;
}

TEST(Cli, MissingCaseFails) {
  EXPECT_NE(run({"solve", "--case", data_path("nope.m").string()}).code, 0);
}

TEST(Cli, BadFlagIsParseError) {
  EXPECT_EQ(run({"solve", "--frobnicate"}).code, 1);
  EXPECT_EQ(run({"solve", "--case", data_path("case14.m").string(), "--jobs", "zero"}).code, 1);
  EXPECT_EQ(run({}).code, 1);
}

TEST(Cli, HelpIsOk) { EXPECT_EQ(run({"--help"}).code, 0); }

TEST(Cli, ApplyScenarioWithinTolerance) {
  const auto r = run({"apply", "--scenario", scenario("double_disconnect"), "--reps", "3"});
  ASSERT_EQ(r.code, 0) << r.err;
  double worst = 0.0;
  const auto rows = lines(r.out);
  ASSERT_EQ(rows.size(), 1u + 2u * 20u);
  for (std::size_t i = 1; i < rows.size(); ++i) worst = std::max(worst, std::stod(split_csv(rows[i])[4]));
  EXPECT_LE(worst, 1e-4);
  EXPECT_NE(r.err.find("speedup:"), std::string::npos);
  EXPECT_NE(r.err.find("case,method,seconds"), std::string::npos);
}

TEST(Cli, ApplyEmptySetIsExact) {
  const auto r = run({"apply", "--case", data_path("case14.m").string(), "--changes", "0", "--reps", "1"});
  ASSERT_EQ(r.code, 0) << r.err;
  for (const auto& row : lines(r.out)) {
    if (row.rfind("case,", 0) == 0) continue;
    EXPECT_EQ(split_csv(row)[4], "0");
  }
}

TEST(Cli, ApplyIslandingIsTopologyError) {
  const auto dir = temp_dir();
  const auto path = dir / "island.json";
  std::ofstream(path) << R"({"version": 1, "case": ")" << data_path("case14.m").generic_string()
                      << R"(", "changes": [{"kind": "disconnect", "branch": "l_7-8"}]})";
  const auto r = run({"apply", "--scenario", path.string()});
  EXPECT_EQ(r.code, 2) << r.err;
}

TEST(Cli, ToleranceBreach) {
  const auto r = run({"apply", "--scenario", scenario("double_split"), "--tol", "1e-300", "--reps", "1"});
  EXPECT_EQ(r.code, 3) << r.err;
}

std::map<std::string, std::vector<std::string>> betas_of(const std::string& name) {
  const auto r = run({"betas", "--scenario", scenario(name)});
  EXPECT_EQ(r.code, 0) << r.err;
  std::map<std::string, std::vector<std::string>> rows;
  for (const auto& line : lines(r.out)) {
    const auto cells = split_csv(line);
    rows[cells[0]] = cells;
  }
  return rows;
}

TEST(Cli, BetasDistantPairIndependent) {
  auto rows = betas_of("pair_distant");
  EXPECT_EQ(rows["disconnect:l_2-3"][3], "yes");
  EXPECT_EQ(rows["disconnect:l_6-12"][3], "yes");
  EXPECT_EQ(rows.size(), 5u);  // header, two changes, alpha, empty interaction table
}

TEST(Cli, BetasClosePairInteracting) {
  auto rows = betas_of("pair_close");
  EXPECT_EQ(rows["disconnect:l_2-3"][3], "no");
  EXPECT_EQ(rows["disconnect:l_2-4"][3], "no");
  EXPECT_TRUE(rows.contains("interacting_a"));
  EXPECT_GT(std::stod(rows["alpha"][2]), -10.0);
}

TEST(Cli, BetasSingleChange) {
  const auto r = run({"betas", "--case", data_path("case14.m").string(), "--changes", "1", "--seed", "4"});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto rows = lines(r.out);
  EXPECT_EQ(split_csv(rows[1])[2], "1");
  EXPECT_EQ(split_csv(rows[2])[2], "0");
}

TEST(Cli, N1Case118) {
  const auto dir = temp_dir();
  const auto out = dir / "n1.csv";
  const auto r = run({"n1", "--case", data_path("case118.m").string(), "--changes", "2", "--seed", "3", "--out",
                      out.string()});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_GT(lines(slurp(out)).size(), 1000u);
  const auto status = lines(slurp(dir / "n1.status.csv"));
  EXPECT_EQ(status[0], "case,contingency,status,alpha,betas");
  // every branch still closed after the 2-change action
  EXPECT_GE(status.size(), 1u + 184u);
  EXPECT_LE(status.size(), 1u + 186u);
  EXPECT_NE(slurp(dir / "n1.timing.csv").find("ext_st_beta_median"), std::string::npos);
}

TEST(Cli, BenchRowsPerCase) {
  const auto r = run({"bench", "--cases", data_path("case14.m").string(), data_path("case118.m").string(),
                      data_path("case300.m").string(), "--reps", "1"});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto rows = lines(r.out);
  ASSERT_EQ(rows.size(), 7u);
  EXPECT_EQ(rows[0], "case,method,seconds");
  EXPECT_EQ(split_csv(rows[1])[0], "case14");
  EXPECT_EQ(split_csv(rows[5])[0], "case300");
}

TEST(Cli, DeterministicAcrossJobs) {
  const auto dir = temp_dir();
  for (const char* cmd : {"apply", "n1"}) {
    std::vector<std::string> outputs;
    for (const char* jobs : {"1", "8"}) {
      const auto out = dir / (std::string(cmd) + "_j" + jobs + ".csv");
      const auto r = run({cmd, "--case", data_path("case118.m").string(), "--seed", "9", "--changes", "3", "--jobs",
                          jobs, "--reps", "1", "--out", out.string()});
      ASSERT_EQ(r.code, 0) << r.err;
      outputs.push_back(slurp(out));
    }
    EXPECT_EQ(outputs[0], outputs[1]) << cmd;
    if (std::string(cmd) == "n1") {
      EXPECT_EQ(slurp(dir / "n1_j1.status.csv"), slurp(dir / "n1_j8.status.csv"));
    }
  }
}

}  // namespace
}  // namespace topost
