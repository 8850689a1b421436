#include <benchmark/benchmark.h>

#include <filesystem>
#include <random>

#include "topost/case_io.hpp"
#include "topost/random_actions.hpp"
#include "topost/security_analysis.hpp"
#include "topost/superposition.hpp"

namespace {

using namespace topost;

const char* const cases[] = {"case14", "case118", "case300", "case1354pegase"};

const Grid& grid(int i) {
  static std::vector<Grid> loaded = [] {
    std::vector<Grid> out;
    for (const char* name : cases) out.push_back(read_matpower(std::filesystem::path(TOPOST_DATA_DIR) / (std::string(name) + ".m")));
    return out;
  }();
  return loaded[static_cast<std::size_t>(i)];
}

ChangeSet action(const Grid& g, std::size_t size) {
  std::mt19937_64 rng(1);
  const ChangeKind kinds[] = {ChangeKind::disconnect, ChangeKind::split};
  return *random_change_set(g, size, rng, kinds);
}

std::vector<std::string> branch_ids(const Grid& g) {
  std::vector<std::string> ids;
  for (const auto& br : g.branches()) ids.push_back(br.id);
  return ids;
}

void BM_FullSolve(benchmark::State& state) {
  const Grid& g = grid(static_cast<int>(state.range(0)));
  const auto changes = action(g, 3);
  for (auto _ : state) benchmark::DoNotOptimize(solve_dc(apply_change_set(g, changes)).flow.data());
  state.SetLabel(cases[state.range(0)]);
}

void BM_BetaSolveAndSuperpose(benchmark::State& state) {
  const Grid& g = grid(static_cast<int>(state.range(0)));
  const auto basis = build_basis(std::make_shared<const Grid>(g), action(g, 3));
  for (auto _ : state) {
    const auto solution = solve_betas(coefficient_matrix(basis));
    benchmark::DoNotOptimize(superpose_flows(basis, solution).data());
  }
  state.SetLabel(cases[state.range(0)]);
}

void BM_BuildBasis(benchmark::State& state) {
  const Grid& g = grid(static_cast<int>(state.range(0)));
  const auto ref = std::make_shared<const Grid>(g);
  const auto changes = action(g, 3);
  for (auto _ : state) benchmark::DoNotOptimize(build_basis(ref, changes).size());
  state.SetLabel(cases[state.range(0)]);
}

void BM_N1Superposition(benchmark::State& state) {
  const Grid& g = grid(static_cast<int>(state.range(0)));
  const auto changes = action(g, 2);
  const auto ids = branch_ids(g);
  for (auto _ : state) benchmark::DoNotOptimize(run_n1(g, changes, ids).results.size());
  state.SetLabel(cases[state.range(0)]);
}

void BM_N1Refactorize(benchmark::State& state) {
  const Grid& g = grid(static_cast<int>(state.range(0)));
  const auto changes = action(g, 2);
  const auto ids = branch_ids(g);
  for (auto _ : state) benchmark::DoNotOptimize(run_n1_baseline(g, changes, ids).results.size());
  state.SetLabel(cases[state.range(0)]);
}

BENCHMARK(BM_FullSolve)->DenseRange(0, 3)->Unit(benchmark::kMicrosecond);
BENCHMARK(BM_BetaSolveAndSuperpose)->DenseRange(0, 3)->Unit(benchmark::kMicrosecond);
BENCHMARK(BM_BuildBasis)->DenseRange(0, 3)->Unit(benchmark::kMicrosecond);
BENCHMARK(BM_N1Superposition)->DenseRange(0, 3)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_N1Refactorize)->DenseRange(0, 3)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
