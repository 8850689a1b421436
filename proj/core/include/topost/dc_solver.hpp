#pragma once

#include <Eigen/SparseCholesky>
#include <Eigen/SparseCore>
#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "topost/grid.hpp"

namespace topost {

namespace tolerance {
inline constexpr double solver_residual = 1e-10;
inline constexpr double oracle = 1e-8;
inline constexpr double four_decimals = 1e-4;
}  // namespace tolerance

/// DC power-flow solution of one topology under the grid's injections.
struct SolvedState {
  std::shared_ptr<const Grid> grid;
  std::uint64_t fingerprint = 0;
  std::vector<double> theta;  // per bus, radians, slack = 0
  std::vector<double> flow;   // per branch, per-unit, oriented from -> to

  /// theta(from) - theta(to); defined for disconnected branches too.
  double delta_theta(BranchIndex branch) const;
  double theta_of(std::string_view bus) const;
  double flow_of(std::string_view branch) const;
};

struct ReducedBbus {
  Eigen::SparseMatrix<double> matrix;  // non-slack buses only
  std::vector<std::ptrdiff_t> row_of_bus;  // -1 for the slack
};

/// Nodal susceptance matrix over all buses (graph Laplacian weighted by
/// the connected branches' susceptances).
Eigen::SparseMatrix<double> full_bbus(const Grid& grid);

/// Slack row and column removed. Throws SingularSystem for a disconnected grid.
ReducedBbus build_bbus(const Grid& grid);

/// One LDL^T factorization of the reduced Bbus, reused for every right hand
/// side. solve* members are const and safe to call concurrently.
class DcFactorization {
 public:
  explicit DcFactorization(std::shared_ptr<const Grid> grid);

  const Grid& grid() const noexcept { return *grid_; }
  const std::shared_ptr<const Grid>& grid_ptr() const noexcept { return grid_; }

  /// Bus phases for an arbitrary injection vector (slack absorbs the sum).
  std::vector<double> solve_theta(std::span<const double> injections) const;

  std::vector<double> branch_flows(std::span<const double> theta) const;

  /// State under the grid's own injections.
  SolvedState solve() const;
  SolvedState solve(std::span<const double> injections) const;

  /// Flows caused by a unit dipole (+1 at from, -1 at to) across a branch.
  std::vector<double> dipole_flows(BranchIndex branch) const;
  std::vector<double> dipole_theta(BranchIndex branch) const;

 private:
  std::shared_ptr<const Grid> grid_;
  ReducedBbus bbus_;
  Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> ldlt_;
};

SolvedState solve_dc(std::shared_ptr<const Grid> grid);
SolvedState solve_dc(const Grid& grid);

/// Line outage distribution factors of one outage in the reference topology.
struct LodfRow {
  std::string outage;
  BranchIndex outage_index = 0;
  std::vector<double> factors;  // per branch; factors[outage] = -1
};

/// Computed from a unit dipole so the factors do not depend on injections and
/// stay defined when the outaged branch carries no flow. Throws
/// IslandingOutage for a bridge and ChangeInapplicable for a branch that is
/// not connected.
LodfRow lodf(const DcFactorization& reference, std::string_view outage);
LodfRow lodf(const Grid& grid, const SolvedState& reference, std::string_view outage);

/// Single outage state derived from the reference factorization:
/// pf = pf_ref + LODF_o * pf_ref_o. No refactorization.
SolvedState outage_state(const DcFactorization& reference, const SolvedState& ref_state,
                         BranchIndex outage);

struct CancellingFlowReport {
  std::vector<std::string> outages;
  std::vector<double> cancelling_flow;  // cf_o, cf = -pf_ref for a single outage
  std::vector<double> induced_flow;     // vt_o = pf_ref_o - sum_{k != o} LODF_{k,o} cf_k
  std::vector<double> dipole;           // injection magnitude at the outage ends
  std::vector<double> ohm_flow;         // sigma * dtheta across the outage in the dipole model
  std::vector<double> model_flow;       // all branches, dipole model with outages removed
  double max_flow_deviation = 0.0;      // dipole model vs physical disconnection
  double max_theta_deviation = 0.0;
  double max_induced_deviation = 0.0;   // |vt + cf|
  double max_ohm_deviation = 0.0;       // |sigma dtheta - dipole|
};

/// Solves the cancelling-flow system of an outage set on the reference
/// topology, injects the flows as dipoles and compares the outcome with a
/// physical disconnection of the same branches.
CancellingFlowReport verify_cancelling_flow_model(const Grid& grid, std::span<const std::string> outages);

}  // namespace topost
