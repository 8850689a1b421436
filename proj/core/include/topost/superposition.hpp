#pragma once

#include <Eigen/Dense>
#include <memory>
#include <span>
#include <vector>

#include "topost/dc_solver.hpp"
#include "topost/grid.hpp"

namespace topost {

/// What a unitary change is measured by in every basis state:
///  - disconnect: flow through the branch (phase difference when the
///    reference flow vanishes),
///  - reconnect: phase difference across the branch ends,
///  - split: residual flow through the still-closed coupler,
///  - merge: phase difference between the two busbars.
enum class ObservableKind : std::uint8_t { branch_flow, branch_delta_theta, coupler_flow, busbar_delta_theta };

std::string_view to_string(ObservableKind kind);

class Observable {
 public:
  /// Resolves the change against the reference grid.
  static Observable for_change(const Grid& reference, const TopologyChange& change);

  ObservableKind kind() const noexcept { return kind_; }
  double evaluate(const SolvedState& state) const;

  /// Same change measured by the branch phase difference instead of its flow.
  Observable as_delta_theta() const;

 private:
  struct BranchEnd {
    BranchIndex branch;
    bool from_side;
  };

  ObservableKind kind_ = ObservableKind::branch_flow;
  BranchIndex branch_ = 0;
  std::string substation_;
  std::vector<BranchEnd> busbar1_ends_;
  std::vector<std::size_t> busbar1_injections_;
};

/// Residual flow entering busbar 1 of an unsplit substation through the
/// terminals the split would keep on busbar 1: the coupler flow from busbar 1
/// to busbar 2 once the coupler is modeled explicitly.
double split_residual_flow(const SolvedState& state, const Split& split);

/// theta(busbar 1) - theta(busbar 2); zero when the substation is not split.
double merge_delta_theta(const SolvedState& state, std::string_view substation);

struct BasisEntry {
  TopologyChange change;
  std::shared_ptr<const SolvedState> state;  // reference topology with only this change applied
  Observable observable;
};

/// Reference state plus one state per unitary change, all under the
/// reference injections. Immutable; cheap to copy (states are shared).
class StBasis {
 public:
  StBasis(std::shared_ptr<const SolvedState> reference, std::vector<BasisEntry> entries);

  const SolvedState& reference() const noexcept { return *reference_; }
  const std::shared_ptr<const SolvedState>& reference_ptr() const noexcept { return reference_; }
  const std::vector<BasisEntry>& entries() const noexcept { return entries_; }
  std::size_t size() const noexcept { return entries_.size(); }
  ChangeSet changes() const;

  /// Basis over a subset of the changes, in the given order.
  StBasis subset(std::span<const std::size_t> keep) const;
  StBasis with(BasisEntry extra) const;

 private:
  std::shared_ptr<const SolvedState> reference_;
  std::vector<BasisEntry> entries_;
};

/// One full DC solve per change on the reference topology. Errors are
/// re-raised with the offending change in the message.
StBasis build_basis(std::shared_ptr<const Grid> reference, const ChangeSet& changes);
StBasis build_basis(const DcFactorization& reference, const ChangeSet& changes);

struct CoefficientSystem {
  Eigen::MatrixXd matrix;         // N x N, unit diagonal
  Eigen::VectorXd rhs;            // ones, zero on pruned rows
  std::vector<bool> pruned;       // no-op changes forced to beta = 0
  std::vector<ObservableKind> observables;
  std::vector<double> reference_values;  // denominators
};

/// Observable denominators below these are treated as vanishing.
namespace observable_tolerance {
inline constexpr double flow = 1e-9;
inline constexpr double delta_theta = 1e-12;
inline constexpr double no_op = 1e-9;
}  // namespace observable_tolerance

/// M[k][k] = 1, M[k][j] = 1 - Ifo_k(state j) / Ifo_k(reference). A change
/// with a vanishing denominator whose unitary state equals the reference is
/// pruned; otherwise DegenerateObservable is raised.
CoefficientSystem coefficient_matrix(const StBasis& basis);

/// Same result as coefficient_matrix(basis) when basis is the basis of
/// `base` plus one trailing change: only the new row and column are evaluated.
CoefficientSystem extend_coefficients(const CoefficientSystem& base, const StBasis& basis);

struct BetaSolution {
  std::vector<double> betas;
  double alpha = 1.0;  // 1 - sum(betas)
  Eigen::MatrixXd matrix;
  std::vector<bool> pruned;
  double residual = 0.0;  // ||M beta - rhs||_inf
};

/// Dense direct solve. SingularMatrix when the system is rank deficient.
BetaSolution solve_betas(const CoefficientSystem& system);

/// alpha * pf_ref + sum_k beta_k * pf_k on every branch. Branches that are
/// disconnected in the target must come out at zero (SelfCheckFailed above
/// 1e-6) and are then set to exactly zero.
std::vector<double> superpose_flows(const StBasis& basis, const BetaSolution& solution);

/// Full target state: flows as above, phases rebuilt from the slack
/// outwards with dtheta = pf / sigma on the target topology.
SolvedState superpose(const StBasis& basis, const BetaSolution& solution);

/// Convenience: build_basis + coefficient_matrix + solve_betas + superpose.
struct SuperpositionResult {
  StBasis basis;
  BetaSolution solution;
  SolvedState state;
};
SuperpositionResult evaluate_change_set(std::shared_ptr<const Grid> reference, const ChangeSet& changes);

/// Changes whose |beta - 1| stays within the threshold act as if applied
/// alone.
inline constexpr double independence_threshold = 0.05;
std::vector<bool> independent_changes(const BetaSolution& solution, double threshold = independence_threshold);

}  // namespace topost
