#include "topost/superposition.hpp"

#include <algorithm>
#include <cmath>
#include <queue>
#include <set>

#include "topost/errors.hpp"

namespace topost {

std::string_view to_string(ObservableKind kind) {
  switch (kind) {
    case ObservableKind::branch_flow: return "branch_flow";
    case ObservableKind::branch_delta_theta: return "branch_delta_theta";
    case ObservableKind::coupler_flow: return "coupler_flow";
    case ObservableKind::busbar_delta_theta: return "busbar_delta_theta";
  }
  return "?";
}

Observable Observable::for_change(const Grid& reference, const TopologyChange& change) {
  Observable obs;
  std::visit(
      [&](const auto& c) {
        using T = std::decay_t<decltype(c)>;
        if constexpr (std::is_same_v<T, Disconnect>) {
          obs.kind_ = ObservableKind::branch_flow;
          obs.branch_ = reference.branch_index(c.branch);
        } else if constexpr (std::is_same_v<T, Reconnect>) {
          obs.kind_ = ObservableKind::branch_delta_theta;
          obs.branch_ = reference.branch_index(c.branch);
        } else if constexpr (std::is_same_v<T, Split>) {
          obs.kind_ = ObservableKind::coupler_flow;
          obs.substation_ = c.substation;
          const auto& sub = reference.substation(c.substation);
          const std::set<Terminal> moved(c.busbar2.begin(), c.busbar2.end());
          const BusIndex bus = sub.busbar1;
          for (const auto& t : reference.terminals_at(bus)) {
            if (moved.contains(t)) continue;
            if (t.kind == TerminalKind::branch) {
              const auto l = reference.branch_index(t.element);
              obs.busbar1_ends_.push_back({l, reference.branches()[l].from == bus});
            } else {
              obs.busbar1_injections_.push_back(*reference.find_injection(t.element));
            }
          }
        } else {
          obs.kind_ = ObservableKind::busbar_delta_theta;
          obs.substation_ = c.substation;
          (void)reference.substation(c.substation);
        }
      },
      change);
  return obs;
}

Observable Observable::as_delta_theta() const {
  Observable obs = *this;
  if (kind_ == ObservableKind::branch_flow) obs.kind_ = ObservableKind::branch_delta_theta;
  return obs;
}

double Observable::evaluate(const SolvedState& state) const {
  switch (kind_) {
    case ObservableKind::branch_flow:
      return state.flow[branch_];
    case ObservableKind::branch_delta_theta:
      return state.delta_theta(branch_);
    case ObservableKind::coupler_flow: {
      double residual = 0.0;
      for (const auto& end : busbar1_ends_) {
        residual += end.from_side ? -state.flow[end.branch] : state.flow[end.branch];
      }
      for (auto i : busbar1_injections_) residual += state.grid->injections()[i].p;
      return residual;
    }
    case ObservableKind::busbar_delta_theta:
      return merge_delta_theta(state, substation_);
  }
  return 0.0;
}

double split_residual_flow(const SolvedState& state, const Split& split) {
  return Observable::for_change(*state.grid, split).evaluate(state);
}

double merge_delta_theta(const SolvedState& state, std::string_view substation) {
  const auto& sub = state.grid->substation(substation);
  if (!sub.split()) return 0.0;
  return state.theta[sub.busbar1] - state.theta[*sub.busbar2];
}

StBasis::StBasis(std::shared_ptr<const SolvedState> reference, std::vector<BasisEntry> entries)
    : reference_(std::move(reference)), entries_(std::move(entries)) {
  ChangeSet all = changes();
  require_distinct_targets(all);
}

ChangeSet StBasis::changes() const {
  ChangeSet out;
  out.reserve(entries_.size());
  for (const auto& e : entries_) out.push_back(e.change);
  return out;
}

StBasis StBasis::subset(std::span<const std::size_t> keep) const {
  std::vector<BasisEntry> picked;
  picked.reserve(keep.size());
  for (auto k : keep) picked.push_back(entries_.at(k));
  return StBasis(reference_, std::move(picked));
}

StBasis StBasis::with(BasisEntry extra) const {
  auto all = entries_;
  all.push_back(std::move(extra));
  return StBasis(reference_, std::move(all));
}

StBasis build_basis(const DcFactorization& reference, const ChangeSet& changes) {
  require_distinct_targets(changes);
  auto ref_state = std::make_shared<const SolvedState>(reference.solve());
  const Grid& grid = reference.grid();
  std::vector<BasisEntry> entries;
  entries.reserve(changes.size());
  for (const auto& change : changes) {
    try {
      auto unitary = std::make_shared<const Grid>(apply_change_set(grid, std::span(&change, 1)));
      entries.push_back(BasisEntry{change, std::make_shared<const SolvedState>(solve_dc(unitary)),
                                   Observable::for_change(grid, change)});
    } catch (const Error& e) {
      throw Error(e.kind(), describe(change) + ": " + e.what());
    }
  }
  return StBasis(std::move(ref_state), std::move(entries));
}

StBasis build_basis(std::shared_ptr<const Grid> reference, const ChangeSet& changes) {
  return build_basis(DcFactorization(std::move(reference)), changes);
}

namespace {

double max_flow_change(const SolvedState& a, const SolvedState& b) {
  double worst = 0.0;
  for (std::size_t l = 0; l < a.flow.size(); ++l) worst = std::max(worst, std::abs(a.flow[l] - b.flow[l]));
  return worst;
}

double denominator_tolerance(ObservableKind kind) {
  return kind == ObservableKind::branch_flow || kind == ObservableKind::coupler_flow
             ? observable_tolerance::flow
             : observable_tolerance::delta_theta;
}

// Observable of entry k as resolved against the reference (flow falls back
// to the phase difference when the reference flow vanishes).
Observable resolved_observable(const BasisEntry& entry, ObservableKind kind) {
  return entry.observable.kind() == kind ? entry.observable : entry.observable.as_delta_theta();
}

void fill_row(CoefficientSystem& sys, const StBasis& basis, Eigen::Index k) {
  const auto& ref = basis.reference();
  const auto& entries = basis.entries();
  const auto& entry = entries[static_cast<std::size_t>(k)];
  Observable obs = entry.observable;
  double denom = obs.evaluate(ref);
  if (obs.kind() == ObservableKind::branch_flow && std::abs(denom) < observable_tolerance::flow) {
    obs = obs.as_delta_theta();
    denom = obs.evaluate(ref);
  }
  sys.observables[k] = obs.kind();
  sys.reference_values[k] = denom;
  if (std::abs(denom) < denominator_tolerance(obs.kind())) {
    if (max_flow_change(*entry.state, ref) <= observable_tolerance::no_op) {
      sys.pruned[k] = true;
      sys.rhs[k] = 0.0;
      return;
    }
    throw Error(ErrorKind::degenerate_observable,
                describe(entry.change) + ": observable vanishes in the reference state (" +
                    std::string(to_string(obs.kind())) + ") but the change alters the flows");
  }
  for (Eigen::Index j = 0; j < sys.matrix.cols(); ++j) {
    if (j != k) sys.matrix(k, j) = 1.0 - obs.evaluate(*entries[static_cast<std::size_t>(j)].state) / denom;
  }
}

CoefficientSystem identity_system(std::size_t size) {
  const auto n = static_cast<Eigen::Index>(size);
  CoefficientSystem sys;
  sys.matrix = Eigen::MatrixXd::Identity(n, n);
  sys.rhs = Eigen::VectorXd::Ones(n);
  sys.pruned.assign(size, false);
  sys.observables.resize(size);
  sys.reference_values.resize(size);
  return sys;
}

}  // namespace

CoefficientSystem coefficient_matrix(const StBasis& basis) {
  CoefficientSystem sys = identity_system(basis.size());
  for (Eigen::Index k = 0; k < sys.matrix.rows(); ++k) fill_row(sys, basis, k);
  return sys;
}

CoefficientSystem extend_coefficients(const CoefficientSystem& base, const StBasis& basis) {
  const auto n = base.matrix.rows();
  if (static_cast<Eigen::Index>(basis.size()) != n + 1) {
    throw Error(ErrorKind::invalid_argument, "extended basis must add exactly one change");
  }
  CoefficientSystem sys = identity_system(basis.size());
  sys.matrix.topLeftCorner(n, n) = base.matrix;
  sys.rhs.head(n) = base.rhs;
  std::copy(base.pruned.begin(), base.pruned.end(), sys.pruned.begin());
  std::copy(base.observables.begin(), base.observables.end(), sys.observables.begin());
  std::copy(base.reference_values.begin(), base.reference_values.end(), sys.reference_values.begin());
  const auto& last = *basis.entries().back().state;
  for (Eigen::Index k = 0; k < n; ++k) {
    if (sys.pruned[k]) continue;
    const auto obs = resolved_observable(basis.entries()[static_cast<std::size_t>(k)], sys.observables[k]);
    sys.matrix(k, n) = 1.0 - obs.evaluate(last) / sys.reference_values[k];
  }
  fill_row(sys, basis, n);
  return sys;
}

BetaSolution solve_betas(const CoefficientSystem& system) {
  const auto n = system.matrix.rows();
  if (system.matrix.cols() != n || system.rhs.size() != n) {
    throw Error(ErrorKind::invalid_argument, "coefficient matrix must be square");
  }
  if (!system.matrix.allFinite()) throw Error(ErrorKind::singular_matrix, "coefficient matrix is not finite");

  BetaSolution out;
  out.matrix = system.matrix;
  out.pruned = system.pruned;
  out.pruned.resize(static_cast<std::size_t>(n), false);
  if (n == 0) return out;

  Eigen::FullPivLU<Eigen::MatrixXd> lu(system.matrix);
  lu.setThreshold(1e-10);
  if (lu.rank() < n) {
    throw Error(ErrorKind::singular_matrix,
                "coefficient matrix is singular (rank " + std::to_string(lu.rank()) + " of " +
                    std::to_string(n) + "): the change combination is inconsistent or islands the grid");
  }
  const Eigen::VectorXd beta = lu.solve(system.rhs);
  out.residual = (system.matrix * beta - system.rhs).lpNorm<Eigen::Infinity>();
  if (!beta.allFinite() || !(out.residual <= tolerance::solver_residual)) {
    throw Error(ErrorKind::singular_matrix, "coefficient system is ill-conditioned (residual " +
                                                std::to_string(out.residual) + ")");
  }
  out.betas.assign(beta.data(), beta.data() + n);
  double sum = 0.0;
  for (double b : out.betas) sum += b;
  out.alpha = 1.0 - sum;
  return out;
}

namespace {

constexpr double self_check_tolerance = 1e-6;

}  // namespace

std::vector<double> superpose_flows(const StBasis& basis, const BetaSolution& solution) {
  const auto& ref = basis.reference();
  const auto& entries = basis.entries();
  if (solution.betas.size() != entries.size()) {
    throw Error(ErrorKind::invalid_argument, "beta solution does not match the basis");
  }
  std::vector<double> flow(ref.flow.size());
  for (std::size_t l = 0; l < flow.size(); ++l) flow[l] = solution.alpha * ref.flow[l];
  for (std::size_t k = 0; k < entries.size(); ++k) {
    const double beta = solution.betas[k];
    if (beta == 0.0) continue;
    const auto& f = entries[k].state->flow;
    for (std::size_t l = 0; l < flow.size(); ++l) flow[l] += beta * f[l];
  }

  const auto& grid = *ref.grid;
  std::vector<bool> open(grid.branch_count());
  for (std::size_t l = 0; l < open.size(); ++l) open[l] = !grid.branches()[l].connected();
  for (const auto& e : entries) {
    if (const auto* d = std::get_if<Disconnect>(&e.change)) open[grid.branch_index(d->branch)] = true;
    if (const auto* r = std::get_if<Reconnect>(&e.change)) open[grid.branch_index(r->branch)] = false;
  }
  for (std::size_t l = 0; l < open.size(); ++l) {
    if (!open[l]) continue;
    if (std::abs(flow[l]) > self_check_tolerance) {
      throw Error(ErrorKind::self_check_failed, "superposed flow on open branch '" + grid.branches()[l].id +
                                                    "' is " + std::to_string(flow[l]));
    }
    flow[l] = 0.0;
  }

  SolvedState probe;
  probe.grid = ref.grid;
  probe.flow = flow;
  for (std::size_t k = 0; k < entries.size(); ++k) {
    if (solution.pruned[k] || kind_of(entries[k].change) != ChangeKind::split) continue;
    const double coupler = entries[k].observable.evaluate(probe);
    if (std::abs(coupler) > self_check_tolerance) {
      throw Error(ErrorKind::self_check_failed,
                  describe(entries[k].change) + ": superposed coupler flow is " + std::to_string(coupler));
    }
  }
  return flow;
}

SolvedState superpose(const StBasis& basis, const BetaSolution& solution) {
  auto flow = superpose_flows(basis, solution);
  const auto changes = basis.changes();
  auto target = std::make_shared<const Grid>(apply_change_set(*basis.reference().grid, changes));

  const auto& branches = target->branches();
  std::vector<std::vector<BranchIndex>> incident(target->bus_count());
  for (BranchIndex l = 0; l < branches.size(); ++l) {
    if (!branches[l].connected()) continue;
    incident[branches[l].from].push_back(l);
    incident[branches[l].to].push_back(l);
  }
  std::vector<double> theta(target->bus_count(), 0.0);
  std::vector<bool> seen(target->bus_count(), false);
  std::queue<BusIndex> queue;
  queue.push(target->slack());
  seen[target->slack()] = true;
  while (!queue.empty()) {
    const auto v = queue.front();
    queue.pop();
    for (auto l : incident[v]) {
      const auto& br = branches[l];
      const double dtheta = flow[l] / br.susceptance;
      const BusIndex w = br.from == v ? br.to : br.from;
      if (seen[w]) continue;
      theta[w] = br.from == v ? theta[v] - dtheta : theta[v] + dtheta;
      seen[w] = true;
      queue.push(w);
    }
  }

  SolvedState out;
  out.grid = target;
  out.fingerprint = target->fingerprint();
  out.theta = std::move(theta);
  out.flow = std::move(flow);
  return out;
}

SuperpositionResult evaluate_change_set(std::shared_ptr<const Grid> reference, const ChangeSet& changes) {
  auto basis = build_basis(std::move(reference), changes);
  auto solution = solve_betas(coefficient_matrix(basis));
  auto state = superpose(basis, solution);
  return {std::move(basis), std::move(solution), std::move(state)};
}

std::vector<bool> independent_changes(const BetaSolution& solution, double threshold) {
  std::vector<bool> out(solution.betas.size());
  for (std::size_t k = 0; k < out.size(); ++k) {
    out[k] = !solution.pruned[k] && std::abs(solution.betas[k] - 1.0) <= threshold;
  }
  return out;
}

}  // namespace topost
