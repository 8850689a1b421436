#include "topost/dc_solver.hpp"

#include <Eigen/Dense>
#include <cmath>

#include "topost/errors.hpp"

namespace topost {

double SolvedState::delta_theta(BranchIndex branch) const {
  const auto& br = grid->branches()[branch];
  return theta[br.from] - theta[br.to];
}

double SolvedState::theta_of(std::string_view bus) const { return theta[grid->bus_index(bus)]; }

double SolvedState::flow_of(std::string_view branch) const { return flow[grid->branch_index(branch)]; }

Eigen::SparseMatrix<double> full_bbus(const Grid& grid) {
  const auto n = static_cast<Eigen::Index>(grid.bus_count());
  std::vector<Eigen::Triplet<double>> triplets;
  triplets.reserve(4 * grid.branch_count());
  for (const auto& br : grid.branches()) {
    if (!br.connected()) continue;
    const auto f = static_cast<Eigen::Index>(br.from);
    const auto t = static_cast<Eigen::Index>(br.to);
    triplets.emplace_back(f, f, br.susceptance);
    triplets.emplace_back(t, t, br.susceptance);
    triplets.emplace_back(f, t, -br.susceptance);
    triplets.emplace_back(t, f, -br.susceptance);
  }
  Eigen::SparseMatrix<double> m(n, n);
  m.setFromTriplets(triplets.begin(), triplets.end());
  return m;
}

ReducedBbus build_bbus(const Grid& grid) {
  if (grid.bus_count() < 2) throw Error(ErrorKind::singular_system, "DC power flow needs at least two buses");
  const auto comps = connected_components(grid);
  if (comps.count > 1) {
    throw Error(ErrorKind::singular_system,
                "Bbus is singular: grid has " + std::to_string(comps.count) + " components");
  }
  ReducedBbus out;
  out.row_of_bus.assign(grid.bus_count(), -1);
  std::ptrdiff_t rows = 0;
  for (std::size_t i = 0; i < grid.bus_count(); ++i) {
    if (i != grid.slack()) out.row_of_bus[i] = rows++;
  }
  std::vector<Eigen::Triplet<double>> triplets;
  triplets.reserve(4 * grid.branch_count());
  for (const auto& br : grid.branches()) {
    if (!br.connected()) continue;
    const auto f = out.row_of_bus[br.from];
    const auto t = out.row_of_bus[br.to];
    if (f >= 0) triplets.emplace_back(f, f, br.susceptance);
    if (t >= 0) triplets.emplace_back(t, t, br.susceptance);
    if (f >= 0 && t >= 0) {
      triplets.emplace_back(f, t, -br.susceptance);
      triplets.emplace_back(t, f, -br.susceptance);
    }
  }
  out.matrix.resize(rows, rows);
  out.matrix.setFromTriplets(triplets.begin(), triplets.end());
  out.matrix.makeCompressed();
  return out;
}

DcFactorization::DcFactorization(std::shared_ptr<const Grid> grid) : grid_(std::move(grid)) {
  bbus_ = build_bbus(*grid_);
  ldlt_.compute(bbus_.matrix);
  if (ldlt_.info() != Eigen::Success) {
    throw Error(ErrorKind::singular_system, "factorization of the reduced Bbus failed");
  }
}

std::vector<double> DcFactorization::solve_theta(std::span<const double> injections) const {
  const std::size_t n = grid_->bus_count();
  Eigen::VectorXd rhs(bbus_.matrix.rows());
  for (std::size_t i = 0; i < n; ++i) {
    if (bbus_.row_of_bus[i] >= 0) rhs[bbus_.row_of_bus[i]] = injections[i];
  }
  const Eigen::VectorXd x = ldlt_.solve(rhs);
  std::vector<double> theta(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    if (bbus_.row_of_bus[i] >= 0) theta[i] = x[bbus_.row_of_bus[i]];
  }
  return theta;
}

std::vector<double> DcFactorization::branch_flows(std::span<const double> theta) const {
  const auto& branches = grid_->branches();
  std::vector<double> flow(branches.size(), 0.0);
  for (std::size_t l = 0; l < branches.size(); ++l) {
    const auto& br = branches[l];
    if (br.connected()) flow[l] = br.susceptance * (theta[br.from] - theta[br.to]);
  }
  return flow;
}

SolvedState DcFactorization::solve() const {
  const auto p = grid_->bus_injections();
  return solve(p);
}

SolvedState DcFactorization::solve(std::span<const double> injections) const {
  SolvedState state;
  state.grid = grid_;
  state.fingerprint = grid_->fingerprint();
  state.theta = solve_theta(injections);
  state.flow = branch_flows(state.theta);

  // nodal balance at every non-slack bus
  std::vector<double> mismatch(injections.begin(), injections.end());
  const auto& branches = grid_->branches();
  for (std::size_t l = 0; l < branches.size(); ++l) {
    mismatch[branches[l].from] -= state.flow[l];
    mismatch[branches[l].to] += state.flow[l];
  }
  double worst = 0.0;
  for (std::size_t i = 0; i < mismatch.size(); ++i) {
    if (i != grid_->slack()) worst = std::max(worst, std::abs(mismatch[i]));
  }
  if (!(worst <= tolerance::solver_residual)) {
    throw Error(ErrorKind::singular_system,
                "DC solve did not reach nodal balance (mismatch " + std::to_string(worst) + " p.u.)");
  }
  return state;
}

std::vector<double> DcFactorization::dipole_theta(BranchIndex branch) const {
  const auto& br = grid_->branches()[branch];
  std::vector<double> p(grid_->bus_count(), 0.0);
  p[br.from] += 1.0;
  p[br.to] -= 1.0;
  return solve_theta(p);
}

std::vector<double> DcFactorization::dipole_flows(BranchIndex branch) const {
  const auto theta = dipole_theta(branch);
  return branch_flows(theta);
}

SolvedState solve_dc(std::shared_ptr<const Grid> grid) { return DcFactorization(std::move(grid)).solve(); }

SolvedState solve_dc(const Grid& grid) { return solve_dc(std::make_shared<const Grid>(grid)); }

namespace {

constexpr double bridge_tolerance = 1e-9;

BranchIndex require_outage(const Grid& grid, std::string_view outage) {
  const auto idx = grid.branch_index(outage);
  if (!grid.branches()[idx].connected()) {
    throw Error(ErrorKind::change_inapplicable, "branch '" + std::string(outage) + "' is not connected");
  }
  return idx;
}

double remaining_share(const std::vector<double>& dipole, BranchIndex outage, const Grid& grid) {
  const double share = 1.0 - dipole[outage];
  if (std::abs(share) < bridge_tolerance) {
    throw Error(ErrorKind::islanding_outage,
                "outage of '" + grid.branches()[outage].id + "' islands the grid");
  }
  return share;
}

}  // namespace

LodfRow lodf(const DcFactorization& reference, std::string_view outage) {
  const auto& grid = reference.grid();
  const auto o = require_outage(grid, outage);
  const auto d = reference.dipole_flows(o);
  const double share = remaining_share(d, o, grid);
  LodfRow row;
  row.outage = std::string(outage);
  row.outage_index = o;
  row.factors.resize(d.size());
  for (std::size_t l = 0; l < d.size(); ++l) row.factors[l] = d[l] / share;
  row.factors[o] = -1.0;
  return row;
}

LodfRow lodf(const Grid& grid, const SolvedState& reference, std::string_view outage) {
  if (reference.fingerprint != grid.fingerprint()) {
    throw Error(ErrorKind::invalid_argument, "reference state was solved on another topology");
  }
  return lodf(DcFactorization(reference.grid ? reference.grid : std::make_shared<const Grid>(grid)), outage);
}

SolvedState outage_state(const DcFactorization& reference, const SolvedState& ref_state, BranchIndex outage) {
  const auto& grid = reference.grid();
  if (!grid.branches()[outage].connected()) {
    throw Error(ErrorKind::change_inapplicable, "branch '" + grid.branches()[outage].id + "' is not connected");
  }
  const auto theta_d = reference.dipole_theta(outage);
  const auto flow_d = reference.branch_flows(theta_d);
  const double share = remaining_share(flow_d, outage, grid);
  const double dipole = ref_state.flow[outage] / share;

  const TopologyChange change = Disconnect{grid.branches()[outage].id};
  auto next = std::make_shared<const Grid>(apply_change_set_unchecked(grid, std::span(&change, 1)));

  SolvedState s;
  s.grid = next;
  s.fingerprint = next->fingerprint();
  s.theta.resize(theta_d.size());
  for (std::size_t i = 0; i < theta_d.size(); ++i) s.theta[i] = ref_state.theta[i] + dipole * theta_d[i];
  s.flow.resize(flow_d.size());
  for (std::size_t l = 0; l < flow_d.size(); ++l) s.flow[l] = ref_state.flow[l] + dipole * flow_d[l];
  s.flow[outage] = 0.0;
  return s;
}

CancellingFlowReport verify_cancelling_flow_model(const Grid& grid, std::span<const std::string> outages) {
  auto ref = std::make_shared<const Grid>(grid);
  DcFactorization fact(ref);
  const auto ref_state = fact.solve();

  ChangeSet changes;
  std::vector<BranchIndex> idx;
  for (const auto& id : outages) {
    idx.push_back(require_outage(grid, id));
    changes.push_back(Disconnect{id});
  }
  Grid physical_grid = apply_change_set_unchecked(grid, changes);
  if (connected_components(physical_grid).count > 1) {
    throw Error(ErrorKind::singular_system, "outage set islands the grid");
  }
  const auto physical = solve_dc(physical_grid);

  const std::size_t n = idx.size();
  std::vector<std::vector<double>> dipole_flow(n), dipole_theta(n);
  std::vector<double> self_share(n);
  for (std::size_t k = 0; k < n; ++k) {
    dipole_theta[k] = fact.dipole_theta(idx[k]);
    dipole_flow[k] = fact.branch_flows(dipole_theta[k]);
    self_share[k] = 1.0 - dipole_flow[k][idx[k]];
  }
  // LODF_{o,l} restricted to the outage set, LODF_{o,o} = -1
  auto lodf_of = [&](std::size_t o, std::size_t l) {
    return o == l ? -1.0 : dipole_flow[o][idx[l]] / self_share[o];
  };

  Eigen::MatrixXd a(n, n);
  Eigen::VectorXd b(n);
  for (std::size_t l = 0; l < n; ++l) {
    b[l] = ref_state.flow[idx[l]];
    for (std::size_t o = 0; o < n; ++o) a(l, o) = lodf_of(o, l);
  }
  Eigen::FullPivLU<Eigen::MatrixXd> lu(a);
  if (n > 0 && lu.rank() < static_cast<Eigen::Index>(n)) {
    throw Error(ErrorKind::singular_system, "cancelling-flow system is singular");
  }
  const Eigen::VectorXd cf = n > 0 ? Eigen::VectorXd(lu.solve(b)) : Eigen::VectorXd();

  CancellingFlowReport report;
  report.outages.assign(outages.begin(), outages.end());
  auto p = grid.bus_injections();
  for (std::size_t k = 0; k < n; ++k) {
    report.cancelling_flow.push_back(cf[k]);
    double vt = ref_state.flow[idx[k]];
    for (std::size_t o = 0; o < n; ++o) {
      if (o != k) vt -= lodf_of(o, k) * cf[o];
    }
    report.induced_flow.push_back(vt);
    report.max_induced_deviation = std::max(report.max_induced_deviation, std::abs(vt + cf[k]));
    const double c = -cf[k] / self_share[k];
    report.dipole.push_back(c);
    const auto& br = grid.branches()[idx[k]];
    p[br.from] += c;
    p[br.to] -= c;
  }

  const auto model_theta = fact.solve_theta(p);
  report.model_flow = fact.branch_flows(model_theta);
  for (std::size_t k = 0; k < n; ++k) {
    const auto& br = grid.branches()[idx[k]];
    const double ohm = br.susceptance * (model_theta[br.from] - model_theta[br.to]);
    report.ohm_flow.push_back(ohm);
    report.max_ohm_deviation = std::max(report.max_ohm_deviation, std::abs(ohm - report.dipole[k]));
    // the line hands its whole flow over to the dipole, nothing flows physically
    report.model_flow[idx[k]] = ohm - report.dipole[k];
  }
  for (std::size_t l = 0; l < report.model_flow.size(); ++l) {
    report.max_flow_deviation =
        std::max(report.max_flow_deviation, std::abs(report.model_flow[l] - physical.flow[l]));
  }
  for (std::size_t i = 0; i < model_theta.size(); ++i) {
    report.max_theta_deviation =
        std::max(report.max_theta_deviation, std::abs(model_theta[i] - physical.theta[i]));
  }
  return report;
}

}  // namespace topost
