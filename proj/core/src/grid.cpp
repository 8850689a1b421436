#include "topost/grid.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>
#include <stack>

#include "topost/errors.hpp"

namespace topost {

std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::change_inapplicable: return "ChangeInapplicable";
    case ErrorKind::grid_disconnected: return "GridDisconnected";
    case ErrorKind::parse_error: return "ParseError";
    case ErrorKind::unsupported_feature: return "UnsupportedFeature";
    case ErrorKind::schema_error: return "SchemaError";
    case ErrorKind::unknown_id: return "UnknownId";
    case ErrorKind::singular_system: return "SingularSystem";
    case ErrorKind::islanding_outage: return "IslandingOutage";
    case ErrorKind::degenerate_observable: return "DegenerateObservable";
    case ErrorKind::singular_matrix: return "SingularMatrix";
    case ErrorKind::self_check_failed: return "SelfCheckFailed";
    case ErrorKind::duplicate_change: return "DuplicateChange";
    case ErrorKind::invalid_argument: return "InvalidArgument";
  }
  return "Error";
}

ChangeKind kind_of(const TopologyChange& change) {
  return static_cast<ChangeKind>(change.index());
}

std::string_view to_string(ChangeKind kind) {
  switch (kind) {
    case ChangeKind::disconnect: return "disconnect";
    case ChangeKind::reconnect: return "reconnect";
    case ChangeKind::split: return "split";
    case ChangeKind::merge: return "merge";
  }
  return "?";
}

const std::string& target_of(const TopologyChange& change) {
  return std::visit(
      [](const auto& c) -> const std::string& {
        using T = std::decay_t<decltype(c)>;
        if constexpr (std::is_same_v<T, Disconnect> || std::is_same_v<T, Reconnect>) {
          return c.branch;
        } else {
          return c.substation;
        }
      },
      change);
}

std::string describe(const TopologyChange& change) {
  return std::string(to_string(kind_of(change))) + ":" + target_of(change);
}

namespace {

Error invalid(const std::string& message) { return Error(ErrorKind::invalid_argument, message); }

template <typename Map>
void insert_unique(Map& map, const std::string& id, std::size_t index, const char* what) {
  if (id.empty()) throw invalid(std::string("empty ") + what + " id");
  if (!map.emplace(id, index).second) throw invalid(std::string("duplicate ") + what + " id '" + id + "'");
}

template <typename Map>
auto lookup(const Map& map, std::string_view id) -> std::optional<typename Map::mapped_type> {
  auto it = map.find(std::string(id));
  if (it == map.end()) return std::nullopt;
  return it->second;
}

}  // namespace

Grid::Grid(std::vector<Bus> buses, std::vector<Branch> branches, std::vector<Injection> injections,
           BusIndex slack, double base_mva)
    : buses_(std::move(buses)),
      branches_(std::move(branches)),
      injections_(std::move(injections)),
      slack_(slack),
      base_mva_(base_mva) {
  if (buses_.empty()) throw invalid("grid has no bus");
  if (slack_ >= buses_.size()) throw invalid("slack bus index out of range");
  if (!(base_mva_ > 0.0) || !std::isfinite(base_mva_)) throw invalid("base MVA must be positive");
  for (const auto& br : branches_) {
    if (br.from >= buses_.size() || br.to >= buses_.size()) {
      throw invalid("branch '" + br.id + "' references an unknown bus");
    }
    if (br.from == br.to) throw invalid("branch '" + br.id + "' is a self loop");
    if (!std::isfinite(br.susceptance) || br.susceptance == 0.0) {
      throw invalid("branch '" + br.id + "' needs a finite nonzero susceptance");
    }
  }
  for (const auto& inj : injections_) {
    if (inj.bus >= buses_.size()) throw invalid("injection '" + inj.id + "' references an unknown bus");
    if (!std::isfinite(inj.p)) throw invalid("injection '" + inj.id + "' is not finite");
  }
  for (auto& bus : buses_) {
    if (bus.substation.empty()) bus.substation = bus.id;
  }
  index();
}

void Grid::index() {
  for (std::size_t i = 0; i < buses_.size(); ++i) insert_unique(bus_ids_, buses_[i].id, i, "bus");
  for (std::size_t i = 0; i < branches_.size(); ++i) insert_unique(branch_ids_, branches_[i].id, i, "branch");
  for (std::size_t i = 0; i < injections_.size(); ++i) {
    insert_unique(injection_ids_, injections_[i].id, i, "injection");
  }
  for (std::size_t i = 0; i < buses_.size(); ++i) {
    const auto& name = buses_[i].substation;
    auto [it, inserted] = substation_ids_.emplace(name, substations_.size());
    if (inserted) {
      substations_.push_back(Substation{name, i, std::nullopt});
    } else {
      auto& sub = substations_[it->second];
      if (sub.busbar2) throw invalid("substation '" + name + "' has more than two busbars");
      sub.busbar2 = i;
    }
  }
}

std::optional<BusIndex> Grid::find_bus(std::string_view id) const { return lookup(bus_ids_, id); }
std::optional<BranchIndex> Grid::find_branch(std::string_view id) const { return lookup(branch_ids_, id); }
std::optional<std::size_t> Grid::find_injection(std::string_view id) const {
  return lookup(injection_ids_, id);
}
std::optional<std::size_t> Grid::find_substation(std::string_view id) const {
  return lookup(substation_ids_, id);
}

BusIndex Grid::bus_index(std::string_view id) const {
  if (auto i = find_bus(id)) return *i;
  throw Error(ErrorKind::unknown_id, "unknown bus '" + std::string(id) + "'");
}

BranchIndex Grid::branch_index(std::string_view id) const {
  if (auto i = find_branch(id)) return *i;
  throw Error(ErrorKind::unknown_id, "unknown branch '" + std::string(id) + "'");
}

const Substation& Grid::substation(std::string_view id) const {
  if (auto i = find_substation(id)) return substations_[*i];
  throw Error(ErrorKind::unknown_id, "unknown substation '" + std::string(id) + "'");
}

std::vector<double> Grid::bus_injections() const {
  std::vector<double> p(buses_.size(), 0.0);
  for (const auto& inj : injections_) p[inj.bus] += inj.p;
  return p;
}

std::vector<Terminal> Grid::terminals_at(BusIndex bus) const {
  std::vector<Terminal> out;
  for (const auto& br : branches_) {
    if (br.from == bus || br.to == bus) out.push_back({TerminalKind::branch, br.id});
  }
  for (const auto& inj : injections_) {
    if (inj.bus == bus) out.push_back({TerminalKind::injection, inj.id});
  }
  return out;
}

namespace {

struct Fnv {
  std::uint64_t h = 1469598103934665603ULL;
  void bytes(const void* data, std::size_t n) {
    const auto* p = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < n; ++i) {
      h ^= p[i];
      h *= 1099511628211ULL;
    }
  }
  void str(std::string_view s) {
    bytes(s.data(), s.size());
    const char sep = '\x1f';
    bytes(&sep, 1);
  }
};

}  // namespace

std::uint64_t Grid::fingerprint() const {
  Fnv f;
  for (const auto& bus : buses_) f.str(bus.id);
  f.str(buses_[slack_].id);
  for (const auto& br : branches_) {
    f.str(br.id);
    f.str(buses_[br.from].id);
    f.str(buses_[br.to].id);
    const char st = br.connected() ? 'c' : 'd';
    f.bytes(&st, 1);
  }
  for (const auto& inj : injections_) {
    f.str(inj.id);
    f.str(buses_[inj.bus].id);
  }
  return f.h;
}

namespace {

Error inapplicable(const TopologyChange& change, const std::string& why) {
  return Error(ErrorKind::change_inapplicable, describe(change) + ": " + why);
}

struct MutableGrid {
  std::vector<Bus> buses;
  std::vector<Branch> branches;
  std::vector<Injection> injections;
  BusIndex slack;
  double base_mva;
};

std::string fresh_bus_id(const MutableGrid& g, const std::string& base) {
  std::string id = base + "_b2";
  auto taken = [&](const std::string& s) {
    return std::any_of(g.buses.begin(), g.buses.end(), [&](const Bus& b) { return b.id == s; });
  };
  for (int k = 3; taken(id); ++k) id = base + "_b" + std::to_string(k);
  return id;
}

void apply_one(MutableGrid& g, const Grid& view, const TopologyChange& change) {
  std::visit(
      [&](const auto& c) {
        using T = std::decay_t<decltype(c)>;
        if constexpr (std::is_same_v<T, Disconnect>) {
          auto& br = g.branches[view.branch_index(c.branch)];
          if (!br.connected()) throw inapplicable(change, "branch already disconnected");
          br.status = BranchStatus::disconnected;
        } else if constexpr (std::is_same_v<T, Reconnect>) {
          auto& br = g.branches[view.branch_index(c.branch)];
          if (br.connected()) throw inapplicable(change, "branch already connected");
          br.status = BranchStatus::connected;
        } else if constexpr (std::is_same_v<T, Split>) {
          const auto& sub = view.substation(c.substation);
          if (sub.split()) throw inapplicable(change, "substation already split");
          const BusIndex bb1 = sub.busbar1;
          std::set<Terminal> moved;
          for (const auto& t : c.busbar2) {
            if (!moved.insert(t).second) throw inapplicable(change, "terminal '" + t.element + "' listed twice");
            if (t.kind == TerminalKind::branch) {
              auto idx = view.find_branch(t.element);
              if (!idx) throw Error(ErrorKind::unknown_id, "unknown branch '" + t.element + "'");
              const auto& br = g.branches[*idx];
              if (br.from != bb1 && br.to != bb1) {
                throw inapplicable(change, "branch '" + t.element + "' does not end at the substation");
              }
            } else {
              auto idx = view.find_injection(t.element);
              if (!idx) throw Error(ErrorKind::unknown_id, "unknown injection '" + t.element + "'");
              if (g.injections[*idx].bus != bb1) {
                throw inapplicable(change, "injection '" + t.element + "' is not at the substation");
              }
            }
          }
          const std::size_t total = view.terminals_at(bb1).size();
          if (moved.empty() || moved.size() == total) return;  // one empty busbar: no split
          const BusIndex bb2 = g.buses.size();
          g.buses.push_back(Bus{fresh_bus_id(g, g.buses[bb1].id), g.buses[bb1].substation});
          for (const auto& t : moved) {
            if (t.kind == TerminalKind::branch) {
              auto& br = g.branches[*view.find_branch(t.element)];
              (br.from == bb1 ? br.from : br.to) = bb2;
            } else {
              g.injections[*view.find_injection(t.element)].bus = bb2;
            }
          }
        } else {
          const auto& sub = view.substation(c.substation);
          if (!sub.split()) throw inapplicable(change, "substation is not split");
          const BusIndex keep = sub.busbar1;
          const BusIndex gone = *sub.busbar2;
          auto remap = [&](BusIndex b) {
            if (b == gone) b = keep;
            return b > gone ? b - 1 : b;
          };
          for (auto& br : g.branches) {
            br.from = remap(br.from);
            br.to = remap(br.to);
          }
          for (auto& inj : g.injections) inj.bus = remap(inj.bus);
          g.slack = remap(g.slack);
          g.buses.erase(g.buses.begin() + static_cast<std::ptrdiff_t>(gone));
        }
      },
      change);
}

}  // namespace

Grid apply_change_set_unchecked(const Grid& grid, std::span<const TopologyChange> changes) {
  Grid current = grid;
  for (const auto& change : changes) {
    MutableGrid g{current.buses(), current.branches(), current.injections(), current.slack(),
                  current.base_mva()};
    apply_one(g, current, change);
    current = Grid(std::move(g.buses), std::move(g.branches), std::move(g.injections), g.slack, g.base_mva);
  }
  return current;
}

Grid apply_change_set(const Grid& grid, std::span<const TopologyChange> changes) {
  Grid out = apply_change_set_unchecked(grid, changes);
  require_connected(out);
  return out;
}

void require_distinct_targets(std::span<const TopologyChange> changes) {
  std::set<std::pair<bool, std::string>> seen;
  for (const auto& change : changes) {
    const auto k = kind_of(change);
    const bool on_branch = k == ChangeKind::disconnect || k == ChangeKind::reconnect;
    if (!seen.emplace(on_branch, target_of(change)).second) {
      throw Error(ErrorKind::duplicate_change, "more than one change targets '" + target_of(change) + "'");
    }
  }
}

Components connected_components(const Grid& grid) {
  const std::size_t n = grid.bus_count();
  std::vector<std::size_t> parent(n);
  std::iota(parent.begin(), parent.end(), std::size_t{0});
  auto find = [&](std::size_t x) {
    while (parent[x] != x) x = parent[x] = parent[parent[x]];
    return x;
  };
  for (const auto& br : grid.branches()) {
    if (!br.connected()) continue;
    auto a = find(br.from), b = find(br.to);
    if (a != b) parent[std::max(a, b)] = std::min(a, b);
  }
  Components out;
  out.label.assign(n, 0);
  std::vector<std::size_t> label_of_root(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    auto r = find(i);
    if (label_of_root[r] == n) label_of_root[r] = out.count++;
    out.label[i] = label_of_root[r];
  }
  return out;
}

void require_connected(const Grid& grid) {
  const auto comps = connected_components(grid);
  if (comps.count > 1) {
    std::string isolated;
    for (std::size_t i = 0; i < grid.bus_count(); ++i) {
      if (comps.label[i] != comps.label[grid.slack()]) {
        isolated = grid.buses()[i].id;
        break;
      }
    }
    throw Error(ErrorKind::grid_disconnected, "grid splits into " + std::to_string(comps.count) +
                                                  " components (bus '" + isolated +
                                                  "' is cut off from the slack)");
  }
}

std::vector<bool> bridge_branches(const Grid& grid) {
  const std::size_t n = grid.bus_count();
  const auto& branches = grid.branches();
  std::vector<std::vector<std::pair<BusIndex, BranchIndex>>> adj(n);
  for (BranchIndex e = 0; e < branches.size(); ++e) {
    if (!branches[e].connected()) continue;
    adj[branches[e].from].emplace_back(branches[e].to, e);
    adj[branches[e].to].emplace_back(branches[e].from, e);
  }
  constexpr std::size_t unvisited = static_cast<std::size_t>(-1);
  std::vector<std::size_t> disc(n, unvisited), low(n, 0);
  std::vector<bool> bridge(branches.size(), false);
  std::size_t timer = 0;

  struct Frame {
    BusIndex v;
    BranchIndex via;
    std::size_t next;
  };
  for (BusIndex root = 0; root < n; ++root) {
    if (disc[root] != unvisited) continue;
    std::stack<Frame> stack;
    stack.push({root, unvisited, 0});
    disc[root] = low[root] = timer++;
    while (!stack.empty()) {
      auto& f = stack.top();
      if (f.next < adj[f.v].size()) {
        auto [w, e] = adj[f.v][f.next++];
        if (e == f.via) continue;
        if (disc[w] == unvisited) {
          disc[w] = low[w] = timer++;
          stack.push({w, e, 0});
        } else {
          low[f.v] = std::min(low[f.v], disc[w]);
        }
      } else {
        const Frame done = f;
        stack.pop();
        if (!stack.empty()) {
          auto& parent = stack.top();
          low[parent.v] = std::min(low[parent.v], low[done.v]);
          if (low[done.v] > disc[parent.v]) bridge[done.via] = true;
        }
      }
    }
  }
  return bridge;
}

namespace {

bool same_value(double a, double b) {
  return std::abs(a - b) <= 1e-12 * std::max({1.0, std::abs(a), std::abs(b)});
}

}  // namespace

bool electrically_equal(const Grid& a, const Grid& b) {
  if (a.bus_count() != b.bus_count() || a.branch_count() != b.branch_count() ||
      a.injections().size() != b.injections().size()) {
    return false;
  }
  const auto bus_id = [](const Grid& g, BusIndex i) -> const std::string& { return g.buses()[i].id; };
  if (bus_id(a, a.slack()) != bus_id(b, b.slack())) return false;
  for (const auto& bus : a.buses()) {
    auto j = b.find_bus(bus.id);
    if (!j || b.buses()[*j].substation != bus.substation) return false;
  }
  for (const auto& br : a.branches()) {
    auto j = b.find_branch(br.id);
    if (!j) return false;
    const auto& other = b.branches()[*j];
    if (other.status != br.status || !same_value(other.susceptance, br.susceptance) ||
        bus_id(b, other.from) != bus_id(a, br.from) || bus_id(b, other.to) != bus_id(a, br.to)) {
      return false;
    }
  }
  for (const auto& inj : a.injections()) {
    auto j = b.find_injection(inj.id);
    if (!j) return false;
    const auto& other = b.injections()[*j];
    if (!same_value(other.p, inj.p) || bus_id(b, other.bus) != bus_id(a, inj.bus)) return false;
  }
  return true;
}

}  // namespace topost
