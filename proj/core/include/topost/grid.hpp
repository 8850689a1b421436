#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <variant>
#include <vector>

namespace topost {

using BusIndex = std::size_t;
using BranchIndex = std::size_t;

enum class BranchStatus : std::uint8_t { connected, disconnected };

struct Bus {
  std::string id;
  std::string substation;
};

/// Net active power attached to a bus, per-unit, positive = generation.
struct Injection {
  std::string id;
  BusIndex bus = 0;
  double p = 0.0;
};

struct Branch {
  std::string id;
  BusIndex from = 0;
  BusIndex to = 0;
  double susceptance = 0.0;
  BranchStatus status = BranchStatus::connected;

  bool connected() const noexcept { return status == BranchStatus::connected; }
};

/// Two-busbar substation. The coupler is open (the substation is split)
/// exactly when the second busbar exists as its own bus.
struct Substation {
  std::string id;
  BusIndex busbar1 = 0;
  std::optional<BusIndex> busbar2;

  bool split() const noexcept { return busbar2.has_value(); }
};

enum class TerminalKind : std::uint8_t { branch, injection };

/// An element endpoint at a substation: a branch end or an injection.
struct Terminal {
  TerminalKind kind = TerminalKind::branch;
  std::string element;

  auto operator<=>(const Terminal&) const = default;
};

struct Disconnect {
  std::string branch;
  bool operator==(const Disconnect&) const = default;
};

struct Reconnect {
  std::string branch;
  bool operator==(const Reconnect&) const = default;
};

/// Open the coupler at `substation`; the listed terminals move to busbar 2,
/// every other terminal stays on busbar 1.
struct Split {
  std::string substation;
  std::vector<Terminal> busbar2;
  bool operator==(const Split&) const = default;
};

struct Merge {
  std::string substation;
  bool operator==(const Merge&) const = default;
};

using TopologyChange = std::variant<Disconnect, Reconnect, Split, Merge>;
using ChangeSet = std::vector<TopologyChange>;

enum class ChangeKind : std::uint8_t { disconnect, reconnect, split, merge };

ChangeKind kind_of(const TopologyChange& change);
std::string_view to_string(ChangeKind kind);

/// Element targeted by a change: branch id or substation id.
const std::string& target_of(const TopologyChange& change);

/// Short human readable label, e.g. "disconnect:l_2-4".
std::string describe(const TopologyChange& change);

/// Immutable grid. All structural edits go through apply_change_set, which
/// returns a new value.
class Grid {
 public:
  Grid() = default;

  /// Substations are derived from Bus::substation: a substation naming two
  /// buses is considered split, the first of them being busbar 1.
  Grid(std::vector<Bus> buses, std::vector<Branch> branches,
       std::vector<Injection> injections, BusIndex slack, double base_mva = 100.0);

  const std::vector<Bus>& buses() const noexcept { return buses_; }
  const std::vector<Branch>& branches() const noexcept { return branches_; }
  const std::vector<Injection>& injections() const noexcept { return injections_; }
  const std::vector<Substation>& substations() const noexcept { return substations_; }
  BusIndex slack() const noexcept { return slack_; }
  double base_mva() const noexcept { return base_mva_; }

  std::size_t bus_count() const noexcept { return buses_.size(); }
  std::size_t branch_count() const noexcept { return branches_.size(); }

  std::optional<BusIndex> find_bus(std::string_view id) const;
  std::optional<BranchIndex> find_branch(std::string_view id) const;
  std::optional<std::size_t> find_injection(std::string_view id) const;
  std::optional<std::size_t> find_substation(std::string_view id) const;

  /// Throwing lookups (ErrorKind::unknown_id).
  BusIndex bus_index(std::string_view id) const;
  BranchIndex branch_index(std::string_view id) const;
  const Substation& substation(std::string_view id) const;

  /// Sum of injections per bus.
  std::vector<double> bus_injections() const;

  /// Terminals currently attached to a bus.
  std::vector<Terminal> terminals_at(BusIndex bus) const;

  /// Hash of the electrical structure: bus partition and branch statuses.
  std::uint64_t fingerprint() const;

 private:
  void index();

  std::vector<Bus> buses_;
  std::vector<Branch> branches_;
  std::vector<Injection> injections_;
  std::vector<Substation> substations_;
  BusIndex slack_ = 0;
  double base_mva_ = 100.0;

  std::unordered_map<std::string, BusIndex> bus_ids_;
  std::unordered_map<std::string, BranchIndex> branch_ids_;
  std::unordered_map<std::string, std::size_t> injection_ids_;
  std::unordered_map<std::string, std::size_t> substation_ids_;
};

/// Applies the changes in order. Each change must be applicable to the
/// grid produced by the previous ones and the result must stay connected.
Grid apply_change_set(const Grid& grid, std::span<const TopologyChange> changes);

/// Same as apply_change_set but leaves the connectivity check to the caller.
Grid apply_change_set_unchecked(const Grid& grid, std::span<const TopologyChange> changes);

struct Components {
  std::size_t count = 0;
  std::vector<std::size_t> label;  // per bus, labels are 0..count-1
};

Components connected_components(const Grid& grid);

/// Throws ErrorKind::grid_disconnected when the grid has several islands.
void require_connected(const Grid& grid);

/// Connected branches whose removal splits the grid (parallel branches are
/// never bridges).
std::vector<bool> bridge_branches(const Grid& grid);

/// Same bus ids, same terminal placement, same branch statuses and slack;
/// susceptances and injections agree to 1e-12 relative.
bool electrically_equal(const Grid& a, const Grid& b);

/// Throws ErrorKind::duplicate_change when two changes target one element.
void require_distinct_targets(std::span<const TopologyChange> changes);

}  // namespace topost
