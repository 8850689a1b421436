#include "topost/random_actions.hpp"

#include <algorithm>
#include <set>

#include "topost/errors.hpp"

namespace topost {

namespace {

template <class T>
const T& pick(const std::vector<T>& items, std::mt19937_64& rng) {
  std::uniform_int_distribution<std::size_t> d(0, items.size() - 1);
  return items[d(rng)];
}

bool stays_connected(const Grid& grid, std::span<const TopologyChange> changes) {
  try {
    (void)apply_change_set(grid, changes);
    return true;
  } catch (const Error&) {
    return false;
  }
}

std::optional<TopologyChange> draw(const Grid& grid, ChangeKind kind, std::mt19937_64& rng) {
  std::vector<std::string> ids;
  switch (kind) {
    case ChangeKind::disconnect: {
      const auto bridges = bridge_branches(grid);
      for (std::size_t l = 0; l < grid.branch_count(); ++l) {
        if (grid.branches()[l].connected() && !bridges[l]) ids.push_back(grid.branches()[l].id);
      }
      if (ids.empty()) return std::nullopt;
      return Disconnect{pick(ids, rng)};
    }
    case ChangeKind::reconnect:
      for (const auto& br : grid.branches()) {
        if (!br.connected()) ids.push_back(br.id);
      }
      if (ids.empty()) return std::nullopt;
      return Reconnect{pick(ids, rng)};
    case ChangeKind::split:
      for (const auto& sub : grid.substations()) {
        if (!sub.split()) ids.push_back(sub.id);
      }
      if (ids.empty()) return std::nullopt;
      if (auto s = random_split(grid, pick(ids, rng), rng)) return *s;
      return std::nullopt;
    case ChangeKind::merge:
      for (const auto& sub : grid.substations()) {
        if (sub.split()) ids.push_back(sub.id);
      }
      if (ids.empty()) return std::nullopt;
      return Merge{pick(ids, rng)};
  }
  return std::nullopt;
}

}  // namespace

std::optional<Split> random_split(const Grid& grid, std::string_view substation, std::mt19937_64& rng) {
  const auto& sub = grid.substation(substation);
  if (sub.split()) return std::nullopt;
  std::vector<Terminal> ends;
  std::vector<Terminal> others;
  for (const auto& t : grid.terminals_at(sub.busbar1)) {
    const bool live = t.kind == TerminalKind::branch && grid.branches()[grid.branch_index(t.element)].connected();
    (live ? ends : others).push_back(t);
  }
  if (ends.size() < 2) return std::nullopt;
  std::shuffle(ends.begin(), ends.end(), rng);
  std::uniform_int_distribution<std::size_t> cut(1, ends.size() - 1);
  Split split{sub.id, {}};
  split.busbar2.assign(ends.begin(), ends.begin() + static_cast<std::ptrdiff_t>(cut(rng)));
  std::bernoulli_distribution coin(0.5);
  for (const auto& t : others) {
    if (coin(rng)) split.busbar2.push_back(t);
  }
  std::sort(split.busbar2.begin(), split.busbar2.end());
  return split;
}

ChangeSet random_reference(const Grid& grid, std::size_t outages, std::size_t splits, std::mt19937_64& rng) {
  ChangeSet out;
  Grid current = grid;
  std::set<std::string> used;
  auto add = [&](ChangeKind kind, std::size_t count) {
    for (std::size_t n = 0, tries = 0; n < count && tries < 200; ++tries) {
      auto c = draw(current, kind, rng);
      if (!c || used.contains(target_of(*c)) || !stays_connected(current, std::span(&*c, 1))) continue;
      current = apply_change_set(current, std::span(&*c, 1));
      used.insert(target_of(*c));
      out.push_back(*c);
      ++n;
    }
  };
  add(ChangeKind::disconnect, outages);
  add(ChangeKind::split, splits);
  return out;
}

std::optional<ChangeSet> random_change_set(const Grid& reference, std::size_t size, std::mt19937_64& rng,
                                           std::span<const ChangeKind> kinds, int attempts) {
  if (kinds.empty()) throw Error(ErrorKind::invalid_argument, "no change kinds to draw from");
  std::uniform_int_distribution<std::size_t> which(0, kinds.size() - 1);
  for (int a = 0; a < attempts; ++a) {
    ChangeSet set;
    std::set<std::string> used;
    for (int tries = 0; set.size() < size && tries < 50; ++tries) {
      auto c = draw(reference, kinds[which(rng)], rng);
      if (!c || used.contains(target_of(*c))) continue;
      if (!stays_connected(reference, std::span(&*c, 1))) continue;
      used.insert(target_of(*c));
      set.push_back(std::move(*c));
    }
    if (set.size() == size && stays_connected(reference, set)) return set;
  }
  return std::nullopt;
}

}  // namespace topost
