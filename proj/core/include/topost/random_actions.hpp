#pragma once

#include <optional>
#include <random>
#include <span>

#include "topost/grid.hpp"

namespace topost {

inline constexpr ChangeKind all_change_kinds[] = {ChangeKind::disconnect, ChangeKind::reconnect, ChangeKind::split,
                                                  ChangeKind::merge};

/// Random two-busbar assignment of an unsplit substation with at least one
/// connected branch end on each busbar; nullopt when the substation has
/// fewer than two connected branch ends.
std::optional<Split> random_split(const Grid& grid, std::string_view substation, std::mt19937_64& rng);

/// Opens `outages` non-bridge branches and splits `splits` substations so
/// that reconnections and merges become available. The result stays connected.
ChangeSet random_reference(const Grid& grid, std::size_t outages, std::size_t splits, std::mt19937_64& rng);

/// `size` distinct changes drawn from `kinds`, each applicable to `reference`
/// on its own without islanding, and whose combination keeps the grid
/// connected. nullopt when no such set was found within `attempts` draws.
std::optional<ChangeSet> random_change_set(const Grid& reference, std::size_t size, std::mt19937_64& rng,
                                           std::span<const ChangeKind> kinds = all_change_kinds,
                                           int attempts = 200);

}  // namespace topost
