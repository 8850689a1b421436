#include <gtest/gtest.h>

#include <algorithm>
#include <random>

#include "fixtures.hpp"
#include "topost/errors.hpp"
#include "topost/random_actions.hpp"

namespace topost {
namespace {

using test::five_bus;
using test::load_case;
using test::triangle;

ErrorKind kind_of_error(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.kind();
  }
  ADD_FAILURE() << "no error raised";
  return ErrorKind::invalid_argument;
}

TEST(Grid, EmptyChangeSetIsIdentity) {
  const Grid g = five_bus();
  EXPECT_TRUE(electrically_equal(apply_change_set(g, {}), g));
}

TEST(Grid, DisconnectThenReconnectIsIdentity) {
  const Grid g = five_bus();
  const ChangeSet changes{Disconnect{"l_3-4"}, Reconnect{"l_3-4"}};
  EXPECT_TRUE(electrically_equal(apply_change_set(g, changes), g));
}

TEST(Grid, SplitWithEmptyBusbarIsNoOp) {
  const Grid g = five_bus();
  const ChangeSet none{Split{"sub_3", {}}};
  EXPECT_TRUE(electrically_equal(apply_change_set(g, none), g));

  Split all{"sub_3", g.terminals_at(g.bus_index("3"))};
  const Grid same = apply_change_set(g, ChangeSet{all});
  EXPECT_TRUE(electrically_equal(same, g));
  EXPECT_EQ(same.bus_count(), g.bus_count());
}

TEST(Grid, SplitMaterializesBusAndMovesTerminals) {
  const Grid g = five_bus();
  const ChangeSet changes{Split{"sub_3", {{TerminalKind::branch, "l_3-4"}, {TerminalKind::injection, "inj_3"}}}};
  const Grid s = apply_change_set(g, changes);
  ASSERT_EQ(s.bus_count(), 6u);
  const auto& sub = s.substation("sub_3");
  ASSERT_TRUE(sub.split());
  EXPECT_EQ(s.branches()[s.branch_index("l_3-4")].from, *sub.busbar2);
  EXPECT_EQ(s.injections()[*s.find_injection("inj_3")].bus, *sub.busbar2);
  EXPECT_EQ(s.branches()[s.branch_index("l_3-5")].from, sub.busbar1);
  // original untouched
  EXPECT_EQ(g.bus_count(), 5u);
  EXPECT_FALSE(g.substation("sub_3").split());
}

TEST(Grid, SplitThenMergeIsIdentity) {
  const Grid g = five_bus();
  const ChangeSet split{Split{"sub_3", {{TerminalKind::branch, "l_3-4"}, {TerminalKind::branch, "l_1-3"}}}};
  const Grid s = apply_change_set(g, split);
  const ChangeSet merge{Merge{"sub_3"}};
  EXPECT_TRUE(electrically_equal(apply_change_set(s, merge), g));
}

TEST(Grid, PreconditionsRaiseChangeInapplicable) {
  const Grid g = five_bus();
  EXPECT_EQ(kind_of_error([&] { apply_change_set(g, ChangeSet{Disconnect{"l_2-4"}}); }),
            ErrorKind::change_inapplicable);
  EXPECT_EQ(kind_of_error([&] { apply_change_set(g, ChangeSet{Reconnect{"l_1-2"}}); }),
            ErrorKind::change_inapplicable);
  EXPECT_EQ(kind_of_error([&] { apply_change_set(g, ChangeSet{Merge{"sub_2"}}); }),
            ErrorKind::change_inapplicable);
  const ChangeSet twice{Split{"sub_3", {{TerminalKind::branch, "l_3-4"}, {TerminalKind::branch, "l_1-3"}}},
                        Split{"sub_3", {{TerminalKind::branch, "l_3-5"}}}};
  EXPECT_EQ(kind_of_error([&] { apply_change_set(g, twice); }), ErrorKind::change_inapplicable);
  EXPECT_EQ(kind_of_error([&] { apply_change_set(g, ChangeSet{Split{"sub_3", {{TerminalKind::branch, "l_1-2"}}}}); }),
            ErrorKind::change_inapplicable);
  EXPECT_EQ(kind_of_error([&] { apply_change_set(g, ChangeSet{Disconnect{"l_9-9"}}); }), ErrorKind::unknown_id);
}

TEST(Grid, IslandingRaisesGridDisconnected) {
  const Grid g = triangle();
  const ChangeSet two{Disconnect{"l_1-2"}, Disconnect{"l_3-2"}};
  EXPECT_EQ(kind_of_error([&] { apply_change_set(g, two); }), ErrorKind::grid_disconnected);
}

TEST(Grid, ConnectedComponents) {
  const Grid g = triangle();
  EXPECT_EQ(connected_components(g).count, 1u);
  const ChangeSet two{Disconnect{"l_1-2"}, Disconnect{"l_3-2"}};
  const auto c = connected_components(apply_change_set_unchecked(g, two));
  EXPECT_EQ(c.count, 2u);
  EXPECT_EQ(c.label[0], c.label[2]);
  EXPECT_NE(c.label[0], c.label[1]);
  EXPECT_EQ(connected_components(load_case("case14")).count, 1u);
}

TEST(Grid, BridgesOfCase14) {
  const Grid g = load_case("case14");
  const auto bridges = bridge_branches(g);
  // bus 8 hangs off bus 7 through a single transformer
  for (std::size_t l = 0; l < g.branch_count(); ++l) {
    EXPECT_EQ(bridges[l], g.branches()[l].id == "l_7-8") << g.branches()[l].id;
  }
}

TEST(Grid, ParallelBranchesAreNotBridges) {
  const auto bridges = bridge_branches(test::twins());
  EXPECT_FALSE(bridges[0]);
  EXPECT_FALSE(bridges[1]);
}

TEST(Grid, RejectsInvalidConstruction) {
  EXPECT_THROW(Grid(test::buses({"1", "1"}), {}, {}, 0), Error);
  EXPECT_THROW(Grid(test::buses({"1", "2"}), {test::line("a", 0, 0)}, {}, 0), Error);
  EXPECT_THROW(Grid(test::buses({"1", "2"}), {test::line("a", 0, 1, 0.0)}, {}, 0), Error);
  EXPECT_THROW(Grid(test::buses({"1", "2"}), {test::line("a", 0, 5)}, {}, 0), Error);
}

TEST(Grid, DescribeAndTargets) {
  EXPECT_EQ(describe(Disconnect{"l_2-4"}), "disconnect:l_2-4");
  EXPECT_EQ(describe(Merge{"sub_5"}), "merge:sub_5");
  EXPECT_EQ(target_of(Split{"sub_5", {}}), "sub_5");
  EXPECT_EQ(kind_of(Reconnect{"x"}), ChangeKind::reconnect);
  EXPECT_THROW(require_distinct_targets(ChangeSet{Disconnect{"a"}, Reconnect{"a"}}), Error);
  EXPECT_NO_THROW(require_distinct_targets(ChangeSet{Disconnect{"a"}, Merge{"a"}}));
}

// Commuting change sets give the same grid in any order.
TEST(GridProperty, OrderInsensitive) {
  const Grid base = load_case("case14");
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 40; ++trial) {
    const Grid ref = apply_change_set(base, random_reference(base, 2, 1, rng));
    auto set = random_change_set(ref, 3, rng);
    ASSERT_TRUE(set);
    const Grid expected = apply_change_set(ref, *set);
    auto perm = *set;
    std::sort(perm.begin(), perm.end(), [](const auto& a, const auto& b) { return describe(a) < describe(b); });
    do {
      EXPECT_TRUE(electrically_equal(apply_change_set(ref, perm), expected));
    } while (std::next_permutation(perm.begin(), perm.end(),
                                   [](const auto& a, const auto& b) { return describe(a) < describe(b); }));
  }
}

TEST(GridProperty, RandomActionsStayConnected) {
  const Grid base = load_case("case118");
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 20; ++trial) {
    const auto ref_changes = random_reference(base, 3, 2, rng);
    const Grid ref = apply_change_set(base, ref_changes);
    auto set = random_change_set(ref, 4, rng);
    ASSERT_TRUE(set);
    EXPECT_EQ(connected_components(apply_change_set(ref, *set)).count, 1u);
    for (const auto& c : *set) EXPECT_NO_THROW(apply_change_set(ref, ChangeSet{c}));
  }
}

}  // namespace
}  // namespace topost
