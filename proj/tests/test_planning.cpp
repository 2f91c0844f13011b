#include <random>
#include <set>

#include "doctest.h"
#include "support.hpp"
#include "vp3d/errors.hpp"
#include "vp3d/planning.hpp"

using namespace vp3d;

namespace {

LiftedTip tip_at(const VesselTree& tree, const Address& a) { return {tree.position(a), canonical(tree, a), 0.0}; }

Address random_address(const VesselTree& tree, std::mt19937_64& rng) {
  auto it = tree.branches().begin();
  std::advance(it, std::uniform_int_distribution<std::size_t>(0, tree.branches().size() - 1)(rng));
  const int n = static_cast<int>(it->second.points.size());
  return {it->first, std::uniform_int_distribution<int>(0, n - 1)(rng)};
}

// Consecutive addresses are one centerline step apart once both ends of
// every step are written canonically, and none repeats.
void check_path_shape(const VesselTree& tree, const RoutePath& p) {
  std::set<Address> seen;
  for (std::size_t k = 0; k < p.addresses.size(); ++k) {
    REQUIRE(seen.insert(p.addresses[k]).second);
    CHECK(canonical(tree, p.addresses[k]) == p.addresses[k]);
    if (k == 0) continue;
    auto neighbours = [&](const Address& x, const Address& y) {
      for (int d : {-1, 1}) {
        const Address n{x.branch, x.index + d};
        if (tree.contains(n) && canonical(tree, n) == y) return true;
      }
      return false;
    };
    CHECK((neighbours(p.addresses[k], p.addresses[k - 1]) || neighbours(p.addresses[k - 1], p.addresses[k])));
  }
}

}  // namespace

TEST_CASE("start equal to destination") {
  const VesselTree t = vp3d::testing::y_tree();
  const RoutePath p = plan(t, {0, 7}, {0, 7});
  CHECK(p.addresses == std::vector<Address>{{0, 7}});
  CHECK(p.length == 0.0);
  // A child's first point is the same place as its parent's attach point.
  CHECK(plan(t, {1, 0}, {0, 20}).length == 0.0);
}

TEST_CASE("sibling branches route through the shared attach point") {
  const VesselTree t = vp3d::testing::y_tree();
  const RoutePath p = plan(t, {1, 10}, {2, 10});
  REQUIRE(p.addresses.size() == 21u);
  CHECK(p.addresses.front() == Address{1, 10});
  CHECK(p.addresses[10] == Address{0, 20});
  CHECK(p.addresses.back() == Address{2, 10});
  CHECK(p.length == doctest::Approx(20.0).epsilon(1e-12));
  check_path_shape(t, p);

  // Through the trunk: ascend 1, walk 0 backwards.
  const RoutePath q = plan(t, {1, 5}, {0, 3});
  CHECK(q.length == doctest::Approx(5.0 + 17.0).epsilon(1e-12));
  check_path_shape(t, q);
  CHECK_THROWS_AS(plan(t, {3, 0}, {0, 0}), AddressError);
  CHECK_THROWS_AS(plan(t, {0, 0}, {1, 21}), AddressError);
}

TEST_CASE("planner matches Dijkstra exactly on random trees") {
  std::mt19937_64 rng(2718);
  for (int trial = 0; trial < 200; ++trial) {
    const VesselTree t = vp3d::testing::random_tree(rng);
    for (int pair = 0; pair < 3; ++pair) {
      const Address s = random_address(t, rng), d = random_address(t, rng);
      const RoutePath p = plan(t, s, d);
      CHECK(p.length == vp3d::testing::reference_dijkstra(t, s, d));
      CHECK(p.length == dijkstra_length(t, s, d));
      CHECK(p.visited <= t.depth(s.branch) + t.depth(d.branch));
      REQUIRE(p.cumulative.size() == p.addresses.size());
      CHECK(p.cumulative.back() == p.length);
      check_path_shape(t, p);
    }
  }
}

TEST_CASE("on_path") {
  const VesselTree t = vp3d::testing::y_tree();
  const RoutePath p = plan(t, {0, 2}, {1, 15});
  CHECK(on_path(p, tip_at(t, {0, 10}), t));
  CHECK(on_path(p, tip_at(t, {1, 15}), t));
  CHECK_FALSE(on_path(p, tip_at(t, {2, 12}), t));

  // The fork viewed from the off-path branch: its canonical address is on the
  // path and its position coincides with a path point, so both rules agree.
  const LiftedTip fork = tip_at(t, {2, 0});
  CHECK(fork.address == Address{0, 20});
  CHECK((fork.position - t.position({1, 0})).norm() == 0.0);
  CHECK(on_path(p, fork, t, 0.0));
  LiftedTip relabelled = fork;
  relabelled.address = {2, 1};  // address off the path, position still on it
  CHECK(on_path(p, relabelled, t));

  // One step into branch 2 is 1 mm from the fork: inside the 2 mm radius, not
  // inside a 0.5 mm slack.
  CHECK(on_path(p, tip_at(t, {2, 1}), t));
  CHECK_FALSE(on_path(p, tip_at(t, {2, 1}), t, 0.5));
}

TEST_CASE("progress") {
  const VesselTree line = vp3d::testing::straight_tree(80);
  const RoutePath p = plan(line, {0, 10}, {0, 67});
  CHECK(progress(p, tip_at(line, {0, 67}), line) == 0.0);
  CHECK(std::abs(progress(p, tip_at(line, {0, 10}), line) - 57.0) <= 1.0);
  CHECK(progress(p, tip_at(line, {0, 30}), line) == doctest::Approx(37.0));
  CHECK_THROWS_AS(progress(p, tip_at(line, {0, 75}), line, 0.5), OffPathError);

  const VesselTree y = vp3d::testing::y_tree();
  const RoutePath q = plan(y, {0, 0}, {1, 20});
  CHECK_THROWS_AS(progress(q, tip_at(y, {2, 15}), y), OffPathError);
}
