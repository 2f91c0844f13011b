#include <functional>
#include <random>
#include <set>

#include "doctest.h"
#include "support.hpp"
#include "vp3d/errors.hpp"
#include "vp3d/vessel_model.hpp"

using namespace vp3d;
using vp3d::testing::make_branch;
using vp3d::testing::straight;

namespace {

// Branch count by DFS from the root, each branch visited once.
int walk_count(const VesselTree& t) {
  std::set<BranchId> seen;
  std::function<void(BranchId)> visit = [&](BranchId id) {
    REQUIRE(seen.insert(id).second);
    for (BranchId c : t.branch(id).children) {
      REQUIRE(t.branch(c).parent == id);
      visit(c);
    }
  };
  visit(t.root());
  return static_cast<int>(seen.size());
}

double polyline_length(const Branch& b) {
  double s = 0.0;
  for (std::size_t k = 1; k < b.points.size(); ++k) s += (b.points[k].position - b.points[k - 1].position).norm();
  return s;
}

}  // namespace

TEST_CASE("phantom branch counts") {
  PhantomSpec single;
  single.depth = 1;
  single.branching = 0;
  CHECK(walk_count(generate_phantom(single, 1)) == 1);

  PhantomSpec spec;
  spec.depth = 4;
  spec.branching = 2;
  const VesselTree t = generate_phantom(spec, 42);
  CHECK(walk_count(t) == 1 + 2 + 4 + 8);
  CHECK(t.branches().size() == 15u);
  for (const auto& [id, b] : t.branches()) CHECK(t.depth(id) <= 3);
}

TEST_CASE("phantom is deterministic per seed and respects its invariants") {
  PhantomSpec spec;
  spec.depth = 3;
  const std::string a = serialize(generate_phantom(spec, 42));
  const std::string b = serialize(generate_phantom(spec, 42));
  CHECK(a == b);
  CHECK(a != serialize(generate_phantom(spec, 43)));

  const VesselTree t = generate_phantom(PhantomSpec{}, 2024);
  CHECK(t.max_gap() <= PhantomSpec{}.spacing + 1e-12);
  for (const auto& [id, br] : t.branches())
    for (const auto& p : br.points) CHECK(p.radius > 0.0);
}

TEST_CASE("invalid phantom specs are rejected") {
  PhantomSpec s;
  s.length_min = -1.0;
  CHECK_THROWS_AS(generate_phantom(s, 1), std::invalid_argument);
  s = PhantomSpec{};
  s.radius_root = 0.0;
  CHECK_THROWS_AS(generate_phantom(s, 1), std::invalid_argument);
  s = PhantomSpec{};
  s.depth = 0;
  CHECK_THROWS_AS(generate_phantom(s, 1), std::invalid_argument);
}

TEST_CASE("tree constructor enforces structure") {
  std::map<BranchId, Branch> br;
  br[0] = make_branch(0, std::nullopt, -1, straight(Vec3::Zero(), Vec3::UnitX(), 5));
  br[1] = make_branch(1, 0, 5, straight(Vec3(4, 0, 0), Vec3::UnitY(), 3));  // not the attach point
  br[0].children = {1};
  CHECK_THROWS_AS(VesselTree(br, 0), std::invalid_argument);

  br[1] = make_branch(1, 0, 4, straight(Vec3(4, 0, 0), Vec3::UnitY(), 3));
  CHECK_NOTHROW(VesselTree(br, 0));
  br[0].children = {};  // parent/child links disagree
  CHECK_THROWS_AS(VesselTree(br, 0), std::invalid_argument);
}

TEST_CASE("resample: straight branch and gap bound") {
  const VesselTree line = vp3d::testing::straight_tree(10);
  const VesselTree r = resample_centerlines(line, 1.0);
  CHECK(r.branch(0).points.size() == 11u);
  CHECK((r.branch(0).points.front().position - line.branch(0).points.front().position).norm() == 0.0);
  CHECK((r.branch(0).points.back().position - line.branch(0).points.back().position).norm() == 0.0);
  CHECK_THROWS_AS(resample_centerlines(line, 0.0), std::invalid_argument);

  std::mt19937_64 rng(99);
  for (int trial = 0; trial < 20; ++trial) {
    const VesselTree t = vp3d::testing::random_tree(rng, 600);
    for (double spacing : {0.4, 1.0, 2.5}) {
      const VesselTree s = resample_centerlines(t, spacing);
      for (const auto& [id, b] : s.branches()) {
        // Exhaustive scan of consecutive gaps.
        for (std::size_t k = 1; k < b.points.size(); ++k) {
          const double g = (b.points[k].position - b.points[k - 1].position).norm();
          CHECK(g > 0.0);
          CHECK(g <= spacing + 1e-9);
        }
        const Branch& old = t.branch(id);
        CHECK(b.points.front().position == old.points.front().position);
        CHECK(b.points.back().position == old.points.back().position);
        if (b.parent) CHECK(s.position({*b.parent, b.attach_index}) == t.position({*old.parent, old.attach_index}));
      }
    }
  }
}

TEST_CASE("resample keeps phantom arc length within 1%") {
  for (std::uint64_t seed : {1u, 2u, 3u, 2024u}) {
    const VesselTree t = generate_phantom(PhantomSpec{}, seed);
    for (double spacing : {0.5, 1.0, 2.0}) {
      const VesselTree s = resample_centerlines(t, spacing);
      double before = 0.0, after = 0.0;
      for (const auto& [id, b] : t.branches()) before += polyline_length(b);
      for (const auto& [id, b] : s.branches()) after += polyline_length(b);
      CHECK(std::abs(after - before) <= 0.01 * before);
      CHECK(s.max_gap() <= spacing + 1e-9);
    }
  }
  // Already compliant: resampling at the same spacing keeps every end point.
  const VesselTree t = generate_phantom(PhantomSpec{}, 7);
  const VesselTree s = resample_centerlines(t, 1.0);
  for (const auto& [id, b] : s.branches()) {
    CHECK(b.points.front().position == t.branch(id).points.front().position);
    CHECK(b.points.back().position == t.branch(id).points.back().position);
  }
}

TEST_CASE("serialize round trips") {
  std::map<BranchId, Branch> br;
  br[7] = make_branch(7, std::nullopt, -1, straight(Vec3(1, 2, 3), Vec3::UnitZ(), 4), 1.5);
  const VesselTree root_only(std::move(br), 7);
  CHECK(deserialize(serialize(root_only)) == root_only);

  PhantomSpec spec;
  spec.depth = 4;
  const VesselTree t = generate_phantom(spec, 5);
  const std::string text = serialize(t);
  CHECK(text.rfind("VTREE 1", 0) == 0);
  const VesselTree back = deserialize(text);
  CHECK(back == t);
  CHECK(serialize(back) == text);
}

TEST_CASE("malformed streams raise ParseError with an offset") {
  const std::string text = serialize(generate_phantom(PhantomSpec{}, 5));
  for (std::size_t cut : {std::size_t{0}, std::size_t{3}, text.size() / 2, text.size() - 2}) {
    try {
      (void)deserialize(std::string_view(text).substr(0, cut));
      FAIL("truncated stream accepted at " << cut);
    } catch (const ParseError& e) {
      CHECK(e.offset() <= cut);
    }
  }
  CHECK_THROWS_AS(deserialize("VTREE 2\n"), ParseError);
}

TEST_CASE("addresses") {
  CHECK(parse_address("3:14") == Address{3, 14});
  CHECK(parse_address("3:last").index == -1);
  CHECK(to_string(Address{2, 5}) == "2:5");
  const VesselTree t = vp3d::testing::y_tree();
  CHECK(t.resolve({1, -1}) == Address{1, 20});
  CHECK_THROWS_AS(t.point({9, 0}), AddressError);
  CHECK_THROWS_AS(t.point({0, 21}), AddressError);
  CHECK(t.children_at(0, 20) == std::vector<BranchId>{1, 2});
}
