#include <random>

#include "doctest.h"
#include "support.hpp"
#include "vp3d/episode.hpp"
#include "vp3d/errors.hpp"
#include "vp3d/navigator.hpp"

using namespace vp3d;

namespace {

LiftedTip tip_at(const VesselTree& tree, const Address& a) { return {tree.position(a), canonical(tree, a), 0.0}; }

// Replays the navigator's c draws on an identically seeded engine.
struct Draws {
  std::mt19937_64 rng;
  int lo, hi;
  double next() { return std::uniform_int_distribution<int>(lo, hi)(rng); }
};

}  // namespace

TEST_CASE("goal reached: no command and no draw") {
  const VesselTree y = vp3d::testing::y_tree();
  NavigatorState nav = NavigatorState::begin(y, {0, 5}, {1, 18});
  std::mt19937_64 rng(3), untouched(3);
  const Decision d = decide(nav, tip_at(y, {1, 16}), y, rng);
  CHECK(d.done);
  CHECK_FALSE(d.command.has_value());
  CHECK(d.distance == doctest::Approx(2.0));
  CHECK(rng() == untouched());
}

TEST_CASE("scripted tip through the backward phase and the main-phase branches") {
  const VesselTree y = vp3d::testing::y_tree();
  NavigatorState nav = NavigatorState::begin(y, {0, 5}, {1, 18});
  CHECK(nav.flag_back);
  CHECK(nav.flag_on_path_last);
  CHECK(nav.w == 0);
  std::mt19937_64 rng(11);
  Draws c{std::mt19937_64(11), 8, 12};

  // Backward while still on the path.
  Decision d = decide(nav, tip_at(y, {0, 5}), y, rng);
  CHECK(d.command == ControlCommand{-10, 0});
  CHECK(nav.flag_back);
  CHECK_FALSE(d.replanned);

  // Left the path behind: one forward step, leave the backward phase, replan.
  d = decide(nav, tip_at(y, {0, 0}), y, rng);
  CHECK(d.command == ControlCommand{10, 0});
  CHECK_FALSE(nav.flag_back);
  CHECK(d.replanned);
  CHECK(nav.path.addresses.front() == Address{0, 0});
  CHECK_FALSE(nav.flag_on_path_last);

  // Back on the path after being off it: forward and rotate.
  d = decide(nav, tip_at(y, {0, 10}), y, rng);
  CHECK(d.command == ControlCommand{c.next(), 1});
  CHECK(d.w_reset);

  // On the path twice in a row: plain forward.
  d = decide(nav, tip_at(y, {0, 15}), y, rng);
  CHECK(d.command == ControlCommand{c.next(), 0});

  // Wrong child: backward and rotate, w counts up.
  d = decide(nav, tip_at(y, {2, 8}), y, rng);
  CHECK(d.command == ControlCommand{-c.next(), 1});
  CHECK(nav.w == 1);
  CHECK_FALSE(d.w_reset);

  // Recovered at the fork: forward and rotate, w back to 0.
  d = decide(nav, tip_at(y, {0, 18}), y, rng);
  CHECK(d.command == ControlCommand{c.next(), 1});
  CHECK(nav.w == 0);

  d = decide(nav, tip_at(y, {1, 10}), y, rng);
  CHECK(d.command == ControlCommand{c.next(), 0});

  d = decide(nav, tip_at(y, {1, 17}), y, rng);
  CHECK(d.done);
  CHECK(rng() == c.rng());
}

TEST_CASE("repeated failures force a replan and a new backward phase") {
  const VesselTree y = vp3d::testing::y_tree();
  NavigatorParams params;
  params.w_th = 2;
  NavigatorState nav = NavigatorState::begin(y, {0, 5}, {1, 18}, params);
  std::mt19937_64 rng(5);
  Draws c{std::mt19937_64(5), 8, 12};
  (void)decide(nav, tip_at(y, {0, 5}), y, rng);
  (void)decide(nav, tip_at(y, {0, 0}), y, rng);  // leaves the backward phase
  REQUIRE_FALSE(nav.flag_back);

  for (int w = 1; w <= 3; ++w) {
    const Decision d = decide(nav, tip_at(y, {2, 10}), y, rng);
    CHECK(d.command == ControlCommand{-c.next(), 1});
    CHECK(nav.w == w);
    CHECK_FALSE(d.replanned);
  }
  // w = 3 > w_th: replan from the tip, reset w, re-enter the backward phase.
  // The new path starts at the tip, so the tip is on it.
  Decision d = decide(nav, tip_at(y, {2, 10}), y, rng);
  CHECK(d.replanned);
  CHECK(d.w_reset);
  CHECK(nav.flag_back);
  CHECK(nav.w == 0);
  CHECK(nav.path.addresses.front() == Address{2, 10});
  CHECK(d.command == ControlCommand{c.next(), 1});

  // Backward phase again.
  d = decide(nav, tip_at(y, {2, 6}), y, rng);
  CHECK(d.command == ControlCommand{-10, 0});
}

TEST_CASE("w stays put at w_th and only the increment past it replans") {
  const VesselTree y = vp3d::testing::y_tree();
  NavigatorParams params;
  params.w_th = 1;
  NavigatorState nav = NavigatorState::begin(y, {0, 5}, {1, 18}, params);
  std::mt19937_64 rng(9);
  (void)decide(nav, tip_at(y, {0, 5}), y, rng);
  (void)decide(nav, tip_at(y, {0, 0}), y, rng);
  (void)decide(nav, tip_at(y, {2, 10}), y, rng);
  CHECK(nav.w == 1);
  Decision d = decide(nav, tip_at(y, {2, 10}), y, rng);
  CHECK_FALSE(d.replanned);
  CHECK(nav.w == 2);
  d = decide(nav, tip_at(y, {2, 10}), y, rng);
  CHECK(d.replanned);
}

TEST_CASE("commands stay within the allowed magnitudes") {
  const VesselTree tree = generate_phantom(PhantomSpec{}, 2024);
  std::mt19937_64 pick(4), rng(4);
  NavigatorState nav = NavigatorState::begin(tree, {0, 15}, tree.resolve({7, -1}));
  for (int k = 0; k < 400; ++k) {
    auto it = tree.branches().begin();
    std::advance(it, pick() % tree.branches().size());
    const Address a{it->first, static_cast<int>(pick() % it->second.points.size())};
    const Decision d = decide(nav, tip_at(tree, a), tree, rng);
    CHECK(nav.w >= 0);
    if (!d.command) continue;
    const double t = std::abs(d.command->translation);
    CHECK((t == 10.0 || (t >= 8.0 && t <= 12.0 && t == std::floor(t))));
    CHECK((d.command->rotation == 0 || d.command->rotation == 1));
  }
}

TEST_CASE("parameter validation") {
  NavigatorParams p;
  CHECK_NOTHROW(p.validate(15.0));
  p.c_max = 16;
  CHECK_THROWS_AS(p.validate(15.0), ConfigError);
  p = NavigatorParams{};
  p.c_min = 0;
  CHECK_THROWS_AS(p.validate(15.0), ConfigError);
  p = NavigatorParams{};
  p.w_th = -1;
  CHECK_THROWS_AS(p.validate(15.0), ConfigError);
}

TEST_CASE("straight branch episode follows the hand trace") {
  // Tip at 20 mm, goal at 70 mm, c fixed to 10, no actuation noise:
  //   20 on path          -> {-10,0}  tip 10
  //   10 off path         -> {10,0}   tip 20, replan
  //   20 on, was off      -> {10,1}   tip 30
  //   30, 40, 50, 60 on   -> {10,0}   tip 70
  //   70 within r_th      -> done
  const VesselTree line = vp3d::testing::straight_tree(100, 3.0);
  EpisodeConfig cfg;
  cfg.exact_registration = true;
  cfg.image_noise = NoiseSpec{0.0};
  cfg.actuation = ActuationNoise::none();
  cfg.navigator.c_min = cfg.navigator.c_max = 10;
  const EpisodeReport r = run_episode(line, {0, 20}, {0, 70}, cfg, 1);
  CHECK(r.success);
  CHECK(r.control_loops == 7);
  REQUIRE(r.trace.size() == 8u);
  const std::vector<ControlCommand> expected{{-10, 0}, {10, 0}, {10, 1}, {10, 0}, {10, 0}, {10, 0}, {10, 0}};
  for (std::size_t k = 0; k < expected.size(); ++k) CHECK(r.trace[k].command == expected[k]);
  CHECK(r.trace.back().status == "done");
  CHECK(r.final_true_distance < 1e-9);
}

TEST_CASE("destination equal to the start needs no command") {
  const VesselTree line = vp3d::testing::straight_tree(60, 3.0);
  EpisodeConfig cfg;
  cfg.exact_registration = true;
  const EpisodeReport r = run_episode(line, {0, 30}, {0, 30}, cfg, 2);
  CHECK(r.success);
  CHECK(r.control_loops == 0);
}
