#pragma once
// Strategy-based backward-and-forward navigation (Algorithm 1 of the
// VascularPilot3D control loop), one decision per lifted tip.

#include <cstdint>
#include <optional>
#include <random>

#include "vp3d/planning.hpp"
#include "vp3d/simulator.hpp"

namespace vp3d {

struct NavigatorParams {
  double r_th = 3.0;        // mm, goal radius (Euclidean)
  int w_th = 6;             // off-path retries before a forced replan
  int c_min = 8;            // forward/backward step c is drawn uniformly from [c_min, c_max]
  int c_max = 12;
  double back_step = 10.0;  // fixed step of the initial backward phase
  double slack = -1.0;      // on-path slack, mm; negative means the local radius

  void validate(double max_step) const;  // throws ConfigError
};

struct NavigatorState {
  bool flag_back = true;
  bool flag_on_path_last = true;
  int w = 0;
  RoutePath path;
  Address dest;
  Vec3 dest_position = Vec3::Zero();
  NavigatorParams params;

  // Initial state with the path planned from `start` to `dest`.
  static NavigatorState begin(const VesselTree& tree, const Address& start, const Address& dest,
                              const NavigatorParams& params = {});
};

struct Decision {
  std::optional<ControlCommand> command;  // empty when done
  bool done = false;
  bool on_path = false;   // result of the on-path test this decision (if evaluated)
  bool replanned = false;
  bool w_reset = false;
  double distance = 0.0;  // Euclidean distance from the tip to the destination
};

// One pass of the loop body. The rng is consulted only when a step of size c
// is emitted.
Decision decide(NavigatorState& nav, const LiftedTip& tip, const VesselTree& tree, std::mt19937_64& rng);

}  // namespace vp3d
