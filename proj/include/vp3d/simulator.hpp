#pragma once
// Kinematic follow-the-leader guidewire inside a vessel tree.
//
// The wire body is always the tree path from the root's first point to the
// tip. Advancing moves the tip along the current branch; at a junction the
// option indexed by rotation_phase modulo the option count is taken (for a
// mid-branch junction option 0 is "stay on this branch"). Retracting rewinds
// the body. A commanded translation is executed before the rotation.

#include <cstdint>
#include <vector>

#include "vp3d/vessel_model.hpp"

namespace vp3d {

struct ControlCommand {
  double translation = 0.0;  // robot units, one unit = unit_scale mm of feed
  int rotation = 0;          // 0 or 1

  friend bool operator==(const ControlCommand&, const ControlCommand&) = default;
};

struct ActuationNoise {
  double translation_frac = 0.10;   // executed = commanded * (1 + U(-f, f))
  double rotation_fail_prob = 0.10;  // chance a rotation command leaves the phase unchanged

  static ActuationNoise none() { return {0.0, 0.0}; }
};

struct SimulatorParams {
  double max_step = 15.0;   // |translation| limit, robot units
  double unit_scale = 1.0;  // mm per robot unit
};

struct GuidewireState {
  std::vector<BranchId> route;  // branches from the root to the tip's branch
  double tip_arc = 0.0;         // arc length of the tip on route.back(), mm
  Address tip_address;          // centerline point nearest the tip
  int rotation_phase = 0;
  double inserted_length = 0.0;  // mm
  std::vector<Vec3> body;        // polyline from insertion point to tip
};

struct StepDiagnostics {
  double executed = 0.0;  // signed arc length actually travelled, mm
  bool clamped = false;   // tip stopped at a leaf end or at the insertion point
  bool rotated = false;   // rotation_phase changed
  int junctions_passed = 0;
};

// Wire inserted from the root's first point up to `tip` along the tree path.
GuidewireState insert_wire(const VesselTree& tree, const Address& tip);

// Throws std::invalid_argument if |translation| > max_step or rotation is not 0/1.
GuidewireState step(const GuidewireState& state, const ControlCommand& cmd, const VesselTree& tree,
                    const ActuationNoise& noise, std::uint64_t seed, const SimulatorParams& params = {},
                    StepDiagnostics* diagnostics = nullptr);

Vec3 true_tip(const GuidewireState& state);

// Body arc length; equals inserted_length.
double body_length(const GuidewireState& state);

}  // namespace vp3d
