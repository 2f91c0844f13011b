#pragma once
// 2D -> 3D tip lifting through the registration correspondences.

#include <optional>
#include <span>

#include "vp3d/perception.hpp"
#include "vp3d/registration.hpp"
#include "vp3d/vessel_model.hpp"

namespace vp3d {

struct LiftedTip {
  Vec3 position = Vec3::Zero();  // map coordinates, mm
  Address address;               // canonical centerline address
  double lateral_error_bound = 0.0;  // mm
};

struct LiftParams {
  double gate = 30.0;           // px; farther than this from every 2D vessel point is off-vessel
  double tie_tolerance = 3.0;   // px; matched 2D points this close to the best one are ties
  double cluster_radius = 3.0;  // mm; ties closer than this in 3D belong to one vessel segment
};

// Finds q*, the 2D centerline point nearest the tip, collects the 3D points
// whose registered 2D match lies within tie_tolerance of the best match to
// q*, groups them into 3D clusters and returns the best point of the cluster
// nearest `previous` (the last lifted tip, or the insertion point on the first
// frame). Throws OffVesselError when q* is beyond the gate and
// std::invalid_argument when the correspondence map is empty.
LiftedTip lift(const TrackedEndpoint& tip, const RegistrationProblem& problem, const Correspondences& corr,
               const VesselTree& tree, const std::optional<Vec3>& previous, double pixel_size,
               const LiftParams& params = {});

}  // namespace vp3d
