#pragma once
// Global route planning on the vessel tree by walking both end points up to
// their common ancestor branch, plus the on-path and progress tests used by
// the navigator.

#include <vector>

#include "vp3d/lifting.hpp"
#include "vp3d/vessel_model.hpp"

namespace vp3d {

// A child's first point coincides with its parent's attach point; the parent
// address is the canonical name of that point. Throws AddressError for
// addresses outside the tree.
Address canonical(const VesselTree& tree, const Address& a);

// Euclidean length of one centerline step. Both the planner and the Dijkstra
// oracle use it so that arc lengths agree bit for bit.
double step_length(const VesselTree& tree, const Address& a, const Address& b);

struct RoutePath {
  std::vector<Address> addresses;  // canonical, start first
  std::vector<double> cumulative;  // arc length from the start to each address
  double length = 0.0;             // mm
  int visited = 0;                 // branch nodes visited while finding the common ancestor
};

// Throws AddressError if either end is not a point of the tree.
RoutePath plan(const VesselTree& tree, const Address& start, const Address& dest);

// Tip on the path: its canonical address is a path address, or its position
// is within `slack` of some path point. slack < 0 selects the local vessel
// radius at the tip.
bool on_path(const RoutePath& path, const LiftedTip& tip, const VesselTree& tree, double slack = -1.0);

// Remaining arc length from the path point matching the tip (its own address,
// else the nearest path point) to the destination. Throws OffPathError when
// the tip is not on the path.
double progress(const RoutePath& path, const LiftedTip& tip, const VesselTree& tree, double slack = -1.0);

// Reference shortest-path length over the centerline adjacency graph
// (Dijkstra). Used as the planner's test oracle.
double dijkstra_length(const VesselTree& tree, const Address& start, const Address& dest);

}  // namespace vp3d
