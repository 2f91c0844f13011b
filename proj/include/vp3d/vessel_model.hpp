#pragma once
// 3D vascular centerline trees: the pre-operative map used for registration,
// planning and the guidewire simulator.

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "vp3d/geometry.hpp"

namespace vp3d {

using BranchId = std::int32_t;

// A centerline point addressed by branch and ordinal position on it.
struct Address {
  BranchId branch = 0;
  int index = 0;

  friend bool operator==(const Address&, const Address&) = default;
  friend auto operator<=>(const Address&, const Address&) = default;
};

std::string to_string(const Address& a);
// "branch:index"; index may be "last" (resolved later via VesselTree::resolve).
Address parse_address(std::string_view text, int last_marker = -1);

struct CenterlinePoint {
  Vec3 position = Vec3::Zero();
  double radius = 1.0;  // mm
  int arc_index = 0;
};

struct Branch {
  BranchId id = 0;
  std::vector<CenterlinePoint> points;
  std::optional<BranchId> parent;
  std::vector<BranchId> children;  // order is significant: it indexes bifurcation choices
  int attach_index = -1;           // index on the parent where this branch departs; -1 for the root
};

// Immutable after construction. The constructor checks every structural
// invariant (single root, acyclic, consistent parent/child links, valid attach
// indices, shared attach points, positive radii) and throws
// std::invalid_argument on violation.
class VesselTree {
 public:
  VesselTree(std::map<BranchId, Branch> branches, BranchId root);

  BranchId root() const { return root_; }
  const std::map<BranchId, Branch>& branches() const { return branches_; }
  const Branch& branch(BranchId id) const;  // throws AddressError
  bool contains(BranchId id) const { return branches_.count(id) != 0; }
  bool contains(const Address& a) const;
  const CenterlinePoint& point(const Address& a) const;  // throws AddressError
  const Vec3& position(const Address& a) const { return point(a).position; }

  // Number of parent links between the branch and the root.
  int depth(BranchId id) const;
  // Cumulative chord length along the branch, arc_lengths(b)[0] == 0.
  const std::vector<double>& arc_lengths(BranchId id) const;
  double branch_length(BranchId id) const { return arc_lengths(id).back(); }
  double total_length() const;
  std::size_t point_count() const;
  double max_gap() const;
  int last_index(BranchId id) const { return static_cast<int>(branch(id).points.size()) - 1; }
  // Children of `id` departing at `index` (in child-list order).
  std::vector<BranchId> children_at(BranchId id, int index) const;
  // Replaces a negative index ("last") with the branch's last index.
  Address resolve(Address a) const;

  friend bool operator==(const VesselTree& a, const VesselTree& b);

 private:
  std::map<BranchId, Branch> branches_;
  BranchId root_;
  std::map<BranchId, int> depth_;
  std::map<BranchId, std::vector<double>> arcs_;
};

bool operator==(const Branch& a, const Branch& b);

struct PhantomSpec {
  int depth = 4;                     // tree levels; depth 1 is a single branch
  int branching = 2;                 // children per internal branch
  double length_min = 18.0;          // mm
  double length_max = 28.0;          // mm
  double root_length = 0.0;          // mm; 0 draws the root length like any other branch
  double radius_root = 4.0;          // mm
  double radius_decay = 0.8;         // per level
  double radius_min = 1.2;           // mm
  double spread_min_deg = 25.0;      // child departure angle from the parent direction
  double spread_max_deg = 45.0;
  double max_curvature = 0.02;       // rad per mm, in-plane wander
  double max_elevation_deg = 12.0;   // out-of-plane tilt bound
  double spacing = 1.0;              // max gap between consecutive points (mm)

  void validate() const;  // throws std::invalid_argument with a diagnostic
};

VesselTree generate_phantom(const PhantomSpec& spec, std::uint64_t seed);

// Resamples every branch at uniform chord spacing <= `spacing`, keeping branch
// end points and attach points as samples.
VesselTree resample_centerlines(const VesselTree& tree, double spacing);

// Text format with header "VTREE 1". Doubles use shortest round-trip form so
// serialize(deserialize(s)) == s for any serializer output.
std::string serialize(const VesselTree& tree);
VesselTree deserialize(std::string_view text);  // throws ParseError

VesselTree load_tree(const std::string& path);
void save_tree(const VesselTree& tree, const std::string& path);

}  // namespace vp3d
