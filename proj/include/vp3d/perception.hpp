#pragma once
// Synthetic fluoroscopy and the classical 2D perception stack: Otsu
// segmentation, Zhang-Suen thinning, endpoint candidates and tip tracking.

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "vp3d/geometry.hpp"
#include "vp3d/image.hpp"
#include "vp3d/simulator.hpp"
#include "vp3d/vessel_model.hpp"

namespace vp3d {

struct NoiseSpec {
  double sigma = 0.0;  // additive Gaussian noise, gray levels
};

// Two-level intensity model: the wire is rendered darker than the vessels so
// a second Otsu pass can separate it.
struct RenderStyle {
  std::uint8_t background = 200;
  std::uint8_t vessel = 120;
  std::uint8_t wire = 40;
  double wire_radius = 0.45;  // mm
  // The wire enters through a straight introducer: it is drawn continuing
  // this far back from its first vertex, opposite to its first segment, so
  // its proximal end normally lies outside the field of view.
  double sheath_length = 400.0;  // mm
};

struct FluoroFrame {
  GrayImage pixels;
  CameraModel cam;
  int frame_index = 0;
  std::optional<Vec2> truth;  // projected true tip, test metadata only
};

// `tree_to_camera` maps map coordinates to the camera frame. Throws
// SimulationIntegrityError if a wire vertex is outside every vessel lumen.
FluoroFrame render(const VesselTree& tree, std::span<const Vec3> wire_body, const Pose& tree_to_camera,
                   const CameraModel& cam, const NoiseSpec& noise, std::uint64_t seed,
                   const RenderStyle& style = {}, int frame_index = 0);
FluoroFrame render(const VesselTree& tree, const GuidewireState& wire, const Pose& tree_to_camera,
                   const CameraModel& cam, const NoiseSpec& noise, std::uint64_t seed,
                   const RenderStyle& style = {}, int frame_index = 0);

using Histogram = std::array<std::uint64_t, 256>;
Histogram histogram(const GrayImage& image);

// Threshold t maximising the between-class variance of {v <= t} vs {v > t};
// ties go to the lowest t. Throws NoThresholdError if fewer than two gray
// levels are populated.
int otsu_threshold(const Histogram& hist);

struct ThresholdResult {
  int threshold = 0;
  GrayImage mask;  // 1 where value <= threshold (dark foreground)
};
ThresholdResult otsu_threshold(const GrayImage& image);
ThresholdResult otsu_threshold(const FluoroFrame& frame);

struct SkeletonMask {
  GrayImage mask;  // 0/1
};

// Zhang-Suen two-subiteration thinning, run to convergence. Each
// subiteration flags pixels in parallel (neighbour bound 3 <= B <= 6), then
// removes the flagged pixels in raster order, re-testing each one against the
// partially updated image. A raster pass then drops staircase corners: pixels
// with exactly two perpendicular 4-neighbours and an empty opposite diagonal.
// Once that converges, 8-simple pixels left inside 2x2 blocks and blunt
// two-pixel stroke ends are trimmed, and the whole sequence repeats until
// nothing changes. thin() is therefore idempotent, removes only pixels whose
// deletion keeps 8-connectivity, and leaves a 2x2 block only where every
// pixel of it is needed for connectivity.
SkeletonMask thin(const GrayImage& mask);

// Skeleton pixels with exactly one 8-neighbour, in raster order.
std::vector<Vec2> endpoint_candidates(const SkeletonMask& skeleton);

// Foreground pixel coordinates in raster order.
std::vector<Vec2> foreground_points(const GrayImage& mask);

struct TrackedEndpoint {
  Vec2 position = Vec2::Zero();
  double confidence = 0.0;
  int frame_index = 0;
};

struct TrackerParams {
  double gate = 60.0;  // px
  double tau = 20.0;   // px
};

TrackedEndpoint track(std::span<const Vec2> candidates, const TrackedEndpoint& previous,
                      const TrackerParams& params = {}, int frame_index = -1);

struct PerceptionParams {
  double min_wire_contrast = 40.0;  // gray levels between the two dark classes
  bool refine_tips = true;          // move wire candidates onto the stroke's end (refine_tip)
  int spur_length = 3;              // wire skeleton spurs up to this many pixels are pruned
};

// Removes terminal branches of at most `max_length` pixels that end in a
// junction (the forked tails thinning leaves at blunt stroke ends), then thins
// the result again. All qualifying spurs are removed together, so two equal
// tails collapse onto their junction instead of leaving a bent end.
SkeletonMask prune_spurs(const SkeletonMask& skeleton, int max_length);

// Sub-pixel tip of a stroke: the skeleton ends up to a couple of pixels
// short of, or beside, the true end of a thick stroke. The stroke direction is
// taken from the last skeleton pixels; along it the tip lies half a pixel past
// the farthest connected mask pixel, across it on the mean of the stroke's
// last few pixels.
// Returns `endpoint` unchanged when the skeleton branch is too short.
Vec2 refine_tip(const GrayImage& mask, const SkeletonMask& skeleton, const Vec2& endpoint);

struct PerceptionResult {
  int vessel_threshold = 0;
  std::optional<int> wire_threshold;
  GrayImage vessel_mask;
  GrayImage wire_mask;
  SkeletonMask vessel_skeleton;
  SkeletonMask wire_skeleton;
  std::vector<Vec2> centerline;  // 2D vessel centerline points q_j
  std::vector<Vec2> candidates;  // wire endpoint candidates
};

PerceptionResult perceive(const FluoroFrame& frame, const PerceptionParams& params = {});

}  // namespace vp3d
