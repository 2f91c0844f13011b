#pragma once
// Closed-loop episode: render -> perceive -> register -> track -> lift ->
// decide -> step, repeated until the navigator reports the goal or the loop
// cap is hit.

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "vp3d/lifting.hpp"
#include "vp3d/navigator.hpp"
#include "vp3d/perception.hpp"
#include "vp3d/registration.hpp"
#include "vp3d/simulator.hpp"

namespace vp3d {

// Derives an independent 64-bit seed from (seed, stream, index).
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream, std::uint64_t index = 0);

struct EpisodeConfig {
  CameraModel cam = CameraModel::pinhole(800.0 / 0.30, 256.0, 256.0, 512, 512, 0.30);
  double source_distance = 800.0;                // mm from the camera to the tree centroid
  Vec3 view_euler_deg = Vec3::Zero();            // viewing rotation about the centroid
  Pose calib = Pose::identity();                 // map -> intra-operative frame

  NoiseSpec image_noise{4.0};
  RenderStyle style;
  PerceptionParams perception;
  TrackerParams tracker;
  LiftParams lift;

  RegistrationWeights weights;
  int k_omega = 4;
  SolverConfig solver;            // first frame
  SolverConfig tracking_solver = [] {
    SolverConfig c;
    c.max_outer_iters = 8;
    c.anneal_every = 2;
    return c;
  }();
  double init_rotation_deg = 2.0;     // magnitude of the first-frame pose error
  double init_translation_mm = 3.0;
  bool exact_registration = false;    // use the true pose instead of solving

  ActuationNoise actuation;
  SimulatorParams simulator;
  NavigatorParams navigator;
  int loop_cap = 500;
  std::optional<Vec2> tip_seed;  // first-frame tip in pixels; default: projected true tip

  void validate() const;  // throws ConfigError
};

// Camera-from-map transform of the simulated scene.
Pose scene_tree_to_camera(const VesselTree& tree, const EpisodeConfig& cfg);

struct LoopRecord {
  int loop = 0;
  std::string status;  // "command", "done" or "coast"
  std::string coast_reason;
  Vec2 tracked = Vec2::Zero();
  double confidence = 0.0;
  std::optional<LiftedTip> lifted;
  bool on_path = false;
  bool replanned = false;
  bool w_reset = false;
  int w = 0;
  bool flag_back = false;
  std::optional<ControlCommand> command;
  double distance = 0.0;        // lifted tip to destination, mm
  Vec3 true_tip = Vec3::Zero();
  double lift_error = 0.0;      // |lifted - true tip|, mm
  double local_radius = 0.0;    // vessel radius at the true tip, mm
  double registration_rmse = 0.0;  // px, against the true pose
  int registration_iterations = 0;
  StepDiagnostics step;
};

struct EpisodeReport {
  bool success = false;
  int control_loops = 0;  // commands sent
  int loops = 0;          // frames processed
  int coasts = 0;
  double final_distance = 0.0;       // lifted tip to destination at the end, mm
  double final_true_distance = 0.0;  // true tip to destination, mm
  std::vector<LoopRecord> trace;
};

// Everything the episode saw in one loop, for scene dumps.
struct FrameCapture {
  const FluoroFrame& frame;
  const PerceptionResult& perception;
  const LoopRecord& record;
  const RoutePath& path;
  const Pose& estimated_tree_to_camera;
};

using FrameSink = std::function<void(const FrameCapture&)>;

EpisodeReport run_episode(const VesselTree& tree, const Address& start, const Address& dest, const EpisodeConfig& cfg,
                          std::uint64_t seed, const FrameSink& sink = {});

}  // namespace vp3d
