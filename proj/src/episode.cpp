#include "vp3d/episode.hpp"

#include <cmath>
#include <random>
#include <sstream>

#include "vp3d/errors.hpp"

namespace vp3d {

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream, std::uint64_t index) {
  // SplitMix64 finaliser over a combination of the three inputs.
  auto mix = [](std::uint64_t z) {
    z += 0x9E3779B97F4A7C15ULL;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  };
  return mix(mix(mix(seed) ^ stream) ^ index);
}

void EpisodeConfig::validate() const {
  std::ostringstream err;
  try {
    cam.validate();
  } catch (const std::exception& e) {
    err << "camera: " << e.what() << "; ";
  }
  if (!(source_distance > 0.0)) err << "source_distance must be > 0; ";
  if (image_noise.sigma < 0.0) err << "image noise sigma must be >= 0; ";
  if (loop_cap < 0) err << "loop_cap must be >= 0; ";
  if (init_rotation_deg < 0.0 || init_translation_mm < 0.0) err << "initial pose error must be >= 0; ";
  if (actuation.translation_frac < 0.0 || actuation.translation_frac >= 1.0) err << "translation noise must be in [0,1); ";
  if (actuation.rotation_fail_prob < 0.0 || actuation.rotation_fail_prob > 1.0) err << "rotation failure probability must be in [0,1]; ";
  if (!(simulator.max_step > 0.0) || !(simulator.unit_scale > 0.0)) err << "simulator max_step and unit_scale must be > 0; ";
  if (!err.str().empty()) throw ConfigError(err.str());
  navigator.validate(simulator.max_step);
}

Pose scene_tree_to_camera(const VesselTree& tree, const EpisodeConfig& cfg) {
  Vec3 centroid = Vec3::Zero();
  std::size_t n = 0;
  for (const auto& [id, b] : tree.branches()) {
    for (std::size_t k = b.parent ? 1 : 0; k < b.points.size(); ++k) {
      centroid += cfg.calib * b.points[k].position;
      ++n;
    }
  }
  centroid /= static_cast<double>(n);
  const Vec3& e = cfg.view_euler_deg;
  const Pose view = Pose::from_euler_deg(e.x(), e.y(), e.z(), Vec3(0.0, 0.0, cfg.source_distance));
  return view * Pose::from_translation(-centroid) * cfg.calib;
}

namespace {

// Pose error of fixed magnitude in a seeded random direction, applied about
// the point-cloud centroid.
Pose perturb(const Pose& pose, double rot_deg, double trans_mm, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n(0.0, 1.0);
  Vec3 axis(n(rng), n(rng), n(rng));
  Vec3 dir(n(rng), n(rng), n(rng));
  axis.normalize();
  dir.normalize();
  return {so3_exp(axis * (rot_deg * M_PI / 180.0)) * pose.rotation, pose.translation + dir * trans_mm};
}

}  // namespace

EpisodeReport run_episode(const VesselTree& tree, const Address& start_in, const Address& dest_in,
                          const EpisodeConfig& cfg, std::uint64_t seed, const FrameSink& sink) {
  cfg.validate();
  const Address start = canonical(tree, tree.resolve(start_in));
  const Address dest = canonical(tree, tree.resolve(dest_in));

  const Pose truth_t2c = scene_tree_to_camera(tree, cfg);
  std::mt19937_64 nav_rng(derive_seed(seed, 1));
  GuidewireState wire = insert_wire(tree, start);
  NavigatorState nav = NavigatorState::begin(tree, start, dest, cfg.navigator);

  // Pose estimate carried between frames (T of the registration problem).
  std::optional<Pose> estimate;
  Pose truth_pose;
  TrackedEndpoint tracked;
  tracked.position = cfg.tip_seed ? *cfg.tip_seed : project(true_tip(wire), truth_t2c, cfg.cam);
  tracked.confidence = 1.0;
  tracked.frame_index = -1;
  Vec3 previous_lift = tree.position(start);

  EpisodeReport report;
  for (int loop = 0; loop < cfg.loop_cap + 1; ++loop) {
    LoopRecord rec;
    rec.loop = loop;
    rec.true_tip = true_tip(wire);
    rec.local_radius = tree.point(wire.tip_address).radius;

    const FluoroFrame frame =
        render(tree, wire, truth_t2c, cfg.cam, cfg.image_noise, derive_seed(seed, 2, loop), cfg.style, loop);
    const PerceptionResult perc = perceive(frame, cfg.perception);

    RegistrationProblem prob = make_problem(tree, perc.centerline, cfg.cam, cfg.calib, Pose::identity(),
                                            cfg.weights, cfg.k_omega);
    truth_pose = prob.pose_from_tree_to_camera(truth_t2c);
    if (!estimate) estimate = perturb(truth_pose, cfg.init_rotation_deg, cfg.init_translation_mm, derive_seed(seed, 3));
    RegistrationState reg;
    if (cfg.exact_registration) {
      prob.init_pose = truth_pose;
      reg = RegistrationState::initial(prob);
    } else {
      prob.init_pose = *estimate;
      reg = solve(prob, loop == 0 ? cfg.solver : cfg.tracking_solver);
    }
    estimate = reg.pose;
    rec.registration_rmse = reprojection_rmse(prob, reg, truth_pose);
    rec.registration_iterations = reg.iteration;
    const Correspondences corr = correspondences(prob, reg);

    const TrackedEndpoint next = track(perc.candidates, tracked, cfg.tracker, loop);
    rec.tracked = next.position;
    rec.confidence = next.confidence;
    rec.flag_back = nav.flag_back;

    auto finish_loop = [&](const LoopRecord& r) {
      if (sink) sink({frame, perc, r, nav.path, prob.tree_to_camera(reg.pose)});
      report.trace.push_back(r);
      ++report.loops;
    };

    if (next.confidence <= 0.0) {
      rec.status = "coast";
      rec.coast_reason = "no endpoint within the tracking gate";
      ++report.coasts;
      finish_loop(rec);
      if (loop == cfg.loop_cap) break;
      continue;
    }
    tracked = next;

    LiftedTip lifted;
    try {
      lifted = lift(tracked, prob, corr, tree, previous_lift, cfg.cam.pixel_size, cfg.lift);
    } catch (const OffVesselError& e) {
      rec.status = "coast";
      rec.coast_reason = e.what();
      ++report.coasts;
      finish_loop(rec);
      if (loop == cfg.loop_cap) break;
      continue;
    }
    previous_lift = lifted.position;
    rec.lifted = lifted;
    rec.lift_error = (lifted.position - rec.true_tip).norm();

    const Decision d = decide(nav, lifted, tree, nav_rng);
    rec.on_path = d.on_path;
    rec.replanned = d.replanned;
    rec.w_reset = d.w_reset;
    rec.w = nav.w;
    rec.distance = d.distance;
    report.final_distance = d.distance;
    if (d.done) {
      rec.status = "done";
      report.success = true;
      finish_loop(rec);
      break;
    }
    // The loop cap bounds the number of commands; one more frame is allowed
    // so the final command can be observed.
    if (report.control_loops == cfg.loop_cap) {
      rec.status = "cap";
      finish_loop(rec);
      break;
    }
    rec.status = "command";
    rec.command = d.command;
    wire = step(wire, *d.command, tree, cfg.actuation, derive_seed(seed, 4, loop), cfg.simulator, &rec.step);
    ++report.control_loops;
    finish_loop(rec);
  }
  report.final_true_distance = (true_tip(wire) - tree.position(dest)).norm();
  return report;
}

}  // namespace vp3d
