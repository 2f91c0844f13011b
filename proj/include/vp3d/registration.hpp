#pragma once
// Non-rigid 3D-2D centerline registration.
//
// Map points p_i are moved into the intra-operative frame by the calibration
// pose, centered on their centroid c, displaced by a per-point deformation
// r_i and finally posed by T:
//
//   u_i = project(T * (calib * p_i - c + r_i))
//
// The solver maximises the Gaussian-kernel correlation between {u_i} and the
// 2D centerline {q_j} (E_data) while penalising drift from T_0 (E_init) and
// non-smooth deformation (E_reg). Each outer iteration freezes the
// correspondence sets and kernel weights (IRLS) and takes Levenberg-Marquardt
// steps on the weighted least-squares surrogate
//
//   0.5 * sum_ij a_ij |u_i - q_j|^2 + lambda1 E_init + lambda2 E_reg,
//   a_ij = w_i exp(-|u_i - q_j|^2 / 2 l^2),
//
// which is the IRLS form of the bandwidth-normalised data term
// l^2 * sum(1 - exp(...)); its curvature does not fade as l grows.
//
// Schedule: l starts at the largest matched distance and is halved every
// `anneal_every` outer iterations until it drops below the floor. theta stays
// at zero until the bandwidth is final and the rigid iterations have settled
// (or only one stage of the budget is left); then pose and theta are refined
// jointly.

#include <Eigen/Core>
#include <Eigen/SparseCore>
#include <array>
#include <optional>
#include <vector>

#include "vp3d/geometry.hpp"
#include "vp3d/vessel_model.hpp"

namespace vp3d {

struct RegistrationWeights {
  double lambda1 = 100.0;  // pose prior
  double lambda2 = 1.0;    // deformation regulariser
  double w1 = 0.1;         // |r_i|^2
  double w2 = 10.0;        // along-branch smoothness
  double w3 = 1.0;         // cross-branch (3D k-nearest) smoothness
};

struct SolverConfig {
  int max_outer_iters = 50;
  int anneal_every = 5;
  int inner_iters = 2;  // accepted LM steps per IRLS reweighting
  double tol = 1e-6;    // step-norm termination, once annealing is done
  int k_corr = 5;       // |Delta(i)|
  double bandwidth_floor = 2.0;  // px; halving stops once l is below this
  double damping_init = 1e-3;
  double damping_factor = 10.0;
  double damping_cap = 1e8;
  bool deformation = true;  // false keeps theta at 0 (rigid-only)
};

// theta = {r_i}; the homogeneous fourth component of every r_i is 0, so only
// the spatial part is stored.
struct DeformationField {
  std::vector<Vec3> displacements;

  Eigen::Vector4d homogeneous(std::size_t i) const {
    return {displacements[i].x(), displacements[i].y(), displacements[i].z(), 0.0};
  }
  std::size_t size() const { return displacements.size(); }
};

struct RegistrationProblem {
  std::vector<Vec3> points3;                  // Omega, map coordinates
  std::vector<Address> addresses;             // tree address of each point in Omega
  std::vector<std::array<int, 2>> chain;      // along-branch neighbours {i-1, i+1}, -1 if absent
  std::vector<std::vector<int>> omega;        // 3D k-nearest neighbours of each point
  std::vector<Vec2> points2;                  // q_j, pixels
  CameraModel cam;
  Pose calib = Pose::identity();              // map -> intra-operative frame
  Pose init_pose = Pose::identity();          // T_0
  RegistrationWeights weights;
  std::vector<double> point_weights;          // w_i

  // Derived: centroid of calib * p_i, the centered points x_i and their RMS
  // radius, which is the length unit of the pose prior's translation part.
  Vec3 centroid = Vec3::Zero();
  std::vector<Vec3> centered;
  double length_scale = 1.0;  // mm

  // Recomputes the derived fields. Call after editing points3 or calib.
  void prepare();
  // Throws std::invalid_argument when |Omega| < 6, |q| < 6, a weight is negative
  // or the per-point arrays disagree in length.
  void validate() const;

  // Full map -> camera transform for a pose T (no deformation).
  Pose tree_to_camera(const Pose& pose) const;
  // Pose T for which tree_to_camera(T) == given transform.
  Pose pose_from_tree_to_camera(const Pose& tree_to_camera) const;
};

// Builds Omega from the tree (each shared attach point appears once), the
// along-branch chain and the k_omega nearest-neighbour sets.
RegistrationProblem make_problem(const VesselTree& tree, std::vector<Vec2> points2, const CameraModel& cam,
                                 const Pose& calib, const Pose& init_pose, const RegistrationWeights& weights = {},
                                 int k_omega = 4);

// log(anchor^-1 * pose) with its translation divided by prob.length_scale, so
// both halves of the twist are dimensionless. E_init is its squared norm.
Vec6 prior_twist(const RegistrationProblem& prob, const Pose& anchor, const Pose& pose);

struct RegistrationState {
  Pose pose;
  DeformationField deformation;
  double bandwidth = 1.0;  // px
  int iteration = 0;
  double objective = 0.0;  // -E_data + lambda1 E_init + lambda2 E_reg
  bool converged = false;
  bool damping_exhausted = false;

  static RegistrationState initial(const RegistrationProblem& prob, double bandwidth = 1.0);
};

// Camera-frame position of point i under a state.
Vec3 camera_point(const RegistrationProblem& prob, const RegistrationState& state, std::size_t i);

// Per-point k nearest 2D points (Delta(i)) under the current projection. Points
// behind the camera get an empty set.
std::vector<std::vector<int>> nearest_2d(const RegistrationProblem& prob, const RegistrationState& state, int k);

struct Energies {
  double data = 0.0;
  double init = 0.0;
  double reg = 0.0;
  std::vector<int> behind_camera;

  double composite(const RegistrationWeights& w) const { return -data + w.lambda1 * init + w.lambda2 * reg; }
};

// Energies with Delta(i) = k nearest 2D points under the state's projection.
Energies eval_objective(const RegistrationProblem& prob, const RegistrationState& state, int k_corr = 5);
// Energies with an explicit Delta.
Energies eval_objective(const RegistrationProblem& prob, const RegistrationState& state,
                        const std::vector<std::vector<int>>& delta);

// Frozen IRLS linearisation point: correspondence sets, kernel weights and the
// pose-prior anchor.
struct Linearization {
  std::vector<std::vector<int>> delta;
  std::vector<std::vector<double>> weights;  // w_i * exp(-d^2 / 2 l^2)
  Pose anchor;
  double bandwidth = 1.0;
  bool deformation = true;
};

Linearization linearize(const RegistrationProblem& prob, const RegistrationState& state, double bandwidth, int k_corr,
                        const Pose& anchor, bool deformation);

// Residual vector of the surrogate (0.5 * |e|^2 is the surrogate loss) and its
// Jacobian w.r.t. (left pose increment [rho, phi], r_0, ..., r_{N-1}); the
// deformation columns are absent when lin.deformation is false. Points behind
// the camera contribute zero data rows.
Eigen::VectorXd surrogate_residuals(const RegistrationProblem& prob, const Linearization& lin,
                                    const RegistrationState& state);
Eigen::SparseMatrix<double> surrogate_jacobian(const RegistrationProblem& prob, const Linearization& lin,
                                               const RegistrationState& state);

// Applies an increment in the Jacobian's parameterisation.
RegistrationState retract(const RegistrationState& state, const Eigen::VectorXd& step, bool deformation);

struct SolveTrace {
  struct Step {
    int outer = 0;
    double before = 0.0;  // surrogate loss before the accepted step
    double after = 0.0;
    double bandwidth = 0.0;
  };
  std::vector<Step> accepted;
  int rejected = 0;
};

RegistrationState solve(const RegistrationProblem& prob, const SolverConfig& cfg = {}, SolveTrace* trace = nullptr);

struct Correspondences {
  std::vector<int> match;          // index into points2, -1 when excluded
  std::vector<double> distance;    // px, NaN when excluded
  std::vector<int> behind_camera;  // excluded point indices
};

Correspondences correspondences(const RegistrationProblem& prob, const RegistrationState& state);

// RMS pixel distance between the state's projections and the projections of
// the undeformed points under a reference pose.
double reprojection_rmse(const RegistrationProblem& prob, const RegistrationState& state, const Pose& truth);

}  // namespace vp3d
