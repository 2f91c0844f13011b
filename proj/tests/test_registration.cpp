#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

#include "doctest.h"
#include "support.hpp"
#include "vp3d/registration.hpp"

using namespace vp3d;

namespace {

const CameraModel kCam = CameraModel::pinhole(800.0 / 0.30, 256, 256, 512, 512, 0.30);
const Pose kTruth = Pose::from_translation(Vec3(0, 0, 800));

// Noise-free 2D centerline: the projections of the centered map points under
// the true pose.
RegistrationProblem projected_problem(const VesselTree& tree, const Pose& init) {
  const RegistrationProblem probe = make_problem(tree, std::vector<Vec2>(6, Vec2::Zero()), kCam, Pose::identity(), kTruth);
  std::vector<Vec2> q;
  for (const Vec3& x : probe.centered) q.push_back(project(x, kTruth, kCam));
  return make_problem(tree, q, kCam, Pose::identity(), init);
}

// Rotation about the centroid by `deg` around a random axis plus a random
// translation of `mm`.
Pose perturbed(std::mt19937_64& rng, double deg, double mm) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  const Vec3 axis = Vec3(u(rng), u(rng), u(rng)).normalized();
  const Vec3 t = Vec3(u(rng), u(rng), u(rng)).normalized() * mm;
  return {so3_exp(axis * deg * std::numbers::pi / 180.0) * kTruth.rotation, kTruth.translation + t};
}

}  // namespace

TEST_CASE("default hyperparameters") {
  const RegistrationWeights w;
  CHECK(w.lambda1 == 100.0);
  CHECK(w.lambda2 == 1.0);
  CHECK(w.w1 == 0.1);
  CHECK(w.w2 == 10.0);
  CHECK(w.w3 == 1.0);
}

TEST_CASE("problem construction") {
  const VesselTree y = vp3d::testing::y_tree(10, 10);
  const RegistrationProblem p = make_problem(y, std::vector<Vec2>(6, Vec2::Zero()), kCam, Pose::identity(), kTruth);
  // 11 trunk points plus 10 per limb: the shared fork point appears once.
  CHECK(p.points3.size() == 31u);
  Vec3 mean = Vec3::Zero();
  for (const Vec3& x : p.centered) mean += x;
  CHECK(mean.norm() < 1e-9);
  for (std::size_t i = 0; i < p.points3.size(); ++i) {
    for (int j : p.chain[i])
      if (j >= 0) CHECK((p.points3[i] - p.points3[j]).norm() == doctest::Approx(1.0));
    // Omega(i) holds the k nearest other points: nothing outside is closer.
    REQUIRE(p.omega[i].size() == 4u);
    double worst = 0.0;
    for (int j : p.omega[i]) {
      CHECK(j != static_cast<int>(i));
      worst = std::max(worst, (p.points3[i] - p.points3[j]).norm());
    }
    for (std::size_t j = 0; j < p.points3.size(); ++j)
      if (j != i && std::find(p.omega[i].begin(), p.omega[i].end(), static_cast<int>(j)) == p.omega[i].end())
        CHECK((p.points3[i] - p.points3[j]).norm() >= worst - 1e-12);
  }
  CHECK_THROWS_AS(make_problem(y, std::vector<Vec2>(5, Vec2::Zero()), kCam, Pose::identity(), kTruth).validate(),
                  std::invalid_argument);
  RegistrationProblem negative = p;
  negative.point_weights.assign(p.points3.size(), 1.0);
  negative.point_weights[4] = -1.0;
  CHECK_THROWS_AS(negative.validate(), std::invalid_argument);
  CHECK_THROWS_AS(solve(negative), std::invalid_argument);
}

TEST_CASE("objective terms re-summed by hand") {
  const VesselTree line = vp3d::testing::straight_tree(8);
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::vector<Vec2> q;
  for (int j = 0; j < 7; ++j) q.push_back(Vec2(256 + 40 * u(rng), 256 + 40 * u(rng)));
  RegistrationProblem p = make_problem(line, q, kCam, Pose::identity(), kTruth);
  p.point_weights.assign(p.points3.size(), 1.0);
  p.point_weights[3] = 0.25;

  // Points along x at -4..4 around the centroid: RMS radius sqrt(60/9).
  CHECK(p.length_scale == doctest::Approx(std::sqrt(60.0 / 9.0)).epsilon(1e-12));

  RegistrationState st = RegistrationState::initial(p, 7.0);
  CHECK(eval_objective(p, st, 5).init == 0.0);
  CHECK(eval_objective(p, st, 5).reg == 0.0);

  Vec6 xi;
  xi << 0.3, -0.2, 0.5, 0.01, 0.02, -0.015;
  st.pose = kTruth * se3_exp(xi);
  for (auto& r : st.deformation.displacements) r = Vec3(u(rng), u(rng), u(rng));

  std::vector<std::vector<int>> delta(p.points3.size());
  for (std::size_t i = 0; i < delta.size(); ++i)
    for (int j = 0; j < 7; j += 1 + static_cast<int>(i % 3)) delta[i].push_back(j);
  const Energies e = eval_objective(p, st, delta);

  double data = 0.0;
  for (std::size_t i = 0; i < delta.size(); ++i) {
    const Vec3 c = st.pose * (p.centered[i] + st.deformation.displacements[i]);
    const Vec2 ui(kCam.intrinsics(0, 0) * c.x() / c.z() + 256.0, kCam.intrinsics(1, 1) * c.y() / c.z() + 256.0);
    for (int j : delta[i]) data += p.point_weights[i] * std::exp(-(ui - q[j]).squaredNorm() / (2.0 * 49.0));
  }
  CHECK(e.data == doctest::Approx(data).epsilon(1e-12));

  const double L2 = 60.0 / 9.0;
  const double init = xi.head<3>().squaredNorm() / L2 + xi.tail<3>().squaredNorm();
  CHECK(e.init == doctest::Approx(init).epsilon(1e-9));

  const auto& r = st.deformation.displacements;
  double a = 0.0, b = 0.0, c = 0.0;
  for (int i = 0; i <= 8; ++i) {
    a += r[i].squaredNorm();
    if (i > 0) b += (r[i] - r[i - 1]).squaredNorm();
    if (i < 8) b += (r[i] - r[i + 1]).squaredNorm();
    for (int j : p.omega[i]) c += (r[i] - r[j]).squaredNorm();
  }
  CHECK(e.reg == doctest::Approx(0.1 * a + 10.0 * b + 1.0 * c).epsilon(1e-12));
  CHECK(e.composite(p.weights) == doctest::Approx(-data + 100.0 * init + e.reg).epsilon(1e-9));

  // Exact overlap with a single correspondence each: every kernel is 1.
  RegistrationProblem exact = projected_problem(line, kTruth);
  std::vector<std::vector<int>> self(exact.points3.size());
  for (std::size_t i = 0; i < self.size(); ++i) self[i] = {static_cast<int>(i)};
  CHECK(eval_objective(exact, RegistrationState::initial(exact), self).data == doctest::Approx(9.0).epsilon(1e-15));
}

TEST_CASE("data term is invariant to a shared image-plane shift") {
  const VesselTree tree = generate_phantom(PhantomSpec{}, 11);
  RegistrationProblem a = projected_problem(tree, kTruth);
  std::mt19937_64 rng(8);
  RegistrationState st = RegistrationState::initial(a, 4.0);
  st.pose = perturbed(rng, 3.0, 4.0);
  const Vec2 shift(17.0, -9.0);
  CameraModel moved = kCam;
  moved.intrinsics(0, 2) += shift.x();
  moved.intrinsics(1, 2) += shift.y();
  std::vector<Vec2> q = a.points2;
  for (Vec2& v : q) v += shift;
  const RegistrationProblem b = make_problem(tree, q, moved, Pose::identity(), kTruth);
  CHECK(eval_objective(b, st, 5).data == doctest::Approx(eval_objective(a, st, 5).data).epsilon(1e-9));
}

TEST_CASE("correspondences match a brute-force scan") {
  const VesselTree tree = generate_phantom(PhantomSpec{}, 3);
  const RegistrationProblem p = projected_problem(tree, kTruth);
  std::mt19937_64 rng(12);
  for (int trial = 0; trial < 5; ++trial) {
    RegistrationState st = RegistrationState::initial(p);
    st.pose = perturbed(rng, 4.0, 8.0);
    const Correspondences c = correspondences(p, st);
    CHECK(c.behind_camera.empty());
    for (std::size_t i = 0; i < p.points3.size(); ++i) {
      const Vec2 ui = project(p.centered[i], st.pose, kCam);
      double best = 1e300;
      for (const Vec2& qj : p.points2) best = std::min(best, (ui - qj).norm());
      REQUIRE(c.match[i] >= 0);
      CHECK((ui - p.points2[c.match[i]]).norm() == doctest::Approx(best).epsilon(1e-12));
      CHECK(c.distance[i] == doctest::Approx(best).epsilon(1e-12));
    }
  }
}

TEST_CASE("points behind the camera are excluded") {
  std::map<BranchId, Branch> br;
  br[0] = vp3d::testing::make_branch(0, std::nullopt, -1, vp3d::testing::straight(Vec3::Zero(), Vec3::UnitZ(), 20));
  const VesselTree along_z(std::move(br), 0);
  std::vector<Vec2> q;
  for (int j = 0; j < 8; ++j) q.push_back(Vec2(256 + j, 256));
  const RegistrationProblem p = make_problem(along_z, q, kCam, Pose::identity(), Pose::from_translation(Vec3(0, 0, 4.5)));
  // Centered z runs -10..10, so depths are -5.5..14.5: indices 0..5 are behind.
  const RegistrationState st = RegistrationState::initial(p);
  const Correspondences c = correspondences(p, st);
  CHECK(c.behind_camera == std::vector<int>{0, 1, 2, 3, 4, 5});
  for (int i = 0; i <= 20; ++i) {
    CHECK((c.match[i] < 0) == (i <= 5));
    CHECK(std::isnan(c.distance[i]) == (i <= 5));
  }
  CHECK(eval_objective(p, st, 3).behind_camera == c.behind_camera);
  CHECK(nearest_2d(p, st, 3)[2].empty());
}

TEST_CASE("surrogate Jacobian matches central differences") {
  const VesselTree tree = generate_phantom(PhantomSpec{}, 7);
  const RegistrationProblem p = projected_problem(tree, kTruth);
  std::mt19937_64 rng(1);
  std::normal_distribution<double> n(0.0, 1.0);
  for (int trial = 0; trial < 4; ++trial) {
    RegistrationState st = RegistrationState::initial(p);
    Vec6 d;
    for (int i = 0; i < 6; ++i) d[i] = n(rng) * (i < 3 ? 3.0 : 0.05);
    st.pose = se3_exp(d) * kTruth;
    for (auto& r : st.deformation.displacements) r = Vec3(n(rng), n(rng), n(rng)) * 0.5;
    const bool deform = trial % 2 == 0;
    const Linearization lin = linearize(p, st, 10.0, 5, se3_exp(Vec6::Constant(0.02)) * kTruth, deform);
    const Eigen::MatrixXd J(surrogate_jacobian(p, lin, st));
    REQUIRE(J.cols() == (deform ? 6 + 3 * static_cast<long>(p.points3.size()) : 6));
    const double h = 1e-6;
    for (int col = 0; col < J.cols(); col += col < 6 ? 1 : 23) {
      Eigen::VectorXd e = Eigen::VectorXd::Zero(J.cols());
      e[col] = h;
      const Eigen::VectorXd fd = (surrogate_residuals(p, lin, retract(st, e, deform)) -
                                  surrogate_residuals(p, lin, retract(st, -e, deform))) / (2.0 * h);
      CHECK((fd - J.col(col)).norm() <= 1e-5 * std::max(1e-12, J.col(col).norm()));
    }
  }
}

TEST_CASE("truth is a fixed point of the solver") {
  const VesselTree tree = generate_phantom(PhantomSpec{}, 5);
  const RegistrationProblem p = projected_problem(tree, kTruth);
  // One correspondence per point: every residual and the prior vanish at truth.
  SolverConfig single;
  single.k_corr = 1;
  CHECK(reprojection_rmse(p, solve(p, single), kTruth) < 1e-6);
  single.deformation = false;
  CHECK(reprojection_rmse(p, solve(p, single), kTruth) < 1e-6);
  // With five correspondences the kernel pulls each point toward its
  // neighbours' mean, which is biased at branch ends and forks; the optimum
  // moves by a small fraction of a pixel.
  CHECK(reprojection_rmse(p, solve(p), kTruth) < 0.15);
}

TEST_CASE("solver recovers a moderate pose error and descends monotonically") {
  std::mt19937_64 rng(21);
  for (std::uint64_t seed : {31u, 32u, 33u}) {
    const VesselTree tree = generate_phantom(PhantomSpec{}, seed);
    const RegistrationProblem p = projected_problem(tree, perturbed(rng, 5.0, 5.0));
    SolveTrace trace;
    const RegistrationState st = solve(p, {}, &trace);
    CHECK(reprojection_rmse(p, st, kTruth) < 0.5);
    REQUIRE_FALSE(trace.accepted.empty());
    for (const auto& s : trace.accepted) CHECK(s.after <= s.before);
    for (std::size_t k = 1; k < trace.accepted.size(); ++k)
      CHECK(trace.accepted[k].bandwidth <= trace.accepted[k - 1].bandwidth);
  }
}

TEST_CASE("rigid-only solving keeps theta at zero") {
  std::mt19937_64 rng(5);
  const VesselTree tree = generate_phantom(PhantomSpec{}, 40);
  const RegistrationProblem p = projected_problem(tree, perturbed(rng, 3.0, 3.0));
  SolverConfig cfg;
  cfg.deformation = false;
  const RegistrationState st = solve(p, cfg);
  for (const Vec3& r : st.deformation.displacements) CHECK(r == Vec3::Zero());
  CHECK(reprojection_rmse(p, st, kTruth) < 0.5);
}
