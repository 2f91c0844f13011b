#include "vp3d/registration.hpp"

#include <Eigen/Cholesky>
#include <Eigen/SparseCholesky>
#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "vp3d/errors.hpp"
#include "vp3d/simd/kernels.hpp"

namespace vp3d {
namespace {

// Keeps the k smallest (distance, index) pairs; ties resolved by lower index.
class TopK {
 public:
  explicit TopK(int k) : k_(static_cast<std::size_t>(std::max(k, 0))) { items_.reserve(k_ + 1); }

  void offer(double d, int idx) {
    if (k_ == 0) return;
    if (items_.size() == k_ && !less({d, idx}, items_.back())) return;
    auto it = std::upper_bound(items_.begin(), items_.end(), Item{d, idx}, less);
    items_.insert(it, {d, idx});
    if (items_.size() > k_) items_.pop_back();
  }

  bool full() const { return k_ > 0 && items_.size() == k_; }
  double worst() const { return items_.back().d; }

  std::vector<int> indices() const {
    std::vector<int> out;
    for (const auto& it : items_) out.push_back(it.idx);
    return out;
  }

 private:
  struct Item {
    double d;
    int idx;
  };
  static bool less(const Item& a, const Item& b) { return a.d < b.d || (a.d == b.d && a.idx < b.idx); }

  std::size_t k_;
  std::vector<Item> items_;
};

// Uniform bucket grid over the 2D points. Each cell's points are stored
// contiguously (structure of arrays) so the distance kernel runs per cell.
class PointGrid {
 public:
  PointGrid(const std::vector<Vec2>& pts, double cell) : cell_(cell) {
    lo_ = Vec2::Constant(std::numeric_limits<double>::infinity());
    Vec2 hi = -lo_;
    for (const auto& p : pts) {
      lo_ = lo_.cwiseMin(p);
      hi = hi.cwiseMax(p);
    }
    if (pts.empty()) lo_ = hi = Vec2::Zero();
    nx_ = static_cast<int>(std::floor((hi.x() - lo_.x()) / cell_)) + 1;
    ny_ = static_cast<int>(std::floor((hi.y() - lo_.y()) / cell_)) + 1;
    start_.assign(static_cast<std::size_t>(nx_) * ny_ + 1, 0);
    std::vector<int> cell_of(pts.size());
    for (std::size_t j = 0; j < pts.size(); ++j) {
      cell_of[j] = cell_index(cell_coord(pts[j].x(), lo_.x(), nx_), cell_coord(pts[j].y(), lo_.y(), ny_));
      ++start_[cell_of[j] + 1];
    }
    for (std::size_t c = 1; c < start_.size(); ++c) start_[c] += start_[c - 1];
    std::vector<int> fill(start_.begin(), start_.end() - 1);
    xs_.resize(pts.size());
    ys_.resize(pts.size());
    idx_.resize(pts.size());
    for (std::size_t j = 0; j < pts.size(); ++j) {  // ascending j keeps each cell sorted by index
      const int slot = fill[cell_of[j]]++;
      xs_[slot] = pts[j].x();
      ys_[slot] = pts[j].y();
      idx_[slot] = static_cast<int>(j);
    }
    d2_.resize(pts.size());
  }

  // Exact k nearest points, ordered by (distance, index).
  std::vector<int> nearest(const Vec2& q, int k) {
    TopK top(k);
    const auto& kern = simd::kernels();
    const int qx = static_cast<int>(std::floor((q.x() - lo_.x()) / cell_));
    const int qy = static_cast<int>(std::floor((q.y() - lo_.y()) / cell_));
    const int max_ring = std::max({std::abs(qx), std::abs(nx_ - 1 - qx), std::abs(qy), std::abs(ny_ - 1 - qy)});
    std::size_t seen = 0;
    for (int r = 0; r <= max_ring; ++r) {
      for (int cy = qy - r; cy <= qy + r; ++cy) {
        if (cy < 0 || cy >= ny_) continue;
        const bool edge_row = cy == qy - r || cy == qy + r;
        for (int cx = qx - r; cx <= qx + r; cx += edge_row ? 1 : 2 * std::max(r, 1)) {
          if (cx < 0 || cx >= nx_) continue;
          const int c = cell_index(cx, cy);
          const int b = start_[c], e = start_[c + 1];
          if (b == e) continue;
          kern.squared_distances_2d(&xs_[b], &ys_[b], static_cast<std::size_t>(e - b), q.x(), q.y(), &d2_[b]);
          for (int s = b; s < e; ++s) top.offer(d2_[s], idx_[s]);
          seen += static_cast<std::size_t>(e - b);
        }
      }
      // Every point outside rings 0..r is at least this far from q.
      const double gap = std::min({q.x() - (lo_.x() + (qx - r) * cell_), lo_.x() + (qx + r + 1) * cell_ - q.x(),
                                   q.y() - (lo_.y() + (qy - r) * cell_), lo_.y() + (qy + r + 1) * cell_ - q.y()});
      if (seen == xs_.size()) break;
      if (top.full() && gap > 0.0 && top.worst() < gap * gap) break;
    }
    return top.indices();
  }

 private:
  int cell_coord(double v, double lo, int n) const {
    return std::clamp(static_cast<int>(std::floor((v - lo) / cell_)), 0, n - 1);
  }
  int cell_index(int cx, int cy) const { return cy * nx_ + cx; }

  double cell_;
  Vec2 lo_;
  int nx_ = 1, ny_ = 1;
  std::vector<int> start_;
  std::vector<double> xs_, ys_, d2_;
  std::vector<int> idx_;
};

struct Projection {
  std::vector<Vec3> camera;
  std::vector<Vec2> pixel;
  std::vector<char> valid;
};

Projection project_all(const RegistrationProblem& prob, const RegistrationState& state) {
  Projection p;
  const std::size_t n = prob.centered.size();
  p.camera.resize(n);
  p.pixel.resize(n);
  p.valid.assign(n, 0);
  for (std::size_t i = 0; i < n; ++i) {
    p.camera[i] = camera_point(prob, state, i);
    if (depth(p.camera[i], prob.cam) > 0.0) {
      p.pixel[i] = project_camera(p.camera[i], prob.cam);
      p.valid[i] = 1;
    }
  }
  return p;
}

std::vector<std::vector<int>> nearest_2d(const RegistrationProblem& prob, const Projection& proj, int k) {
  PointGrid grid(prob.points2, 8.0);
  std::vector<std::vector<int>> out(proj.pixel.size());
  for (std::size_t i = 0; i < proj.pixel.size(); ++i)
    if (proj.valid[i]) out[i] = grid.nearest(proj.pixel[i], k);
  return out;
}

double point_weight(const RegistrationProblem& prob, std::size_t i) {
  return prob.point_weights.empty() ? 1.0 : prob.point_weights[i];
}

std::size_t data_rows(const Linearization& lin) {
  std::size_t n = 0;
  for (const auto& d : lin.delta) n += 2 * d.size();
  return n;
}

std::size_t reg_rows(const RegistrationProblem& prob) {
  std::size_t n = 3 * prob.centered.size();
  for (std::size_t i = 0; i < prob.centered.size(); ++i) {
    for (int j : prob.chain[i]) n += j >= 0 ? 3 : 0;
    n += 3 * prob.omega[i].size();
  }
  return n;
}

}  // namespace

// ---------------------------------------------------------------------------
// Problem

void RegistrationProblem::prepare() {
  centroid = Vec3::Zero();
  for (const auto& p : points3) centroid += calib * p;
  if (!points3.empty()) centroid /= static_cast<double>(points3.size());
  centered.clear();
  centered.reserve(points3.size());
  double ss = 0.0;
  for (const auto& p : points3) {
    centered.push_back(calib * p - centroid);
    ss += centered.back().squaredNorm();
  }
  length_scale = centered.empty() ? 1.0 : std::sqrt(ss / static_cast<double>(centered.size()));
  if (!(length_scale > 0.0)) length_scale = 1.0;
}

Vec6 prior_twist(const RegistrationProblem& prob, const Pose& anchor, const Pose& pose) {
  Vec6 xi = se3_log(anchor.inverse() * pose);
  xi.head<3>() /= prob.length_scale;
  return xi;
}

void RegistrationProblem::validate() const {
  if (points3.size() < 6) throw std::invalid_argument("registration needs at least 6 3D points");
  if (points2.size() < 6) throw std::invalid_argument("registration needs at least 6 2D points");
  if (centered.size() != points3.size()) throw std::invalid_argument("registration problem not prepared");
  if (chain.size() != points3.size() || omega.size() != points3.size())
    throw std::invalid_argument("neighbourhood arrays do not match |Omega|");
  if (!point_weights.empty() && point_weights.size() != points3.size())
    throw std::invalid_argument("per-point weights do not match |Omega|");
  const auto& w = weights;
  if (w.lambda1 < 0 || w.lambda2 < 0 || w.w1 < 0 || w.w2 < 0 || w.w3 < 0)
    throw std::invalid_argument("registration weights must be non-negative");
  for (double v : point_weights)
    if (v < 0) throw std::invalid_argument("per-point weights must be non-negative");
  cam.validate();
}

Pose RegistrationProblem::tree_to_camera(const Pose& pose) const {
  return pose * Pose::from_translation(-centroid) * calib;
}

Pose RegistrationProblem::pose_from_tree_to_camera(const Pose& m) const {
  return m * calib.inverse() * Pose::from_translation(centroid);
}

RegistrationProblem make_problem(const VesselTree& tree, std::vector<Vec2> points2, const CameraModel& cam,
                                 const Pose& calib, const Pose& init_pose, const RegistrationWeights& weights,
                                 int k_omega) {
  RegistrationProblem prob;
  std::map<Address, int> index_of;
  for (const auto& [id, b] : tree.branches()) {
    const int first = b.parent ? 1 : 0;
    for (int k = first; k < static_cast<int>(b.points.size()); ++k) {
      index_of[{id, k}] = static_cast<int>(prob.points3.size());
      prob.points3.push_back(b.points[k].position);
      prob.addresses.push_back({id, k});
    }
  }
  auto lookup = [&](BranchId id, int k) -> int {
    const auto& b = tree.branch(id);
    if (k == 0 && b.parent) return index_of.at({*b.parent, b.attach_index});
    return index_of.at({id, k});
  };
  prob.chain.resize(prob.points3.size());
  for (std::size_t i = 0; i < prob.addresses.size(); ++i) {
    const auto [id, k] = prob.addresses[i];
    prob.chain[i][0] = k > 0 ? lookup(id, k - 1) : -1;
    prob.chain[i][1] = k < tree.last_index(id) ? lookup(id, k + 1) : -1;
  }

  std::vector<double> xs, ys, zs;
  for (const auto& p : prob.points3) {
    xs.push_back(p.x());
    ys.push_back(p.y());
    zs.push_back(p.z());
  }
  std::vector<double> d2(xs.size());
  prob.omega.resize(prob.points3.size());
  for (std::size_t i = 0; i < prob.points3.size(); ++i) {
    simd::kernels().squared_distances_3d(xs.data(), ys.data(), zs.data(), xs.size(), xs[i], ys[i], zs[i], d2.data());
    TopK top(k_omega);
    for (std::size_t j = 0; j < d2.size(); ++j)
      if (j != i) top.offer(d2[j], static_cast<int>(j));
    prob.omega[i] = top.indices();
  }

  prob.points2 = std::move(points2);
  prob.cam = cam;
  prob.calib = calib;
  prob.init_pose = init_pose;
  prob.weights = weights;
  prob.prepare();
  return prob;
}

// ---------------------------------------------------------------------------
// State and energies

RegistrationState RegistrationState::initial(const RegistrationProblem& prob, double bandwidth) {
  RegistrationState s;
  s.pose = prob.init_pose;
  s.deformation.displacements.assign(prob.points3.size(), Vec3::Zero());
  s.bandwidth = bandwidth;
  return s;
}

Vec3 camera_point(const RegistrationProblem& prob, const RegistrationState& state, std::size_t i) {
  return state.pose * (prob.centered[i] + state.deformation.displacements[i]);
}

std::vector<std::vector<int>> nearest_2d(const RegistrationProblem& prob, const RegistrationState& state, int k) {
  return nearest_2d(prob, project_all(prob, state), k);
}

Energies eval_objective(const RegistrationProblem& prob, const RegistrationState& state, int k_corr) {
  return eval_objective(prob, state, nearest_2d(prob, state, k_corr));
}

Energies eval_objective(const RegistrationProblem& prob, const RegistrationState& state,
                        const std::vector<std::vector<int>>& delta) {
  if (!(state.bandwidth > 0.0)) throw std::invalid_argument("bandwidth must be positive");
  Energies e;
  const double inv2l2 = 1.0 / (2.0 * state.bandwidth * state.bandwidth);
  for (std::size_t i = 0; i < prob.centered.size(); ++i) {
    const Vec3 x = camera_point(prob, state, i);
    if (!(depth(x, prob.cam) > 0.0)) {
      e.behind_camera.push_back(static_cast<int>(i));
      continue;
    }
    const Vec2 u = project_camera(x, prob.cam);
    double s = 0.0;
    for (int j : delta[i]) s += std::exp(-(u - prob.points2[j]).squaredNorm() * inv2l2);
    e.data += point_weight(prob, i) * s;
  }
  e.init = prior_twist(prob, prob.init_pose, state.pose).squaredNorm();
  const auto& r = state.deformation.displacements;
  double a = 0.0, b = 0.0, c = 0.0;
  for (std::size_t i = 0; i < r.size(); ++i) {
    a += r[i].squaredNorm();
    for (int j : prob.chain[i])
      if (j >= 0) b += (r[i] - r[j]).squaredNorm();
    for (int j : prob.omega[i]) c += (r[i] - r[j]).squaredNorm();
  }
  e.reg = prob.weights.w1 * a + prob.weights.w2 * b + prob.weights.w3 * c;
  return e;
}

// ---------------------------------------------------------------------------
// IRLS surrogate

Linearization linearize(const RegistrationProblem& prob, const RegistrationState& state, double bandwidth, int k_corr,
                        const Pose& anchor, bool deformation) {
  Linearization lin;
  const Projection proj = project_all(prob, state);
  lin.delta = nearest_2d(prob, proj, k_corr);
  lin.anchor = anchor;
  lin.bandwidth = bandwidth;
  lin.deformation = deformation;
  lin.weights.resize(lin.delta.size());
  const double l2 = bandwidth * bandwidth;
  for (std::size_t i = 0; i < lin.delta.size(); ++i) {
    for (int j : lin.delta[i]) {
      const double d2 = (proj.pixel[i] - prob.points2[j]).squaredNorm();
      lin.weights[i].push_back(point_weight(prob, i) * std::exp(-d2 / (2.0 * l2)));
    }
  }
  return lin;
}

Eigen::VectorXd surrogate_residuals(const RegistrationProblem& prob, const Linearization& lin,
                                    const RegistrationState& state) {
  const auto& w = prob.weights;
  Eigen::VectorXd res = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(data_rows(lin) + 6 + reg_rows(prob)));
  Eigen::Index row = 0;
  for (std::size_t i = 0; i < lin.delta.size(); ++i) {
    if (lin.delta[i].empty()) continue;
    const Vec3 x = camera_point(prob, state, i);
    const bool valid = depth(x, prob.cam) > 0.0;
    const Vec2 u = valid ? project_camera(x, prob.cam) : Vec2::Zero();
    for (std::size_t m = 0; m < lin.delta[i].size(); ++m, row += 2)
      if (valid) res.segment<2>(row) = std::sqrt(lin.weights[i][m]) * (u - prob.points2[lin.delta[i][m]]);
  }
  res.segment<6>(row) = std::sqrt(2.0 * w.lambda1) * prior_twist(prob, lin.anchor, state.pose);
  row += 6;
  const auto& r = state.deformation.displacements;
  const double s1 = std::sqrt(2.0 * w.lambda2 * w.w1);
  const double s2 = std::sqrt(2.0 * w.lambda2 * w.w2);
  const double s3 = std::sqrt(2.0 * w.lambda2 * w.w3);
  for (std::size_t i = 0; i < r.size(); ++i, row += 3) res.segment<3>(row) = s1 * r[i];
  for (std::size_t i = 0; i < r.size(); ++i) {
    for (int j : prob.chain[i])
      if (j >= 0) {
        res.segment<3>(row) = s2 * (r[i] - r[j]);
        row += 3;
      }
    for (int j : prob.omega[i]) {
      res.segment<3>(row) = s3 * (r[i] - r[j]);
      row += 3;
    }
  }
  return res;
}

Eigen::SparseMatrix<double> surrogate_jacobian(const RegistrationProblem& prob, const Linearization& lin,
                                               const RegistrationState& state) {
  const auto& w = prob.weights;
  const std::size_t n = prob.centered.size();
  const Eigen::Index cols = lin.deformation ? static_cast<Eigen::Index>(6 + 3 * n) : 6;
  const Eigen::Index rows = static_cast<Eigen::Index>(data_rows(lin) + 6 + reg_rows(prob));
  std::vector<Eigen::Triplet<double>> t;
  t.reserve(data_rows(lin) * 9 + 36 + reg_rows(prob) * 2);
  auto put_block = [&](Eigen::Index r0, Eigen::Index c0, const auto& m) {
    for (Eigen::Index a = 0; a < m.rows(); ++a)
      for (Eigen::Index b = 0; b < m.cols(); ++b)
        if (m(a, b) != 0.0) t.emplace_back(r0 + a, c0 + b, m(a, b));
  };

  Eigen::Index row = 0;
  const Mat3& rot = state.pose.rotation;
  for (std::size_t i = 0; i < n; ++i) {
    if (lin.delta[i].empty()) continue;
    const Vec3 x = camera_point(prob, state, i);
    if (!(depth(x, prob.cam) > 0.0)) {
      row += static_cast<Eigen::Index>(2 * lin.delta[i].size());
      continue;
    }
    const Mat23 p = projection_jacobian(x, prob.cam);
    Eigen::Matrix<double, 2, 6> jpose;
    jpose.leftCols<3>() = p;
    jpose.rightCols<3>() = -p * hat(x);
    const Mat23 jr = p * rot;
    for (std::size_t m = 0; m < lin.delta[i].size(); ++m, row += 2) {
      const double s = std::sqrt(lin.weights[i][m]);
      put_block(row, 0, (s * jpose).eval());
      if (lin.deformation) put_block(row, static_cast<Eigen::Index>(6 + 3 * i), (s * jr).eval());
    }
  }

  const Vec6 xi = se3_log(lin.anchor.inverse() * state.pose);
  Mat6 jinit = std::sqrt(2.0 * w.lambda1) * se3_left_jacobian_inverse(xi) * se3_adjoint(lin.anchor.inverse());
  jinit.topRows<3>() /= prob.length_scale;
  put_block(row, 0, jinit);
  row += 6;

  if (lin.deformation) {
    const double s1 = std::sqrt(2.0 * w.lambda2 * w.w1);
    const double s2 = std::sqrt(2.0 * w.lambda2 * w.w2);
    const double s3 = std::sqrt(2.0 * w.lambda2 * w.w3);
    auto diff = [&](Eigen::Index r0, std::size_t i, int j, double s) {
      for (int a = 0; a < 3; ++a) {
        if (s == 0.0) break;
        t.emplace_back(r0 + a, static_cast<Eigen::Index>(6 + 3 * i + a), s);
        t.emplace_back(r0 + a, static_cast<Eigen::Index>(6 + 3 * j + a), -s);
      }
    };
    for (std::size_t i = 0; i < n; ++i, row += 3)
      for (int a = 0; a < 3 && s1 != 0.0; ++a) t.emplace_back(row + a, static_cast<Eigen::Index>(6 + 3 * i + a), s1);
    for (std::size_t i = 0; i < n; ++i) {
      for (int j : prob.chain[i])
        if (j >= 0) {
          diff(row, i, j, s2);
          row += 3;
        }
      for (int j : prob.omega[i]) {
        diff(row, i, j, s3);
        row += 3;
      }
    }
  }
  Eigen::SparseMatrix<double> jac(rows, cols);
  jac.setFromTriplets(t.begin(), t.end());
  return jac;
}

RegistrationState retract(const RegistrationState& state, const Eigen::VectorXd& step, bool deformation) {
  RegistrationState out = state;
  out.pose = se3_exp(step.head<6>()) * state.pose;
  if (deformation) {
    for (std::size_t i = 0; i < out.deformation.displacements.size(); ++i)
      out.deformation.displacements[i] += step.segment<3>(static_cast<Eigen::Index>(6 + 3 * i));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Solver

namespace {

bool any_behind(const RegistrationProblem& prob, const Linearization& lin, const RegistrationState& state) {
  for (std::size_t i = 0; i < lin.delta.size(); ++i)
    if (!lin.delta[i].empty() && !(depth(camera_point(prob, state, i), prob.cam) > 0.0)) return true;
  return false;
}

// Solves (H + mu * diag(H)) x = -g. Returns false when the factorisation fails.
bool damped_solve(const Eigen::SparseMatrix<double>& jac, const Eigen::VectorXd& res, double mu, Eigen::VectorXd& x) {
  const Eigen::SparseMatrix<double> jt = jac.transpose();
  Eigen::SparseMatrix<double> h = jt * jac;
  const Eigen::VectorXd g = jt * res;
  for (Eigen::Index k = 0; k < h.rows(); ++k) h.coeffRef(k, k) += mu * h.coeff(k, k) + 1e-12;
  if (h.rows() <= 6) {
    const Eigen::MatrixXd hd(h);
    Eigen::LDLT<Eigen::MatrixXd> ldlt(hd);
    if (ldlt.info() != Eigen::Success) return false;
    x = ldlt.solve(-g);
  } else {
    Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> ldlt(h);
    if (ldlt.info() != Eigen::Success) return false;
    x = ldlt.solve(-g);
  }
  return x.allFinite();
}

}  // namespace

RegistrationState solve(const RegistrationProblem& prob, const SolverConfig& cfg, SolveTrace* trace) {
  prob.validate();
  if (cfg.anneal_every < 1 || cfg.max_outer_iters < 0 || cfg.k_corr < 1 || !(cfg.bandwidth_floor > 0.0))
    throw std::invalid_argument("invalid solver configuration");

  RegistrationState state = RegistrationState::initial(prob);
  const Projection proj = project_all(prob, state);
  const auto delta = nearest_2d(prob, proj, cfg.k_corr);
  double bandwidth = 0.0;
  for (std::size_t i = 0; i < delta.size(); ++i)
    for (int j : delta[i]) bandwidth = std::max(bandwidth, (proj.pixel[i] - prob.points2[j]).norm());
  bandwidth = std::max(bandwidth, cfg.bandwidth_floor);

  double mu = cfg.damping_init;
  bool rigid_settled = false;
  for (int it = 0; it < cfg.max_outer_iters; ++it) {
    if (it > 0 && it % cfg.anneal_every == 0 && bandwidth >= cfg.bandwidth_floor) bandwidth *= 0.5;
    const bool annealed = bandwidth < cfg.bandwidth_floor;
    const bool deform = cfg.deformation && annealed &&
                        (rigid_settled || it >= cfg.max_outer_iters - cfg.anneal_every);

    const Linearization lin = linearize(prob, state, bandwidth, cfg.k_corr, prob.init_pose, deform);
    Eigen::VectorXd res = surrogate_residuals(prob, lin, state);
    double loss = 0.5 * res.squaredNorm();
    bool small_step = false;
    int accepted = 0;
    while (accepted < cfg.inner_iters && !state.damping_exhausted) {
      const auto jac = surrogate_jacobian(prob, lin, state);
      Eigen::VectorXd step;
      bool ok = damped_solve(jac, res, mu, step);
      RegistrationState cand;
      double cand_loss = std::numeric_limits<double>::infinity();
      Eigen::VectorXd cand_res;
      if (ok) {
        cand = retract(state, step, deform);
        if (!any_behind(prob, lin, cand)) {
          cand_res = surrogate_residuals(prob, lin, cand);
          cand_loss = 0.5 * cand_res.squaredNorm();
        }
      }
      if (ok && cand_loss <= loss) {
        if (trace) trace->accepted.push_back({it, loss, cand_loss, bandwidth});
        state.pose = cand.pose;
        state.deformation = std::move(cand.deformation);
        res = std::move(cand_res);
        loss = cand_loss;
        mu = std::max(mu / cfg.damping_factor, 1e-12);
        ++accepted;
        if (step.norm() < cfg.tol) {
          small_step = true;
          break;
        }
      } else {
        if (trace) ++trace->rejected;
        mu *= cfg.damping_factor;
        if (mu > cfg.damping_cap) state.damping_exhausted = true;
      }
    }
    state.iteration = it + 1;
    if (state.damping_exhausted) break;
    if (small_step && annealed) {
      if (deform || !cfg.deformation) {
        state.converged = true;
        break;
      }
      rigid_settled = true;
    }
  }
  state.bandwidth = bandwidth;
  state.objective = eval_objective(prob, state, cfg.k_corr).composite(prob.weights);
  return state;
}

// ---------------------------------------------------------------------------
// Correspondences and diagnostics

Correspondences correspondences(const RegistrationProblem& prob, const RegistrationState& state) {
  const Projection proj = project_all(prob, state);
  const auto nn = nearest_2d(prob, proj, 1);
  Correspondences c;
  c.match.assign(nn.size(), -1);
  c.distance.assign(nn.size(), std::numeric_limits<double>::quiet_NaN());
  for (std::size_t i = 0; i < nn.size(); ++i) {
    if (!proj.valid[i]) {
      c.behind_camera.push_back(static_cast<int>(i));
      continue;
    }
    if (nn[i].empty()) continue;
    c.match[i] = nn[i][0];
    c.distance[i] = (proj.pixel[i] - prob.points2[nn[i][0]]).norm();
  }
  return c;
}

double reprojection_rmse(const RegistrationProblem& prob, const RegistrationState& state, const Pose& truth) {
  double sum = 0.0;
  std::size_t n = 0;
  for (std::size_t i = 0; i < prob.centered.size(); ++i) {
    const Vec3 est = camera_point(prob, state, i);
    const Vec3 ref = truth * prob.centered[i];
    if (!(depth(est, prob.cam) > 0.0) || !(depth(ref, prob.cam) > 0.0)) continue;
    sum += (project_camera(est, prob.cam) - project_camera(ref, prob.cam)).squaredNorm();
    ++n;
  }
  if (n == 0) return std::numeric_limits<double>::infinity();
  return std::sqrt(sum / static_cast<double>(n));
}

}  // namespace vp3d
