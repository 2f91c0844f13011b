#include "vp3d/lifting.hpp"

#include <cmath>
#include <limits>
#include <sstream>
#include <stdexcept>

#include "vp3d/errors.hpp"
#include "vp3d/simd/kernels.hpp"

namespace vp3d {

LiftedTip lift(const TrackedEndpoint& tip, const RegistrationProblem& problem, const Correspondences& corr,
               const VesselTree& tree, const std::optional<Vec3>& previous, double pixel_size,
               const LiftParams& params) {
  const auto& q = problem.points2;
  if (q.empty()) throw std::invalid_argument("lift: no 2D centerline points");
  if (corr.match.size() != problem.points3.size()) throw std::invalid_argument("lift: correspondences do not match the problem");

  std::vector<double> xs(q.size()), ys(q.size()), d2(q.size());
  for (std::size_t j = 0; j < q.size(); ++j) {
    xs[j] = q[j].x();
    ys[j] = q[j].y();
  }
  simd::squared_distances(xs, ys, tip.position.x(), tip.position.y(), d2);
  std::size_t best_q = 0;
  for (std::size_t j = 1; j < d2.size(); ++j)
    if (d2[j] < d2[best_q]) best_q = j;
  const double gap = std::sqrt(d2[best_q]);
  if (gap > params.gate) {
    std::ostringstream os;
    os << "tip is " << gap << " px from the nearest vessel point (gate " << params.gate << " px)";
    throw OffVesselError(os.str());
  }

  // Distance of each 3D point's matched 2D point to q*.
  const Vec2 qstar = q[best_q];
  std::vector<double> via(corr.match.size(), std::numeric_limits<double>::infinity());
  double best = std::numeric_limits<double>::infinity();
  double mean_corr = 0.0;
  std::size_t n_corr = 0;
  for (std::size_t i = 0; i < corr.match.size(); ++i) {
    if (corr.match[i] < 0) continue;
    via[i] = (q[corr.match[i]] - qstar).norm();
    best = std::min(best, via[i]);
    mean_corr += corr.distance[i];
    ++n_corr;
  }
  if (n_corr == 0) throw std::invalid_argument("lift: correspondence map is empty");
  mean_corr /= static_cast<double>(n_corr);

  std::vector<int> ties;
  for (std::size_t i = 0; i < via.size(); ++i)
    if (via[i] <= best + params.tie_tolerance) ties.push_back(static_cast<int>(i));

  // Greedy single-link clustering in 3D; ties are few, so quadratic is fine.
  std::vector<int> cluster(ties.size(), -1);
  int n_clusters = 0;
  for (std::size_t s = 0; s < ties.size(); ++s) {
    if (cluster[s] >= 0) continue;
    cluster[s] = n_clusters;
    std::vector<std::size_t> stack{s};
    while (!stack.empty()) {
      const std::size_t a = stack.back();
      stack.pop_back();
      for (std::size_t b = 0; b < ties.size(); ++b) {
        if (cluster[b] >= 0) continue;
        if ((problem.points3[ties[a]] - problem.points3[ties[b]]).norm() <= params.cluster_radius) {
          cluster[b] = n_clusters;
          stack.push_back(b);
        }
      }
    }
    ++n_clusters;
  }

  // Best candidate of each cluster: smallest 2D detour, then lowest index.
  std::vector<int> rep(n_clusters, -1);
  for (std::size_t s = 0; s < ties.size(); ++s) {
    int& r = rep[cluster[s]];
    if (r < 0 || via[ties[s]] < via[ties[r]]) r = static_cast<int>(s);
  }
  int chosen = rep[0];
  if (previous && n_clusters > 1) {
    double nearest = std::numeric_limits<double>::infinity();
    for (int c = 0; c < n_clusters; ++c) {
      double d = std::numeric_limits<double>::infinity();
      for (std::size_t s = 0; s < ties.size(); ++s)
        if (cluster[s] == c) d = std::min(d, (problem.points3[ties[s]] - *previous).norm());
      if (d < nearest) {
        nearest = d;
        chosen = rep[c];
      }
    }
  }

  const int i = ties[chosen];
  LiftedTip out;
  out.address = problem.addresses[i];
  out.position = tree.position(out.address);
  out.lateral_error_bound = tree.point(out.address).radius + mean_corr * pixel_size;
  return out;
}

}  // namespace vp3d
