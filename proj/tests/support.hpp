#pragma once
// Shared fixtures: hand-built trees, random trees and small image helpers.

#include <algorithm>
#include <array>
#include <cstdint>
#include <cmath>
#include <map>
#include <optional>
#include <queue>
#include <random>
#include <vector>

#include "vp3d/image.hpp"
#include "vp3d/vessel_model.hpp"

namespace vp3d::testing {

inline Branch make_branch(BranchId id, std::optional<BranchId> parent, int attach, const std::vector<Vec3>& pts,
                          double radius = 2.0) {
  Branch b;
  b.id = id;
  b.parent = parent;
  b.attach_index = attach;
  for (std::size_t k = 0; k < pts.size(); ++k) b.points.push_back({pts[k], radius, static_cast<int>(k)});
  return b;
}

// Points from `from` in direction `dir` (unit), `n` steps of `spacing`.
inline std::vector<Vec3> straight(const Vec3& from, const Vec3& dir, int n, double spacing = 1.0) {
  std::vector<Vec3> pts;
  for (int k = 0; k <= n; ++k) pts.push_back(from + dir.normalized() * (spacing * k));
  return pts;
}

// Root 0 along +x for `trunk` mm, children 1 and 2 at its end, each `limb` mm
// long at +-45 degrees in the x-y plane.
inline VesselTree y_tree(int trunk = 20, int limb = 20, double radius = 2.0) {
  std::map<BranchId, Branch> br;
  br[0] = make_branch(0, std::nullopt, -1, straight(Vec3::Zero(), Vec3::UnitX(), trunk), radius);
  const Vec3 fork(trunk, 0, 0);
  br[1] = make_branch(1, 0, trunk, straight(fork, Vec3(1, 1, 0), limb), radius);
  br[2] = make_branch(2, 0, trunk, straight(fork, Vec3(1, -1, 0), limb), radius);
  br[0].children = {1, 2};
  return VesselTree(std::move(br), 0);
}

inline VesselTree straight_tree(int length_mm, double radius = 2.0) {
  std::map<BranchId, Branch> br;
  br[0] = make_branch(0, std::nullopt, -1, straight(Vec3::Zero(), Vec3::UnitX(), length_mm), radius);
  return VesselTree(std::move(br), 0);
}

// Random tree with arbitrary attach indices (several children may share one),
// irregular spacing and at most `max_points` centerline points.
inline VesselTree random_tree(std::mt19937_64& rng, int max_points = 1000) {
  std::uniform_int_distribution<int> n_branches(1, 40), n_pts(2, 30);
  std::uniform_real_distribution<double> u(-1.0, 1.0), gap(0.3, 1.7);
  std::map<BranchId, Branch> br;
  const int nb = n_branches(rng);
  int total = 0;
  for (int id = 0; id < nb; ++id) {
    int len = n_pts(rng);
    if (total + len - (id > 0) > max_points) break;
    Branch b;
    b.id = id;
    Vec3 p = Vec3::Zero();
    if (id > 0) {
      const BranchId parent = std::uniform_int_distribution<int>(0, id - 1)(rng);
      Branch& pb = br.at(parent);
      b.parent = parent;
      b.attach_index = std::uniform_int_distribution<int>(0, static_cast<int>(pb.points.size()) - 1)(rng);
      p = pb.points[b.attach_index].position;
      pb.children.push_back(id);
    }
    Vec3 dir(u(rng), u(rng), u(rng));
    if (dir.norm() < 1e-3) dir = Vec3::UnitX();
    dir.normalize();
    for (int k = 0; k < len; ++k) {
      b.points.push_back({p, 1.0 + 0.5 * (u(rng) + 1.0), k});
      dir = (dir + 0.3 * Vec3(u(rng), u(rng), u(rng))).normalized();
      p += dir * gap(rng);
    }
    total += len - (id > 0);
    br[id] = std::move(b);
  }
  return VesselTree(std::move(br), 0);
}

// Independent shortest path over the centerline graph. Nodes are (branch,
// index); a child's first point is joined to its parent's attach point by a
// zero-length identity, so the two are merged before the search.
inline double reference_dijkstra(const VesselTree& tree, Address s, Address t) {
  auto key = [&](Address a) {
    while (a.index == 0) {
      const Branch& b = tree.branch(a.branch);
      if (!b.parent) break;
      a = {*b.parent, b.attach_index};
    }
    return a;
  };
  std::map<Address, std::vector<Address>> adj;
  for (const auto& [id, b] : tree.branches())
    for (int k = 1; k < static_cast<int>(b.points.size()); ++k) {
      const Address u = key({id, k - 1}), v = key({id, k});
      adj[u].push_back(v);
      adj[v].push_back(u);
    }
  s = key(s);
  t = key(t);
  std::map<Address, double> dist{{s, 0.0}};
  using Item = std::pair<double, Address>;
  std::priority_queue<Item, std::vector<Item>, std::greater<>> pq;
  pq.push({0.0, s});
  while (!pq.empty()) {
    auto [d, a] = pq.top();
    pq.pop();
    if (d > dist[a]) continue;
    if (a == t) return d;
    for (const Address& b : adj[a]) {
      const double nd = d + (tree.position(a) - tree.position(b)).norm();
      auto it = dist.find(b);
      if (it == dist.end() || nd < it->second) {
        dist[b] = nd;
        pq.push({nd, b});
      }
    }
  }
  return -1.0;
}

// Number of 8-connected components of a 0/1 mask with at least `min_area` pixels.
inline int components(const GrayImage& m, int min_area = 1) {
  std::vector<int> label(m.pixels.size(), -1);
  int count = 0;
  for (int y = 0; y < m.height; ++y)
    for (int x = 0; x < m.width; ++x) {
      if (!m.at(x, y) || label[y * m.width + x] >= 0) continue;
      std::vector<std::pair<int, int>> stack{{x, y}};
      label[y * m.width + x] = 0;
      int area = 0;
      while (!stack.empty()) {
        auto [cx, cy] = stack.back();
        stack.pop_back();
        ++area;
        for (int dy = -1; dy <= 1; ++dy)
          for (int dx = -1; dx <= 1; ++dx) {
            const int nx = cx + dx, ny = cy + dy;
            if (!m.inside(nx, ny) || !m.at(nx, ny) || label[ny * m.width + nx] >= 0) continue;
            label[ny * m.width + nx] = 0;
            stack.push_back({nx, ny});
          }
      }
      if (area >= min_area) ++count;
    }
  return count;
}

// Exhaustive Otsu: between-class variance n0*n1*(mu0 - mu1)^2 / N^2 for every
// threshold, compared exactly as (s0*n1 - s1*n0)^2 / (n0*n1).
inline int brute_otsu(const GrayImage& img) {
  std::array<std::int64_t, 256> h{};
  for (auto v : img.pixels) ++h[v];
  int best = -1;
  __int128 best_num = 0, best_den = 1;
  for (int t = 0; t < 256; ++t) {
    std::int64_t n0 = 0, n1 = 0, s0 = 0, s1 = 0;
    for (int v = 0; v < 256; ++v) (v <= t ? n0 : n1) += h[v], (v <= t ? s0 : s1) += h[v] * v;
    if (n0 == 0 || n1 == 0) continue;
    const __int128 diff = static_cast<__int128>(s0) * n1 - static_cast<__int128>(s1) * n0;
    const __int128 num = diff * diff, den = static_cast<__int128>(n0) * n1;
    if (best < 0 || num * best_den > best_num * den) {
      best = t;
      best_num = num;
      best_den = den;
    }
  }
  return best;
}

// Exhaustive scan: pixels with exactly one 8-neighbour.
inline std::vector<Vec2> brute_endpoints(const GrayImage& m) {
  std::vector<Vec2> out;
  for (int y = 0; y < m.height; ++y)
    for (int x = 0; x < m.width; ++x) {
      if (!m.at(x, y)) continue;
      int n = 0;
      for (int dy = -1; dy <= 1; ++dy)
        for (int dx = -1; dx <= 1; ++dx)
          if ((dx || dy) && m.inside(x + dx, y + dy) && m.at(x + dx, y + dy)) ++n;
      if (n == 1) out.emplace_back(x, y);
    }
  return out;
}

// Random blob mask: union of random discs and strokes.
inline GrayImage random_mask(std::mt19937_64& rng, int w = 64, int h = 64) {
  GrayImage m(w, h, 0);
  std::uniform_real_distribution<double> ux(0, w), uy(0, h), ur(0.5, 4.0);
  const int shapes = std::uniform_int_distribution<int>(1, 8)(rng);
  for (int s = 0; s < shapes; ++s) {
    const double ax = ux(rng), ay = uy(rng), bx = ux(rng), by = uy(rng), r = ur(rng);
    const double dx = bx - ax, dy = by - ay, l2 = dx * dx + dy * dy;
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) {
        double t = l2 > 0 ? ((x - ax) * dx + (y - ay) * dy) / l2 : 0.0;
        t = std::clamp(t, 0.0, 1.0);
        const double ex = x - (ax + t * dx), ey = y - (ay + t * dy);
        if (ex * ex + ey * ey <= r * r) m.at(x, y) = 1;
      }
  }
  // Sprinkle isolated noise so single pixels and tiny specks are covered too.
  std::bernoulli_distribution speck(0.01);
  for (auto& p : m.pixels)
    if (speck(rng)) p = 1;
  return m;
}

}  // namespace vp3d::testing
