#include "vp3d/planning.hpp"

#include <algorithm>
#include <limits>
#include <map>
#include <queue>

#include "vp3d/errors.hpp"

namespace vp3d {

Address canonical(const VesselTree& tree, const Address& a) {
  if (!tree.contains(a)) throw AddressError("address " + to_string(a) + " is not in the tree");
  const Branch& b = tree.branch(a.branch);
  if (a.index == 0 && b.parent) return canonical(tree, {*b.parent, b.attach_index});
  return a;
}

double step_length(const VesselTree& tree, const Address& a, const Address& b) {
  return (tree.position(a) - tree.position(b)).norm();
}

namespace {

void push(RoutePath& path, const VesselTree& tree, const Address& a) {
  if (!path.addresses.empty()) {
    path.length += step_length(tree, path.addresses.back(), a);
  }
  path.addresses.push_back(a);
  path.cumulative.push_back(path.length);
}

// Walk along one branch from index `from` to `to`, excluding `from`.
void walk(RoutePath& path, const VesselTree& tree, BranchId b, int from, int to) {
  const int dir = to >= from ? 1 : -1;
  for (int k = from + dir; k != to + dir; k += dir) push(path, tree, canonical(tree, {b, k}));
}

}  // namespace

RoutePath plan(const VesselTree& tree, const Address& start_in, const Address& dest_in) {
  const Address start = canonical(tree, start_in);
  const Address dest = canonical(tree, dest_in);

  // Two walkers over parent links. up_chain: branches left by the start walker
  // (each with the index where it was left); down_chain likewise for dest.
  RoutePath path;
  BranchId a = start.branch, b = dest.branch;
  int da = tree.depth(a), db = tree.depth(b);
  std::vector<BranchId> up_chain, down_chain;
  while (da > db) {
    up_chain.push_back(a);
    a = *tree.branch(a).parent;
    --da;
    ++path.visited;
  }
  while (db > da) {
    down_chain.push_back(b);
    b = *tree.branch(b).parent;
    --db;
    ++path.visited;
  }
  while (a != b) {
    up_chain.push_back(a);
    down_chain.push_back(b);
    a = *tree.branch(a).parent;
    b = *tree.branch(b).parent;
    path.visited += 2;
  }
  const BranchId common = a;

  push(path, tree, start);
  int index = start.index;
  for (BranchId id : up_chain) {
    // At index 0 the walker already stands on the parent's attach point.
    if (index > 0) {
      walk(path, tree, id, index, 1);
      push(path, tree, canonical(tree, {*tree.branch(id).parent, tree.branch(id).attach_index}));
    }
    index = tree.branch(id).attach_index;
  }
  const int exit = down_chain.empty() ? dest.index : tree.branch(down_chain.back()).attach_index;
  walk(path, tree, common, index, exit);
  for (auto it = down_chain.rbegin(); it != down_chain.rend(); ++it) {
    const int last = std::next(it) == down_chain.rend() ? dest.index : tree.branch(*std::next(it)).attach_index;
    walk(path, tree, *it, 0, last);
  }
  return path;
}

namespace {

// Index of the path point the tip maps to, or -1.
int match_index(const RoutePath& path, const LiftedTip& tip, const VesselTree& tree, double slack) {
  if (path.addresses.empty()) return -1;
  const Address a = canonical(tree, tip.address);
  for (std::size_t k = 0; k < path.addresses.size(); ++k)
    if (path.addresses[k] == a) return static_cast<int>(k);
  if (slack < 0.0) slack = tree.point(a).radius;
  int best = -1;
  double best_d = std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < path.addresses.size(); ++k) {
    const double d = (tree.position(path.addresses[k]) - tip.position).norm();
    if (d < best_d) {
      best_d = d;
      best = static_cast<int>(k);
    }
  }
  return best_d <= slack ? best : -1;
}

}  // namespace

bool on_path(const RoutePath& path, const LiftedTip& tip, const VesselTree& tree, double slack) {
  return match_index(path, tip, tree, slack) >= 0;
}

double progress(const RoutePath& path, const LiftedTip& tip, const VesselTree& tree, double slack) {
  const int k = match_index(path, tip, tree, slack);
  if (k < 0) throw OffPathError("tip " + to_string(tip.address) + " is not on the path");
  return path.length - path.cumulative[k];
}

double dijkstra_length(const VesselTree& tree, const Address& start_in, const Address& dest_in) {
  const Address start = canonical(tree, start_in);
  const Address dest = canonical(tree, dest_in);
  std::map<Address, std::vector<Address>> adj;
  for (const auto& [id, br] : tree.branches()) {
    for (int k = 1; k < static_cast<int>(br.points.size()); ++k) {
      const Address u = canonical(tree, {id, k - 1});
      const Address v = canonical(tree, {id, k});
      adj[u].push_back(v);
      adj[v].push_back(u);
    }
  }
  std::map<Address, double> dist;
  using Item = std::pair<double, Address>;
  std::priority_queue<Item, std::vector<Item>, std::greater<>> pq;
  dist[start] = 0.0;
  pq.push({0.0, start});
  while (!pq.empty()) {
    const auto [d, u] = pq.top();
    pq.pop();
    if (d > dist[u]) continue;
    if (u == dest) return d;
    for (const Address& v : adj[u]) {
      const double nd = d + step_length(tree, u, v);
      auto it = dist.find(v);
      if (it == dist.end() || nd < it->second) {
        dist[v] = nd;
        pq.push({nd, v});
      }
    }
  }
  throw AddressError("destination " + to_string(dest) + " is unreachable");
}

}  // namespace vp3d
