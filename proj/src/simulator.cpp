#include "vp3d/simulator.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <stdexcept>

namespace vp3d {
namespace {

constexpr int kStay = -1;  // junction option: remain on the current branch

Vec3 point_at_arc(const VesselTree& tree, BranchId id, double s) {
  const auto& arcs = tree.arc_lengths(id);
  const auto& pts = tree.branch(id).points;
  if (s <= 0.0) return pts.front().position;
  if (s >= arcs.back()) return pts.back().position;
  const auto it = std::upper_bound(arcs.begin(), arcs.end(), s);
  const std::size_t k = static_cast<std::size_t>(it - arcs.begin()) - 1;
  const double span = arcs[k + 1] - arcs[k];
  if (span <= 0.0 || s == arcs[k]) return pts[k].position;
  const double f = (s - arcs[k]) / span;
  return pts[k].position + f * (pts[k + 1].position - pts[k].position);
}

int nearest_index(const VesselTree& tree, BranchId id, double s) {
  const auto& arcs = tree.arc_lengths(id);
  const auto it = std::lower_bound(arcs.begin(), arcs.end(), s);
  if (it == arcs.end()) return static_cast<int>(arcs.size()) - 1;
  const int k = static_cast<int>(it - arcs.begin());
  if (k > 0 && s - arcs[k - 1] <= arcs[k] - s) return k - 1;
  return k;
}

// Rebuilds body, tip_address and inserted_length from route and tip_arc.
void refresh(GuidewireState& st, const VesselTree& tree) {
  st.body.clear();
  st.inserted_length = 0.0;
  for (std::size_t r = 0; r < st.route.size(); ++r) {
    const BranchId id = st.route[r];
    const auto& pts = tree.branch(id).points;
    const auto& arcs = tree.arc_lengths(id);
    const std::size_t first = st.body.empty() ? 0 : 1;  // child's first point is the parent's attach point
    if (r + 1 < st.route.size()) {
      const int exit = tree.branch(st.route[r + 1]).attach_index;
      for (int k = static_cast<int>(first); k <= exit; ++k) st.body.push_back(pts[k].position);
      st.inserted_length += arcs[exit];
    } else {
      for (std::size_t k = first; k < pts.size() && arcs[k] <= st.tip_arc; ++k) st.body.push_back(pts[k].position);
      const Vec3 tip = point_at_arc(tree, id, st.tip_arc);
      if (st.body.empty() || st.body.back() != tip) st.body.push_back(tip);
      st.inserted_length += st.tip_arc;
      st.tip_address = {id, nearest_index(tree, id, st.tip_arc)};
    }
  }
}

// First junction at or after arc position `s` (strictly after unless
// `inclusive`). A junction is a child attach index or the branch's last index.
int next_junction(const VesselTree& tree, BranchId id, double s, bool inclusive) {
  const auto& arcs = tree.arc_lengths(id);
  int best = tree.last_index(id);
  for (BranchId c : tree.branch(id).children) {
    const int a = tree.branch(c).attach_index;
    const bool ahead = inclusive ? arcs[a] >= s : arcs[a] > s;
    if (ahead && a < best) best = a;
  }
  return best;
}

}  // namespace

GuidewireState insert_wire(const VesselTree& tree, const Address& tip) {
  const Address a = tree.resolve(tip);
  GuidewireState st;
  for (std::optional<BranchId> b = a.branch; b; b = tree.branch(*b).parent) st.route.push_back(*b);
  std::reverse(st.route.begin(), st.route.end());
  st.tip_arc = tree.arc_lengths(a.branch)[a.index];
  refresh(st, tree);
  st.tip_address = a;
  return st;
}

GuidewireState step(const GuidewireState& state, const ControlCommand& cmd, const VesselTree& tree,
                    const ActuationNoise& noise, std::uint64_t seed, const SimulatorParams& params,
                    StepDiagnostics* diagnostics) {
  if (std::abs(cmd.translation) > params.max_step)
    throw std::invalid_argument("translation exceeds max_step");
  if (cmd.rotation != 0 && cmd.rotation != 1) throw std::invalid_argument("rotation must be 0 or 1");

  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  double distance = cmd.translation * params.unit_scale;
  if (noise.translation_frac > 0.0) distance *= 1.0 + noise.translation_frac * (2.0 * unit(rng) - 1.0);
  const bool rotation_fails = noise.rotation_fail_prob > 0.0 && unit(rng) < noise.rotation_fail_prob;

  GuidewireState st = state;
  StepDiagnostics diag;
  const double before = st.inserted_length;

  if (distance > 0.0) {
    double remaining = distance;
    bool skip_current = false;  // junction at the current position already resolved as "stay"
    while (remaining > 0.0) {
      const BranchId id = st.route.back();
      const auto& arcs = tree.arc_lengths(id);
      const int j = next_junction(tree, id, st.tip_arc, !skip_current);
      const double gap = arcs[j] - st.tip_arc;
      if (remaining < gap) {
        st.tip_arc += remaining;
        break;
      }
      st.tip_arc = arcs[j];
      remaining -= gap;
      skip_current = false;
      if (remaining <= 0.0) break;

      std::vector<BranchId> options;
      if (j != tree.last_index(id)) options.push_back(kStay);
      for (BranchId c : tree.children_at(id, j)) options.push_back(c);
      if (options.empty()) {
        diag.clamped = true;
        break;
      }
      ++diag.junctions_passed;
      const int n = static_cast<int>(options.size());
      const BranchId choice = options[((st.rotation_phase % n) + n) % n];
      if (choice == kStay) {
        skip_current = true;
        continue;
      }
      st.route.push_back(choice);
      st.tip_arc = 0.0;
    }
  } else if (distance < 0.0) {
    double remaining = -distance;
    while (remaining > 0.0) {
      if (remaining <= st.tip_arc) {
        st.tip_arc -= remaining;
        break;
      }
      remaining -= st.tip_arc;
      st.tip_arc = 0.0;
      if (st.route.size() == 1) {
        diag.clamped = true;
        break;
      }
      const BranchId child = st.route.back();
      st.route.pop_back();
      st.tip_arc = tree.arc_lengths(st.route.back())[tree.branch(child).attach_index];
    }
  }

  if (cmd.rotation == 1 && !rotation_fails) {
    ++st.rotation_phase;
    diag.rotated = true;
  }
  refresh(st, tree);
  diag.executed = st.inserted_length - before;
  if (diagnostics) *diagnostics = diag;
  return st;
}

Vec3 true_tip(const GuidewireState& state) { return state.body.back(); }

double body_length(const GuidewireState& state) {
  double len = 0.0;
  for (std::size_t k = 1; k < state.body.size(); ++k) len += (state.body[k] - state.body[k - 1]).norm();
  return len;
}

}  // namespace vp3d
