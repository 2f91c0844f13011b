#include "vp3d/navigator.hpp"

#include <sstream>

#include "vp3d/errors.hpp"

namespace vp3d {

void NavigatorParams::validate(double max_step) const {
  std::ostringstream err;
  if (!(r_th >= 0.0)) err << "navigator.r_th must be >= 0; ";
  if (w_th < 0) err << "navigator.w_th must be >= 0; ";
  if (c_min <= 0 || c_max < c_min || c_max > max_step) err << "navigator c range must satisfy 0 < c_min <= c_max <= max_step; ";
  if (!(back_step > 0.0) || back_step > max_step) err << "navigator.back_step must be in (0, max_step]; ";
  if (!err.str().empty()) throw ConfigError(err.str());
}

NavigatorState NavigatorState::begin(const VesselTree& tree, const Address& start, const Address& dest,
                                     const NavigatorParams& params) {
  NavigatorState nav;
  nav.params = params;
  nav.dest = canonical(tree, dest);
  nav.dest_position = tree.position(nav.dest);
  nav.path = plan(tree, start, nav.dest);
  return nav;
}

Decision decide(NavigatorState& nav, const LiftedTip& tip, const VesselTree& tree, std::mt19937_64& rng) {
  Decision d;
  d.distance = (tip.position - nav.dest_position).norm();
  if (d.distance <= nav.params.r_th) {
    d.done = true;
    return d;
  }
  auto draw_c = [&] {
    return static_cast<double>(std::uniform_int_distribution<int>(nav.params.c_min, nav.params.c_max)(rng));
  };
  auto replan = [&] {
    nav.path = plan(tree, tip.address, nav.dest);
    d.replanned = true;
  };

  if (nav.flag_back) {
    d.on_path = on_path(nav.path, tip, tree, nav.params.slack);
    if (d.on_path) {
      d.command = ControlCommand{-nav.params.back_step, 0};
    } else {
      d.command = ControlCommand{nav.params.back_step, 0};
      nav.flag_back = false;
      replan();
    }
  } else {
    if (nav.w > nav.params.w_th) {
      replan();
      nav.w = 0;
      d.w_reset = true;
      nav.flag_back = true;
    }
    d.on_path = on_path(nav.path, tip, tree, nav.params.slack);
    if (d.on_path) {
      nav.w = 0;
      d.w_reset = true;
      d.command = ControlCommand{draw_c(), nav.flag_on_path_last ? 0 : 1};
    } else {
      d.command = ControlCommand{-draw_c(), 1};
      ++nav.w;
    }
  }
  nav.flag_on_path_last = d.on_path;
  return d;
}

}  // namespace vp3d
