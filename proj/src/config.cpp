#include "vp3d/config.hpp"

#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "json.hpp"

#include "vp3d/errors.hpp"

namespace vp3d {
namespace {

using nlohmann::json;

// Reads the members of one JSON object, remembering which keys were used so
// leftovers can be reported as unknown.
class Section {
 public:
  Section(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) fail("expected an object");
  }

  [[noreturn]] void fail(const std::string& what) const { throw ConfigError(path_ + ": " + what); }

  bool has(const std::string& key) {
    used_.insert(key);
    return j_.contains(key);
  }

  Section child(const std::string& key) {
    used_.insert(key);
    return Section(j_.at(key), path_ + "." + key);
  }

  template <class T>
  void read(const std::string& key, T& out) {
    if (!has(key)) return;
    out = get<T>(j_.at(key), key);
  }

  template <class T>
  T get(const json& v, const std::string& key) const {
    try {
      if constexpr (std::is_same_v<T, bool>) {
        if (!v.is_boolean()) fail(key + ": expected a boolean");
      } else if constexpr (std::is_integral_v<T>) {
        if (!v.is_number_integer()) fail(key + ": expected an integer");
        if (std::is_unsigned_v<T> && v.is_number_integer() && !v.is_number_unsigned() && v.get<long long>() < 0)
          fail(key + ": expected a non-negative integer");
      } else if constexpr (std::is_floating_point_v<T>) {
        if (!v.is_number()) fail(key + ": expected a number");
      } else if constexpr (std::is_same_v<T, std::string>) {
        if (!v.is_string()) fail(key + ": expected a string");
      }
      return v.get<T>();
    } catch (const json::exception& e) {
      fail(key + ": " + e.what());
    }
  }

  Vec3 vec3(const std::string& key, const Vec3& fallback) {
    if (!has(key)) return fallback;
    const json& v = j_.at(key);
    if (!v.is_array() || v.size() != 3) fail(key + ": expected an array of 3 numbers");
    return {get<double>(v[0], key), get<double>(v[1], key), get<double>(v[2], key)};
  }

  Address address(const std::string& key) {
    if (!has(key)) fail("missing '" + key + "'");
    try {
      return parse_address(get<std::string>(j_.at(key), key));
    } catch (const std::invalid_argument& e) {
      fail(key + ": " + e.what());
    }
  }

  const json& raw(const std::string& key) {
    used_.insert(key);
    return j_.at(key);
  }

  void finish() const {
    for (const auto& [key, value] : j_.items())
      if (!used_.count(key)) fail("unknown key '" + key + "'");
  }

  const std::string& path() const { return path_; }

 private:
  const json& j_;
  std::string path_;
  std::set<std::string> used_;
};

void read_solver(Section s, SolverConfig& c) {
  s.read("max_outer_iters", c.max_outer_iters);
  s.read("anneal_every", c.anneal_every);
  s.read("inner_iters", c.inner_iters);
  s.read("tol", c.tol);
  s.read("k_corr", c.k_corr);
  s.read("bandwidth_floor", c.bandwidth_floor);
  s.read("damping_init", c.damping_init);
  s.read("damping_factor", c.damping_factor);
  s.read("damping_cap", c.damping_cap);
  s.read("deformation", c.deformation);
  s.finish();
  if (c.max_outer_iters < 1 || c.anneal_every < 1 || c.inner_iters < 1 || c.k_corr < 1)
    s.fail("iteration counts and k_corr must be >= 1");
  if (!(c.bandwidth_floor > 0.0) || !(c.damping_init > 0.0) || !(c.damping_factor > 1.0) ||
      !(c.damping_cap > c.damping_init) || c.tol < 0.0)
    s.fail("bandwidth_floor, damping and tol out of range");
}

void read_camera(Section s, EpisodeConfig& e) {
  int width = e.cam.width, height = e.cam.height;
  double pixel_size = e.cam.pixel_size;
  s.read("width", width);
  s.read("height", height);
  s.read("pixel_size", pixel_size);
  s.read("source_distance", e.source_distance);
  e.view_euler_deg = s.vec3("view_euler_deg", e.view_euler_deg);
  s.finish();
  if (width <= 0 || height <= 0 || !(pixel_size > 0.0) || !(e.source_distance > 0.0))
    s.fail("width, height, pixel_size and source_distance must be positive");
  e.cam = CameraModel::pinhole(e.source_distance / pixel_size, 0.5 * width, 0.5 * height, width, height, pixel_size);
}

void read_render(Section s, RenderStyle& r) {
  int background = r.background, vessel = r.vessel, wire = r.wire;
  s.read("background", background);
  s.read("vessel", vessel);
  s.read("wire", wire);
  s.read("wire_radius", r.wire_radius);
  s.read("sheath_length", r.sheath_length);
  s.finish();
  for (int v : {background, vessel, wire})
    if (v < 0 || v > 255) s.fail("gray levels must be in 0..255");
  if (!(wire < vessel && vessel < background)) s.fail("gray levels must satisfy wire < vessel < background");
  if (!(r.wire_radius > 0.0) || r.sheath_length < 0.0) s.fail("wire_radius must be > 0 and sheath_length >= 0");
  r.background = static_cast<std::uint8_t>(background);
  r.vessel = static_cast<std::uint8_t>(vessel);
  r.wire = static_cast<std::uint8_t>(wire);
}

void read_phantom(Section s, SuiteConfig& c) {
  PhantomSpec& p = c.phantom;
  s.read("seed", c.phantom_seed);
  s.read("depth", p.depth);
  s.read("branching", p.branching);
  s.read("length_min", p.length_min);
  s.read("length_max", p.length_max);
  s.read("root_length", p.root_length);
  s.read("radius_root", p.radius_root);
  s.read("radius_decay", p.radius_decay);
  s.read("radius_min", p.radius_min);
  s.read("spread_min_deg", p.spread_min_deg);
  s.read("spread_max_deg", p.spread_max_deg);
  s.read("max_curvature", p.max_curvature);
  s.read("max_elevation_deg", p.max_elevation_deg);
  s.read("spacing", p.spacing);
  s.finish();
  try {
    p.validate();
  } catch (const std::invalid_argument& e) {
    s.fail(e.what());
  }
}

TaskSpec read_task(Section s) {
  TaskSpec t;
  s.read("name", t.name);
  t.start = s.address("start");
  t.dest = s.address("dest");
  if (!s.has("seeds")) s.fail("missing 'seeds'");
  const json& seeds = s.raw("seeds");
  if (!seeds.is_array()) s.fail("seeds: expected an array");
  for (const auto& v : seeds) t.seeds.push_back(s.get<std::uint64_t>(v, "seeds"));
  s.finish();
  return t;
}

}  // namespace

SuiteConfig parse_suite_config(std::string_view text, const std::string& base_dir) {
  json doc;
  try {
    doc = json::parse(text.begin(), text.end());
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  SuiteConfig c;
  EpisodeConfig& e = c.episode;
  Section root(doc, "config");

  if (root.has("map")) {
    std::string file = root.get<std::string>(root.raw("map"), "map");
    c.map_file = (std::filesystem::path(base_dir) / file).lexically_normal().string();
    if (root.has("phantom")) root.fail("give either 'map' or 'phantom', not both");
  } else if (root.has("phantom")) {
    read_phantom(root.child("phantom"), c);
  }
  if (root.has("camera")) read_camera(root.child("camera"), e);
  if (root.has("render")) read_render(root.child("render"), e.style);

  if (root.has("noise")) {
    Section s = root.child("noise");
    s.read("image_sigma", e.image_noise.sigma);
    s.read("translation_frac", e.actuation.translation_frac);
    s.read("rotation_fail_prob", e.actuation.rotation_fail_prob);
    s.finish();
  }
  if (root.has("perception")) {
    Section s = root.child("perception");
    s.read("min_wire_contrast", e.perception.min_wire_contrast);
    s.read("spur_length", e.perception.spur_length);
    s.read("refine_tips", e.perception.refine_tips);
    s.read("track_gate", e.tracker.gate);
    s.read("track_tau", e.tracker.tau);
    s.read("lift_gate", e.lift.gate);
    s.read("lift_tie_tolerance", e.lift.tie_tolerance);
    s.read("lift_cluster_radius", e.lift.cluster_radius);
    s.finish();
    if (!(e.tracker.gate > 0.0) || !(e.tracker.tau > 0.0) || !(e.lift.gate > 0.0) || e.lift.tie_tolerance < 0.0 ||
        e.lift.cluster_radius < 0.0 || e.perception.spur_length < 0)
      s.fail("gates and tau must be > 0, tolerances and spur_length >= 0");
  }
  if (root.has("registration")) {
    Section s = root.child("registration");
    if (s.has("weights")) {
      Section w = s.child("weights");
      w.read("lambda1", e.weights.lambda1);
      w.read("lambda2", e.weights.lambda2);
      w.read("w1", e.weights.w1);
      w.read("w2", e.weights.w2);
      w.read("w3", e.weights.w3);
      w.finish();
      for (double v : {e.weights.lambda1, e.weights.lambda2, e.weights.w1, e.weights.w2, e.weights.w3})
        if (v < 0.0) w.fail("weights must be >= 0");
    }
    s.read("k_omega", e.k_omega);
    if (e.k_omega < 0) s.fail("k_omega must be >= 0");
    if (s.has("first_frame")) read_solver(s.child("first_frame"), e.solver);
    if (s.has("tracking")) read_solver(s.child("tracking"), e.tracking_solver);
    s.read("init_rotation_deg", e.init_rotation_deg);
    s.read("init_translation_mm", e.init_translation_mm);
    s.read("exact", e.exact_registration);
    s.finish();
  }
  if (root.has("simulator")) {
    Section s = root.child("simulator");
    s.read("max_step", e.simulator.max_step);
    s.read("unit_scale", e.simulator.unit_scale);
    s.finish();
  }
  if (root.has("navigator")) {
    Section s = root.child("navigator");
    s.read("r_th", e.navigator.r_th);
    s.read("w_th", e.navigator.w_th);
    s.read("c_min", e.navigator.c_min);
    s.read("c_max", e.navigator.c_max);
    s.read("back_step", e.navigator.back_step);
    s.read("slack", e.navigator.slack);
    s.finish();
  }
  root.read("loop_cap", e.loop_cap);
  root.read("output_dir", c.output_dir);

  if (!root.has("tasks")) root.fail("missing 'tasks'");
  const json& tasks = root.raw("tasks");
  if (!tasks.is_array() || tasks.empty()) root.fail("tasks: expected a non-empty array");
  for (std::size_t i = 0; i < tasks.size(); ++i) {
    TaskSpec t = read_task(Section(tasks[i], "config.tasks[" + std::to_string(i) + "]"));
    if (t.name.empty()) t.name = "task" + std::to_string(i + 1);
    c.tasks.push_back(std::move(t));
  }
  root.finish();
  e.validate();
  return c;
}

SuiteConfig load_suite_config(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open config file " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  try {
    return parse_suite_config(buf.str(), std::filesystem::path(path).parent_path().string());
  } catch (const ConfigError& e) {
    throw ConfigError(path + ": " + e.what());
  }
}

VesselTree load_map(const SuiteConfig& cfg) {
  if (!cfg.map_file) return generate_phantom(cfg.phantom, cfg.phantom_seed);
  std::ifstream in(*cfg.map_file, std::ios::binary);
  if (!in) throw ConfigError("cannot open map file " + *cfg.map_file);
  std::ostringstream buf;
  buf << in.rdbuf();
  try {
    return deserialize(buf.str());
  } catch (const std::exception& e) {
    throw ConfigError(*cfg.map_file + ": " + e.what());
  }
}

void validate_tasks(const SuiteConfig& cfg, const VesselTree& tree) {
  std::set<std::string> names;
  for (const auto& t : cfg.tasks) {
    const std::string where = "task '" + t.name + "': ";
    if (t.name.find_first_of("/\\ \t\n") != std::string::npos || t.name == "." || t.name == "..")
      throw ConfigError(where + "name must be usable as a file name");
    if (!names.insert(t.name).second) throw ConfigError(where + "duplicate task name");
    if (t.seeds.empty()) throw ConfigError(where + "no seeds");
    for (const Address& a : {t.start, t.dest}) {
      bool ok = false;
      try {
        ok = tree.contains(tree.resolve(a));
      } catch (const AddressError&) {
      }
      if (!ok) throw ConfigError(where + "address " + to_string(a) + " is not on the map");
    }
  }
}

}  // namespace vp3d
