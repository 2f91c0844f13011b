#include "vp3d/suite.hpp"

#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <stdexcept>

#include "json.hpp"

#include "vp3d/errors.hpp"

namespace vp3d {
namespace {

using nlohmann::json;
namespace fs = std::filesystem;

json vec_json(const Vec2& v) { return json::array({v.x(), v.y()}); }
json vec_json(const Vec3& v) { return json::array({v.x(), v.y(), v.z()}); }

std::string shortest(double v) {
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, end);
}

std::string address_text(const Address& a) { return a.index < 0 ? std::to_string(a.branch) + ":last" : to_string(a); }

void write_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open " + path + " for writing");
  out << content;
  if (!out) throw std::runtime_error("write failed: " + path);
}

void make_dirs(const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw std::runtime_error("cannot create directory " + dir + ": " + ec.message());
}

json loop_json(const LoopRecord& r) {
  json j;
  j["loop"] = r.loop;
  j["status"] = r.status;
  j["command"] = r.command ? json{{"translation", r.command->translation}, {"rotation", r.command->rotation}} : json();
  j["tracked"] = vec_json(r.tracked);
  j["confidence"] = r.confidence;
  j["lifted"] = r.lifted ? json{{"address", to_string(r.lifted->address)},
                               {"position", vec_json(r.lifted->position)},
                               {"bound", r.lifted->lateral_error_bound}}
                         : json();
  j["on_path"] = r.on_path;
  j["distance"] = r.distance;
  j["w"] = r.w;
  j["flag_back"] = r.flag_back;
  j["replanned"] = r.replanned;
  j["w_reset"] = r.w_reset;
  if (!r.coast_reason.empty()) j["coast_reason"] = r.coast_reason;
  j["true_tip"] = vec_json(r.true_tip);
  j["lift_error"] = r.lift_error;
  j["local_radius"] = r.local_radius;
  j["registration_rmse"] = r.registration_rmse;
  return j;
}

// Bresenham segment, clipped per pixel.
void draw_line(RgbImage& img, Vec2 a, Vec2 b, std::uint8_t r, std::uint8_t g, std::uint8_t bl) {
  int x0 = static_cast<int>(std::lround(a.x())), y0 = static_cast<int>(std::lround(a.y()));
  const int x1 = static_cast<int>(std::lround(b.x())), y1 = static_cast<int>(std::lround(b.y()));
  const int dx = std::abs(x1 - x0), dy = -std::abs(y1 - y0);
  const int sx = x0 < x1 ? 1 : -1, sy = y0 < y1 ? 1 : -1;
  if (dx > 4 * img.width || -dy > 4 * img.height) return;
  int err = dx + dy;
  while (true) {
    if (x0 >= 0 && y0 >= 0 && x0 < img.width && y0 < img.height) img.set(x0, y0, r, g, bl);
    if (x0 == x1 && y0 == y1) break;
    const int e2 = 2 * err;
    if (e2 >= dy) {
      err += dy;
      x0 += sx;
    }
    if (e2 <= dx) {
      err += dx;
      y0 += sy;
    }
  }
}

void draw_cross(RgbImage& img, const Vec2& p, int half, std::uint8_t r, std::uint8_t g, std::uint8_t b) {
  draw_line(img, p - Vec2(half, 0), p + Vec2(half, 0), r, g, b);
  draw_line(img, p - Vec2(0, half), p + Vec2(0, half), r, g, b);
}

}  // namespace

void summarize(TaskSummary& t) {
  t.successes = 0;
  double sum = 0.0;
  for (std::size_t i = 0; i < t.success.size(); ++i)
    if (t.success[i]) {
      ++t.successes;
      sum += t.control_loops[i];
    }
  t.mean.reset();
  t.stddev.reset();
  if (t.successes == 0) return;
  const double mean = sum / t.successes;
  double ss = 0.0;
  for (std::size_t i = 0; i < t.success.size(); ++i)
    if (t.success[i]) ss += (t.control_loops[i] - mean) * (t.control_loops[i] - mean);
  t.mean = mean;
  t.stddev = t.successes > 1 ? std::sqrt(ss / (t.successes - 1)) : 0.0;
}

std::string episode_log(const EpisodeReport& report, const std::string& task, std::uint64_t seed) {
  std::string out;
  for (const auto& r : report.trace) out += loop_json(r).dump() + "\n";
  json e;
  e["task"] = task;
  e["seed"] = seed;
  e["success"] = report.success;
  e["control_loops"] = report.control_loops;
  e["loops"] = report.loops;
  e["coasts"] = report.coasts;
  e["final_distance"] = report.final_distance;
  e["final_true_distance"] = report.final_true_distance;
  out += json{{"episode", e}}.dump() + "\n";
  return out;
}

std::string summary_json(const SuiteSummary& s) {
  json tasks = json::array();
  for (const auto& t : s.tasks) {
    json trials = json::array();
    for (std::size_t i = 0; i < t.seeds.size(); ++i)
      trials.push_back({{"seed", t.seeds[i]}, {"success", static_cast<bool>(t.success[i])},
                        {"control_loops", t.control_loops[i]}});
    tasks.push_back({{"name", t.name},
                     {"start", address_text(t.start)},
                     {"dest", address_text(t.dest)},
                     {"trials", trials},
                     {"successes", t.successes},
                     {"mean", t.mean ? json(*t.mean) : json()},
                     {"std", t.stddev ? json(*t.stddev) : json()}});
  }
  return json{{"tasks", tasks}, {"successes", s.successes}, {"trials", s.trials}}.dump(2) + "\n";
}

std::string summary_text(const SuiteSummary& s) {
  std::ostringstream o;
  auto row = [&](const std::string& a, const std::string& b, const std::string& c, const std::string& d,
                 const std::string& e, const std::string& f) {
    o << std::left << std::setw(12) << a << std::setw(10) << b << std::setw(10) << c << std::right << std::setw(9)
      << d << std::setw(10) << e << std::setw(10) << f << "\n";
  };
  auto fixed2 = [](const std::optional<double>& v) {
    if (!v) return std::string("-");
    std::ostringstream t;
    t << std::fixed << std::setprecision(2) << *v;
    return t.str();
  };
  row("task", "start", "dest", "success", "mean", "std");
  for (const auto& t : s.tasks)
    row(t.name, address_text(t.start), address_text(t.dest),
        std::to_string(t.successes) + "/" + std::to_string(t.seeds.size()), fixed2(t.mean), fixed2(t.stddev));
  row("all", "", "", std::to_string(s.successes) + "/" + std::to_string(s.trials), "", "");
  return o.str();
}

FrameSink frame_dumper(const VesselTree& tree, const EpisodeConfig& cfg, const std::string& dir, int first, int last,
                       int* written) {
  return [&tree, cam = cfg.cam, dir, first, last, written](const FrameCapture& c) {
    const int k = c.record.loop;
    if (k < first || k > last) return;
    make_dirs(dir);
    char stem[32];
    std::snprintf(stem, sizeof stem, "frame_%04d", k);
    const std::string base = (fs::path(dir) / stem).string();
    write_pgm(c.frame.pixels, base + ".pgm");

    RgbImage overlay(c.frame.pixels);
    const Pose& t2c = c.estimated_tree_to_camera;
    for (std::size_t i = 1; i < c.path.addresses.size(); ++i) {
      const Vec3 a = t2c * tree.position(c.path.addresses[i - 1]);
      const Vec3 b = t2c * tree.position(c.path.addresses[i]);
      if (depth(a, cam) > 0.0 && depth(b, cam) > 0.0)
        draw_line(overlay, project_camera(a, cam), project_camera(b, cam), 0, 200, 0);
    }
    for (const Vec2& p : c.perception.candidates) draw_cross(overlay, p, 2, 0, 128, 255);
    draw_cross(overlay, c.record.tracked, 5, 255, 0, 0);
    std::optional<Vec2> lifted_px;
    if (c.record.lifted) {
      const Vec3 p = t2c * c.record.lifted->position;
      if (depth(p, cam) > 0.0) {
        lifted_px = project_camera(p, cam);
        draw_cross(overlay, *lifted_px, 4, 255, 220, 0);
      }
    }
    write_ppm(overlay, base + "_overlay.ppm");

    std::ostringstream side;
    side << "loop: " << k << "\n";
    side << "status: " << c.record.status << "\n";
    side << "tracked_px: " << shortest(c.record.tracked.x()) << " " << shortest(c.record.tracked.y()) << "\n";
    side << "confidence: " << shortest(c.record.confidence) << "\n";
    if (c.record.lifted) {
      const Vec3& p = c.record.lifted->position;
      side << "lifted_address: " << to_string(c.record.lifted->address) << "\n";
      side << "lifted_mm: " << shortest(p.x()) << " " << shortest(p.y()) << " " << shortest(p.z()) << "\n";
      if (lifted_px) side << "lifted_px: " << shortest(lifted_px->x()) << " " << shortest(lifted_px->y()) << "\n";
    }
    if (c.record.command)
      side << "command: " << shortest(c.record.command->translation) << " " << c.record.command->rotation << "\n";
    side << "on_path: " << (c.record.on_path ? 1 : 0) << "\n";
    side << "distance_mm: " << shortest(c.record.distance) << "\n";
    side << "path_points: " << c.path.addresses.size() << "\n";
    write_file(base + ".txt", side.str());
    if (written) ++*written;
  };
}

int dump_scene(const VesselTree& tree, const TaskSpec& task, std::uint64_t seed, const EpisodeConfig& cfg, int first,
               int last, const std::string& dir) {
  if (first < 0 || last < first)
    throw std::out_of_range("frame range " + std::to_string(first) + ".." + std::to_string(last) + " is empty");
  int written = 0;
  const EpisodeReport report = run_episode(tree, task.start, task.dest, cfg, seed, frame_dumper(tree, cfg, dir, first, last, &written));
  if (first >= report.loops)
    throw std::out_of_range("frame range starts at " + std::to_string(first) + " but the episode has " +
                            std::to_string(report.loops) + " frames");
  return written;
}

SuiteSummary run_suite(const SuiteConfig& cfg, const SuiteOptions& options, const std::string& output_dir) {
  const VesselTree tree = load_map(cfg);
  SuiteConfig effective = cfg;
  if (options.dest)
    for (auto& t : effective.tasks) t.dest = *options.dest;
  if (options.tip_seed) effective.episode.tip_seed = options.tip_seed;
  validate_tasks(effective, tree);
  effective.episode.validate();

  const std::string log_dir = (fs::path(output_dir) / "logs").string();
  make_dirs(log_dir);

  SuiteSummary summary;
  for (const auto& task : effective.tasks) {
    TaskSummary ts;
    ts.name = task.name;
    ts.start = task.start;
    ts.dest = task.dest;
    for (std::uint64_t s : task.seeds) {
      const std::uint64_t seed = s + options.seed_offset;
      const std::string stem = task.name + "_seed" + std::to_string(seed);
      FrameSink sink;
      if (options.dump_dir)
        sink = frame_dumper(tree, effective.episode, (fs::path(*options.dump_dir) / stem).string(), 0,
                            effective.episode.loop_cap);
      const EpisodeReport report = run_episode(tree, task.start, task.dest, effective.episode, seed, sink);
      write_file((fs::path(log_dir) / (stem + ".jsonl")).string(), episode_log(report, task.name, seed));
      ts.seeds.push_back(seed);
      ts.success.push_back(report.success);
      ts.control_loops.push_back(report.control_loops);
    }
    summarize(ts);
    summary.successes += ts.successes;
    summary.trials += static_cast<int>(ts.seeds.size());
    summary.tasks.push_back(std::move(ts));
  }
  write_file((fs::path(output_dir) / "summary.json").string(), summary_json(summary));
  write_file((fs::path(output_dir) / "summary.txt").string(), summary_text(summary));
  return summary;
}

}  // namespace vp3d
