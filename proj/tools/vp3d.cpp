// vp3d: batch runner and scene tools for the guidewire navigation simulator.
//
//   vp3d run --config suite.json [--seed-offset N] [--dump-frames DIR]
//            [--dest B:I] [--tip-seed X,Y] [--map FILE]
//   vp3d dump --config suite.json --task NAME --seed N --frames A:B --out DIR
//   vp3d phantom [--seed N] [--out FILE]
//
// VP3D_OUT_DIR overrides the output directory named in the config.

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "vp3d/config.hpp"
#include "vp3d/errors.hpp"
#include "vp3d/suite.hpp"

namespace {

vp3d::Vec2 parse_pixel(const std::string& text) {
  const auto comma = text.find(',');
  if (comma == std::string::npos) throw CLI::ValidationError("--tip-seed", "expected x,y");
  try {
    return {std::stod(text.substr(0, comma)), std::stod(text.substr(comma + 1))};
  } catch (const std::exception&) {
    throw CLI::ValidationError("--tip-seed", "expected x,y");
  }
}

std::pair<int, int> parse_range(const std::string& text) {
  const auto colon = text.find(':');
  try {
    if (colon == std::string::npos) {
      const int k = std::stoi(text);
      return {k, k};
    }
    return {std::stoi(text.substr(0, colon)), std::stoi(text.substr(colon + 1))};
  } catch (const std::exception&) {
    throw CLI::ValidationError("--frames", "expected A:B");
  }
}

std::string output_dir(const vp3d::SuiteConfig& cfg) {
  if (const char* env = std::getenv("VP3D_OUT_DIR"); env && *env) return env;
  return cfg.output_dir;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Simulated 3D-map guidewire navigation"};
  app.require_subcommand(1);

  std::string config_path, map_path, dump_dir, dest_text, tip_text;
  std::uint64_t seed_offset = 0;
  auto* run = app.add_subcommand("run", "Run every task and seed of a suite");
  run->add_option("--config", config_path, "suite configuration (JSON)")->required();
  run->add_option("--seed-offset", seed_offset, "added to every seed");
  run->add_option("--dump-frames", dump_dir, "write every frame with overlays under this directory");
  run->add_option("--dest", dest_text, "destination branch:index for every task");
  run->add_option("--tip-seed", tip_text, "first-frame tip pixel x,y");
  run->add_option("--map", map_path, "serialized vessel tree replacing the configured map");

  std::string task_name, frames_text = "0:0", out_dir;
  std::uint64_t seed = 0;
  auto* dump = app.add_subcommand("dump", "Write frames and overlays of one episode");
  dump->add_option("--config", config_path, "suite configuration (JSON)")->required();
  dump->add_option("--task", task_name, "task name")->required();
  dump->add_option("--seed", seed, "episode seed");
  dump->add_option("--frames", frames_text, "inclusive loop range A:B");
  dump->add_option("--out", out_dir, "output directory")->required();

  std::uint64_t phantom_seed = 2024;
  std::string phantom_out;
  auto* phantom = app.add_subcommand("phantom", "Print or save the default procedural phantom");
  phantom->add_option("--seed", phantom_seed, "generator seed");
  phantom->add_option("--out", phantom_out, "output file (default: stdout)");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*phantom) {
      const std::string text = vp3d::serialize(vp3d::generate_phantom(vp3d::PhantomSpec{}, phantom_seed));
      if (phantom_out.empty()) {
        std::cout << text;
      } else {
        std::ofstream out(phantom_out, std::ios::binary);
        if (!(out << text)) throw std::runtime_error("cannot write " + phantom_out);
      }
      return 0;
    }

    vp3d::SuiteConfig cfg = vp3d::load_suite_config(config_path);

    if (*run) {
      if (!map_path.empty()) cfg.map_file = map_path;
      vp3d::SuiteOptions opts;
      opts.seed_offset = seed_offset;
      if (!dump_dir.empty()) opts.dump_dir = dump_dir;
      if (!dest_text.empty()) opts.dest = vp3d::parse_address(dest_text);
      if (!tip_text.empty()) opts.tip_seed = parse_pixel(tip_text);
      const std::string dir = output_dir(cfg);
      const vp3d::SuiteSummary summary = vp3d::run_suite(cfg, opts, dir);
      std::cout << vp3d::summary_text(summary) << "results in " << dir << "\n";
      return 0;
    }

    const vp3d::TaskSpec* task = nullptr;
    for (const auto& t : cfg.tasks)
      if (t.name == task_name) task = &t;
    if (!task) throw vp3d::ConfigError("no task named '" + task_name + "'");
    const auto [first, last] = parse_range(frames_text);
    const vp3d::VesselTree tree = vp3d::load_map(cfg);
    vp3d::validate_tasks(cfg, tree);
    const int n = vp3d::dump_scene(tree, *task, seed, cfg.episode, first, last, out_dir);
    std::cout << "wrote " << n << " frame(s) to " << out_dir << "\n";
    return 0;
  } catch (const CLI::Error& e) {
    return app.exit(e);
  } catch (const std::exception& e) {
    std::cerr << "vp3d: " << e.what() << "\n";
    return 1;
  }
}
