#pragma once
// Suite configuration: one JSON document with the map source, the scene and
// solver settings shared by every episode, and the task list.
//
// Parsing is strict. Unknown keys, wrong types and out-of-range values are
// all reported as ConfigError before any episode runs.

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "vp3d/episode.hpp"
#include "vp3d/vessel_model.hpp"

namespace vp3d {

struct TaskSpec {
  std::string name;
  Address start;  // insertion address; index may be the "last" marker (-1)
  Address dest;
  std::vector<std::uint64_t> seeds;
};

struct SuiteConfig {
  // Map source: a serialized tree file, or a procedural phantom.
  std::optional<std::string> map_file;  // resolved against the config's directory
  PhantomSpec phantom;
  std::uint64_t phantom_seed = 2024;

  EpisodeConfig episode;
  std::vector<TaskSpec> tasks;
  std::string output_dir = "vp3d_out";
};

SuiteConfig parse_suite_config(std::string_view json_text, const std::string& base_dir = ".");
SuiteConfig load_suite_config(const std::string& path);  // ConfigError names the file

VesselTree load_map(const SuiteConfig& cfg);

// Every task address must resolve on the map and every task needs at least
// one seed; task names must be unique and usable as file names.
void validate_tasks(const SuiteConfig& cfg, const VesselTree& tree);

}  // namespace vp3d
