#pragma once
// Batch runner. Output layout under the output directory:
//   logs/<task>_seed<N>.jsonl   one JSON record per loop, then an "episode" record
//   summary.json                per-task success counts and control-loop statistics
//   summary.txt                 the same table as aligned text
// Frame dumps (optional) go to <dump_dir>/<task>_seed<N>/frame_NNNN.{pgm,ppm,txt}.

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "vp3d/config.hpp"

namespace vp3d {

struct SuiteOptions {
  std::uint64_t seed_offset = 0;
  std::optional<std::string> dump_dir;
  std::optional<Address> dest;   // replaces every task's destination
  std::optional<Vec2> tip_seed;  // first-frame tip for every episode
};

struct TaskSummary {
  std::string name;
  Address start, dest;
  std::vector<std::uint64_t> seeds;  // effective seeds (offset applied)
  std::vector<bool> success;
  std::vector<int> control_loops;
  int successes = 0;
  // Over successful trials only. mean is empty without successes; the
  // sample standard deviation (n - 1) is 0 for a single success.
  std::optional<double> mean;
  std::optional<double> stddev;
};

struct SuiteSummary {
  std::vector<TaskSummary> tasks;
  int successes = 0;
  int trials = 0;
};

// Mean and sample standard deviation of the control loops of successful trials.
void summarize(TaskSummary& task);

// Runs every (task, seed) episode in order and writes the files listed above.
// Task addresses are checked before the first episode runs.
SuiteSummary run_suite(const SuiteConfig& cfg, const SuiteOptions& options, const std::string& output_dir);

std::string episode_log(const EpisodeReport& report, const std::string& task, std::uint64_t seed);
std::string summary_json(const SuiteSummary& summary);
std::string summary_text(const SuiteSummary& summary);

// Writes frames first..last (inclusive loop indices) of one episode: the
// rendered frame as PGM, an overlay PPM with the planned path and the tracked
// and lifted tips, and a key: value sidecar. Throws std::out_of_range when the
// range is empty or starts past the episode's last frame; I/O errors name the
// path. Returns the number of frames written.
int dump_scene(const VesselTree& tree, const TaskSpec& task, std::uint64_t seed, const EpisodeConfig& cfg, int first,
               int last, const std::string& dir);

// Sink that writes frames within [first, last] into `dir` (created on demand).
FrameSink frame_dumper(const VesselTree& tree, const EpisodeConfig& cfg, const std::string& dir, int first, int last,
                       int* written = nullptr);

}  // namespace vp3d
