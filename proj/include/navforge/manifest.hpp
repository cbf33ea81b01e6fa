#pragma once

#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "navforge/core_model.hpp"
#include "navforge/json.hpp"

namespace navforge {

enum class Task { kNav, kAr, kFfs };

std::string_view task_name(Task task);  // "NAV", "AR", "FFS"
Task parse_task(std::string_view text);

// One serialized training record of any task.
struct TaskSample {
  std::string sample_id;
  Task task = Task::kNav;
  std::string episode_id;
  std::string prompt;
  std::vector<std::string> image_refs;
  std::string target;
  double loss_weight = 1.0;
  std::optional<double> difficulty;
  Json aux = Json::object();

  friend bool operator==(const TaskSample&, const TaskSample&) = default;
};

// Record <-> JSON. Keys are emitted in the documented schema order.
Json episode_to_json(const Episode& episode);
Episode episode_from_json(const Json& j);
Json sample_to_json(const TaskSample& sample);
TaskSample sample_from_json(const Json& j);

// Manifest header lines carry a "provenance" object and no record id.
bool is_header_line(const Json& j);

// Writes `text` to `path` via a temporary sibling and rename, so readers
// never observe a truncated file.
void write_file_atomic(const std::filesystem::path& path, std::string_view text);
std::string read_file(const std::filesystem::path& path);

// One JSON object per line in `records` order, preceded by `header` when it
// is not null. Identical inputs produce identical bytes.
std::string render_jsonl(const std::vector<Json>& records, const Json& header = nullptr);

void write_manifest(std::span<const Episode> records, const std::filesystem::path& path,
                    const Json& header = nullptr);
void write_manifest(std::span<const TaskSample> records, const std::filesystem::path& path,
                    const Json& header = nullptr);

struct JsonlFile {
  Json header;  // null when the file has none
  std::vector<Json> records;
};

// Parses a JSONL file; throws ValidationError naming the line on bad JSON.
JsonlFile read_jsonl(const std::filesystem::path& path);

std::vector<Episode> read_episodes(const std::filesystem::path& path);
std::vector<TaskSample> read_samples(const std::filesystem::path& path);

using EpisodeIndex = std::unordered_map<std::string, const Episode*>;
EpisodeIndex index_episodes(std::span<const Episode> episodes);

// Ingest ------------------------------------------------------------------

enum class DatasetFormat { kNavforgeJsonl, kFramesActions };
DatasetFormat parse_dataset_format(std::string_view text);

struct IngestOptions {
  DatasetFormat format = DatasetFormat::kNavforgeJsonl;
  Kinematics kin;
  double pose_eps = kPoseEps;
  bool check_files = false;
  int workers = 1;
};

struct IngestIssue {
  std::string episode_id;
  std::string message;
};

struct IngestResult {
  std::vector<Episode> episodes;
  std::vector<IngestIssue> issues;
};

// Loads every episode under `root`. Malformed episodes are skipped and
// reported in `issues`; I/O errors propagate.
//
// navforge-jsonl: every *.jsonl file directly under root, in name order.
//   Frames may omit "pose" (the poses are then rebuilt by folding the
//   actions from the origin) and "obs_key" (derived from scene and pose).
// frames+actions: one directory per episode, in name order, containing
//   frames/        numbered image files (sorted numerically by stem)
//   actions.txt    one action per line or whitespace separated; names,
//                  F/L/R/S, or Habitat codes 0=STOP 1=F 2=L 3=R
//   instruction.txt
//   poses.txt      optional, one "x y heading" line per frame
//   scene.txt      optional scene id (defaults to the directory name)
IngestResult ingest_dataset(const std::filesystem::path& root, const IngestOptions& options);

// Stats -------------------------------------------------------------------

struct Summary {
  double min = 0, max = 0, mean = 0, p25 = 0, p50 = 0, p75 = 0;
};

// Linear-interpolation quantiles of `values` (nonempty).
Summary summarize(std::vector<double> values);

struct EpisodeStats {
  std::string episode_id;
  int n_png = 0;
  int n_actions = 0;
  int instr_len = 0;
  double turn_density = 0;
  double raw_traj = 0;
};

struct StatsReport {
  std::vector<EpisodeStats> episodes;
  Summary n_png;
  Summary instr_len;
  Summary turn_density;
  Summary raw_traj;
  std::size_t skipped = 0;
};

// Throws UsageError on empty input.
StatsReport dataset_stats(std::span<const Episode> episodes);
Json stats_to_json(const StatsReport& report);

}  // namespace navforge
