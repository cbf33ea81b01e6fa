#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "navforge/json.hpp"
#include "navforge/tripa.hpp"

namespace navforge::cli {

// Exit codes of the command-line tool.
inline constexpr int kExitOk = 0;
inline constexpr int kExitValidation = 1;
inline constexpr int kExitUsage = 2;

// Every tunable of a pipeline run. Serialized as a flat JSON object; config
// files may set any subset of the keys.
struct RunConfig {
  std::uint64_t seed = 0;
  int workers = 1;

  // kinematics
  double forward_m = 0.25;
  double turn_deg = 15.0;

  // synth
  int scenes = 4;
  int episodes_per_scene = 8;
  int width = 16;
  int height = 16;
  double obstacle_density = 0.2;
  double cell_size = 0.25;
  int min_len = 4;
  int max_len = 40;
  double wander_prob = 0.0;

  // ingest
  std::string format = "navforge-jsonl";
  bool check_files = false;
  double pose_eps = 1e-6;

  // score / plan
  double alpha = 0.6;
  double beta = 0.2;
  double gamma = 0.2;
  tripa::PhaseWeights phase_weights = tripa::kDefaultPhaseWeights;
  int epoch = 0;
  bool stochastic = false;

  // gen-ar
  int gap_min = 1;
  int gap_max = 4;
  int ar_cap = 32;
  std::string ar_balance = "category";  // category | tokens | none

  // gen-ffs
  int ffs_history = 4;
  int n_hard = 2;
  int n_cross = 1;
  int ffs_cap = 0;
  bool ffs_balance = true;
  std::string ffs_dedup = "observation";  // observation | image_path

  // gen-nav
  int nav_history = 8;
  int stride = 1;
  std::string history_mode = "uniform";

  // mix
  double lambda_ar = 1.0;
  double lambda_ffs = 1.0;
  std::vector<double> ratio;  // empty, or NAV:AR:FFS
  int stage = 1;

  // eval
  double d_success = 3.0;
  bool geodesic_dtw = false;

  // The worker count is left out unless asked for: it never affects output.
  Json to_json(bool with_workers = false) const;
  // Overwrites the fields named in `j`; throws UsageError on unknown keys or
  // ill-typed values.
  void apply_json(const Json& j);
};

std::string sha256_hex(std::string_view bytes);
std::string file_sha256(const std::filesystem::path& path);

// Runs one command; `args` excludes the program name. Output and logs go to
// stdout and stderr; the return value is the process exit code.
int run(const std::vector<std::string>& args);
int run(int argc, const char* const* argv);

}  // namespace navforge::cli
