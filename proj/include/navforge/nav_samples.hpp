#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "navforge/core_model.hpp"
#include "navforge/manifest.hpp"
#include "navforge/report.hpp"

// Per-step navigation samples (instruction, history, current frame -> next
// action) and the mixed multi-task manifest.
namespace navforge::nav {

enum class HistoryMode { kUniform, kRecent };
HistoryMode parse_history_mode(std::string_view text);

// Placeholders: {instruction}, {history} (one <image> per history frame, or
// "none") and {current} (a single <image>).
extern const char* const kDefaultPromptTemplate;

struct Config {
  int history_len = 8;
  int stride = 1;
  HistoryMode mode = HistoryMode::kUniform;
  std::string prompt_template = kDefaultPromptTemplate;
};

struct Sample {
  std::string sample_id;
  std::string episode_id;
  int t = 0;
  std::string instruction;
  std::vector<int> history_indices;
  std::vector<FrameRef> history;
  FrameRef current;
  Action target = Action::kStop;
  std::optional<double> difficulty;
};

// History frame indices for step t. Uniform mode spreads up to `history_len`
// indices evenly over [0, t-1] (all of them when t <= history_len) and always
// ends at t-1; recent mode keeps the last `history_len` steps.
std::vector<int> history_indices(int t, int history_len, HistoryMode mode);

std::string sample_id(const std::string& episode_id, int t);

// Steps 0, stride, 2*stride, ... plus the final (STOP) step.
std::vector<Sample> expand(const Episode& episode, const Config& config = {});

std::string render_prompt(const Sample& sample, const Config& config = {});

// task=NAV; image_refs (history..., current); target is the action name.
TaskSample to_task_sample(const Sample& sample, const Config& config = {});

struct LossWeights {
  double lambda_ar = 1.0;
  double lambda_ffs = 1.0;
};

// loss_weight = 1 for NAV, lambda_ar for AR, lambda_ffs for FFS.
void tag_losses(std::span<TaskSample> samples, const LossWeights& weights = {});

struct MixOptions {
  LossWeights weights;
  // NAV:AR:FFS proportions; when set, each task is downsampled (seeded) to
  // the largest counts with that ratio.
  std::optional<std::array<double, 3>> ratio;
  int stage = 1;  // stage 2 keeps NAV samples only
  std::uint64_t seed = 0;
};

// Concatenates the inputs in order, applies ratio/stage filters and tags
// losses. Throws ValidationError on duplicate sample ids.
std::vector<TaskSample> mix(std::vector<std::vector<TaskSample>> inputs,
                            const MixOptions& options);

// Checks each NAV sample's target and history against its episode.
VerifyReport verify(std::span<const TaskSample> samples, const EpisodeIndex& episodes);

}  // namespace navforge::nav
