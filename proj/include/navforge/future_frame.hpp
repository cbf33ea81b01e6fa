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

// Four-way multiple choice over the next observation given history, the
// current observation and the executed action.
namespace navforge::ffs {

enum class DedupKey { kObservation, kImagePath };

struct Config {
  int history = 4;
  int n_hard = 2;
  int n_cross = 1;
  int hard_window = 2;  // offsets +-1..hard_window around t+1
  int wide_window = 5;  // fallback window when too few hard negatives
  int cross_attempts = 64;
  int per_episode_cap = 0;  // <= 0 keeps every eligible step
  bool balance = true;
  DedupKey dedup = DedupKey::kObservation;
  Kinematics kin;
};

enum class OptionKind { kTruth, kHard, kCross };
std::string_view kind_name(OptionKind kind);  // "TRUTH", "HARD", "CROSS"

struct Option {
  FrameRef frame;
  std::string episode_id;
  int index = 0;  // frame index in the source episode
  OptionKind kind = OptionKind::kTruth;

  friend bool operator==(const Option&, const Option&) = default;
};

struct Sample {
  std::string sample_id;
  std::string episode_id;
  int t = 0;
  std::vector<FrameRef> history;  // frames[t-k, t)
  FrameRef current;
  Action action = Action::kMoveForward;
  std::array<Option, 4> options;
  int label = 0;  // 0..3 for A..D

  friend bool operator==(const Sample&, const Sample&) = default;
};

char label_letter(int label);

std::string sample_id(const std::string& episode_id, int t);

// Distinctness key of a frame under the configured deduplication.
std::string dedup_key(const FrameRef& frame, DedupKey mode);

// Places the truth at a seeded uniform slot and the three negatives, in
// seeded shuffled order, in the rest. Throws ValidationError if any two of
// the four share a dedup key or there are not exactly 3 negatives.
std::pair<std::array<Option, 4>, int> place_options(const Option& truth,
                                                    std::vector<Option> negatives,
                                                    std::uint64_t seed,
                                                    const std::string& sample_id,
                                                    DedupKey mode = DedupKey::kObservation);

// Builds the sample at step t, or returns nullopt (with `skip_reason` set)
// when fewer than three distinct negatives can be found. Hard negatives come
// from the same episode near t+1 (window widened once if short); cross
// negatives from other corpus episodes; a hard deficit is filled with extra
// cross negatives. Throws UsageError when k > t, t+1 >= len(frames), or
// cross negatives are requested from a corpus with a single episode.
std::optional<Sample> build_sample(const Episode& episode, int t,
                                   std::span<const Episode> corpus, const Config& config,
                                   std::uint64_t seed, std::string* skip_reason = nullptr);

struct GenerationStats {
  std::size_t generated = 0;
  std::size_t skipped = 0;
};

// Every eligible step of one episode (t in [k, len-2]), optionally capped by
// a seeded choice of steps.
std::vector<Sample> generate_for_episode(const Episode& episode,
                                         std::span<const Episode> corpus,
                                         const Config& config, std::uint64_t seed,
                                         GenerationStats* stats = nullptr);

// Downsamples each action class (FORWARD, LEFT, RIGHT) to the smallest one.
// Output sorted by sample id.
std::vector<Sample> balance_by_action(std::vector<Sample> samples, std::uint64_t seed);

struct Prompt {
  std::string text;
  std::string target;
};

extern const char* const kPromptTemplate;

Prompt render_prompt(const Sample& sample);

// task=FFS; image_refs (current, history..., A, B, C, D); aux carries t, the
// action, neg_kinds, option keys and option sources.
TaskSample to_task_sample(const Sample& sample, DedupKey mode = DedupKey::kObservation);

// Re-derives the true next frame of each FFS sample, checks it sits under
// the label and that every option is distinct from it and from each other.
VerifyReport verify(std::span<const TaskSample> samples, const EpisodeIndex& episodes,
                    const Kinematics& kin = {});

}  // namespace navforge::ffs
