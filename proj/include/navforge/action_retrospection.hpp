#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "navforge/core_model.hpp"
#include "navforge/manifest.hpp"
#include "navforge/report.hpp"

// Inverse-dynamics samples: two observations of one trajectory and the
// actions executed between them.
namespace navforge::ar {

struct Config {
  int gap_min = 1;
  int gap_max = 4;
  int per_episode_cap = 32;  // <= 0 keeps every valid pair
  Kinematics kin;
};

// Frame index j == len(frames) denotes the observation after the terminal
// STOP; it shows frames.back() and is the only way STOP enters `executed`.
struct Sample {
  std::string sample_id;
  std::string episode_id;
  int i = 0;
  int j = 0;
  FrameRef frame_i;
  FrameRef frame_j;
  std::vector<Action> executed;  // episode.actions[i, j)
  Action category = Action::kMoveForward;

  friend bool operator==(const Sample&, const Sample&) = default;
};

// Most frequent action; ties go to FORWARD < LEFT < RIGHT < STOP.
Action dominant_action(std::span<const Action> actions);

std::string sample_id(const std::string& episode_id, int i, int j);

// Builds the sample for the pair (i, j); throws UsageError when the pair is
// out of range.
Sample make_sample(const Episode& episode, int i, int j);

// Seeded draws of (i, gap) with gap uniform over [gap_min, gap_max] and i
// uniform over the valid starts, deduplicated on (i, j) and capped. Pairs
// whose endpoints share an observation although the agent moved (e.g.
// [TURN_LEFT, TURN_RIGHT]) are dropped. Output sorted by sample id.
std::vector<Sample> sample_pairs(const Episode& episode, const Config& config,
                                 std::uint64_t seed);

// Aligns FORWARD, LEFT and RIGHT to the smallest of them (seeded uniform
// downsampling) and caps STOP at ceil(0.05 * aligned total). Output sorted by
// sample id.
std::vector<Sample> balance_by_category(std::vector<Sample> samples, std::uint64_t seed);

// Alternative reading of action balancing over the token multiset: samples
// are visited in seeded order and kept while no FORWARD/LEFT/RIGHT token
// total exceeds the smallest corpus-wide token total. Output sorted by id.
std::vector<Sample> balance_by_tokens(std::vector<Sample> samples, std::uint64_t seed);

struct Prompt {
  std::string text;
  std::string target;
};

extern const char* const kPromptTemplate;

Prompt render_prompt(const Sample& sample);

// task=AR, loss_weight 1, aux {i, j, gap, category}; image_refs (o_i, o_j).
TaskSample to_task_sample(const Sample& sample);

// Re-slices each AR sample's actions from its episode and forward-simulates
// them from frame i; a sample whose target or image references disagree, or
// whose fold misses frame j, is one mismatch.
VerifyReport verify(std::span<const TaskSample> samples, const EpisodeIndex& episodes,
                    const Kinematics& kin = {}, double eps = kPoseEps);

}  // namespace navforge::ar
