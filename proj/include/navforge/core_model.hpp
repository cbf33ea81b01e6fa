#pragma once

#include <array>
#include <compare>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace navforge {

inline constexpr int kSchemaVersion = 1;

// Low-level action space of continuous-environment navigation.
enum class Action : std::uint8_t { kMoveForward, kTurnLeft, kTurnRight, kStop };

inline constexpr std::array<Action, 4> kAllActions = {
    Action::kMoveForward, Action::kTurnLeft, Action::kTurnRight, Action::kStop};

// "MOVE_FORWARD", "TURN_LEFT", "TURN_RIGHT", "STOP".
std::string_view action_name(Action action);

// Accepts the uppercase names, their lowercase forms and the single letters
// F/L/R/S. Throws UsageError otherwise.
Action parse_action(std::string_view text);

// Space-separated action names, e.g. "MOVE_FORWARD TURN_LEFT".
std::string join_actions(std::span<const Action> actions);
std::vector<Action> split_actions(std::string_view text);

inline constexpr double kPoseEps = 1e-6;

// Planar agent pose. Heading is in degrees, counterclockwise from +x, and is
// kept in [0, 360).
struct Pose {
  double x = 0.0;
  double y = 0.0;
  double heading = 0.0;

  friend bool operator==(const Pose&, const Pose&) = default;
};

double normalize_heading(double degrees);
Pose make_pose(double x, double y, double heading);

// Smallest absolute angular difference in degrees, in [0, 180].
double heading_distance(double a, double b);
bool approx_equal(const Pose& a, const Pose& b, double eps = kPoseEps);

// Step sizes of the discrete action space.
struct Kinematics {
  double forward_m = 0.25;
  double turn_deg = 15.0;
};

Pose apply_action(const Pose& pose, Action action, const Kinematics& kin = {});
Pose apply_sequence(Pose pose, std::span<const Action> actions,
                    const Kinematics& kin = {});

// 128-bit fingerprint of (scene, quantized pose). Stands in for a rendered
// observation: two frames look the same iff their keys are equal.
struct ObservationKey {
  std::uint64_t hi = 0;
  std::uint64_t lo = 0;

  auto operator<=>(const ObservationKey&) const = default;

  std::string hex() const;
  static ObservationKey from_hex(std::string_view text);
};

inline constexpr double kPositionQuantum = 0.01;  // meters
inline constexpr double kHeadingQuantum = 1.0;    // degrees

ObservationKey observation_key(std::string_view scene_id, const Pose& pose);

struct FrameRef {
  std::string frame_id;
  std::string image_path;
  Pose pose;
  ObservationKey obs_key;

  friend bool operator==(const FrameRef&, const FrameRef&) = default;
};

struct Episode {
  std::string episode_id;
  std::string scene_id;
  std::string instruction;
  std::vector<FrameRef> frames;
  std::vector<Action> actions;
  bool pose_reconstructed = false;

  friend bool operator==(const Episode&, const Episode&) = default;
};

struct ActionCounts {
  int forward = 0;
  int left = 0;
  int right = 0;
  int stop = 0;
  int all = 0;

  friend bool operator==(const ActionCounts&, const ActionCounts&) = default;
};

ActionCounts action_counts(std::span<const Action> actions);
inline ActionCounts action_counts(const Episode& episode) {
  return action_counts(episode.actions);
}

// Whitespace-token count.
int word_count(std::string_view text);

// Checks every Episode invariant; throws ValidationError naming the episode:
// at least two frames, one action per frame, STOP exactly once and last,
// unique frame ids, and frames[t+1].pose == apply_action(frames[t].pose,
// actions[t]) within `eps`.
void validate_episode(const Episode& episode, const Kinematics& kin = {},
                      double eps = kPoseEps);

// Builds frames by folding `actions` from `start`. Frame ids are the
// zero-padded step index; observation keys come from `scene_id`.
std::vector<FrameRef> fold_frames(std::string_view scene_id, const Pose& start,
                                  std::span<const Action> actions,
                                  const Kinematics& kin = {});

// Reference to a frame used in prompts and manifests: the image path when one
// exists, otherwise "<episode_id>:<frame_id>".
std::string image_ref(const Episode& episode, const FrameRef& frame);

}  // namespace navforge
