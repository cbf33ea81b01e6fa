#include "navforge/core_model.hpp"

#include <cctype>
#include <cmath>
#include <cstdio>
#include <numbers>
#include <unordered_set>

#include "navforge/error.hpp"
#include "navforge/rng.hpp"

namespace navforge {

namespace {

// sin/cos of an angle in degrees, exact at multiples of 90 so grid-aligned
// motion stays on the lattice without rounding drift.
void sincos_deg(double degrees, double& s, double& c) {
  const double r = normalize_heading(degrees);
  if (r == 0.0) {
    s = 0.0, c = 1.0;
  } else if (r == 90.0) {
    s = 1.0, c = 0.0;
  } else if (r == 180.0) {
    s = 0.0, c = -1.0;
  } else if (r == 270.0) {
    s = -1.0, c = 0.0;
  } else {
    const double rad = r * std::numbers::pi / 180.0;
    s = std::sin(rad);
    c = std::cos(rad);
  }
}

std::string lower(std::string_view text) {
  std::string out(text);
  for (char& ch : out) ch = static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
  return out;
}

}  // namespace

std::string_view action_name(Action action) {
  switch (action) {
    case Action::kMoveForward: return "MOVE_FORWARD";
    case Action::kTurnLeft: return "TURN_LEFT";
    case Action::kTurnRight: return "TURN_RIGHT";
    case Action::kStop: return "STOP";
  }
  return "STOP";
}

Action parse_action(std::string_view text) {
  const std::string t = lower(text);
  if (t == "move_forward" || t == "f") return Action::kMoveForward;
  if (t == "turn_left" || t == "l") return Action::kTurnLeft;
  if (t == "turn_right" || t == "r") return Action::kTurnRight;
  if (t == "stop" || t == "s") return Action::kStop;
  throw UsageError("unknown action '" + std::string(text) + "'");
}

std::string join_actions(std::span<const Action> actions) {
  std::string out;
  for (Action a : actions) {
    if (!out.empty()) out += ' ';
    out += action_name(a);
  }
  return out;
}

std::vector<Action> split_actions(std::string_view text) {
  std::vector<Action> out;
  std::size_t pos = 0;
  while (pos < text.size()) {
    while (pos < text.size() && std::isspace(static_cast<unsigned char>(text[pos]))) ++pos;
    std::size_t end = pos;
    while (end < text.size() && !std::isspace(static_cast<unsigned char>(text[end]))) ++end;
    if (end > pos) out.push_back(parse_action(text.substr(pos, end - pos)));
    pos = end;
  }
  return out;
}

double normalize_heading(double degrees) {
  double h = std::fmod(degrees, 360.0);
  if (h < 0.0) h += 360.0;
  if (h >= 360.0) h -= 360.0;
  if (h == 0.0) h = 0.0;  // drops a negative zero
  return h;
}

Pose make_pose(double x, double y, double heading) {
  return Pose{x, y, normalize_heading(heading)};
}

double heading_distance(double a, double b) {
  const double d = normalize_heading(a - b);
  return d > 180.0 ? 360.0 - d : d;
}

bool approx_equal(const Pose& a, const Pose& b, double eps) {
  return std::abs(a.x - b.x) <= eps && std::abs(a.y - b.y) <= eps &&
         heading_distance(a.heading, b.heading) <= eps;
}

Pose apply_action(const Pose& pose, Action action, const Kinematics& kin) {
  switch (action) {
    case Action::kMoveForward: {
      double s, c;
      sincos_deg(pose.heading, s, c);
      return Pose{pose.x + kin.forward_m * c, pose.y + kin.forward_m * s,
                  normalize_heading(pose.heading)};
    }
    case Action::kTurnLeft:
      return Pose{pose.x, pose.y, normalize_heading(pose.heading + kin.turn_deg)};
    case Action::kTurnRight:
      return Pose{pose.x, pose.y, normalize_heading(pose.heading - kin.turn_deg)};
    case Action::kStop:
      break;
  }
  return Pose{pose.x, pose.y, normalize_heading(pose.heading)};
}

Pose apply_sequence(Pose pose, std::span<const Action> actions,
                    const Kinematics& kin) {
  pose.heading = normalize_heading(pose.heading);
  for (Action a : actions) pose = apply_action(pose, a, kin);
  return pose;
}

std::string ObservationKey::hex() const {
  char buf[33];
  std::snprintf(buf, sizeof buf, "%016llx%016llx",
                static_cast<unsigned long long>(hi),
                static_cast<unsigned long long>(lo));
  return buf;
}

ObservationKey ObservationKey::from_hex(std::string_view text) {
  if (text.size() != 32) throw UsageError("observation key must be 32 hex digits");
  auto parse = [&](std::string_view part) {
    std::uint64_t v = 0;
    for (char ch : part) {
      int digit;
      if (ch >= '0' && ch <= '9') digit = ch - '0';
      else if (ch >= 'a' && ch <= 'f') digit = ch - 'a' + 10;
      else if (ch >= 'A' && ch <= 'F') digit = ch - 'A' + 10;
      else throw UsageError("bad hex digit in observation key");
      v = (v << 4) | static_cast<std::uint64_t>(digit);
    }
    return v;
  };
  return ObservationKey{parse(text.substr(0, 16)), parse(text.substr(16))};
}

ObservationKey observation_key(std::string_view scene_id, const Pose& pose) {
  // 27 bits per coordinate (+-671 km at 1 cm) and 9 bits of heading pack
  // injectively into 63 bits; mix64 is a bijection, so keys of one scene
  // collide only if the quantized poses are equal.
  constexpr std::uint64_t kCoordMask = (std::uint64_t{1} << 27) - 1;
  const auto qx = static_cast<std::uint64_t>(std::llround(pose.x / kPositionQuantum));
  const auto qy = static_cast<std::uint64_t>(std::llround(pose.y / kPositionQuantum));
  const auto qh = static_cast<std::uint64_t>(
      std::llround(normalize_heading(pose.heading) / kHeadingQuantum) % 360);
  const std::uint64_t packed = ((qx & kCoordMask) << 36) | ((qy & kCoordMask) << 9) | qh;
  const std::uint64_t scene_hash = mix64(fnv1a64(scene_id));
  return ObservationKey{scene_hash, mix64(packed ^ scene_hash)};
}

ActionCounts action_counts(std::span<const Action> actions) {
  ActionCounts c;
  for (Action a : actions) {
    switch (a) {
      case Action::kMoveForward: ++c.forward; break;
      case Action::kTurnLeft: ++c.left; break;
      case Action::kTurnRight: ++c.right; break;
      case Action::kStop: ++c.stop; break;
    }
  }
  c.all = c.forward + c.left + c.right + c.stop;
  return c;
}

int word_count(std::string_view text) {
  int n = 0;
  bool in_word = false;
  for (char ch : text) {
    const bool space = std::isspace(static_cast<unsigned char>(ch)) != 0;
    if (!space && !in_word) ++n;
    in_word = !space;
  }
  return n;
}

void validate_episode(const Episode& ep, const Kinematics& kin, double eps) {
  const std::string& id = ep.episode_id;
  if (ep.frames.size() < 2) throw ValidationError(id, "episode needs at least 2 frames");
  if (ep.actions.size() != ep.frames.size()) {
    throw ValidationError(id, "len(actions)=" + std::to_string(ep.actions.size()) +
                                  " != len(frames)=" + std::to_string(ep.frames.size()));
  }
  if (ep.actions.back() != Action::kStop) throw ValidationError(id, "last action must be STOP");
  for (std::size_t t = 0; t + 1 < ep.actions.size(); ++t) {
    if (ep.actions[t] == Action::kStop) {
      throw ValidationError(id, "STOP at step " + std::to_string(t) + " before the end");
    }
  }
  std::unordered_set<std::string> ids;
  for (const FrameRef& f : ep.frames) {
    if (!ids.insert(f.frame_id).second) {
      throw ValidationError(id, "duplicate frame_id '" + f.frame_id + "'");
    }
    if (!(f.pose.heading >= 0.0 && f.pose.heading < 360.0)) {
      throw ValidationError(id, "frame '" + f.frame_id + "' heading outside [0, 360)");
    }
  }
  for (std::size_t t = 0; t + 1 < ep.frames.size(); ++t) {
    const Pose expected = apply_action(ep.frames[t].pose, ep.actions[t], kin);
    if (!approx_equal(expected, ep.frames[t + 1].pose, eps)) {
      throw ValidationError(id, "kinematic mismatch between frames " + std::to_string(t) +
                                    " and " + std::to_string(t + 1));
    }
  }
}

std::vector<FrameRef> fold_frames(std::string_view scene_id, const Pose& start,
                                  std::span<const Action> actions,
                                  const Kinematics& kin) {
  std::vector<FrameRef> frames;
  frames.reserve(actions.size());
  Pose pose = make_pose(start.x, start.y, start.heading);
  char buf[24];
  for (std::size_t t = 0; t < actions.size(); ++t) {
    std::snprintf(buf, sizeof buf, "%04zu", t);
    frames.push_back(FrameRef{buf, "", pose, observation_key(scene_id, pose)});
    pose = apply_action(pose, actions[t], kin);
  }
  return frames;
}

std::string image_ref(const Episode& episode, const FrameRef& frame) {
  if (!frame.image_path.empty()) return frame.image_path;
  return episode.episode_id + ":" + frame.frame_id;
}

}  // namespace navforge
