#include "navforge/action_retrospection.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <set>

#include "navforge/error.hpp"
#include "navforge/rng.hpp"

namespace navforge::ar {

const char* const kPromptTemplate =
    "You will be given two observations from the same navigation trajectory. Infer the most "
    "likely action sequence that moves the agent from the first observation <image> to the "
    "second observation <image>. The predicted sequence must only use the following actions: "
    "MOVE_FORWARD, TURN_LEFT, TURN_RIGHT, STOP.";

namespace {

int action_index(Action a) { return static_cast<int>(a); }

std::string ref_of(const std::string& episode_id, const FrameRef& f) {
  return f.image_path.empty() ? episode_id + ":" + f.frame_id : f.image_path;
}

bool by_id(const Sample& a, const Sample& b) { return a.sample_id < b.sample_id; }

}  // namespace

Action dominant_action(std::span<const Action> actions) {
  std::array<int, 4> counts{};
  for (Action a : actions) ++counts[action_index(a)];
  int best = 0;
  for (int k = 1; k < 4; ++k) {
    if (counts[k] > counts[best]) best = k;
  }
  return kAllActions[best];
}

std::string sample_id(const std::string& episode_id, int i, int j) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%04d-%04d", i, j);
  return "ar:" + episode_id + ":" + buf;
}

Sample make_sample(const Episode& ep, int i, int j) {
  const int n = static_cast<int>(ep.actions.size());
  if (i < 0 || j <= i || j > n || static_cast<int>(ep.frames.size()) != n) {
    throw UsageError(ep.episode_id + ": invalid pair (" + std::to_string(i) + ", " +
                     std::to_string(j) + ")");
  }
  Sample s;
  s.sample_id = sample_id(ep.episode_id, i, j);
  s.episode_id = ep.episode_id;
  s.i = i;
  s.j = j;
  s.frame_i = ep.frames[i];
  s.frame_j = ep.frames[std::min(j, n - 1)];
  s.executed.assign(ep.actions.begin() + i, ep.actions.begin() + j);
  s.category = dominant_action(s.executed);
  return s;
}

std::vector<Sample> sample_pairs(const Episode& ep, const Config& config, std::uint64_t seed) {
  if (config.gap_min < 1 || config.gap_max < config.gap_min) {
    throw UsageError("AR gaps need 1 <= gap_min <= gap_max");
  }
  const int n = static_cast<int>(ep.actions.size());
  const int gap_hi = std::min(config.gap_max, n);
  std::vector<Sample> out;
  if (n < config.gap_min) return out;

  auto degenerate = [](const Sample& s) {
    const bool moved = std::any_of(s.executed.begin(), s.executed.end(),
                                   [](Action a) { return a != Action::kStop; });
    return moved && s.frame_i.obs_key == s.frame_j.obs_key;
  };

  if (config.per_episode_cap <= 0) {
    for (int i = 0; i < n; ++i) {
      for (int gap = config.gap_min; gap <= gap_hi && i + gap <= n; ++gap) {
        Sample s = make_sample(ep, i, i + gap);
        if (!degenerate(s)) out.push_back(std::move(s));
      }
    }
  } else {
    KeyedRng rng(seed, ep.episode_id, "ar-pairs");
    std::set<std::pair<int, int>> taken;
    const int attempts = 4 * config.per_episode_cap;
    const auto gap_span = static_cast<std::uint64_t>(config.gap_max - config.gap_min + 1);
    for (int a = 0; a < attempts && static_cast<int>(out.size()) < config.per_episode_cap; ++a) {
      const int gap = config.gap_min + static_cast<int>(rng.below(gap_span));
      if (gap > n) continue;
      const int i = static_cast<int>(rng.below(static_cast<std::uint64_t>(n - gap + 1)));
      if (!taken.insert({i, i + gap}).second) continue;
      Sample s = make_sample(ep, i, i + gap);
      if (!degenerate(s)) out.push_back(std::move(s));
    }
  }
  std::sort(out.begin(), out.end(), by_id);
  return out;
}

namespace {

// Seeded uniform subset of size `keep`, taken from an id-sorted class.
void downsample(std::vector<Sample>& cls, std::size_t keep, std::uint64_t seed,
                const std::string& tag) {
  if (cls.size() <= keep) return;
  std::sort(cls.begin(), cls.end(), by_id);
  KeyedRng rng(seed, tag, "ar-balance");
  rng.shuffle(cls);
  cls.resize(keep);
}

}  // namespace

std::vector<Sample> balance_by_category(std::vector<Sample> samples, std::uint64_t seed) {
  std::array<std::vector<Sample>, 4> classes;
  for (Sample& s : samples) classes[action_index(s.category)].push_back(std::move(s));

  std::size_t minority = 0;
  int present = 0;
  for (int k = 0; k < 3; ++k) {
    if (classes[k].empty()) continue;
    minority = present == 0 ? classes[k].size() : std::min(minority, classes[k].size());
    ++present;
  }
  for (int k = 0; k < 3; ++k) {
    downsample(classes[k], minority, seed, std::string(action_name(kAllActions[k])));
  }
  // ceil(5% of the aligned total), in integers.
  const std::size_t aligned = static_cast<std::size_t>(present) * minority;
  const std::size_t stop_cap = (aligned + 19) / 20;
  downsample(classes[3], stop_cap, seed, "STOP");

  std::vector<Sample> out;
  for (auto& cls : classes) {
    std::move(cls.begin(), cls.end(), std::back_inserter(out));
  }
  std::sort(out.begin(), out.end(), by_id);
  return out;
}

std::vector<Sample> balance_by_tokens(std::vector<Sample> samples, std::uint64_t seed) {
  std::array<std::size_t, 3> totals{};
  for (const Sample& s : samples) {
    for (Action a : s.executed) {
      if (a != Action::kStop) ++totals[action_index(a)];
    }
  }
  std::size_t target = 0;
  bool any = false;
  for (std::size_t t : totals) {
    if (t == 0) continue;
    target = any ? std::min(target, t) : t;
    any = true;
  }
  std::sort(samples.begin(), samples.end(), by_id);
  KeyedRng rng(seed, "tokens", "ar-balance");
  rng.shuffle(samples);

  std::array<std::size_t, 3> kept{};
  std::vector<Sample> out;
  for (Sample& s : samples) {
    std::array<std::size_t, 3> add{};
    for (Action a : s.executed) {
      if (a != Action::kStop) ++add[action_index(a)];
    }
    bool fits = true;
    for (int k = 0; k < 3; ++k) fits = fits && kept[k] + add[k] <= target;
    if (!fits) continue;
    for (int k = 0; k < 3; ++k) kept[k] += add[k];
    out.push_back(std::move(s));
  }
  std::sort(out.begin(), out.end(), by_id);
  return out;
}

Prompt render_prompt(const Sample& sample) {
  return Prompt{kPromptTemplate, join_actions(sample.executed)};
}

TaskSample to_task_sample(const Sample& s) {
  const Prompt prompt = render_prompt(s);
  TaskSample t;
  t.sample_id = s.sample_id;
  t.task = Task::kAr;
  t.episode_id = s.episode_id;
  t.prompt = prompt.text;
  t.image_refs = {ref_of(s.episode_id, s.frame_i), ref_of(s.episode_id, s.frame_j)};
  t.target = prompt.target;
  t.loss_weight = 1.0;
  t.aux = Json{{"i", s.i},
               {"j", s.j},
               {"gap", s.j - s.i},
               {"category", action_name(s.category)}};
  return t;
}

VerifyReport verify(std::span<const TaskSample> samples, const EpisodeIndex& episodes,
                    const Kinematics& kin, double eps) {
  VerifyReport report;
  report.task = "AR";
  for (const TaskSample& t : samples) {
    if (t.task != Task::kAr) continue;
    ++report.checked;
    auto flag = [&](const std::string& why) { report.mismatches.push_back({t.sample_id, why}); };

    const auto it = episodes.find(t.episode_id);
    if (it == episodes.end()) {
      flag("unknown episode " + t.episode_id);
      continue;
    }
    const Episode& ep = *it->second;
    const int n = static_cast<int>(ep.actions.size());
    int i = 0, j = 0;
    std::vector<Action> claimed;
    try {
      i = t.aux.at("i").get<int>();
      j = t.aux.at("j").get<int>();
      claimed = split_actions(t.target);
    } catch (const std::exception& e) {
      flag(std::string("malformed sample: ") + e.what());
      continue;
    }
    if (i < 0 || j <= i || j > n) {
      flag("pair out of range");
      continue;
    }
    const std::vector<Action> truth(ep.actions.begin() + i, ep.actions.begin() + j);
    const FrameRef& fi = ep.frames[i];
    const FrameRef& fj = ep.frames[std::min(j, n - 1)];
    if (claimed != truth) {
      flag("target differs from the executed actions");
    } else if (!approx_equal(apply_sequence(fi.pose, claimed, kin), fj.pose, eps)) {
      flag("forward simulation does not reach frame j");
    } else if (t.image_refs.size() != 2 || t.image_refs[0] != ref_of(ep.episode_id, fi) ||
               t.image_refs[1] != ref_of(ep.episode_id, fj)) {
      flag("image references do not match frames i and j");
    }
    report.count("category", std::string(action_name(dominant_action(truth))));
    report.count("gap", std::to_string(j - i));
  }
  return report;
}

}  // namespace navforge::ar
