#include "navforge/nav_samples.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <unordered_set>

#include "navforge/error.hpp"
#include "navforge/rng.hpp"

namespace navforge::nav {

const char* const kDefaultPromptTemplate =
    "You are a navigation agent following the instruction: \"{instruction}\". Your history "
    "observations are {history} and your current observation is {current}. Choose the next "
    "action from MOVE_FORWARD, TURN_LEFT, TURN_RIGHT, STOP.";

namespace {

std::string ref_of(const std::string& episode_id, const FrameRef& f) {
  return f.image_path.empty() ? episode_id + ":" + f.frame_id : f.image_path;
}

void replace_all(std::string& text, std::string_view from, std::string_view to) {
  for (auto pos = text.find(from); pos != std::string::npos; pos = text.find(from, pos + to.size())) {
    text.replace(pos, from.size(), to);
  }
}

}  // namespace

HistoryMode parse_history_mode(std::string_view text) {
  if (text == "uniform") return HistoryMode::kUniform;
  if (text == "recent") return HistoryMode::kRecent;
  throw UsageError("unknown history mode '" + std::string(text) + "'");
}

std::vector<int> history_indices(int t, int history_len, HistoryMode mode) {
  std::vector<int> out;
  if (t <= 0 || history_len <= 0) return out;
  if (t <= history_len) {
    for (int i = 0; i < t; ++i) out.push_back(i);
    return out;
  }
  if (mode == HistoryMode::kRecent || history_len == 1) {
    for (int i = t - history_len; i < t; ++i) out.push_back(i);
    return out;
  }
  // round(m * (t-1) / (H-1)), halves rounded up, in exact integer arithmetic.
  const long long span = t - 1;
  const long long denom = history_len - 1;
  for (long long m = 0; m < history_len; ++m) {
    out.push_back(static_cast<int>((2 * m * span + denom) / (2 * denom)));
  }
  return out;
}

std::string sample_id(const std::string& episode_id, int t) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "%04d", t);
  return "nav:" + episode_id + ":" + buf;
}

std::vector<Sample> expand(const Episode& ep, const Config& cfg) {
  if (cfg.stride < 1) throw UsageError("stride must be >= 1");
  const int n = static_cast<int>(ep.actions.size());
  std::vector<int> steps;
  for (int t = 0; t < n; t += cfg.stride) steps.push_back(t);
  if (n > 0 && steps.back() != n - 1) steps.push_back(n - 1);

  std::vector<Sample> out;
  out.reserve(steps.size());
  for (int t : steps) {
    Sample s;
    s.sample_id = sample_id(ep.episode_id, t);
    s.episode_id = ep.episode_id;
    s.t = t;
    s.instruction = ep.instruction;
    s.history_indices = history_indices(t, cfg.history_len, cfg.mode);
    for (int i : s.history_indices) s.history.push_back(ep.frames[i]);
    s.current = ep.frames[t];
    s.target = ep.actions[t];
    out.push_back(std::move(s));
  }
  return out;
}

std::string render_prompt(const Sample& s, const Config& cfg) {
  std::string history;
  for (std::size_t k = 0; k < s.history.size(); ++k) history += "<image>";
  if (history.empty()) history = "none";
  std::string text = cfg.prompt_template;
  replace_all(text, "{instruction}", s.instruction);
  replace_all(text, "{history}", history);
  replace_all(text, "{current}", "<image>");
  return text;
}

TaskSample to_task_sample(const Sample& s, const Config& cfg) {
  TaskSample t;
  t.sample_id = s.sample_id;
  t.task = Task::kNav;
  t.episode_id = s.episode_id;
  t.prompt = render_prompt(s, cfg);
  for (const FrameRef& f : s.history) t.image_refs.push_back(ref_of(s.episode_id, f));
  t.image_refs.push_back(ref_of(s.episode_id, s.current));
  t.target = std::string(action_name(s.target));
  t.loss_weight = 1.0;
  t.difficulty = s.difficulty;
  t.aux = Json{{"t", s.t}, {"history_indices", s.history_indices}};
  return t;
}

void tag_losses(std::span<TaskSample> samples, const LossWeights& w) {
  for (TaskSample& s : samples) {
    switch (s.task) {
      case Task::kNav: s.loss_weight = 1.0; break;
      case Task::kAr: s.loss_weight = w.lambda_ar; break;
      case Task::kFfs: s.loss_weight = w.lambda_ffs; break;
    }
  }
}

std::vector<TaskSample> mix(std::vector<std::vector<TaskSample>> inputs,
                            const MixOptions& options) {
  if (options.weights.lambda_ar < 0 || options.weights.lambda_ffs < 0) {
    throw UsageError("loss weights must be nonnegative");
  }
  std::vector<TaskSample> all;
  std::unordered_set<std::string> ids;
  for (auto& input : inputs) {
    for (TaskSample& s : input) {
      if (!ids.insert(s.sample_id).second) throw ValidationError(s.sample_id, "duplicate sample id");
      if (options.stage == 2 && s.task != Task::kNav) continue;
      all.push_back(std::move(s));
    }
  }

  if (options.ratio && options.stage != 2) {
    const auto& ratio = *options.ratio;
    std::array<std::vector<std::size_t>, 3> by_task;
    for (std::size_t i = 0; i < all.size(); ++i) {
      by_task[static_cast<std::size_t>(all[i].task)].push_back(i);
    }
    double scale = -1;
    for (std::size_t k = 0; k < 3; ++k) {
      if (ratio[k] < 0) throw UsageError("mix ratio entries must be nonnegative");
      if (ratio[k] == 0) continue;
      const double s = static_cast<double>(by_task[k].size()) / ratio[k];
      scale = scale < 0 ? s : std::min(scale, s);
    }
    if (scale < 0) throw UsageError("mix ratio must have a positive entry");
    std::vector<char> keep(all.size(), 0);
    for (std::size_t k = 0; k < 3; ++k) {
      auto& idx = by_task[k];
      const auto target = static_cast<std::size_t>(std::floor(scale * ratio[k] + 1e-9));
      KeyedRng rng(options.seed, task_name(static_cast<Task>(k)), "mix-ratio");
      rng.shuffle(idx);
      idx.resize(std::min(target, idx.size()));
      for (std::size_t i : idx) keep[i] = 1;
    }
    std::vector<TaskSample> kept;
    for (std::size_t i = 0; i < all.size(); ++i) {
      if (keep[i]) kept.push_back(std::move(all[i]));
    }
    all = std::move(kept);
  }
  tag_losses(all, options.weights);
  return all;
}

VerifyReport verify(std::span<const TaskSample> samples, const EpisodeIndex& episodes) {
  VerifyReport report;
  report.task = "NAV";
  for (const TaskSample& s : samples) {
    if (s.task != Task::kNav) continue;
    ++report.checked;
    auto flag = [&](const std::string& why) { report.mismatches.push_back({s.sample_id, why}); };
    const auto it = episodes.find(s.episode_id);
    if (it == episodes.end()) {
      flag("unknown episode " + s.episode_id);
      continue;
    }
    const Episode& ep = *it->second;
    int t = 0;
    std::vector<int> hist;
    try {
      t = s.aux.at("t").get<int>();
      hist = s.aux.at("history_indices").get<std::vector<int>>();
    } catch (const std::exception& e) {
      flag(std::string("malformed sample: ") + e.what());
      continue;
    }
    if (t < 0 || t >= static_cast<int>(ep.actions.size())) {
      flag("step out of range");
      continue;
    }
    report.count("action", std::string(action_name(ep.actions[t])));
    if (s.target != action_name(ep.actions[t])) {
      flag("target differs from episode action");
      continue;
    }
    bool increasing = true;
    for (std::size_t k = 0; k < hist.size(); ++k) {
      increasing = increasing && hist[k] >= 0 && hist[k] < t && (k == 0 || hist[k - 1] < hist[k]);
    }
    if (!increasing) {
      flag("history indices must be strictly increasing and < t");
      continue;
    }
    if (s.image_refs.size() != hist.size() + 1 ||
        s.image_refs.back() != ref_of(ep.episode_id, ep.frames[t])) {
      flag("image references do not match the history and current frame");
    }
  }
  return report;
}

}  // namespace navforge::nav
