#include "navforge/future_frame.hpp"

#include <algorithm>
#include <cstdio>
#include <iterator>
#include <set>

#include "navforge/error.hpp"
#include "navforge/rng.hpp"

namespace navforge::ffs {

const char* const kPromptTemplate =
    "You are given a current observation <image>, your history observation "
    "<image>...<image>, and the executed action: [ACTION]. Which of the following candidates "
    "is the true next observation? Option A: <image>, Option B: <image>, Option C: <image>, "
    "Option D: <image>. Please select the correct option.";

namespace {

std::string ref_of(const std::string& episode_id, const FrameRef& f) {
  return f.image_path.empty() ? episode_id + ":" + f.frame_id : f.image_path;
}

void replace_once(std::string& text, std::string_view from, std::string_view to) {
  const auto pos = text.find(from);
  if (pos != std::string::npos) text.replace(pos, from.size(), to);
}

bool by_id(const Sample& a, const Sample& b) { return a.sample_id < b.sample_id; }

int letter_index(std::string_view letter) {
  if (letter.size() == 1 && letter[0] >= 'A' && letter[0] <= 'D') return letter[0] - 'A';
  return -1;
}

}  // namespace

std::string_view kind_name(OptionKind kind) {
  switch (kind) {
    case OptionKind::kTruth: return "TRUTH";
    case OptionKind::kHard: return "HARD";
    case OptionKind::kCross: return "CROSS";
  }
  return "TRUTH";
}

char label_letter(int label) { return static_cast<char>('A' + label); }

std::string sample_id(const std::string& episode_id, int t) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "%04d", t);
  return "ffs:" + episode_id + ":" + buf;
}

std::string dedup_key(const FrameRef& frame, DedupKey mode) {
  return mode == DedupKey::kImagePath ? frame.image_path : frame.obs_key.hex();
}

std::pair<std::array<Option, 4>, int> place_options(const Option& truth,
                                                    std::vector<Option> negatives,
                                                    std::uint64_t seed,
                                                    const std::string& sid, DedupKey mode) {
  if (negatives.size() != 3) throw ValidationError(sid, "need exactly 3 negatives");
  std::set<std::string> keys{dedup_key(truth.frame, mode)};
  for (const Option& o : negatives) {
    if (!keys.insert(dedup_key(o.frame, mode)).second) {
      throw ValidationError(sid, "options share an observation");
    }
  }
  KeyedRng rng(seed, sid, "ffs-place");
  const int label = static_cast<int>(rng.below(4));
  rng.shuffle(negatives);
  std::array<Option, 4> options;
  std::size_t next = 0;
  for (int slot = 0; slot < 4; ++slot) {
    options[slot] = slot == label ? truth : negatives[next++];
  }
  return {options, label};
}

std::optional<Sample> build_sample(const Episode& ep, int t, std::span<const Episode> corpus,
                                   const Config& cfg, std::uint64_t seed,
                                   std::string* skip_reason) {
  const int n = static_cast<int>(ep.frames.size());
  if (cfg.n_hard < 0 || cfg.n_cross < 0 || cfg.n_hard + cfg.n_cross != 3) {
    throw UsageError("hard + cross negatives must equal 3");
  }
  if (cfg.history < 0 || cfg.history > t || t + 1 >= n) {
    throw UsageError(ep.episode_id + ": step " + std::to_string(t) +
                     " needs history <= t and t+1 < len(frames)");
  }
  const bool has_other = std::any_of(corpus.begin(), corpus.end(), [&](const Episode& e) {
    return e.episode_id != ep.episode_id && !e.frames.empty();
  });
  if (cfg.n_cross > 0 && !has_other) {
    throw UsageError("cross negatives need a corpus with at least 2 episodes");
  }
  auto skip = [&](const std::string& why) -> std::optional<Sample> {
    if (skip_reason) *skip_reason = why;
    return std::nullopt;
  };
  if (ep.actions[t] == Action::kStop) return skip("STOP step");

  const std::string sid = sample_id(ep.episode_id, t);
  const Option truth{ep.frames[t + 1], ep.episode_id, t + 1, OptionKind::kTruth};
  std::set<std::string> used{dedup_key(truth.frame, cfg.dedup)};
  std::vector<Option> negatives;

  // Same-trajectory hard negatives around t+1.
  KeyedRng hard_rng(seed, sid, "ffs-hard");
  std::set<int> considered{t + 1};
  int hard = 0;
  for (int window : {cfg.hard_window, cfg.wide_window}) {
    if (hard >= cfg.n_hard) break;
    std::vector<int> pool;
    for (int idx = t + 1 - window; idx <= t + 1 + window; ++idx) {
      if (idx >= 0 && idx < n && !considered.contains(idx)) pool.push_back(idx);
    }
    considered.insert(pool.begin(), pool.end());
    hard_rng.shuffle(pool);
    for (int idx : pool) {
      if (hard >= cfg.n_hard) break;
      if (!used.insert(dedup_key(ep.frames[idx], cfg.dedup)).second) continue;
      negatives.push_back(Option{ep.frames[idx], ep.episode_id, idx, OptionKind::kHard});
      ++hard;
    }
  }

  // Cross-trajectory negatives, also covering any hard deficit.
  const int need = cfg.n_cross + (cfg.n_hard - hard);
  if (need > 0 && has_other) {
    KeyedRng cross_rng(seed, sid, "ffs-cross");
    int found = 0;
    for (int a = 0; a < cfg.cross_attempts * need && found < need; ++a) {
      const Episode& other = corpus[cross_rng.below(corpus.size())];
      if (other.episode_id == ep.episode_id || other.frames.empty()) continue;
      const int idx = static_cast<int>(cross_rng.below(other.frames.size()));
      if (!used.insert(dedup_key(other.frames[idx], cfg.dedup)).second) continue;
      negatives.push_back(Option{other.frames[idx], other.episode_id, idx, OptionKind::kCross});
      ++found;
    }
  }
  if (negatives.size() < 3) return skip("fewer than 3 distinct negatives");

  Sample s;
  s.sample_id = sid;
  s.episode_id = ep.episode_id;
  s.t = t;
  s.history.assign(ep.frames.begin() + (t - cfg.history), ep.frames.begin() + t);
  s.current = ep.frames[t];
  s.action = ep.actions[t];
  std::tie(s.options, s.label) = place_options(truth, std::move(negatives), seed, sid, cfg.dedup);
  return s;
}

std::vector<Sample> generate_for_episode(const Episode& ep, std::span<const Episode> corpus,
                                         const Config& cfg, std::uint64_t seed,
                                         GenerationStats* stats) {
  std::vector<int> steps;
  for (int t = cfg.history; t + 1 < static_cast<int>(ep.frames.size()); ++t) {
    if (ep.actions[t] != Action::kStop) steps.push_back(t);
  }
  if (cfg.per_episode_cap > 0 && static_cast<int>(steps.size()) > cfg.per_episode_cap) {
    KeyedRng rng(seed, ep.episode_id, "ffs-steps");
    rng.shuffle(steps);
    steps.resize(cfg.per_episode_cap);
    std::sort(steps.begin(), steps.end());
  }
  std::vector<Sample> out;
  for (int t : steps) {
    if (auto s = build_sample(ep, t, corpus, cfg, seed)) {
      out.push_back(std::move(*s));
      if (stats) ++stats->generated;
    } else if (stats) {
      ++stats->skipped;
    }
  }
  return out;
}

std::vector<Sample> balance_by_action(std::vector<Sample> samples, std::uint64_t seed) {
  std::array<std::vector<Sample>, 3> classes;
  std::vector<Sample> other;
  for (Sample& s : samples) {
    const auto k = static_cast<std::size_t>(s.action);
    if (k < 3) {
      classes[k].push_back(std::move(s));
    } else {
      other.push_back(std::move(s));
    }
  }
  std::size_t minority = 0;
  bool any = false;
  for (const auto& cls : classes) {
    if (cls.empty()) continue;
    minority = any ? std::min(minority, cls.size()) : cls.size();
    any = true;
  }
  std::vector<Sample> out;
  for (std::size_t k = 0; k < 3; ++k) {
    auto& cls = classes[k];
    if (cls.size() > minority) {
      std::sort(cls.begin(), cls.end(), by_id);
      KeyedRng rng(seed, action_name(kAllActions[k]), "ffs-balance");
      rng.shuffle(cls);
      cls.resize(minority);
    }
    std::move(cls.begin(), cls.end(), std::back_inserter(out));
  }
  std::sort(out.begin(), out.end(), by_id);
  return out;
}

Prompt render_prompt(const Sample& sample) {
  std::string history;
  for (std::size_t k = 0; k < sample.history.size(); ++k) history += "<image>";
  if (history.empty()) history = "none";
  std::string text = kPromptTemplate;
  replace_once(text, "<image>...<image>", history);
  replace_once(text, "[ACTION]", action_name(sample.action));
  return Prompt{std::move(text), std::string(1, label_letter(sample.label))};
}

TaskSample to_task_sample(const Sample& s, DedupKey mode) {
  const Prompt prompt = render_prompt(s);
  TaskSample t;
  t.sample_id = s.sample_id;
  t.task = Task::kFfs;
  t.episode_id = s.episode_id;
  t.prompt = prompt.text;
  t.image_refs.push_back(ref_of(s.episode_id, s.current));
  for (const FrameRef& f : s.history) t.image_refs.push_back(ref_of(s.episode_id, f));
  Json kinds = Json::array(), keys = Json::array(), sources = Json::array();
  for (const Option& o : s.options) {
    t.image_refs.push_back(ref_of(o.episode_id, o.frame));
    kinds.push_back(kind_name(o.kind));
    keys.push_back(dedup_key(o.frame, mode));
    sources.push_back(Json{{"episode_id", o.episode_id}, {"index", o.index}});
  }
  t.target = prompt.target;
  t.loss_weight = 1.0;
  t.aux = Json{{"t", s.t},
               {"action", action_name(s.action)},
               {"history", s.history.size()},
               {"dedup", mode == DedupKey::kImagePath ? "image_path" : "obs_key"},
               {"neg_kinds", std::move(kinds)},
               {"option_keys", std::move(keys)},
               {"option_sources", std::move(sources)}};
  return t;
}

VerifyReport verify(std::span<const TaskSample> samples, const EpisodeIndex& episodes,
                    const Kinematics& kin) {
  VerifyReport report;
  report.task = "FFS";
  for (const TaskSample& s : samples) {
    if (s.task != Task::kFfs) continue;
    ++report.checked;
    auto flag = [&](const std::string& why) { report.mismatches.push_back({s.sample_id, why}); };

    const auto it = episodes.find(s.episode_id);
    if (it == episodes.end()) {
      flag("unknown episode " + s.episode_id);
      continue;
    }
    const Episode& ep = *it->second;
    const int n = static_cast<int>(ep.frames.size());
    int t = 0, k = 0;
    std::vector<std::string> keys, kinds;
    std::vector<std::pair<std::string, int>> sources;
    DedupKey mode = DedupKey::kObservation;
    try {
      t = s.aux.at("t").get<int>();
      k = s.aux.at("history").get<int>();
      keys = s.aux.at("option_keys").get<std::vector<std::string>>();
      kinds = s.aux.at("neg_kinds").get<std::vector<std::string>>();
      for (const Json& src : s.aux.at("option_sources")) {
        sources.emplace_back(src.at("episode_id").get<std::string>(), src.at("index").get<int>());
      }
      if (s.aux.value("dedup", std::string("obs_key")) == "image_path") mode = DedupKey::kImagePath;
    } catch (const std::exception& e) {
      flag(std::string("malformed sample: ") + e.what());
      continue;
    }
    const int label = letter_index(s.target);
    report.count("label", s.target);
    if (t < 0 || t + 1 >= n || k < 0 || k > t) {
      flag("step out of range");
      continue;
    }
    report.count("action", std::string(action_name(ep.actions[t])));
    for (const std::string& kind : kinds) report.count("neg_kind", kind);
    if (label < 0) {
      flag("target is not a letter A-D");
      continue;
    }
    if (keys.size() != 4 || kinds.size() != 4 || sources.size() != 4 ||
        s.image_refs.size() != static_cast<std::size_t>(1 + k + 4)) {
      flag("sample does not carry four options");
      continue;
    }
    const FrameRef& truth = ep.frames[t + 1];
    const std::string truth_key = dedup_key(truth, mode);
    if (s.aux.value("action", std::string()) != action_name(ep.actions[t])) {
      flag("action differs from the episode");
      continue;
    }
    if (mode == DedupKey::kObservation &&
        observation_key(ep.scene_id, apply_action(ep.frames[t].pose, ep.actions[t], kin)) !=
            truth.obs_key) {
      flag("forward simulation of a_t does not reach frame t+1");
      continue;
    }
    if (keys[label] != truth_key) {
      flag("labeled option is not the true next observation");
      continue;
    }
    if (std::set<std::string>(keys.begin(), keys.end()).size() != 4) {
      flag("options are not pairwise distinct");
      continue;
    }
    if (std::count(kinds.begin(), kinds.end(), "TRUTH") != 1 || kinds[label] != "TRUTH") {
      flag("TRUTH tag does not mark the labeled option");
      continue;
    }
    if (s.image_refs[0] != ref_of(ep.episode_id, ep.frames[t])) {
      flag("current image reference does not match frame t");
      continue;
    }
    std::string source_problem;
    for (int o = 0; o < 4 && source_problem.empty(); ++o) {
      const auto src = episodes.find(sources[o].first);
      if (src == episodes.end()) {
        source_problem = "option source episode missing";
        break;
      }
      const Episode& se = *src->second;
      const int idx = sources[o].second;
      if (idx < 0 || idx >= static_cast<int>(se.frames.size())) {
        source_problem = "option source index out of range";
      } else if (dedup_key(se.frames[idx], mode) != keys[o]) {
        source_problem = "option key does not match its source frame";
      } else if (s.image_refs[1 + k + o] != ref_of(se.episode_id, se.frames[idx])) {
        source_problem = "option image reference does not match its source frame";
      }
    }
    if (!source_problem.empty()) flag(source_problem);
  }
  return report;
}

}  // namespace navforge::ffs
