#include <doctest.h>

#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "navforge/error.hpp"
#include "navforge/future_frame.hpp"
#include "navforge/synth_world.hpp"

using namespace navforge;

namespace {

constexpr Action F = Action::kMoveForward, L = Action::kTurnLeft, R = Action::kTurnRight,
                 S = Action::kStop;

Episode make_episode(const std::string& id, std::vector<Action> actions, Pose start = {}) {
  Episode ep;
  ep.episode_id = id;
  ep.scene_id = "s";
  ep.instruction = "go";
  ep.actions = std::move(actions);
  ep.frames = fold_frames(ep.scene_id, start, ep.actions);
  return ep;
}

std::vector<Episode> corpus() {
  SceneParams p;
  std::vector<Episode> out;
  for (int s = 0; s < 3; ++s) {
    p.scene_id = "scene_" + std::to_string(s);
    const Scene scene = generate_scene(31, p);
    for (int e = 0; e < 6; ++e) {
      out.push_back(generate_trajectory(scene, 31, p.scene_id + "_ep_" + std::to_string(e), {}));
    }
  }
  return out;
}

std::string golden(const std::string& name) {
  std::ifstream in(std::string(NAVFORGE_GOLDEN_DIR) + "/" + name);
  std::stringstream ss;
  ss << in.rdbuf();
  std::string text = ss.str();
  while (!text.empty() && text.back() == '\n') text.pop_back();
  return text;
}

std::size_t count_of(const std::string& text, const std::string& needle) {
  std::size_t n = 0;
  for (auto pos = text.find(needle); pos != std::string::npos; pos = text.find(needle, pos + 1)) ++n;
  return n;
}

ffs::Option option_at(double x, ffs::OptionKind kind) {
  FrameRef f;
  f.frame_id = std::to_string(x);
  f.pose = Pose{x, 0, 0};
  f.obs_key = observation_key("s", f.pose);
  return ffs::Option{f, "ep", 0, kind};
}

}  // namespace

TEST_CASE("index arithmetic of a sample") {
  const Episode ep = make_episode("ep", {F, F, L, F, F, R, F, F, F, S});
  const std::vector<Episode> others = {ep, make_episode("other", {F, F, F, S}, {5, 5, 0})};
  ffs::Config cfg;
  const auto s = ffs::build_sample(ep, 4, others, cfg, 1);
  REQUIRE(s);
  REQUIRE(s->history.size() == 4);
  for (int i = 0; i < 4; ++i) CHECK(s->history[i] == ep.frames[i]);
  CHECK(s->current == ep.frames[4]);
  CHECK(s->options[s->label].index == 5);
  CHECK(s->options[s->label].kind == ffs::OptionKind::kTruth);
  CHECK(s->action == F);
  CHECK(s->sample_id == "ffs:ep:0004");
}

TEST_CASE("generated samples satisfy the forward-simulation oracle") {
  const auto eps = corpus();
  ffs::Config cfg;
  std::size_t total = 0;
  for (const Episode& ep : eps) {
    ffs::GenerationStats stats;
    for (const auto& s : ffs::generate_for_episode(ep, eps, cfg, 2, &stats)) {
      ++total;
      CHECK(s.action != S);
      const Pose next = apply_action(s.current.pose, s.action);
      CHECK(s.options[s.label].frame.obs_key == observation_key(ep.scene_id, next));
      std::set<ObservationKey> keys;
      int truths = 0;
      for (const auto& o : s.options) {
        keys.insert(o.frame.obs_key);
        truths += o.kind == ffs::OptionKind::kTruth;
      }
      CHECK(keys.size() == 4);
      CHECK(truths == 1);
    }
    CHECK(stats.generated + stats.skipped > 0);
  }
  CHECK(total > 100);
}

TEST_CASE("steps without three distinct negatives are skipped") {
  const Episode ep = make_episode("ep", {F, F, S});
  ffs::Config cfg;
  cfg.history = 0;
  cfg.n_hard = 3;
  cfg.n_cross = 0;
  std::string why;
  CHECK_FALSE(ffs::build_sample(ep, 0, std::vector<Episode>{ep}, cfg, 1, &why));
  CHECK(why.find("fewer than 3") != std::string::npos);
}

TEST_CASE("precondition violations") {
  const Episode ep = make_episode("ep", {F, F, F, F, F, F, S});
  const std::vector<Episode> alone = {ep};
  ffs::Config cfg;
  CHECK_THROWS_AS(ffs::build_sample(ep, 3, alone, cfg, 1), UsageError);  // k > t
  cfg.history = 0;
  CHECK_THROWS_AS(ffs::build_sample(ep, 6, alone, cfg, 1), UsageError);  // t+1 out of range
  CHECK_THROWS_AS(ffs::build_sample(ep, 2, alone, cfg, 1), UsageError);  // no other episode
  cfg.n_cross = 2;
  CHECK_THROWS_AS(ffs::build_sample(ep, 2, alone, cfg, 1), UsageError);  // 2 + 2 != 3
}

TEST_CASE("place_options is seeded and rejects duplicates") {
  const auto truth = option_at(0, ffs::OptionKind::kTruth);
  const std::vector<ffs::Option> negs = {option_at(1, ffs::OptionKind::kHard),
                                         option_at(2, ffs::OptionKind::kHard),
                                         option_at(3, ffs::OptionKind::kCross)};
  const auto a = ffs::place_options(truth, negs, 9, "x");
  CHECK(a == ffs::place_options(truth, negs, 9, "x"));
  CHECK(a.first[a.second] == truth);
  auto with_truth = negs;
  with_truth[1] = option_at(0, ffs::OptionKind::kHard);
  CHECK_THROWS_AS(ffs::place_options(truth, with_truth, 9, "x"), ValidationError);
  CHECK_THROWS_AS(ffs::place_options(truth, {negs[0], negs[1]}, 9, "x"), ValidationError);
}

TEST_CASE("label letters are uniform within a 4 sigma binomial band") {
  const auto truth = option_at(0, ffs::OptionKind::kTruth);
  const std::vector<ffs::Option> negs = {option_at(1, ffs::OptionKind::kHard),
                                         option_at(2, ffs::OptionKind::kHard),
                                         option_at(3, ffs::OptionKind::kCross)};
  const int n = 10000;
  std::array<int, 4> hist{};
  for (int i = 0; i < n; ++i) {
    ++hist[ffs::place_options(truth, negs, 77, "s" + std::to_string(i)).second];
  }
  const double band = 4 * std::sqrt(n * 0.25 * 0.75);
  for (int c : hist) CHECK(std::abs(c - n / 4.0) <= band);
}

TEST_CASE("action balancing") {
  std::vector<ffs::Sample> v;
  auto add = [&](int k, Action a) {
    for (int i = 0; i < k; ++i) {
      ffs::Sample s;
      s.sample_id = std::string(action_name(a)) + std::to_string(10000 + i);
      s.action = a;
      v.push_back(s);
    }
  };
  add(500, F), add(200, L), add(300, R);
  const auto b = ffs::balance_by_action(v, 3);
  std::array<int, 4> c{};
  for (const auto& s : b) ++c[static_cast<int>(s.action)];
  CHECK(c == std::array<int, 4>{200, 200, 200, 0});
  CHECK(b == ffs::balance_by_action(v, 3));

  std::vector<ffs::Sample> single(v.begin(), v.begin() + 500);
  CHECK(ffs::balance_by_action(single, 3).size() == 500);
}

TEST_CASE("prompt rendering") {
  ffs::Sample s;
  s.history.resize(4);
  s.action = L;
  s.label = 2;
  const ffs::Prompt p = ffs::render_prompt(s);
  CHECK(p.text == golden("ffs_prompt_k4_turn_left.txt"));
  CHECK(count_of(p.text, "<image>") == 9);
  CHECK(p.text.find("TURN_LEFT") != std::string::npos);
  CHECK(p.target == "C");
  CHECK(std::string(ffs::kPromptTemplate) == golden("ffs_template.txt"));

  s.history.clear();
  const ffs::Prompt none = ffs::render_prompt(s);
  CHECK(count_of(none.text, "<image>") == 5);
  CHECK(none.text.find("history observation none,") != std::string::npos);
}

TEST_CASE("verification and tampering") {
  const auto eps = corpus();
  ffs::Config cfg;
  std::vector<ffs::Sample> samples;
  for (const Episode& ep : eps) {
    for (auto& s : ffs::generate_for_episode(ep, eps, cfg, 5)) samples.push_back(std::move(s));
  }
  samples = ffs::balance_by_action(std::move(samples), 5);
  std::vector<TaskSample> tasks;
  for (const auto& s : samples) tasks.push_back(ffs::to_task_sample(s));
  REQUIRE(!tasks.empty());
  CHECK(tasks[0].image_refs.size() == 1 + 4 + 4);
  CHECK(tasks[0].aux.at("neg_kinds").size() == 4);

  const EpisodeIndex index = index_episodes(eps);
  const VerifyReport clean = ffs::verify(tasks, index);
  CHECK(clean.ok());
  const auto& kinds = clean.histograms.at("neg_kind");
  CHECK(kinds.at("HARD") == 2 * kinds.at("CROSS"));

  auto swapped = tasks;
  swapped[3].target = swapped[3].target == "A" ? "B" : "A";
  const VerifyReport bad = ffs::verify(swapped, index);
  REQUIRE(bad.mismatches.size() == 1);
  CHECK(bad.mismatches[0].sample_id == tasks[3].sample_id);
}
