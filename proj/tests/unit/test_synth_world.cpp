#include <doctest.h>

#include <deque>
#include <set>

#include "navforge/error.hpp"
#include "navforge/synth_world.hpp"

using namespace navforge;

namespace {

constexpr Action F = Action::kMoveForward, L = Action::kTurnLeft, R = Action::kTurnRight,
                 S = Action::kStop;

// Plain BFS over the serialized blocked list, independent of Scene's grid.
bool connected(const Json& j, Cell from, Cell to) {
  const int w = j.at("width"), h = j.at("height");
  std::set<std::pair<int, int>> blocked;
  for (const Json& c : j.at("blocked")) blocked.insert({c.at(0).get<int>(), c.at(1).get<int>()});
  std::set<std::pair<int, int>> seen = {{from.x, from.y}};
  std::deque<std::pair<int, int>> queue = {{from.x, from.y}};
  while (!queue.empty()) {
    auto [x, y] = queue.front();
    queue.pop_front();
    if (x == to.x && y == to.y) return true;
    const int dx[] = {1, -1, 0, 0}, dy[] = {0, 0, 1, -1};
    for (int k = 0; k < 4; ++k) {
      const std::pair<int, int> n{x + dx[k], y + dy[k]};
      if (n.first < 0 || n.second < 0 || n.first >= w || n.second >= h) continue;
      if (blocked.count(n) || !seen.insert(n).second) continue;
      queue.push_back(n);
    }
  }
  return false;
}

Scene open_scene(int w, int h, std::vector<Cell> blocked = {}, Cell start = {0, 0},
                 Cell goal = {0, 1}) {
  return Scene("test_scene", w, h, 0.25, 0, 0.0, std::move(blocked), start, goal);
}

}  // namespace

TEST_CASE("density zero yields no obstacles") {
  SceneParams p;
  p.obstacle_density = 0.0;
  const Scene s = generate_scene(7, p);
  CHECK(s.blocked().empty());
}

TEST_CASE("scene generation is deterministic") {
  SceneParams p;
  p.width = 8;
  p.height = 8;
  p.obstacle_density = 0.3;
  const Scene a = generate_scene(7, p);
  const Scene b = generate_scene(7, p);
  CHECK(a == b);
  CHECK(scene_to_json(a).dump() == scene_to_json(b).dump());
  CHECK(scene_to_json(a).dump() != scene_to_json(generate_scene(8, p)).dump());
}

TEST_CASE("start and goal are free and connected") {
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    SceneParams p;
    p.obstacle_density = 0.35;
    const Scene s = generate_scene(seed, p);
    CHECK(s.is_free(s.start()));
    CHECK(s.is_free(s.goal()));
    CHECK(connected(scene_to_json(s), s.start(), s.goal()));
  }
}

TEST_CASE("invalid scene parameters are rejected") {
  SceneParams small;
  small.width = 3;
  CHECK_THROWS_AS(generate_scene(1, small), UsageError);
  SceneParams dense;
  dense.obstacle_density = 0.9;
  CHECK_THROWS_AS(generate_scene(1, dense), UsageError);
}

TEST_CASE("scene JSON round trip") {
  SceneParams p;
  p.obstacle_density = 0.25;
  const Scene s = generate_scene(3, p);
  CHECK(scene_from_json(scene_to_json(s)) == s);
}

TEST_CASE("grid distances") {
  const Scene s = open_scene(5, 5, {{1, 0}, {1, 1}, {1, 2}, {1, 3}});
  const auto d = grid_distances(s, {0, 0});
  CHECK(d[s.index({0, 4})] == 4);
  CHECK(d[s.index({2, 0})] == 10);  // up 4, across 2, down 4
  CHECK(d[s.index({1, 0})] == kUnreachable);
}

TEST_CASE("straight corridor route needs no turns") {
  std::vector<Cell> walls;
  for (int x = 0; x < 6; ++x) walls.push_back({x, 0}), walls.push_back({x, 2});
  const Scene s = open_scene(6, 3, walls, {0, 1}, {4, 1});
  const Route r = route_between(s, {0, 1}, {4, 1}, 0, 1, "ep", 0.0, 0);
  CHECK(route_actions(s, r, 1, "ep") == std::vector<Action>{F, F, F, F, S});
}

TEST_CASE("goal to the left starts with six left turns and is reached") {
  const Scene s = open_scene(4, 4);
  const Route r = route_between(s, {0, 1}, {0, 3}, 0, 1, "ep", 0.0, 0);
  const auto actions = route_actions(s, r, 1, "ep");
  REQUIRE(actions.size() >= 6);
  for (int i = 0; i < 6; ++i) CHECK(actions[i] == L);
  const Pose end = apply_sequence(s.cell_center({0, 1}, 0), actions);
  const Pose goal = s.cell_center({0, 3});
  CHECK(std::abs(end.x - goal.x) < 1e-9);
  CHECK(std::abs(end.y - goal.y) < 1e-9);
}

TEST_CASE("a reversal turns 180 degrees") {
  const Scene s = open_scene(4, 4);
  const Route r = route_between(s, {2, 1}, {0, 1}, 0, 5, "ep", 0.0, 0);
  const auto actions = route_actions(s, r, 5, "ep");
  const ActionCounts c = action_counts(actions);
  CHECK(c.left + c.right == 12);
  CHECK((c.left == 12 || c.right == 12));
}

TEST_CASE("trajectories are valid, deterministic and end at their goal") {
  SceneParams p;
  p.obstacle_density = 0.25;
  const Scene s = generate_scene(11, p);
  TrajectoryParams tp;
  tp.wander_prob = 0.2;
  for (int e = 0; e < 20; ++e) {
    const std::string id = "ep_" + std::to_string(e);
    const Episode a = generate_trajectory(s, 11, id, tp);
    CHECK_NOTHROW(validate_episode(a));
    CHECK(a == generate_trajectory(s, 11, id, tp));
    for (const FrameRef& f : a.frames) {
      CHECK(s.is_free(s.cell_at(f.pose.x, f.pose.y)));
    }
    const Route r = plan_route(s, 11, id, tp);
    const Pose end = a.frames.back().pose;
    CHECK(s.cell_at(end.x, end.y) == r.goal);
  }
}

TEST_CASE("synthetic instructions grow with the number of segments") {
  Episode one;
  one.episode_id = "one";
  one.actions = {F, F, F, F, S};
  Episode four;
  four.episode_id = "four";
  four.actions = {F, L, L, L, L, L, L, F, R, R, R, R, R, R, F, S};
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const std::string short_text = synth_instruction(one, seed);
    const std::string long_text = synth_instruction(four, seed);
    CHECK(word_count(short_text) <= 8);
    CHECK(word_count(short_text) >= 4);
    CHECK(word_count(long_text) > word_count(short_text));
    CHECK(synth_instruction(one, seed) == short_text);
  }
}
