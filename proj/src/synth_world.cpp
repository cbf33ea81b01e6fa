#include "navforge/synth_world.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <deque>

#include "navforge/error.hpp"
#include "navforge/rng.hpp"

namespace navforge {

namespace {

// East, north, west, south; index * 90 is the heading of the move.
constexpr std::array<Cell, 4> kSteps = {Cell{1, 0}, Cell{0, 1}, Cell{-1, 0}, Cell{0, -1}};

Cell operator+(Cell a, Cell b) { return Cell{a.x + b.x, a.y + b.y}; }

int step_direction(Cell from, Cell to) {
  const Cell d{to.x - from.x, to.y - from.y};
  for (int k = 0; k < 4; ++k) {
    if (kSteps[k] == d) return k;
  }
  throw Error("route cells are not 4-adjacent");
}

}  // namespace

Scene::Scene(std::string scene_id, int width, int height, double cell_size,
             std::uint64_t seed, double obstacle_density, std::vector<Cell> blocked,
             Cell start, Cell goal)
    : scene_id_(std::move(scene_id)),
      width_(width),
      height_(height),
      cell_size_(cell_size),
      seed_(seed),
      obstacle_density_(obstacle_density),
      blocked_(std::move(blocked)),
      occupied_(static_cast<std::size_t>(width) * static_cast<std::size_t>(height), 0),
      start_(start),
      goal_(goal) {
  if (width <= 0 || height <= 0) throw ValidationError(scene_id_, "scene must have positive size");
  std::sort(blocked_.begin(), blocked_.end());
  blocked_.erase(std::unique(blocked_.begin(), blocked_.end()), blocked_.end());
  for (Cell c : blocked_) {
    if (!in_bounds(c)) throw ValidationError(scene_id_, "blocked cell out of bounds");
    occupied_[index(c)] = 1;
  }
  if (!is_free(start_) || !is_free(goal_)) {
    throw ValidationError(scene_id_, "start and goal cells must be free");
  }
}

Pose Scene::cell_center(Cell c, double heading) const {
  return make_pose(c.x * cell_size_, c.y * cell_size_, heading);
}

Cell Scene::cell_at(double x, double y) const {
  return Cell{static_cast<int>(std::lround(x / cell_size_)),
              static_cast<int>(std::lround(y / cell_size_))};
}

std::vector<int> grid_distances(const Scene& scene, Cell from) {
  std::vector<int> dist(scene.cell_count(), kUnreachable);
  if (!scene.is_free(from)) return dist;
  std::deque<Cell> queue{from};
  dist[scene.index(from)] = 0;
  while (!queue.empty()) {
    const Cell c = queue.front();
    queue.pop_front();
    for (Cell step : kSteps) {
      const Cell n = c + step;
      if (scene.is_free(n) && dist[scene.index(n)] == kUnreachable) {
        dist[scene.index(n)] = dist[scene.index(c)] + 1;
        queue.push_back(n);
      }
    }
  }
  return dist;
}

Scene generate_scene(std::uint64_t seed, const SceneParams& params) {
  if (params.width < 4 || params.height < 4) {
    throw UsageError("scene width and height must be >= 4");
  }
  if (!(params.obstacle_density >= 0.0 && params.obstacle_density <= 0.4)) {
    throw UsageError("obstacle_density must be in [0, 0.4]");
  }
  for (int attempt = 0; attempt < params.max_attempts; ++attempt) {
    KeyedRng rng(seed, params.scene_id, "scene-attempt-" + std::to_string(attempt));
    std::vector<Cell> blocked;
    std::vector<Cell> free;
    for (int y = 0; y < params.height; ++y) {
      for (int x = 0; x < params.width; ++x) {
        if (params.obstacle_density > 0.0 && rng.uniform() < params.obstacle_density) {
          blocked.push_back(Cell{x, y});
        } else {
          free.push_back(Cell{x, y});
        }
      }
    }
    if (free.size() < 2) continue;
    const Cell start = free[rng.below(free.size())];
    Cell goal = start;
    while (goal == start) goal = free[rng.below(free.size())];
    Scene scene(params.scene_id, params.width, params.height, params.cell_size, seed,
                params.obstacle_density, std::move(blocked), start, goal);
    if (grid_distances(scene, start)[scene.index(goal)] != kUnreachable) return scene;
  }
  throw Error(params.scene_id + ": no connected start/goal after " +
              std::to_string(params.max_attempts) + " attempts");
}

Route route_between(const Scene& scene, Cell start, Cell goal, int start_heading,
                    std::uint64_t seed, const std::string& episode_id,
                    double wander_prob, int max_detours) {
  const std::vector<int> dist = grid_distances(scene, goal);
  if (!scene.is_free(start) || dist[scene.index(start)] == kUnreachable) {
    throw Error(episode_id + ": no path from start to goal in " + scene.scene_id());
  }
  KeyedRng rng(seed, episode_id, "route-wander");
  Route route{start, goal, static_cast<int>(normalize_heading(start_heading)), {start}};
  int direction = route.start_heading / 90;
  int detours = 0;
  Cell cur = start;
  while (!(cur == goal)) {
    Cell next = cur;
    if (detours < max_detours && wander_prob > 0.0 && rng.bernoulli(wander_prob)) {
      std::vector<Cell> options;
      for (Cell step : kSteps) {
        if (scene.is_free(cur + step)) options.push_back(cur + step);
      }
      next = options[rng.below(options.size())];
      ++detours;
    } else {
      const int here = dist[scene.index(cur)];
      // Keep going straight when that is on a shortest path; otherwise take
      // the first descending neighbour in E, N, W, S order.
      const Cell ahead = cur + kSteps[direction];
      if (scene.is_free(ahead) && dist[scene.index(ahead)] == here - 1) {
        next = ahead;
      } else {
        for (Cell step : kSteps) {
          const Cell n = cur + step;
          if (scene.is_free(n) && dist[scene.index(n)] == here - 1) {
            next = n;
            break;
          }
        }
      }
    }
    direction = step_direction(cur, next);
    route.cells.push_back(next);
    cur = next;
  }
  return route;
}

Route plan_route(const Scene& scene, std::uint64_t seed, const std::string& episode_id,
                 const TrajectoryParams& params) {
  if (params.min_len < 1 || params.max_len < params.min_len) {
    throw UsageError("trajectory lengths need 1 <= min_len <= max_len");
  }
  KeyedRng rng(seed, episode_id, "route-endpoints");
  const std::vector<int> component = grid_distances(scene, scene.start());
  std::vector<Cell> reachable;
  for (int y = 0; y < scene.height(); ++y) {
    for (int x = 0; x < scene.width(); ++x) {
      if (component[scene.index(Cell{x, y})] != kUnreachable) reachable.push_back(Cell{x, y});
    }
  }
  Cell start = scene.start();
  Cell goal = scene.goal();
  for (int attempt = 0; attempt < params.pair_attempts; ++attempt) {
    const Cell candidate = reachable[rng.below(reachable.size())];
    const std::vector<int> dist = grid_distances(scene, candidate);
    std::vector<Cell> goals;
    for (Cell c : reachable) {
      const int d = dist[scene.index(c)];
      if (d >= params.min_len && d <= params.max_len) goals.push_back(c);
    }
    if (!goals.empty()) {
      start = candidate;
      goal = goals[rng.below(goals.size())];
      break;
    }
  }
  const int heading = static_cast<int>(rng.below(4)) * 90;
  return route_between(scene, start, goal, heading, seed, episode_id, params.wander_prob,
                       params.max_detours);
}

std::vector<Action> route_actions(const Scene& scene, const Route& route,
                                  std::uint64_t seed, const std::string& episode_id,
                                  const Kinematics& kin) {
  const double turns_per_quarter = 90.0 / kin.turn_deg;
  const double moves_per_cell = scene.cell_size() / kin.forward_m;
  if (std::abs(turns_per_quarter - std::round(turns_per_quarter)) > 1e-9 ||
      std::abs(moves_per_cell - std::round(moves_per_cell)) > 1e-9) {
    throw UsageError("synthetic routes need 90/turn_deg and cell_size/forward_m integral");
  }
  const int quarter = static_cast<int>(std::round(turns_per_quarter));
  const int moves = static_cast<int>(std::round(moves_per_cell));
  KeyedRng rng(seed, episode_id, "route-u-turn");

  std::vector<Action> actions;
  int heading = route.start_heading;
  for (std::size_t i = 1; i < route.cells.size(); ++i) {
    const int target = step_direction(route.cells[i - 1], route.cells[i]) * 90;
    const int delta = static_cast<int>(normalize_heading(target - heading));
    if (delta == 90) {
      actions.insert(actions.end(), quarter, Action::kTurnLeft);
    } else if (delta == 270) {
      actions.insert(actions.end(), quarter, Action::kTurnRight);
    } else if (delta == 180) {
      const Action turn = rng.bernoulli(0.5) ? Action::kTurnLeft : Action::kTurnRight;
      actions.insert(actions.end(), 2 * quarter, turn);
    }
    heading = target;
    actions.insert(actions.end(), moves, Action::kMoveForward);
  }
  actions.push_back(Action::kStop);
  return actions;
}

Episode episode_from_route(const Scene& scene, const Route& route, std::uint64_t seed,
                           const std::string& episode_id, const Kinematics& kin) {
  Episode ep;
  ep.episode_id = episode_id;
  ep.scene_id = scene.scene_id();
  ep.actions = route_actions(scene, route, seed, episode_id, kin);
  ep.frames = fold_frames(scene.scene_id(), scene.cell_center(route.start, route.start_heading),
                          ep.actions, kin);
  ep.instruction = synth_instruction(ep, seed);
  return ep;
}

Episode generate_trajectory(const Scene& scene, std::uint64_t seed,
                            const std::string& episode_id, const TrajectoryParams& params,
                            const Kinematics& kin) {
  return episode_from_route(scene, plan_route(scene, seed, episode_id, params), seed,
                            episode_id, kin);
}

namespace {

constexpr std::array<const char*, 4> kStraight = {
    "go straight", "walk forward", "continue straight ahead", "walk straight down the hall"};
constexpr std::array<const char*, 3> kLeft = {"turn left", "take a left turn",
                                              "turn to your left"};
constexpr std::array<const char*, 3> kRight = {"turn right", "take a right turn",
                                               "turn to your right"};
constexpr std::array<const char*, 2> kAround = {"turn around", "turn all the way around"};

template <std::size_t N>
const char* pick(KeyedRng& rng, const std::array<const char*, N>& options) {
  return options[rng.below(N)];
}

}  // namespace

std::string synth_instruction(const Episode& episode, std::uint64_t seed) {
  KeyedRng rng(seed, episode.episode_id, "instruction");
  std::vector<std::string> clauses;
  const auto& acts = episode.actions;
  std::size_t i = 0;
  while (i < acts.size() && acts[i] != Action::kStop) {
    std::size_t j = i;
    while (j < acts.size() && acts[j] == acts[i]) ++j;
    const std::size_t run = j - i;
    switch (acts[i]) {
      case Action::kMoveForward:
        clauses.emplace_back(pick(rng, kStraight));
        break;
      case Action::kTurnLeft:
      case Action::kTurnRight:
        if (run >= 12) {
          clauses.emplace_back(pick(rng, kAround));
        } else {
          clauses.emplace_back(acts[i] == Action::kTurnLeft ? pick(rng, kLeft)
                                                            : pick(rng, kRight));
        }
        break;
      case Action::kStop:
        break;
    }
    i = j;
  }
  std::string text;
  for (std::size_t k = 0; k < clauses.size(); ++k) {
    if (k > 0) text += ", then ";
    text += clauses[k];
  }
  text += text.empty() ? "stop where you are" : " and then stop";
  return text;
}

Json scene_to_json(const Scene& scene) {
  Json blocked = Json::array();
  for (Cell c : scene.blocked()) blocked.push_back({c.x, c.y});
  return Json{{"v", kSchemaVersion},
              {"scene_id", scene.scene_id()},
              {"width", scene.width()},
              {"height", scene.height()},
              {"cell_size", scene.cell_size()},
              {"seed", scene.seed()},
              {"obstacle_density", scene.obstacle_density()},
              {"start", {scene.start().x, scene.start().y}},
              {"goal", {scene.goal().x, scene.goal().y}},
              {"blocked", std::move(blocked)}};
}

Scene scene_from_json(const Json& j) {
  auto cell = [](const Json& v) { return Cell{v.at(0).get<int>(), v.at(1).get<int>()}; };
  std::vector<Cell> blocked;
  for (const Json& c : j.at("blocked")) blocked.push_back(cell(c));
  return Scene(j.at("scene_id").get<std::string>(), j.at("width").get<int>(),
               j.at("height").get<int>(), j.at("cell_size").get<double>(),
               j.at("seed").get<std::uint64_t>(), j.at("obstacle_density").get<double>(),
               std::move(blocked), cell(j.at("start")), cell(j.at("goal")));
}

}  // namespace navforge
