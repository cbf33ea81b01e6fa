#pragma once

#include <compare>
#include <cstdint>
#include <string>
#include <vector>

#include "navforge/core_model.hpp"
#include "navforge/json.hpp"

namespace navforge {

struct Cell {
  int x = 0;
  int y = 0;

  auto operator<=>(const Cell&) const = default;
};

struct SceneParams {
  std::string scene_id = "scene_0000";
  int width = 16;
  int height = 16;
  double obstacle_density = 0.2;
  double cell_size = 0.25;
  int max_attempts = 100;
};

// Occupancy grid world. Cell (cx, cy) has its center at
// (cx * cell_size, cy * cell_size).
class Scene {
 public:
  Scene() = default;
  Scene(std::string scene_id, int width, int height, double cell_size,
        std::uint64_t seed, double obstacle_density, std::vector<Cell> blocked,
        Cell start, Cell goal);

  const std::string& scene_id() const { return scene_id_; }
  int width() const { return width_; }
  int height() const { return height_; }
  double cell_size() const { return cell_size_; }
  std::uint64_t seed() const { return seed_; }
  double obstacle_density() const { return obstacle_density_; }
  const std::vector<Cell>& blocked() const { return blocked_; }
  Cell start() const { return start_; }
  Cell goal() const { return goal_; }

  bool in_bounds(Cell c) const {
    return c.x >= 0 && c.y >= 0 && c.x < width_ && c.y < height_;
  }
  bool is_free(Cell c) const { return in_bounds(c) && !occupied_[index(c)]; }
  std::size_t index(Cell c) const {
    return static_cast<std::size_t>(c.y) * static_cast<std::size_t>(width_) +
           static_cast<std::size_t>(c.x);
  }
  std::size_t cell_count() const { return occupied_.size(); }

  Pose cell_center(Cell c, double heading = 0.0) const;
  // Nearest cell to a metric position (may be out of bounds).
  Cell cell_at(double x, double y) const;

  friend bool operator==(const Scene& a, const Scene& b) {
    return a.scene_id_ == b.scene_id_ && a.width_ == b.width_ &&
           a.height_ == b.height_ && a.cell_size_ == b.cell_size_ &&
           a.seed_ == b.seed_ && a.obstacle_density_ == b.obstacle_density_ &&
           a.blocked_ == b.blocked_ && a.start_ == b.start_ && a.goal_ == b.goal_;
  }

 private:
  std::string scene_id_;
  int width_ = 0;
  int height_ = 0;
  double cell_size_ = 0.25;
  std::uint64_t seed_ = 0;
  double obstacle_density_ = 0.0;
  std::vector<Cell> blocked_;  // sorted
  std::vector<std::uint8_t> occupied_;
  Cell start_;
  Cell goal_;
};

// Random obstacles, resampled until the chosen start and goal cells are
// connected. Throws Error after `max_attempts` failed draws.
Scene generate_scene(std::uint64_t seed, const SceneParams& params);

inline constexpr int kUnreachable = -1;

// 4-connected BFS hop counts from `from`; kUnreachable where not reachable.
std::vector<int> grid_distances(const Scene& scene, Cell from);

struct TrajectoryParams {
  int min_len = 4;   // shortest-path length bounds, in cells
  int max_len = 40;
  double wander_prob = 0.0;
  int max_detours = 8;
  int pair_attempts = 200;
};

// Cell-level plan of one synthetic episode.
struct Route {
  Cell start;
  Cell goal;
  int start_heading = 0;  // multiple of 90
  std::vector<Cell> cells;  // start ... goal, 4-adjacent steps
};

// Walks from `start` to `goal` along the BFS distance field, stepping into a
// random free neighbour with probability `wander_prob` (at most
// `max_detours` times).
Route route_between(const Scene& scene, Cell start, Cell goal, int start_heading,
                    std::uint64_t seed, const std::string& episode_id,
                    double wander_prob, int max_detours);

// Picks a start/goal pair in the scene whose shortest path length lies in
// [min_len, max_len] (best effort), then routes between them.
Route plan_route(const Scene& scene, std::uint64_t seed,
                 const std::string& episode_id, const TrajectoryParams& params);

// Turn-to-face then move, in `kin` increments, followed by STOP.
std::vector<Action> route_actions(const Scene& scene, const Route& route,
                                  std::uint64_t seed, const std::string& episode_id,
                                  const Kinematics& kin = {});

Episode episode_from_route(const Scene& scene, const Route& route,
                           std::uint64_t seed, const std::string& episode_id,
                           const Kinematics& kin = {});

Episode generate_trajectory(const Scene& scene, std::uint64_t seed,
                            const std::string& episode_id,
                            const TrajectoryParams& params,
                            const Kinematics& kin = {});

// Templated instruction with one clause per motion segment.
std::string synth_instruction(const Episode& episode, std::uint64_t seed);

Json scene_to_json(const Scene& scene);
Scene scene_from_json(const Json& j);

}  // namespace navforge
