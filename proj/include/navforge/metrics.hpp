#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

#include "navforge/core_model.hpp"
#include "navforge/json.hpp"
#include "navforge/synth_world.hpp"

// Path evaluation: navigation error, success, oracle success, SPL and nDTW.
namespace navforge::metrics {

// Shortest free-space distances from one cell over the 8-connected grid
// (diagonal steps cost sqrt(2) * cell_size and may not cut blocked corners).
class GeodesicField {
 public:
  GeodesicField(const Scene& scene, Cell source);

  Cell source() const { return source_; }
  // Infinity when `target` is blocked, out of bounds or disconnected.
  double to(Cell target) const;

 private:
  const Scene* scene_;
  Cell source_;
  std::vector<double> dist_;
};

// Geodesic distance between two positions: Euclidean inside one cell,
// otherwise the grid distance between their cells.
double geodesic_distance(const Scene& scene, const Pose& a, const Pose& b);

struct NavError {
  double meters = 0.0;
  bool reachable = true;
};

// Euclidean without a scene; geodesic on the scene's free-space grid
// otherwise, infinite (reachable = false) when the goal cannot be reached.
NavError navigation_error(const Pose& final_pose, const Pose& goal,
                          const Scene* scene = nullptr);

double path_length(std::span<const Pose> path);

using PointDistance = std::function<double(const Pose&, const Pose&)>;

double euclidean(const Pose& a, const Pose& b);

// Dynamic time warping with match/insert/delete steps.
double dtw(std::span<const Pose> a, std::span<const Pose> b,
           const PointDistance& dist = euclidean);

double ndtw(std::span<const Pose> path, std::span<const Pose> reference, double d_success,
            const PointDistance& dist = euclidean);

struct PathEval {
  double ne = 0.0;
  bool success = false;
  bool oracle_success = false;
  double spl = 0.0;
  double ndtw = 1.0;
  bool reachable = true;
};

struct EvalOptions {
  double d_success = 3.0;
  const Scene* scene = nullptr;  // enables geodesic NE
  bool geodesic_dtw = false;     // geodesic point distances in nDTW (needs scene)
};

// Throws UsageError on an empty path or reference.
PathEval evaluate_path(std::span<const Pose> path, std::span<const Pose> reference,
                       const Pose& goal, const EvalOptions& options = {});

struct CorpusEval {
  std::size_t episodes = 0;
  std::size_t unreachable = 0;
  double ne = 0.0;  // mean over reachable episodes
  double sr = 0.0;
  double os = 0.0;
  double spl = 0.0;
  double ndtw = 0.0;
};

CorpusEval summarize(std::span<const PathEval> evals);
Json corpus_to_json(const CorpusEval& eval);

}  // namespace navforge::metrics
