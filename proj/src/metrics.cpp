#include "navforge/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <queue>

#include "navforge/error.hpp"

namespace navforge::metrics {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

}  // namespace

GeodesicField::GeodesicField(const Scene& scene, Cell source)
    : scene_(&scene), source_(source), dist_(scene.cell_count(), kInf) {
  if (!scene.is_free(source)) return;
  const double step = scene.cell_size();
  const double diag = std::sqrt(2.0) * step;
  using Item = std::pair<double, std::size_t>;
  std::priority_queue<Item, std::vector<Item>, std::greater<>> queue;
  dist_[scene.index(source)] = 0.0;
  queue.push({0.0, scene.index(source)});
  const auto w = static_cast<std::size_t>(scene.width());
  while (!queue.empty()) {
    const auto [d, idx] = queue.top();
    queue.pop();
    if (d > dist_[idx]) continue;
    const Cell c{static_cast<int>(idx % w), static_cast<int>(idx / w)};
    for (int dy = -1; dy <= 1; ++dy) {
      for (int dx = -1; dx <= 1; ++dx) {
        if (dx == 0 && dy == 0) continue;
        const Cell n{c.x + dx, c.y + dy};
        if (!scene.is_free(n)) continue;
        if (dx != 0 && dy != 0 &&
            (!scene.is_free({c.x + dx, c.y}) || !scene.is_free({c.x, c.y + dy}))) {
          continue;
        }
        const double nd = d + (dx != 0 && dy != 0 ? diag : step);
        const std::size_t ni = scene.index(n);
        if (nd < dist_[ni]) {
          dist_[ni] = nd;
          queue.push({nd, ni});
        }
      }
    }
  }
}

double GeodesicField::to(Cell target) const {
  if (!scene_->in_bounds(target)) return kInf;
  return dist_[scene_->index(target)];
}

double euclidean(const Pose& a, const Pose& b) { return std::hypot(a.x - b.x, a.y - b.y); }

double geodesic_distance(const Scene& scene, const Pose& a, const Pose& b) {
  const Cell ca = scene.cell_at(a.x, a.y);
  const Cell cb = scene.cell_at(b.x, b.y);
  if (!scene.is_free(ca) || !scene.is_free(cb)) return kInf;
  if (ca == cb) return euclidean(a, b);
  return GeodesicField(scene, ca).to(cb);
}

NavError navigation_error(const Pose& final_pose, const Pose& goal, const Scene* scene) {
  if (scene == nullptr) return {euclidean(final_pose, goal), true};
  const double d = geodesic_distance(*scene, final_pose, goal);
  return {d, std::isfinite(d)};
}

double path_length(std::span<const Pose> path) {
  double total = 0.0;
  for (std::size_t i = 1; i < path.size(); ++i) total += euclidean(path[i - 1], path[i]);
  return total;
}

double dtw(std::span<const Pose> a, std::span<const Pose> b, const PointDistance& dist) {
  if (a.empty() || b.empty()) throw UsageError("dtw needs nonempty paths");
  const std::size_t m = b.size();
  std::vector<double> prev(m + 1, kInf), cur(m + 1, kInf);
  prev[0] = 0.0;
  for (std::size_t i = 1; i <= a.size(); ++i) {
    cur[0] = kInf;
    for (std::size_t j = 1; j <= m; ++j) {
      const double best = std::min({prev[j - 1], prev[j], cur[j - 1]});
      cur[j] = dist(a[i - 1], b[j - 1]) + best;
    }
    std::swap(prev, cur);
  }
  return prev[m];
}

double ndtw(std::span<const Pose> path, std::span<const Pose> reference, double d_success,
            const PointDistance& dist) {
  if (d_success <= 0) throw UsageError("d_success must be positive");
  return std::exp(-dtw(path, reference, dist) /
                  (static_cast<double>(reference.size()) * d_success));
}

PathEval evaluate_path(std::span<const Pose> path, std::span<const Pose> reference,
                       const Pose& goal, const EvalOptions& options) {
  if (path.empty() || reference.empty()) throw UsageError("path and reference must be nonempty");
  if (options.d_success <= 0) throw UsageError("d_success must be positive");
  if (options.geodesic_dtw && options.scene == nullptr) {
    throw UsageError("geodesic nDTW needs a scene");
  }
  PathEval out;
  const NavError ne = navigation_error(path.back(), goal, options.scene);
  out.ne = ne.meters;
  out.reachable = ne.reachable;
  out.success = ne.reachable && ne.meters <= options.d_success;

  if (options.scene == nullptr) {
    for (const Pose& p : path) {
      out.oracle_success = out.oracle_success || euclidean(p, goal) <= options.d_success;
    }
  } else {
    const Scene& scene = *options.scene;
    const Cell goal_cell = scene.cell_at(goal.x, goal.y);
    const GeodesicField field(scene, goal_cell);
    for (const Pose& p : path) {
      const Cell c = scene.cell_at(p.x, p.y);
      const double d = !scene.is_free(c) ? kInf : c == goal_cell ? euclidean(p, goal) : field.to(c);
      out.oracle_success = out.oracle_success || d <= options.d_success;
    }
  }
  out.oracle_success = out.oracle_success || out.success;

  const double l = path_length(reference);
  const double p = path_length(path);
  const double denom = std::max(p, l);
  out.spl = out.success ? (denom > 0 ? l / denom : 1.0) : 0.0;

  if (options.geodesic_dtw) {
    const Scene& scene = *options.scene;
    std::map<Cell, GeodesicField> fields;
    auto dist = [&](const Pose& a, const Pose& b) {
      const Cell ca = scene.cell_at(a.x, a.y);
      const Cell cb = scene.cell_at(b.x, b.y);
      if (!scene.is_free(ca) || !scene.is_free(cb)) return kInf;
      if (ca == cb) return euclidean(a, b);
      auto it = fields.find(cb);
      if (it == fields.end()) it = fields.emplace(cb, GeodesicField(scene, cb)).first;
      return it->second.to(ca);
    };
    out.ndtw = ndtw(path, reference, options.d_success, dist);
  } else {
    out.ndtw = ndtw(path, reference, options.d_success);
  }
  return out;
}

CorpusEval summarize(std::span<const PathEval> evals) {
  CorpusEval c;
  c.episodes = evals.size();
  if (evals.empty()) return c;
  std::size_t reachable = 0;
  for (const PathEval& e : evals) {
    if (e.reachable) {
      c.ne += e.ne;
      ++reachable;
    } else {
      ++c.unreachable;
    }
    c.sr += e.success ? 1.0 : 0.0;
    c.os += e.oracle_success ? 1.0 : 0.0;
    c.spl += e.spl;
    c.ndtw += e.ndtw;
  }
  const double n = static_cast<double>(evals.size());
  c.ne = reachable > 0 ? c.ne / static_cast<double>(reachable) : 0.0;
  c.sr /= n;
  c.os /= n;
  c.spl /= n;
  c.ndtw /= n;
  return c;
}

Json corpus_to_json(const CorpusEval& c) {
  return Json{{"episodes", c.episodes}, {"unreachable", c.unreachable}, {"ne", c.ne},
              {"sr", c.sr},             {"os", c.os},                   {"spl", c.spl},
              {"ndtw", c.ndtw}};
}

}  // namespace navforge::metrics
