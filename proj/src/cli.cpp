#include "navforge/cli.hpp"

#include <openssl/evp.h>

#include <CLI11.hpp>
#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <iostream>
#include <map>
#include <memory>
#include <set>
#include <unordered_map>

#include "navforge/action_retrospection.hpp"
#include "navforge/error.hpp"
#include "navforge/future_frame.hpp"
#include "navforge/manifest.hpp"
#include "navforge/metrics.hpp"
#include "navforge/nav_samples.hpp"
#include "navforge/parallel.hpp"
#include "navforge/rng.hpp"
#include "navforge/synth_world.hpp"

namespace fs = std::filesystem;

namespace navforge::cli {

namespace {

template <class C, class F>
void visit_fields(C& c, F&& f) {
  f("seed", c.seed);
  f("workers", c.workers);
  f("forward_m", c.forward_m);
  f("turn_deg", c.turn_deg);
  f("scenes", c.scenes);
  f("episodes_per_scene", c.episodes_per_scene);
  f("width", c.width);
  f("height", c.height);
  f("obstacle_density", c.obstacle_density);
  f("cell_size", c.cell_size);
  f("min_len", c.min_len);
  f("max_len", c.max_len);
  f("wander_prob", c.wander_prob);
  f("format", c.format);
  f("check_files", c.check_files);
  f("pose_eps", c.pose_eps);
  f("alpha", c.alpha);
  f("beta", c.beta);
  f("gamma", c.gamma);
  f("phase_weights", c.phase_weights);
  f("epoch", c.epoch);
  f("stochastic", c.stochastic);
  f("gap_min", c.gap_min);
  f("gap_max", c.gap_max);
  f("ar_cap", c.ar_cap);
  f("ar_balance", c.ar_balance);
  f("ffs_history", c.ffs_history);
  f("n_hard", c.n_hard);
  f("n_cross", c.n_cross);
  f("ffs_cap", c.ffs_cap);
  f("ffs_balance", c.ffs_balance);
  f("ffs_dedup", c.ffs_dedup);
  f("nav_history", c.nav_history);
  f("stride", c.stride);
  f("history_mode", c.history_mode);
  f("lambda_ar", c.lambda_ar);
  f("lambda_ffs", c.lambda_ffs);
  f("ratio", c.ratio);
  f("stage", c.stage);
  f("d_success", c.d_success);
  f("geodesic_dtw", c.geodesic_dtw);
}

void log(const std::string& command, const std::string& message) {
  std::cerr << "navforge " << command << ": " << message << '\n';
}

}  // namespace

Json RunConfig::to_json(bool with_workers) const {
  Json j = Json::object();
  visit_fields(*this, [&](const char* name, const auto& value) {
    if (!with_workers && std::string_view(name) == "workers") return;
    j[name] = value;
  });
  return j;
}

void RunConfig::apply_json(const Json& j) {
  if (!j.is_object()) throw UsageError("config must be a JSON object");
  for (const auto& [key, value] : j.items()) {
    bool known = false;
    visit_fields(*this, [&](const char* name, auto& field) {
      if (key != name) return;
      known = true;
      try {
        value.get_to(field);
      } catch (const nlohmann::json::exception& e) {
        throw UsageError("config key '" + key + "': " + e.what());
      }
    });
    if (!known) throw UsageError("unknown config key '" + key + "'");
  }
}

std::string sha256_hex(std::string_view bytes) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), digest, &len, EVP_sha256(), nullptr) != 1) {
    throw Error("sha256 failed");
  }
  std::string out;
  char buf[3];
  for (unsigned int i = 0; i < len; ++i) {
    std::snprintf(buf, sizeof buf, "%02x", digest[i]);
    out += buf;
  }
  return out;
}

std::string file_sha256(const fs::path& path) { return sha256_hex(read_file(path)); }

namespace {

// Digest of a file, or of a directory as the sorted list of its files'
// relative paths and digests.
std::string input_digest(const fs::path& path) {
  if (fs::is_regular_file(path)) return file_sha256(path);
  if (!fs::is_directory(path)) throw UsageError("input not found: " + path.string());
  std::vector<std::string> entries;
  for (const auto& e : fs::recursive_directory_iterator(path)) {
    if (!e.is_regular_file()) continue;
    entries.push_back(fs::relative(e.path(), path).generic_string() + " " +
                      file_sha256(e.path()));
  }
  std::sort(entries.begin(), entries.end());
  std::string listing;
  for (const auto& e : entries) listing += e + "\n";
  return sha256_hex(listing);
}

Json input_entry(const std::string& path) {
  return Json{{"path", path}, {"sha256", input_digest(path)}};
}

struct Context {
  std::string command;
  RunConfig cfg;
  std::map<std::string, std::string> inputs;  // flag name -> path
  std::vector<std::string> input_list;        // mix --inputs
  std::string out;

  Kinematics kin() const { return Kinematics{cfg.forward_m, cfg.turn_deg}; }

  const std::string& input(const std::string& name) const {
    static const std::string empty;
    const auto it = inputs.find(name);
    return it == inputs.end() ? empty : it->second;
  }

  Json provenance() const {
    Json in = Json::object();
    for (const auto& [flag, path] : inputs) {
      if (!path.empty()) in[flag] = input_entry(path);
    }
    if (!input_list.empty()) {
      Json list = Json::array();
      for (const auto& p : input_list) list.push_back(input_entry(p));
      in["inputs"] = list;
    }
    return Json{{"tool", "navforge"},
                {"schema", kSchemaVersion},
                {"command", command},
                {"config", cfg.to_json()},
                {"inputs", in}};
  }

  Json header() const { return Json{{"v", kSchemaVersion}, {"provenance", provenance()}}; }

  void log(const std::string& message) const { cli::log(command, message); }
};

// JSON reports go to --out when given, else to stdout.
void emit_report(const Context& ctx, Json body) {
  Json doc{{"provenance", ctx.provenance()}};
  doc.update(body);
  const std::string text = doc.dump(2) + "\n";
  if (ctx.out.empty()) {
    std::cout << text;
  } else {
    write_file_atomic(ctx.out, text);
  }
}

std::vector<Episode> load_episodes(const Context& ctx) {
  std::vector<Episode> episodes = read_episodes(ctx.input("episodes"));
  for (const Episode& ep : episodes) validate_episode(ep, ctx.kin(), ctx.cfg.pose_eps);
  return episodes;
}

std::string padded(const char* fmt, int value) {
  char buf[32];
  std::snprintf(buf, sizeof buf, fmt, value);
  return buf;
}

template <class T>
std::vector<T> concat(std::vector<std::vector<T>> parts) {
  std::vector<T> out;
  for (auto& p : parts) std::move(p.begin(), p.end(), std::back_inserter(out));
  return out;
}

int cmd_synth(const Context& ctx) {
  const RunConfig& c = ctx.cfg;
  if (c.scenes < 1 || c.episodes_per_scene < 1) {
    throw UsageError("--scenes and --episodes-per-scene must be >= 1");
  }
  TrajectoryParams tp;
  tp.min_len = c.min_len;
  tp.max_len = c.max_len;
  tp.wander_prob = c.wander_prob;
  const Kinematics kin = ctx.kin();

  struct SceneOut {
    Scene scene;
    std::vector<Episode> episodes;
  };
  std::vector<SceneOut> results(static_cast<std::size_t>(c.scenes));
  parallel_for(results.size(), c.workers, [&](std::size_t s) {
    SceneParams sp;
    sp.scene_id = padded("scene_%04d", static_cast<int>(s));
    sp.width = c.width;
    sp.height = c.height;
    sp.obstacle_density = c.obstacle_density;
    sp.cell_size = c.cell_size;
    SceneOut out{generate_scene(c.seed, sp), {}};
    for (int e = 0; e < c.episodes_per_scene; ++e) {
      const std::string id = sp.scene_id + padded("_ep_%03d", e);
      Episode ep = generate_trajectory(out.scene, c.seed, id, tp, kin);
      validate_episode(ep, kin);
      out.episodes.push_back(std::move(ep));
    }
    results[s] = std::move(out);
  });

  const fs::path dir(ctx.out);
  std::vector<Episode> episodes;
  for (auto& r : results) {
    write_file_atomic(dir / "scenes" / (r.scene.scene_id() + ".json"),
                      scene_to_json(r.scene).dump() + "\n");
    std::move(r.episodes.begin(), r.episodes.end(), std::back_inserter(episodes));
  }
  write_manifest(std::span<const Episode>(episodes), dir / "episodes.jsonl", ctx.header());
  ctx.log("wrote " + std::to_string(episodes.size()) + " episodes in " +
          std::to_string(results.size()) + " scenes");
  return kExitOk;
}

int cmd_ingest(const Context& ctx) {
  IngestOptions opt;
  opt.format = parse_dataset_format(ctx.cfg.format);
  opt.kin = ctx.kin();
  opt.pose_eps = ctx.cfg.pose_eps;
  opt.check_files = ctx.cfg.check_files;
  opt.workers = ctx.cfg.workers;
  const IngestResult result = ingest_dataset(ctx.input("root"), opt);
  for (const IngestIssue& issue : result.issues) {
    ctx.log("skipped " + issue.episode_id + ": " + issue.message);
  }
  write_manifest(std::span<const Episode>(result.episodes), ctx.out, ctx.header());
  ctx.log("ingested " + std::to_string(result.episodes.size()) + " episodes, skipped " +
          std::to_string(result.issues.size()));
  return result.episodes.empty() && !result.issues.empty() ? kExitValidation : kExitOk;
}

int cmd_stats(const Context& ctx) {
  const std::vector<Episode> episodes = read_episodes(ctx.input("episodes"));
  emit_report(ctx, stats_to_json(dataset_stats(episodes)));
  return kExitOk;
}

int cmd_score(const Context& ctx) {
  const std::vector<Episode> episodes = load_episodes(ctx);
  const tripa::Weights w{ctx.cfg.alpha, ctx.cfg.beta, ctx.cfg.gamma};
  std::vector<tripa::DifficultyRecord> records =
      tripa::score_episodes(episodes, w, ctx.cfg.workers);
  if (records.size() >= static_cast<std::size_t>(tripa::kBuckets)) {
    std::unordered_map<std::string, int> bucket_of;
    for (const auto& r : tripa::bucketize(records)) bucket_of[r.sample_id] = r.bucket;
    for (auto& r : records) r.bucket = bucket_of.at(r.sample_id);
  } else {
    ctx.log("fewer than 4 records, buckets left unassigned");
  }
  tripa::write_scores(records, ctx.out, ctx.header());
  ctx.log("scored " + std::to_string(records.size()) + " episodes");
  return kExitOk;
}

int cmd_plan(const Context& ctx) {
  const std::vector<tripa::DifficultyRecord> scores = tripa::read_scores(ctx.input("scores"));
  std::vector<tripa::DifficultyRecord> records;
  if (ctx.input("samples").empty()) {
    records = scores;
  } else {
    std::unordered_map<std::string, const tripa::DifficultyRecord*> by_episode;
    for (const auto& r : scores) by_episode[r.sample_id] = &r;
    for (const TaskSample& s : read_samples(ctx.input("samples"))) {
      const auto it = by_episode.find(s.episode_id);
      if (it == by_episode.end()) {
        throw ValidationError(s.sample_id, "episode " + s.episode_id + " has no score");
      }
      tripa::DifficultyRecord r = *it->second;
      r.sample_id = s.sample_id;
      r.bucket = -1;
      records.push_back(std::move(r));
    }
  }
  for (auto& r : records) r.bucket = -1;
  records = tripa::bucketize(std::move(records));
  tripa::check_phase_weights(ctx.cfg.phase_weights);
  tripa::PlanOptions opt;
  opt.weights = ctx.cfg.phase_weights;
  opt.stochastic = ctx.cfg.stochastic;
  const tripa::EpochPlan plan = tripa::plan_epoch(records, ctx.cfg.seed, ctx.cfg.epoch, opt);
  tripa::write_plan(plan, ctx.out, ctx.provenance());
  const tripa::PlanReport report = tripa::verify_plan(plan, records);
  std::string sizes;
  for (const auto& phase : plan.phases) sizes += " " + std::to_string(phase.size());
  ctx.log("planned " + std::to_string(records.size()) + " samples, phase sizes" + sizes +
          (report.expected_monotone ? "" : " (expected difficulty not monotone)"));
  return kExitOk;
}

int cmd_verify_plan(const Context& ctx) {
  const tripa::EpochPlan plan = tripa::read_plan(ctx.input("plan"));
  std::vector<tripa::DifficultyRecord> records;
  if (ctx.input("scores").empty()) {
    for (const auto& phase : plan.phases) {
      for (const tripa::PlanItem& item : phase) {
        records.push_back({item.sample_id, 0, 0, 0, item.d, item.bucket});
      }
    }
    std::sort(records.begin(), records.end(),
              [](const auto& a, const auto& b) { return a.sample_id < b.sample_id; });
    records.erase(std::unique(records.begin(), records.end(),
                              [](const auto& a, const auto& b) {
                                return a.sample_id == b.sample_id;
                              }),
                  records.end());
  } else {
    records = tripa::bucketize(tripa::read_scores(ctx.input("scores")));
  }
  const tripa::PlanReport report = tripa::verify_plan(plan, records);
  emit_report(ctx, tripa::plan_report_to_json(report));
  for (const auto& id : report.duplicates) ctx.log("duplicate " + id);
  for (const auto& id : report.missing) ctx.log("missing " + id);
  for (const auto& id : report.unknown) ctx.log("unknown " + id);
  return report.ok() ? kExitOk : kExitValidation;
}

int cmd_gen_ar(const Context& ctx) {
  const std::vector<Episode> episodes = load_episodes(ctx);
  ar::Config cfg;
  cfg.gap_min = ctx.cfg.gap_min;
  cfg.gap_max = ctx.cfg.gap_max;
  cfg.per_episode_cap = ctx.cfg.ar_cap;
  cfg.kin = ctx.kin();
  const std::uint64_t seed = ctx.cfg.seed;
  std::vector<ar::Sample> samples = concat(parallel_map(
      episodes, ctx.cfg.workers, [&](const Episode& ep) { return ar::sample_pairs(ep, cfg, seed); }));
  const std::size_t drawn = samples.size();
  if (ctx.cfg.ar_balance == "category") {
    samples = ar::balance_by_category(std::move(samples), seed);
  } else if (ctx.cfg.ar_balance == "tokens") {
    samples = ar::balance_by_tokens(std::move(samples), seed);
  } else if (ctx.cfg.ar_balance != "none") {
    throw UsageError("unknown balance mode '" + ctx.cfg.ar_balance + "'");
  }
  std::vector<TaskSample> out;
  out.reserve(samples.size());
  for (const ar::Sample& s : samples) out.push_back(ar::to_task_sample(s));
  write_manifest(std::span<const TaskSample>(out), ctx.out, ctx.header());
  ctx.log("drew " + std::to_string(drawn) + " pairs, kept " + std::to_string(out.size()));
  return kExitOk;
}

int cmd_gen_ffs(const Context& ctx) {
  const std::vector<Episode> episodes = load_episodes(ctx);
  ffs::Config cfg;
  cfg.history = ctx.cfg.ffs_history;
  cfg.n_hard = ctx.cfg.n_hard;
  cfg.n_cross = ctx.cfg.n_cross;
  cfg.per_episode_cap = ctx.cfg.ffs_cap;
  cfg.balance = ctx.cfg.ffs_balance;
  if (ctx.cfg.ffs_dedup == "observation") {
    cfg.dedup = ffs::DedupKey::kObservation;
  } else if (ctx.cfg.ffs_dedup == "image_path") {
    cfg.dedup = ffs::DedupKey::kImagePath;
  } else {
    throw UsageError("unknown dedup mode '" + ctx.cfg.ffs_dedup + "'");
  }
  cfg.kin = ctx.kin();
  const std::uint64_t seed = ctx.cfg.seed;

  std::vector<ffs::GenerationStats> stats(episodes.size());
  std::vector<std::vector<ffs::Sample>> parts(episodes.size());
  parallel_for(episodes.size(), ctx.cfg.workers, [&](std::size_t i) {
    parts[i] = ffs::generate_for_episode(episodes[i], episodes, cfg, seed, &stats[i]);
  });
  std::vector<ffs::Sample> samples = concat(std::move(parts));
  std::size_t skipped = 0;
  for (const auto& s : stats) skipped += s.skipped;
  if (cfg.balance) samples = ffs::balance_by_action(std::move(samples), seed);

  std::vector<TaskSample> out;
  out.reserve(samples.size());
  for (const ffs::Sample& s : samples) out.push_back(ffs::to_task_sample(s, cfg.dedup));
  write_manifest(std::span<const TaskSample>(out), ctx.out, ctx.header());
  ctx.log("kept " + std::to_string(out.size()) + " samples, skipped " + std::to_string(skipped) +
          " steps without three distinct negatives");
  return kExitOk;
}

std::unordered_map<std::string, double> difficulty_by_episode(const Context& ctx) {
  std::unordered_map<std::string, double> out;
  if (ctx.input("scores").empty()) return out;
  for (const auto& r : tripa::read_scores(ctx.input("scores"))) out[r.sample_id] = r.d;
  return out;
}

int cmd_gen_nav(const Context& ctx) {
  const std::vector<Episode> episodes = load_episodes(ctx);
  nav::Config cfg;
  cfg.history_len = ctx.cfg.nav_history;
  cfg.stride = ctx.cfg.stride;
  cfg.mode = nav::parse_history_mode(ctx.cfg.history_mode);
  const auto difficulty = difficulty_by_episode(ctx);
  std::vector<TaskSample> out = concat(parallel_map(episodes, ctx.cfg.workers, [&](const Episode& ep) {
    std::vector<TaskSample> samples;
    for (nav::Sample& s : nav::expand(ep, cfg)) {
      if (const auto it = difficulty.find(ep.episode_id); it != difficulty.end()) {
        s.difficulty = it->second;
      }
      samples.push_back(nav::to_task_sample(s, cfg));
    }
    return samples;
  }));
  write_manifest(std::span<const TaskSample>(out), ctx.out, ctx.header());
  ctx.log("wrote " + std::to_string(out.size()) + " samples");
  return kExitOk;
}

int cmd_mix(const Context& ctx) {
  if (ctx.input_list.empty()) throw UsageError("--inputs needs at least one manifest");
  std::vector<std::vector<TaskSample>> inputs;
  for (const auto& path : ctx.input_list) inputs.push_back(read_samples(path));
  const auto difficulty = difficulty_by_episode(ctx);
  for (auto& input : inputs) {
    for (TaskSample& s : input) {
      if (s.difficulty) continue;
      if (const auto it = difficulty.find(s.episode_id); it != difficulty.end()) {
        s.difficulty = it->second;
      }
    }
  }
  nav::MixOptions opt;
  opt.weights = {ctx.cfg.lambda_ar, ctx.cfg.lambda_ffs};
  if (!ctx.cfg.ratio.empty()) {
    if (ctx.cfg.ratio.size() != 3) throw UsageError("--ratio takes NAV AR FFS proportions");
    opt.ratio = std::array<double, 3>{ctx.cfg.ratio[0], ctx.cfg.ratio[1], ctx.cfg.ratio[2]};
  }
  if (ctx.cfg.stage != 1 && ctx.cfg.stage != 2) throw UsageError("--stage must be 1 or 2");
  opt.stage = ctx.cfg.stage;
  opt.seed = ctx.cfg.seed;
  const std::vector<TaskSample> out = nav::mix(std::move(inputs), opt);
  write_manifest(std::span<const TaskSample>(out), ctx.out, ctx.header());
  std::array<std::size_t, 3> counts{};
  for (const auto& s : out) ++counts[static_cast<std::size_t>(s.task)];
  ctx.log("mixed " + std::to_string(out.size()) + " samples (NAV " + std::to_string(counts[0]) +
          ", AR " + std::to_string(counts[1]) + ", FFS " + std::to_string(counts[2]) + ")");
  return kExitOk;
}

int cmd_verify(const Context& ctx) {
  const std::vector<Episode> episodes = read_episodes(ctx.input("episodes"));
  const EpisodeIndex index = index_episodes(episodes);
  const std::vector<TaskSample> samples = read_samples(ctx.input("samples"));
  std::vector<VerifyReport> reports = {ar::verify(samples, index, ctx.kin(), ctx.cfg.pose_eps),
                                       ffs::verify(samples, index, ctx.kin()),
                                       nav::verify(samples, index)};
  Json list = Json::array();
  std::size_t checked = 0, mismatches = 0;
  for (const VerifyReport& r : reports) {
    checked += r.checked;
    mismatches += r.mismatches.size();
    for (const Mismatch& m : r.mismatches) ctx.log(m.sample_id + ": " + m.reason);
    if (r.checked > 0) list.push_back(r.to_json());
  }
  emit_report(ctx, Json{{"checked", checked}, {"mismatch_count", mismatches}, {"reports", list}});
  ctx.log("checked " + std::to_string(checked) + " samples, " + std::to_string(mismatches) +
          " mismatches");
  return mismatches == 0 ? kExitOk : kExitValidation;
}

Pose pose_from_json(const Json& j) {
  return make_pose(j.at("x").get<double>(), j.at("y").get<double>(), j.value("heading", 0.0));
}

int cmd_eval(const Context& ctx) {
  const std::vector<Episode> episodes = read_episodes(ctx.input("episodes"));
  const EpisodeIndex index = index_episodes(episodes);

  struct Item {
    std::string episode_id;
    std::vector<Pose> path;
  };
  std::vector<Item> items;
  for (const Json& j : read_jsonl(ctx.input("paths")).records) {
    Item item;
    item.episode_id = j.at("episode_id").get<std::string>();
    try {
      for (const Json& p : j.at("path")) item.path.push_back(pose_from_json(p));
    } catch (const nlohmann::json::exception& e) {
      throw ValidationError(item.episode_id, e.what());
    }
    if (!index.count(item.episode_id)) throw ValidationError(item.episode_id, "unknown episode");
    items.push_back(std::move(item));
  }

  std::map<std::string, Scene> scenes;
  if (!ctx.input("scenes").empty()) {
    for (const Item& item : items) {
      const std::string& sid = index.at(item.episode_id)->scene_id;
      if (scenes.count(sid)) continue;
      const fs::path file = fs::path(ctx.input("scenes")) / (sid + ".json");
      scenes.emplace(sid, scene_from_json(Json::parse(read_file(file))));
    }
  } else if (ctx.cfg.geodesic_dtw) {
    throw UsageError("--geodesic-dtw needs --scenes");
  }

  std::vector<metrics::PathEval> evals(items.size());
  parallel_for(items.size(), ctx.cfg.workers, [&](std::size_t i) {
    const Episode& ep = *index.at(items[i].episode_id);
    std::vector<Pose> reference;
    for (const FrameRef& f : ep.frames) reference.push_back(f.pose);
    metrics::EvalOptions opt;
    opt.d_success = ctx.cfg.d_success;
    opt.geodesic_dtw = ctx.cfg.geodesic_dtw;
    if (const auto it = scenes.find(ep.scene_id); it != scenes.end()) opt.scene = &it->second;
    try {
      evals[i] = metrics::evaluate_path(items[i].path, reference, reference.back(), opt);
    } catch (const UsageError& e) {
      throw ValidationError(ep.episode_id, e.what());
    }
  });

  Json per = Json::array();
  for (std::size_t i = 0; i < items.size(); ++i) {
    const metrics::PathEval& e = evals[i];
    per.push_back(Json{{"episode_id", items[i].episode_id},
                       {"ne", std::isfinite(e.ne) ? Json(e.ne) : Json(nullptr)},
                       {"reachable", e.reachable},
                       {"success", e.success},
                       {"oracle_success", e.oracle_success},
                       {"spl", e.spl},
                       {"ndtw", e.ndtw}});
  }
  const metrics::CorpusEval corpus = metrics::summarize(evals);
  emit_report(ctx, Json{{"corpus", metrics::corpus_to_json(corpus)}, {"episodes", per}});
  return kExitOk;
}

// Reads the provenance block of a manifest (JSONL header line) or report
// (JSON document with a "provenance" key).
Json read_provenance(const fs::path& path) {
  const std::string text = read_file(path);
  Json doc;
  try {
    doc = Json::parse(text);
  } catch (const nlohmann::json::parse_error&) {
    const auto eol = text.find('\n');
    try {
      doc = Json::parse(text.substr(0, eol));
    } catch (const nlohmann::json::parse_error& e) {
      throw ValidationError(path.string(), std::string("unreadable header: ") + e.what());
    }
  }
  if (!doc.is_object() || !doc.contains("provenance")) {
    throw ValidationError(path.string(), "no provenance header");
  }
  return doc.at("provenance");
}

int cmd_regen(const std::string& from, const std::string& out, int workers) {
  const Json prov = read_provenance(from);
  const std::string command = prov.at("command").get<std::string>();
  std::vector<std::string> args = {command};
  for (const auto& [flag, entry] : prov.at("inputs").items()) {
    args.push_back("--" + flag);
    const Json entries = entry.is_array() ? entry : Json::array({entry});
    for (const Json& e : entries) {
      const std::string path = e.at("path").get<std::string>();
      if (input_digest(path) != e.at("sha256").get<std::string>()) {
        throw ValidationError(from, "input " + path + " changed since the manifest was written");
      }
      args.push_back(path);
    }
  }
  Json config = prov.at("config");
  config["workers"] = workers;
  KeyedRng rng(static_cast<std::uint64_t>(std::hash<std::string>{}(out)), from, "regen-tmp");
  const fs::path tmp = fs::temp_directory_path() /
                       ("navforge-regen-" + std::to_string(rng.next()) + ".json");
  write_file_atomic(tmp, config.dump());
  args.insert(args.end(), {"--config", tmp.string(), "--out", out});
  int code = kExitOk;
  try {
    code = run(args);
  } catch (...) {
    fs::remove(tmp);
    throw;
  }
  fs::remove(tmp);
  return code;
}

// --config is read before flag parsing so flags override file values.
std::optional<std::string> find_config(const std::vector<std::string>& args) {
  std::optional<std::string> path;
  for (std::size_t i = 0; i < args.size(); ++i) {
    if (args[i] == "--config" && i + 1 < args.size()) path = args[i + 1];
    if (args[i].rfind("--config=", 0) == 0) path = args[i].substr(9);
  }
  return path;
}

RunConfig initial_config(const std::vector<std::string>& args) {
  RunConfig cfg;
  if (const char* env = std::getenv("NAVFORGE_SEED"); env && *env) {
    try {
      std::size_t used = 0;
      cfg.seed = std::stoull(env, &used, 10);
      if (used != std::string_view(env).size()) throw std::invalid_argument("trailing text");
    } catch (const std::exception&) {
      throw UsageError(std::string("NAVFORGE_SEED is not an integer: ") + env);
    }
  }
  if (const auto path = find_config(args)) {
    Json j;
    try {
      j = Json::parse(read_file(*path));
    } catch (const nlohmann::json::parse_error& e) {
      throw UsageError("config " + *path + ": " + e.what());
    } catch (const Error& e) {
      throw UsageError(e.what());
    }
    cfg.apply_json(j);
  }
  return cfg;
}

int dispatch(const Context& ctx) {
  static const std::map<std::string, int (*)(const Context&)> table = {
      {"synth", cmd_synth},       {"ingest", cmd_ingest},   {"stats", cmd_stats},
      {"score", cmd_score},       {"plan", cmd_plan},       {"verify-plan", cmd_verify_plan},
      {"gen-ar", cmd_gen_ar},     {"gen-ffs", cmd_gen_ffs}, {"gen-nav", cmd_gen_nav},
      {"mix", cmd_mix},           {"verify", cmd_verify},   {"eval", cmd_eval}};
  return table.at(ctx.command)(ctx);
}

int run_impl(const std::vector<std::string>& args) {
  Context ctx;
  ctx.cfg = initial_config(args);
  RunConfig& c = ctx.cfg;

  CLI::App app{"Dataset, curriculum and evaluation toolkit for instruction-following navigation"};
  app.name("navforge");
  app.set_version_flag("--version", "navforge schema " + std::to_string(kSchemaVersion));
  app.require_subcommand(1, 1);

  std::string config_path;
  auto common = [&](CLI::App* sub, bool kinematics) {
    sub->add_option("--config", config_path, "flat JSON config file; flags override it");
    sub->add_option("--seed", c.seed, "global seed (falls back to NAVFORGE_SEED)");
    sub->add_option("--workers", c.workers, "worker threads")->check(CLI::PositiveNumber);
    if (kinematics) {
      sub->add_option("--forward-m", c.forward_m, "MOVE_FORWARD step in meters");
      sub->add_option("--turn-deg", c.turn_deg, "turn step in degrees");
      sub->add_option("--pose-eps", c.pose_eps, "pose consistency tolerance");
    }
  };
  auto input = [&](CLI::App* sub, const std::string& name, bool required, const std::string& help) {
    auto* opt = sub->add_option("--" + name, ctx.inputs[name], help);
    if (required) opt->required();
  };
  auto output = [&](CLI::App* sub, bool required, const std::string& help) {
    auto* opt = sub->add_option("--out", ctx.out, help);
    if (required) opt->required();
  };

  auto* synth = app.add_subcommand("synth", "generate synthetic scenes and episodes");
  common(synth, true);
  synth->add_option("--scenes", c.scenes, "number of scenes");
  synth->add_option("--episodes-per-scene", c.episodes_per_scene, "episodes per scene");
  synth->add_option("--width", c.width, "grid width in cells");
  synth->add_option("--height", c.height, "grid height in cells");
  synth->add_option("--obstacle-density", c.obstacle_density, "blocked cell fraction");
  synth->add_option("--cell-size", c.cell_size, "cell size in meters");
  synth->add_option("--min-len", c.min_len, "shortest route length in cells");
  synth->add_option("--max-len", c.max_len, "longest route length in cells");
  synth->add_option("--wander-prob", c.wander_prob, "detour probability per step");
  output(synth, true, "output directory");

  auto* ingest = app.add_subcommand("ingest", "convert a dataset into an episode manifest");
  common(ingest, true);
  input(ingest, "root", true, "dataset root");
  ingest->add_option("--format", c.format, "navforge-jsonl | frames+actions");
  ingest->add_flag("--check-files", c.check_files, "require referenced images to exist");
  output(ingest, true, "episode manifest");

  auto* stats = app.add_subcommand("stats", "corpus statistics");
  common(stats, false);
  input(stats, "episodes", true, "episode manifest");
  output(stats, false, "report file (default stdout)");

  auto* score = app.add_subcommand("score", "difficulty scores and buckets");
  common(score, true);
  input(score, "episodes", true, "episode manifest");
  score->add_option("--alpha", c.alpha, "trajectory weight");
  score->add_option("--beta", c.beta, "instruction weight");
  score->add_option("--gamma", c.gamma, "turn weight");
  output(score, true, "scores manifest");

  auto* plan = app.add_subcommand("plan", "four-phase curriculum plan of one epoch");
  common(plan, false);
  input(plan, "scores", true, "scores manifest");
  input(plan, "samples", false, "sample manifest; samples inherit their episode's score");
  plan->add_option("--epoch", c.epoch, "epoch index");
  plan->add_flag("--stochastic", c.stochastic, "independent per-sample phase draws");
  output(plan, true, "plan file");

  auto* verify_plan = app.add_subcommand("verify-plan", "check a plan file");
  common(verify_plan, false);
  input(verify_plan, "plan", true, "plan file");
  input(verify_plan, "scores", false, "scores the plan must cover");
  output(verify_plan, false, "report file (default stdout)");

  auto* gen_ar = app.add_subcommand("gen-ar", "action retrospection samples");
  common(gen_ar, true);
  input(gen_ar, "episodes", true, "episode manifest");
  gen_ar->add_option("--gap-min", c.gap_min, "smallest frame gap");
  gen_ar->add_option("--gap-max", c.gap_max, "largest frame gap");
  gen_ar->add_option("--cap-per-episode", c.ar_cap, "pairs per episode (<= 0: all)");
  gen_ar->add_option("--balance-mode", c.ar_balance, "category | tokens | none")
      ->check(CLI::IsMember({"category", "tokens", "none"}));
  output(gen_ar, true, "sample manifest");

  auto* gen_ffs = app.add_subcommand("gen-ffs", "future frame selection samples");
  common(gen_ffs, true);
  input(gen_ffs, "episodes", true, "episode manifest");
  gen_ffs->add_option("--history", c.ffs_history, "history frames");
  gen_ffs->add_option("--hard", c.n_hard, "same-episode negatives");
  gen_ffs->add_option("--cross", c.n_cross, "other-episode negatives");
  gen_ffs->add_option("--cap-per-episode", c.ffs_cap, "steps per episode (<= 0: all)");
  gen_ffs->add_flag("--no-balance{false}", c.ffs_balance, "keep the natural action mix");
  gen_ffs->add_option("--dedup", c.ffs_dedup, "observation | image_path")
      ->check(CLI::IsMember({"observation", "image_path"}));
  output(gen_ffs, true, "sample manifest");

  auto* gen_nav = app.add_subcommand("gen-nav", "navigation samples");
  common(gen_nav, true);
  input(gen_nav, "episodes", true, "episode manifest");
  input(gen_nav, "scores", false, "scores used as sample difficulty");
  gen_nav->add_option("--history", c.nav_history, "history frames");
  gen_nav->add_option("--stride", c.stride, "step stride");
  gen_nav->add_option("--history-mode", c.history_mode, "uniform | recent")
      ->check(CLI::IsMember({"uniform", "recent"}));
  output(gen_nav, true, "sample manifest");

  auto* mix = app.add_subcommand("mix", "merge task manifests and tag loss weights");
  common(mix, false);
  mix->add_option("--inputs", ctx.input_list, "sample manifests")->required()->expected(1, -1);
  input(mix, "scores", false, "scores used as sample difficulty");
  mix->add_option("--lambda-ar", c.lambda_ar, "AR loss weight");
  mix->add_option("--lambda-ffs", c.lambda_ffs, "FFS loss weight");
  mix->add_option("--ratio", c.ratio, "NAV AR FFS proportions")->expected(3);
  mix->add_option("--stage", c.stage, "1: all tasks, 2: navigation only");
  output(mix, true, "mixed manifest");

  auto* verify = app.add_subcommand("verify", "re-derive sample labels from episodes");
  common(verify, true);
  input(verify, "samples", true, "sample manifest");
  input(verify, "episodes", true, "episode manifest");
  output(verify, false, "report file (default stdout)");

  auto* eval = app.add_subcommand("eval", "NE, SR, OS, SPL and nDTW of predicted paths");
  common(eval, false);
  input(eval, "paths", true, "predicted paths (JSONL)");
  input(eval, "episodes", true, "reference episodes");
  input(eval, "scenes", false, "scene directory for geodesic distances");
  eval->add_option("--d-success", c.d_success, "success radius in meters");
  eval->add_flag("--geodesic-dtw", c.geodesic_dtw, "geodesic point distances in nDTW");
  output(eval, false, "report file (default stdout)");

  std::string regen_from, regen_out;
  int regen_workers = 1;
  auto* regen = app.add_subcommand("regen", "re-run the command recorded in a manifest header");
  regen->add_option("--from", regen_from, "manifest or report with a provenance header")
      ->required();
  regen->add_option("--out", regen_out, "output path for the rerun")->required();
  regen->add_option("--workers", regen_workers, "worker threads")->check(CLI::PositiveNumber);

  std::vector<const char*> argv = {"navforge"};
  for (const auto& a : args) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitUsage;
  }

  ctx.command = app.get_subcommands().front()->get_name();
  if (ctx.command == "regen") return cmd_regen(regen_from, regen_out, regen_workers);
  if (c.workers < 1) throw UsageError("--workers must be >= 1");
  log(ctx.command, "config " + c.to_json(true).dump());
  return dispatch(ctx);
}

}  // namespace

int run(const std::vector<std::string>& args) {
  try {
    return run_impl(args);
  } catch (const UsageError& e) {
    std::cerr << "navforge: usage error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const ValidationError& e) {
    std::cerr << "navforge: validation failed: " << e.what() << '\n';
    return kExitValidation;
  } catch (const std::exception& e) {
    std::cerr << "navforge: error: " << e.what() << '\n';
    return kExitValidation;
  }
}

int run(int argc, const char* const* argv) {
  std::vector<std::string> args;
  for (int i = 1; i < argc; ++i) args.emplace_back(argv[i]);
  return run(args);
}

}  // namespace navforge::cli
