#include "navforge/manifest.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <sstream>
#include <variant>

#include "navforge/error.hpp"
#include "navforge/parallel.hpp"

namespace fs = std::filesystem;

namespace navforge {

std::string_view task_name(Task task) {
  switch (task) {
    case Task::kNav: return "NAV";
    case Task::kAr: return "AR";
    case Task::kFfs: return "FFS";
  }
  return "NAV";
}

Task parse_task(std::string_view text) {
  if (text == "NAV") return Task::kNav;
  if (text == "AR") return Task::kAr;
  if (text == "FFS") return Task::kFfs;
  throw UsageError("unknown task '" + std::string(text) + "'");
}

Json episode_to_json(const Episode& ep) {
  Json frames = Json::array();
  for (const FrameRef& f : ep.frames) {
    frames.push_back(Json{{"frame_id", f.frame_id},
                          {"image_path", f.image_path},
                          {"pose", {{"x", f.pose.x}, {"y", f.pose.y}, {"heading", f.pose.heading}}},
                          {"obs_key", f.obs_key.hex()}});
  }
  Json actions = Json::array();
  for (Action a : ep.actions) actions.push_back(action_name(a));
  Json j{{"v", kSchemaVersion},
         {"episode_id", ep.episode_id},
         {"scene_id", ep.scene_id},
         {"instruction", ep.instruction},
         {"frames", std::move(frames)},
         {"actions", std::move(actions)}};
  if (ep.pose_reconstructed) j["pose_reconstructed"] = true;
  return j;
}

Episode episode_from_json(const Json& j) {
  Episode ep;
  ep.episode_id = j.at("episode_id").get<std::string>();
  try {
    ep.scene_id = j.value("scene_id", std::string());
    ep.instruction = j.value("instruction", std::string());
    for (const Json& a : j.at("actions")) ep.actions.push_back(parse_action(a.get<std::string>()));
    const Json& frames = j.at("frames");
    bool has_poses = true;
    for (const Json& f : frames) has_poses = has_poses && f.contains("pose");
    std::vector<Pose> poses;
    if (!has_poses) {
      // Rebuild from the origin by folding the actions; same frame count.
      Pose p;
      for (std::size_t t = 0; t < frames.size(); ++t) {
        poses.push_back(p);
        if (t < ep.actions.size()) p = apply_action(p, ep.actions[t]);
      }
      ep.pose_reconstructed = true;
    }
    char buf[16];
    for (std::size_t t = 0; t < frames.size(); ++t) {
      const Json& f = frames[t];
      FrameRef ref;
      std::snprintf(buf, sizeof buf, "%04zu", t);
      ref.frame_id = f.value("frame_id", std::string(buf));
      ref.image_path = f.value("image_path", std::string());
      if (has_poses) {
        const Json& p = f.at("pose");
        ref.pose = Pose{p.at("x").get<double>(), p.at("y").get<double>(),
                        p.at("heading").get<double>()};
      } else {
        ref.pose = poses[t];
      }
      ref.obs_key = f.contains("obs_key")
                        ? ObservationKey::from_hex(f.at("obs_key").get<std::string>())
                        : observation_key(ep.scene_id, ref.pose);
      ep.frames.push_back(std::move(ref));
    }
    ep.pose_reconstructed = ep.pose_reconstructed || j.value("pose_reconstructed", false);
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(ep.episode_id, e.what());
  } catch (const UsageError& e) {
    throw ValidationError(ep.episode_id, e.what());
  }
  return ep;
}

Json sample_to_json(const TaskSample& s) {
  return Json{{"v", kSchemaVersion},
              {"sample_id", s.sample_id},
              {"task", task_name(s.task)},
              {"episode_id", s.episode_id},
              {"prompt", s.prompt},
              {"image_refs", s.image_refs},
              {"target", s.target},
              {"loss_weight", s.loss_weight},
              {"difficulty", s.difficulty ? Json(*s.difficulty) : Json(nullptr)},
              {"aux", s.aux}};
}

TaskSample sample_from_json(const Json& j) {
  TaskSample s;
  s.sample_id = j.at("sample_id").get<std::string>();
  try {
    s.task = parse_task(j.at("task").get<std::string>());
    s.episode_id = j.at("episode_id").get<std::string>();
    s.prompt = j.value("prompt", std::string());
    s.image_refs = j.value("image_refs", std::vector<std::string>{});
    s.target = j.at("target").get<std::string>();
    s.loss_weight = j.value("loss_weight", 1.0);
    if (j.contains("difficulty") && !j.at("difficulty").is_null()) {
      s.difficulty = j.at("difficulty").get<double>();
    }
    if (j.contains("aux")) s.aux = j.at("aux");
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(s.sample_id, e.what());
  } catch (const UsageError& e) {
    throw ValidationError(s.sample_id, e.what());
  }
  return s;
}

bool is_header_line(const Json& j) {
  return j.is_object() && j.contains("provenance") && !j.contains("sample_id") &&
         !j.contains("episode_id");
}

void write_file_atomic(const fs::path& path, std::string_view text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  fs::path tmp = path;
  tmp += ".navforge-tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot open " + tmp.string() + " for writing");
    out.write(text.data(), static_cast<std::streamsize>(text.size()));
    out.flush();
    if (!out) throw Error("write failed for " + tmp.string());
  }
  fs::rename(tmp, path);
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string render_jsonl(const std::vector<Json>& records, const Json& header) {
  std::string out;
  if (!header.is_null()) {
    out += header.dump();
    out += '\n';
  }
  for (const Json& r : records) {
    out += r.dump();
    out += '\n';
  }
  return out;
}

void write_manifest(std::span<const Episode> records, const fs::path& path, const Json& header) {
  std::vector<Json> lines;
  lines.reserve(records.size());
  for (const Episode& e : records) lines.push_back(episode_to_json(e));
  write_file_atomic(path, render_jsonl(lines, header));
}

void write_manifest(std::span<const TaskSample> records, const fs::path& path,
                    const Json& header) {
  std::vector<Json> lines;
  lines.reserve(records.size());
  for (const TaskSample& s : records) lines.push_back(sample_to_json(s));
  write_file_atomic(path, render_jsonl(lines, header));
}

JsonlFile read_jsonl(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path.string());
  JsonlFile file;
  std::string line;
  std::size_t line_no = 0;
  bool first = true;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    Json j;
    try {
      j = Json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
      throw ValidationError(path.string() + ":" + std::to_string(line_no), e.what());
    }
    if (first && is_header_line(j)) {
      file.header = std::move(j);
    } else {
      file.records.push_back(std::move(j));
    }
    first = false;
  }
  return file;
}

std::vector<Episode> read_episodes(const fs::path& path) {
  std::vector<Episode> out;
  for (const Json& j : read_jsonl(path).records) out.push_back(episode_from_json(j));
  return out;
}

std::vector<TaskSample> read_samples(const fs::path& path) {
  std::vector<TaskSample> out;
  for (const Json& j : read_jsonl(path).records) out.push_back(sample_from_json(j));
  return out;
}

EpisodeIndex index_episodes(std::span<const Episode> episodes) {
  EpisodeIndex index;
  for (const Episode& e : episodes) index.emplace(e.episode_id, &e);
  return index;
}

DatasetFormat parse_dataset_format(std::string_view text) {
  if (text == "navforge-jsonl") return DatasetFormat::kNavforgeJsonl;
  if (text == "frames+actions") return DatasetFormat::kFramesActions;
  throw UsageError("unknown dataset format '" + std::string(text) +
                   "' (expected navforge-jsonl or frames+actions)");
}

namespace {

using IngestOutcome = std::variant<Episode, IngestIssue>;

std::string trim(std::string s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

bool all_digits(std::string_view s) {
  return !s.empty() && std::all_of(s.begin(), s.end(),
                                   [](char c) { return std::isdigit(static_cast<unsigned char>(c)); });
}

Action parse_action_token(const std::string& token) {
  if (all_digits(token)) {
    switch (std::stoi(token)) {
      case 0: return Action::kStop;
      case 1: return Action::kMoveForward;
      case 2: return Action::kTurnLeft;
      case 3: return Action::kTurnRight;
      default: throw UsageError("unknown action code " + token);
    }
  }
  return parse_action(token);
}

void check_files(const Episode& ep, const fs::path& root) {
  for (const FrameRef& f : ep.frames) {
    if (!f.image_path.empty() && !fs::exists(root / f.image_path)) {
      throw ValidationError(ep.episode_id, "missing image " + f.image_path);
    }
  }
}

Episode load_frames_actions(const fs::path& root, const fs::path& dir,
                            const IngestOptions& opt) {
  Episode ep;
  ep.episode_id = dir.filename().string();
  try {
    ep.scene_id = ep.episode_id;
    if (fs::exists(dir / "scene.txt")) ep.scene_id = trim(read_file(dir / "scene.txt"));
    ep.instruction = trim(read_file(dir / "instruction.txt"));

    std::istringstream actions(read_file(dir / "actions.txt"));
    std::string token;
    while (actions >> token) ep.actions.push_back(parse_action_token(token));

    std::vector<fs::path> images;
    for (const auto& entry : fs::directory_iterator(dir / "frames")) {
      if (entry.is_regular_file()) images.push_back(entry.path());
    }
    const bool numeric = std::all_of(images.begin(), images.end(), [](const fs::path& p) {
      return all_digits(p.stem().string());
    });
    std::sort(images.begin(), images.end(), [&](const fs::path& a, const fs::path& b) {
      if (numeric) {
        const auto na = std::stoull(a.stem().string());
        const auto nb = std::stoull(b.stem().string());
        if (na != nb) return na < nb;
      }
      return a.filename() < b.filename();
    });

    std::vector<Pose> poses;
    if (fs::exists(dir / "poses.txt")) {
      std::istringstream in(read_file(dir / "poses.txt"));
      double x, y, h;
      while (in >> x >> y >> h) poses.push_back(make_pose(x, y, h));
      if (poses.size() != images.size()) {
        throw ValidationError(ep.episode_id, "poses.txt has " + std::to_string(poses.size()) +
                                                 " rows for " + std::to_string(images.size()) +
                                                 " frames");
      }
    } else {
      Pose p;
      for (std::size_t t = 0; t < images.size(); ++t) {
        poses.push_back(p);
        if (t < ep.actions.size()) p = apply_action(p, ep.actions[t], opt.kin);
      }
      ep.pose_reconstructed = true;
    }
    for (std::size_t t = 0; t < images.size(); ++t) {
      FrameRef f;
      f.frame_id = images[t].stem().string();
      f.image_path = fs::relative(images[t], root).generic_string();
      f.pose = poses[t];
      f.obs_key = observation_key(ep.scene_id, f.pose);
      ep.frames.push_back(std::move(f));
    }
  } catch (const ValidationError&) {
    throw;
  } catch (const std::exception& e) {
    throw ValidationError(ep.episode_id, e.what());
  }
  return ep;
}

IngestOutcome finish(Episode ep, const fs::path& root, const IngestOptions& opt) {
  try {
    validate_episode(ep, opt.kin, opt.pose_eps);
    if (opt.check_files) check_files(ep, root);
  } catch (const ValidationError& e) {
    return IngestIssue{ep.episode_id, e.what()};
  }
  return ep;
}

}  // namespace

IngestResult ingest_dataset(const fs::path& root, const IngestOptions& opt) {
  if (!fs::is_directory(root)) throw Error("not a directory: " + root.string());
  std::vector<IngestOutcome> outcomes;

  if (opt.format == DatasetFormat::kNavforgeJsonl) {
    std::vector<fs::path> files;
    for (const auto& entry : fs::directory_iterator(root)) {
      if (entry.is_regular_file() && entry.path().extension() == ".jsonl") {
        files.push_back(entry.path());
      }
    }
    std::sort(files.begin(), files.end());
    std::vector<std::pair<std::string, Json>> lines;  // (location, record)
    for (const fs::path& file : files) {
      std::ifstream in(file, std::ios::binary);
      std::string line;
      std::size_t line_no = 0;
      while (std::getline(in, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        const std::string where = file.filename().string() + ":" + std::to_string(line_no);
        Json j = Json::parse(line, nullptr, false);
        if (j.is_discarded()) {
          lines.emplace_back(where, Json());
        } else if (!is_header_line(j)) {
          lines.emplace_back(where, std::move(j));
        }
      }
    }
    outcomes = parallel_map(lines, opt.workers, [&](const auto& item) -> IngestOutcome {
      const auto& [where, j] = item;
      if (j.is_null()) return IngestIssue{where, "invalid JSON"};
      if (!j.is_object() || !j.contains("episode_id")) {
        return IngestIssue{where, "record has no episode_id"};
      }
      try {
        return finish(episode_from_json(j), root, opt);
      } catch (const ValidationError& e) {
        const Json& id = j.at("episode_id");
        return IngestIssue{id.is_string() ? id.get<std::string>() : id.dump(), e.what()};
      }
    });
  } else {
    std::vector<fs::path> dirs;
    for (const auto& entry : fs::directory_iterator(root)) {
      if (entry.is_directory()) dirs.push_back(entry.path());
    }
    std::sort(dirs.begin(), dirs.end());
    outcomes = parallel_map(dirs, opt.workers, [&](const fs::path& dir) -> IngestOutcome {
      try {
        return finish(load_frames_actions(root, dir, opt), root, opt);
      } catch (const ValidationError& e) {
        return IngestIssue{dir.filename().string(), e.what()};
      }
    });
  }

  IngestResult result;
  for (auto& o : outcomes) {
    if (auto* ep = std::get_if<Episode>(&o)) {
      result.episodes.push_back(std::move(*ep));
    } else {
      result.issues.push_back(std::get<IngestIssue>(std::move(o)));
    }
  }
  return result;
}

Summary summarize(std::vector<double> values) {
  if (values.empty()) throw UsageError("cannot summarize an empty list");
  std::sort(values.begin(), values.end());
  auto quantile = [&](double q) {
    const double pos = q * static_cast<double>(values.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const std::size_t hi = std::min(lo + 1, values.size() - 1);
    return values[lo] + (pos - static_cast<double>(lo)) * (values[hi] - values[lo]);
  };
  double sum = 0;
  for (double v : values) sum += v;
  return Summary{values.front(), values.back(), sum / static_cast<double>(values.size()),
                 quantile(0.25), quantile(0.5), quantile(0.75)};
}

StatsReport dataset_stats(std::span<const Episode> episodes) {
  if (episodes.empty()) throw UsageError("dataset_stats needs at least one episode");
  StatsReport report;
  std::vector<double> png, instr, turn, traj;
  for (const Episode& ep : episodes) {
    const ActionCounts c = action_counts(ep);
    EpisodeStats s;
    s.episode_id = ep.episode_id;
    s.n_png = static_cast<int>(ep.frames.size());
    s.n_actions = c.all;
    s.instr_len = word_count(ep.instruction);
    s.turn_density = c.all > 0 ? static_cast<double>(c.left + c.right) / c.all : 0.0;
    s.raw_traj = std::log(1.0 + s.n_png);
    png.push_back(s.n_png);
    instr.push_back(s.instr_len);
    turn.push_back(s.turn_density);
    traj.push_back(s.raw_traj);
    report.episodes.push_back(std::move(s));
  }
  report.n_png = summarize(std::move(png));
  report.instr_len = summarize(std::move(instr));
  report.turn_density = summarize(std::move(turn));
  report.raw_traj = summarize(std::move(traj));
  return report;
}

Json stats_to_json(const StatsReport& r) {
  auto summary = [](const Summary& s) {
    return Json{{"min", s.min}, {"max", s.max}, {"mean", s.mean},
                {"p25", s.p25}, {"p50", s.p50}, {"p75", s.p75}};
  };
  Json episodes = Json::array();
  for (const EpisodeStats& e : r.episodes) {
    episodes.push_back(Json{{"episode_id", e.episode_id},
                            {"n_png", e.n_png},
                            {"n_actions", e.n_actions},
                            {"instr_len", e.instr_len},
                            {"turn_density", e.turn_density},
                            {"raw_traj", e.raw_traj}});
  }
  return Json{{"v", kSchemaVersion},
              {"n_episodes", r.episodes.size()},
              {"skipped", r.skipped},
              {"n_png", summary(r.n_png)},
              {"instr_len", summary(r.instr_len)},
              {"turn_density", summary(r.turn_density)},
              {"raw_traj", summary(r.raw_traj)},
              {"episodes", std::move(episodes)}};
}

}  // namespace navforge
