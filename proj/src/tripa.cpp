#include "navforge/tripa.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>
#include <unordered_map>
#include <unordered_set>

#include "navforge/error.hpp"
#include "navforge/manifest.hpp"
#include "navforge/parallel.hpp"
#include "navforge/rng.hpp"

namespace navforge::tripa {

RawFactors raw_factors(const Episode& episode) {
  const ActionCounts c = action_counts(episode);
  RawFactors f;
  f.traj = std::log(1.0 + static_cast<double>(episode.frames.size()));
  f.instr = static_cast<double>(word_count(episode.instruction));
  f.turn = c.all > 0 ? static_cast<double>(c.left + c.right) / static_cast<double>(c.all) : 0.0;
  return f;
}

std::vector<double> normalize_corpus(std::span<const double> raw) {
  if (raw.empty()) return {};
  const auto [lo, hi] = std::minmax_element(raw.begin(), raw.end());
  const double min = *lo;
  const double range = *hi - *lo;
  std::vector<double> out(raw.size(), 0.0);
  if (range > 0.0) {
    for (std::size_t i = 0; i < raw.size(); ++i) out[i] = (raw[i] - min) / range;
  }
  return out;
}

std::vector<DifficultyRecord> score(std::span<const FactorScores> scores,
                                    const Weights& w) {
  if (w.alpha < 0 || w.beta < 0 || w.gamma < 0) {
    throw UsageError("difficulty weights must be nonnegative");
  }
  std::vector<DifficultyRecord> out;
  out.reserve(scores.size());
  for (const FactorScores& s : scores) {
    out.push_back(DifficultyRecord{s.sample_id, s.s_traj, s.s_instr, s.s_turn,
                                   w.alpha * s.s_traj + w.beta * s.s_instr + w.gamma * s.s_turn,
                                   -1});
  }
  return out;
}

std::vector<DifficultyRecord> score_episodes(std::span<const Episode> episodes,
                                             const Weights& weights, int workers) {
  std::vector<RawFactors> raw(episodes.size());
  parallel_for(episodes.size(), workers,
               [&](std::size_t i) { raw[i] = raw_factors(episodes[i]); });
  std::vector<double> traj, instr;
  for (const RawFactors& r : raw) {
    traj.push_back(r.traj);
    instr.push_back(r.instr);
  }
  const std::vector<double> s_traj = normalize_corpus(traj);
  const std::vector<double> s_instr = normalize_corpus(instr);
  std::vector<FactorScores> scores;
  for (std::size_t i = 0; i < episodes.size(); ++i) {
    scores.push_back(FactorScores{episodes[i].episode_id, s_traj[i], s_instr[i], raw[i].turn});
  }
  return score(scores, weights);
}

std::vector<DifficultyRecord> bucketize(std::vector<DifficultyRecord> records) {
  const std::size_t n = records.size();
  if (n < kBuckets) {
    throw ValidationError("", "need >= 4 samples for 4 buckets, got " + std::to_string(n));
  }
  std::sort(records.begin(), records.end(), [](const auto& a, const auto& b) {
    if (a.d != b.d) return a.d < b.d;
    return a.sample_id < b.sample_id;
  });
  std::size_t pos = 0;
  for (int b = 0; b < kBuckets; ++b) {
    const std::size_t size = n / kBuckets + (static_cast<std::size_t>(b) < n % kBuckets ? 1 : 0);
    for (std::size_t k = 0; k < size; ++k) records[pos++].bucket = b;
  }
  return records;
}

void check_phase_weights(const PhaseWeights& weights) {
  for (int p = 0; p < kPhases; ++p) {
    double sum = 0;
    for (double w : weights[p]) {
      if (!(w >= 0.0)) throw UsageError("phase weights must be nonnegative");
      sum += w;
    }
    if (std::abs(sum - 1.0) > 1e-9) {
      throw UsageError("phase " + std::to_string(p + 1) + " weights sum to " +
                       std::to_string(sum) + ", expected 1");
    }
  }
}

QuotaMatrix allocate_quotas(const std::array<int, kBuckets>& sizes, const PhaseWeights& w) {
  QuotaMatrix q{};
  for (int b = 0; b < kBuckets; ++b) {
    double column = 0;
    for (int p = 0; p < kPhases; ++p) column += w[p][b];
    if (sizes[b] == 0) continue;
    if (column <= 0.0) {
      throw UsageError("bucket " + std::to_string(b) + " has zero weight in every phase");
    }
    std::array<double, kPhases> remainder{};
    int assigned = 0;
    for (int p = 0; p < kPhases; ++p) {
      double exact = sizes[b] * w[p][b] / column;
      if (std::abs(exact - std::round(exact)) < 1e-9) exact = std::round(exact);
      q[p][b] = static_cast<int>(std::floor(exact));
      remainder[p] = exact - q[p][b];
      assigned += q[p][b];
    }
    std::array<int, kPhases> order{0, 1, 2, 3};
    std::stable_sort(order.begin(), order.end(),
                     [&](int a, int c) { return remainder[a] > remainder[c]; });
    for (int k = 0; assigned < sizes[b]; ++k, ++assigned) ++q[order[k % kPhases]][b];
  }
  return q;
}

std::uint64_t epoch_seed(std::uint64_t seed, int epoch) {
  return derive_seed(seed, "epoch-" + std::to_string(epoch), "tripa-epoch");
}

EpochPlan plan_epoch(std::span<const DifficultyRecord> records, std::uint64_t seed, int epoch,
                     const PlanOptions& options) {
  check_phase_weights(options.weights);
  std::array<std::vector<PlanItem>, kBuckets> buckets;
  std::unordered_set<std::string> seen;
  for (const DifficultyRecord& r : records) {
    if (r.bucket < 0 || r.bucket >= kBuckets) {
      throw ValidationError(r.sample_id, "record is not bucketized");
    }
    if (!seen.insert(r.sample_id).second) throw ValidationError(r.sample_id, "duplicate sample id");
    buckets[r.bucket].push_back(PlanItem{r.sample_id, r.bucket, r.d});
  }
  for (auto& members : buckets) {
    std::sort(members.begin(), members.end(), [](const PlanItem& a, const PlanItem& b) {
      if (a.d != b.d) return a.d < b.d;
      return a.sample_id < b.sample_id;
    });
  }

  const std::uint64_t key = epoch_seed(seed, epoch);
  EpochPlan plan;
  plan.seed = seed;
  plan.epoch = epoch;
  plan.weights = options.weights;

  if (options.stochastic) {
    for (int b = 0; b < kBuckets; ++b) {
      double column = 0;
      for (int p = 0; p < kPhases; ++p) column += options.weights[p][b];
      for (const PlanItem& item : buckets[b]) {
        KeyedRng rng(key, item.sample_id, "tripa-phase-draw");
        const double u = rng.uniform() * column;
        double acc = 0;
        int phase = kPhases - 1;
        for (int p = 0; p < kPhases; ++p) {
          acc += options.weights[p][b];
          if (u < acc) {
            phase = p;
            break;
          }
        }
        plan.phases[phase].push_back(item);
        ++plan.quotas[phase][b];
      }
    }
  } else {
    std::array<int, kBuckets> sizes{};
    for (int b = 0; b < kBuckets; ++b) sizes[b] = static_cast<int>(buckets[b].size());
    plan.quotas = allocate_quotas(sizes, options.weights);
    for (int b = 0; b < kBuckets; ++b) {
      KeyedRng rng(key, "bucket-" + std::to_string(b), "tripa-bucket");
      rng.shuffle(buckets[b]);
      std::size_t pos = 0;
      for (int p = 0; p < kPhases; ++p) {
        for (int k = 0; k < plan.quotas[p][b]; ++k) plan.phases[p].push_back(buckets[b][pos++]);
      }
    }
  }
  for (int p = 0; p < kPhases; ++p) {
    KeyedRng rng(key, "phase-" + std::to_string(p + 1), "tripa-phase");
    rng.shuffle(plan.phases[p]);
  }
  return plan;
}

std::vector<std::string> flatten(const EpochPlan& plan) {
  std::vector<std::string> ids;
  for (const auto& phase : plan.phases) {
    for (const PlanItem& item : phase) ids.push_back(item.sample_id);
  }
  return ids;
}

PlanReport verify_plan(const EpochPlan& plan, std::span<const DifficultyRecord> records) {
  PlanReport report;
  std::unordered_map<std::string, const DifficultyRecord*> by_id;
  for (const DifficultyRecord& r : records) by_id.emplace(r.sample_id, &r);

  std::map<std::string, int> counts;
  for (const std::string& id : flatten(plan)) ++counts[id];
  for (const auto& [id, n] : counts) {
    if (n > 1) report.duplicates.push_back(id);
    if (!by_id.contains(id)) report.unknown.push_back(id);
  }
  for (const DifficultyRecord& r : records) {
    if (!counts.contains(r.sample_id)) report.missing.push_back(r.sample_id);
  }
  std::sort(report.missing.begin(), report.missing.end());
  report.permutation_ok =
      report.duplicates.empty() && report.missing.empty() && report.unknown.empty();

  auto bucket_of = [&](const PlanItem& item) {
    auto it = by_id.find(item.sample_id);
    return it != by_id.end() ? it->second->bucket : item.bucket;
  };
  auto d_of = [&](const PlanItem& item) {
    auto it = by_id.find(item.sample_id);
    return it != by_id.end() ? it->second->d : item.d;
  };

  std::array<double, kBuckets> bucket_sum{};
  std::array<int, kBuckets> bucket_n{};
  for (const DifficultyRecord& r : records) {
    if (r.bucket >= 0 && r.bucket < kBuckets) {
      bucket_sum[r.bucket] += r.d;
      ++bucket_n[r.bucket];
    }
  }

  for (int p = 0; p < kPhases; ++p) {
    std::array<int, kBuckets> composition{};
    double sum_d = 0;
    for (const PlanItem& item : plan.phases[p]) {
      const int b = bucket_of(item);
      if (b >= 0 && b < kBuckets) ++composition[b];
      sum_d += d_of(item);
    }
    const auto n = static_cast<double>(plan.phases[p].size());
    double expected_num = 0, expected_den = 0;
    for (int b = 0; b < kBuckets; ++b) {
      if (composition[b] != plan.quotas[p][b]) report.quotas_consistent = false;
      const double share = n > 0 ? composition[b] / n : 0.0;
      report.l1_deviation[p] += std::abs(share - plan.weights[p][b]);
      if (bucket_n[b] > 0) {
        expected_num += plan.quotas[p][b] * (bucket_sum[b] / bucket_n[b]);
        expected_den += plan.quotas[p][b];
      }
    }
    report.phase_mean_d[p] = n > 0 ? sum_d / n : 0.0;
    report.expected_phase_mean_d[p] = expected_den > 0 ? expected_num / expected_den : 0.0;
    if (p > 0) {
      report.monotone = report.monotone && report.phase_mean_d[p] >= report.phase_mean_d[p - 1];
      report.expected_monotone = report.expected_monotone &&
                                 report.expected_phase_mean_d[p] >=
                                     report.expected_phase_mean_d[p - 1];
    }
  }
  return report;
}

Json plan_report_to_json(const PlanReport& r) {
  return Json{{"permutation_ok", r.permutation_ok},
              {"duplicates", r.duplicates},
              {"missing", r.missing},
              {"unknown", r.unknown},
              {"quotas_consistent", r.quotas_consistent},
              {"l1_deviation", r.l1_deviation},
              {"phase_mean_d", r.phase_mean_d},
              {"expected_phase_mean_d", r.expected_phase_mean_d},
              {"monotone", r.monotone},
              {"expected_monotone", r.expected_monotone}};
}

Json record_to_json(const DifficultyRecord& r) {
  return Json{{"v", kSchemaVersion},  {"sample_id", r.sample_id}, {"s_traj", r.s_traj},
              {"s_instr", r.s_instr}, {"s_turn", r.s_turn},       {"d", r.d},
              {"bucket", r.bucket >= 0 ? Json(r.bucket) : Json(nullptr)}};
}

DifficultyRecord record_from_json(const Json& j) {
  DifficultyRecord r;
  r.sample_id = j.at("sample_id").get<std::string>();
  try {
    r.s_traj = j.at("s_traj").get<double>();
    r.s_instr = j.at("s_instr").get<double>();
    r.s_turn = j.at("s_turn").get<double>();
    r.d = j.at("d").get<double>();
    r.bucket = j.contains("bucket") && !j.at("bucket").is_null() ? j.at("bucket").get<int>() : -1;
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(r.sample_id, e.what());
  }
  return r;
}

void write_scores(std::span<const DifficultyRecord> records, const std::filesystem::path& path,
                  const Json& header) {
  std::vector<Json> lines;
  for (const DifficultyRecord& r : records) lines.push_back(record_to_json(r));
  write_file_atomic(path, render_jsonl(lines, header));
}

std::vector<DifficultyRecord> read_scores(const std::filesystem::path& path) {
  std::vector<DifficultyRecord> out;
  for (const Json& j : read_jsonl(path).records) out.push_back(record_from_json(j));
  return out;
}

std::string render_plan(const EpochPlan& plan, const Json& provenance) {
  Json header{{"v", kSchemaVersion},
              {"seed", plan.seed},
              {"epoch", plan.epoch},
              {"weights", plan.weights},
              {"quotas", plan.quotas}};
  if (!provenance.is_null()) header["provenance"] = provenance;
  std::vector<Json> lines;
  for (int p = 0; p < kPhases; ++p) {
    int rank = 0;
    for (const PlanItem& item : plan.phases[p]) {
      lines.push_back(Json{{"phase", p + 1},
                           {"rank", rank++},
                           {"sample_id", item.sample_id},
                           {"bucket", item.bucket},
                           {"d", item.d}});
    }
  }
  return render_jsonl(lines, header);
}

void write_plan(const EpochPlan& plan, const std::filesystem::path& path,
                const Json& provenance) {
  write_file_atomic(path, render_plan(plan, provenance));
}

EpochPlan read_plan(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path.string());
  EpochPlan plan;
  std::string line;
  bool header = true;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      const Json j = Json::parse(line);
      if (header) {
        plan.seed = j.at("seed").get<std::uint64_t>();
        plan.epoch = j.value("epoch", 0);
        plan.weights = j.at("weights").get<PhaseWeights>();
        plan.quotas = j.at("quotas").get<QuotaMatrix>();
        header = false;
        continue;
      }
      const int phase = j.at("phase").get<int>();
      if (phase < 1 || phase > kPhases) throw UsageError("phase out of range");
      plan.phases[phase - 1].push_back(PlanItem{j.at("sample_id").get<std::string>(),
                                                j.value("bucket", -1), j.value("d", 0.0)});
    } catch (const std::exception& e) {
      throw ValidationError(path.string() + ":" + std::to_string(line_no), e.what());
    }
  }
  if (header) throw ValidationError(path.string(), "plan file has no header");
  return plan;
}

}  // namespace navforge::tripa
