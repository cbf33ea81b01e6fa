#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "navforge/core_model.hpp"
#include "navforge/json.hpp"

// Tri-factor difficulty curriculum: score each episode from trajectory,
// instruction and motion complexity, split the corpus into four quartile
// buckets, and lay out an epoch as four phases with shifting bucket mixes.
namespace navforge::tripa {

inline constexpr int kBuckets = 4;
inline constexpr int kPhases = 4;

struct Weights {
  double alpha = 0.6;  // trajectory
  double beta = 0.2;   // instruction
  double gamma = 0.2;  // turns
};

// Row p is the bucket mix of phase p+1.
using PhaseWeights = std::array<std::array<double, kBuckets>, kPhases>;
using QuotaMatrix = std::array<std::array<int, kBuckets>, kPhases>;

inline constexpr PhaseWeights kDefaultPhaseWeights = {{
    {0.50, 0.30, 0.15, 0.05},
    {0.35, 0.30, 0.25, 0.10},
    {0.10, 0.25, 0.30, 0.35},
    {0.05, 0.15, 0.30, 0.50},
}};

struct RawFactors {
  double traj = 0;   // ln(1 + number of frames)
  double instr = 0;  // instruction word count
  double turn = 0;   // (left + right) / all actions
};

RawFactors raw_factors(const Episode& episode);

// Min-max scaling to [0, 1]; a constant input maps to all zeros.
std::vector<double> normalize_corpus(std::span<const double> raw);

struct FactorScores {
  std::string sample_id;
  double s_traj = 0;
  double s_instr = 0;
  double s_turn = 0;
};

struct DifficultyRecord {
  std::string sample_id;
  double s_traj = 0;
  double s_instr = 0;
  double s_turn = 0;
  double d = 0;
  int bucket = -1;  // -1 until bucketized

  friend bool operator==(const DifficultyRecord&, const DifficultyRecord&) = default;
};

// d = alpha*s_traj + beta*s_instr + gamma*s_turn. Throws UsageError on
// negative weights.
std::vector<DifficultyRecord> score(std::span<const FactorScores> scores,
                                    const Weights& weights = {});

// Raw factors per episode (in parallel), corpus normalization of the
// trajectory and instruction factors, then score(). Turn density is used as
// is. Sample ids are the episode ids.
std::vector<DifficultyRecord> score_episodes(std::span<const Episode> episodes,
                                             const Weights& weights = {}, int workers = 1);

// Sorts by (d, sample_id) and assigns four contiguous buckets; earlier
// buckets take the extra element when N is not a multiple of 4. Throws
// ValidationError when N < 4. Records are returned in sorted order.
std::vector<DifficultyRecord> bucketize(std::vector<DifficultyRecord> records);

// Throws UsageError unless each row is nonnegative and sums to 1 (1e-9).
void check_phase_weights(const PhaseWeights& weights);

// Splits each bucket across phases in proportion to its column of weights,
// rounding by largest remainder (ties to the earlier phase) so every column
// of the result sums to the bucket size exactly.
QuotaMatrix allocate_quotas(const std::array<int, kBuckets>& bucket_sizes,
                            const PhaseWeights& weights);

struct PlanItem {
  std::string sample_id;
  int bucket = 0;
  double d = 0;

  friend bool operator==(const PlanItem&, const PlanItem&) = default;
};

struct EpochPlan {
  std::uint64_t seed = 0;
  int epoch = 0;
  std::array<std::vector<PlanItem>, kPhases> phases;
  PhaseWeights weights = kDefaultPhaseWeights;
  QuotaMatrix quotas{};

  friend bool operator==(const EpochPlan&, const EpochPlan&) = default;
};

struct PlanOptions {
  PhaseWeights weights = kDefaultPhaseWeights;
  // Per-sample categorical phase draws instead of the exact partition.
  bool stochastic = false;
};

// Seed of epoch `epoch` under a run seed.
std::uint64_t epoch_seed(std::uint64_t seed, int epoch);

// Records must be bucketized. The concatenation of the phases is a
// permutation of the record ids.
EpochPlan plan_epoch(std::span<const DifficultyRecord> records, std::uint64_t seed,
                     int epoch = 0, const PlanOptions& options = {});

std::vector<std::string> flatten(const EpochPlan& plan);

struct PlanReport {
  bool permutation_ok = true;
  std::vector<std::string> duplicates;
  std::vector<std::string> missing;
  std::vector<std::string> unknown;
  bool quotas_consistent = true;
  std::array<double, kPhases> l1_deviation{};       // realized mix vs weights
  std::array<double, kPhases> phase_mean_d{};        // realized
  std::array<double, kPhases> expected_phase_mean_d{};  // quotas x bucket means
  bool monotone = true;           // realized means nondecreasing
  bool expected_monotone = true;  // expected means nondecreasing

  bool ok() const { return permutation_ok && quotas_consistent; }
};

PlanReport verify_plan(const EpochPlan& plan, std::span<const DifficultyRecord> records);
Json plan_report_to_json(const PlanReport& report);

// I/O ---------------------------------------------------------------------

Json record_to_json(const DifficultyRecord& record);
DifficultyRecord record_from_json(const Json& j);
void write_scores(std::span<const DifficultyRecord> records,
                  const std::filesystem::path& path, const Json& header = nullptr);
std::vector<DifficultyRecord> read_scores(const std::filesystem::path& path);

// Header line {v, seed, epoch, weights, quotas[, provenance]} followed by one
// {phase, rank, sample_id, bucket, d} line per sample; phases are 1-based.
std::string render_plan(const EpochPlan& plan, const Json& provenance = nullptr);
void write_plan(const EpochPlan& plan, const std::filesystem::path& path,
                const Json& provenance = nullptr);
EpochPlan read_plan(const std::filesystem::path& path);

}  // namespace navforge::tripa
