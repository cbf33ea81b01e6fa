#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <set>

#include "navforge/error.hpp"
#include "navforge/rng.hpp"
#include "navforge/tripa.hpp"

using namespace navforge;
using namespace navforge::tripa;

namespace {

constexpr Action F = Action::kMoveForward, L = Action::kTurnLeft, R = Action::kTurnRight,
                 S = Action::kStop;

std::string id(int i) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "s%05d", i);
  return buf;
}

// n records with d spread uniformly over [0, 1].
std::vector<DifficultyRecord> spread(int n) {
  std::vector<DifficultyRecord> out;
  for (int i = 0; i < n; ++i) {
    const double d = n > 1 ? static_cast<double>(i) / (n - 1) : 0.0;
    out.push_back({id(i), d, d, d, d, -1});
  }
  return out;
}

std::vector<DifficultyRecord> random_records(int n, std::uint64_t seed) {
  KeyedRng rng(seed, "records", "d");
  std::vector<DifficultyRecord> out;
  for (int i = 0; i < n; ++i) {
    const double d = rng.uniform();
    out.push_back({id(i), d, d, d, d, -1});
  }
  return out;
}

}  // namespace

TEST_CASE("default phase vectors are row- and column-stochastic") {
  for (int p = 0; p < kPhases; ++p) {
    double row = 0;
    for (int b = 0; b < kBuckets; ++b) row += kDefaultPhaseWeights[p][b];
    CHECK(row == doctest::Approx(1.0).epsilon(1e-12));
  }
  for (int b = 0; b < kBuckets; ++b) {
    double col = 0;
    for (int p = 0; p < kPhases; ++p) col += kDefaultPhaseWeights[p][b];
    CHECK(col == doctest::Approx(1.0).epsilon(1e-12));
  }
  CHECK_NOTHROW(check_phase_weights(kDefaultPhaseWeights));
  PhaseWeights bad = kDefaultPhaseWeights;
  bad[0][0] = 0.6;
  CHECK_THROWS_AS(check_phase_weights(bad), UsageError);
}

TEST_CASE("raw factor examples") {
  Episode ep;
  ep.instruction = "walk to the red door";
  ep.actions = {L, L, R, F, F, F, F, F, F, S};
  ep.frames = fold_frames("s", {}, ep.actions);
  const RawFactors f = raw_factors(ep);
  CHECK(f.instr == 5);
  CHECK(f.turn == doctest::Approx(0.3).epsilon(1e-15));
  CHECK(f.traj == doctest::Approx(std::log(11.0)));

  Episode nine;
  nine.actions.assign(8, F);
  nine.actions.push_back(S);
  nine.frames = fold_frames("s", {}, nine.actions);
  CHECK(raw_factors(nine).traj == doctest::Approx(2.302585).epsilon(1e-6));
}

TEST_CASE("min-max normalization") {
  CHECK(normalize_corpus(std::vector<double>{2, 4, 6}) == std::vector<double>{0, 0.5, 1});
  CHECK(normalize_corpus(std::vector<double>{5, 5, 5}) == std::vector<double>{0, 0, 0});
  CHECK(normalize_corpus(std::vector<double>{std::log(10.0), std::log(100.0)}) ==
        std::vector<double>{0, 1});
  CHECK(normalize_corpus(std::vector<double>{}).empty());
}

TEST_CASE("score examples") {
  const std::vector<FactorScores> s = {{"a", 0, 0, 0}, {"b", 0.5, 0.5, 0.5}, {"c", 1.0, 0.0, 0.5}};
  const auto r = score(s);
  CHECK(r[0].d == 0.0);
  CHECK(r[1].d == 0.5);
  CHECK(std::abs(r[2].d - 0.7) <= 1e-12);
  CHECK_THROWS_AS(score(s, Weights{-0.1, 0.5, 0.6}), UsageError);
}

TEST_CASE("score matches an independent weighted sum") {
  KeyedRng rng(2, "score", "factors");
  std::vector<FactorScores> s;
  for (int i = 0; i < 1000; ++i) s.push_back({id(i), rng.uniform(), rng.uniform(), rng.uniform()});
  const Weights w{0.5, 0.3, 0.2};
  const auto r = score(s, w);
  for (std::size_t i = 0; i < s.size(); ++i) {
    const double expect = w.alpha * s[i].s_traj + w.beta * s[i].s_instr + w.gamma * s[i].s_turn;
    REQUIRE(std::abs(r[i].d - expect) <= 1e-12);
  }
}

TEST_CASE("bucketize sizes, order and ties") {
  auto b8 = bucketize(random_records(8, 1));
  for (int k = 0; k < 4; ++k) {
    CHECK(std::count_if(b8.begin(), b8.end(), [&](const auto& r) { return r.bucket == k; }) == 2);
  }
  for (std::size_t i = 1; i < b8.size(); ++i) CHECK(b8[i - 1].d <= b8[i].d);
  CHECK(b8[0].bucket == 0);

  const auto b5 = bucketize(random_records(5, 2));
  std::vector<int> sizes(4);
  for (const auto& r : b5) ++sizes[r.bucket];
  CHECK(sizes == std::vector<int>{2, 1, 1, 1});

  std::vector<DifficultyRecord> equal;
  for (const char* name : {"d", "b", "a", "c"}) equal.push_back({name, 0, 0, 0, 0.3, -1});
  const auto tied = bucketize(equal);
  CHECK(tied[0].sample_id == "a");
  CHECK(tied[0].bucket == 0);
  CHECK(tied[3].sample_id == "d");
  CHECK(tied[3].bucket == 3);

  try {
    bucketize(random_records(3, 3));
    FAIL("expected error");
  } catch (const ValidationError& e) {
    CHECK(std::string(e.what()).find("need >= 4 samples for 4 buckets") != std::string::npos);
  }
}

TEST_CASE("quotas for equal buckets of 100 are the weight vectors times 100") {
  const QuotaMatrix q = allocate_quotas({100, 100, 100, 100}, kDefaultPhaseWeights);
  for (int p = 0; p < kPhases; ++p) {
    for (int b = 0; b < kBuckets; ++b) {
      CHECK(q[p][b] == static_cast<int>(std::lround(kDefaultPhaseWeights[p][b] * 100)));
    }
  }
  CHECK(q[0][0] == 50);
  CHECK(q[1][0] == 35);
  CHECK(q[2][0] == 10);
  CHECK(q[3][0] == 5);
}

TEST_CASE("quota columns always sum to bucket sizes") {
  KeyedRng rng(4, "quotas", "sizes");
  for (int trial = 0; trial < 200; ++trial) {
    std::array<int, 4> sizes{};
    for (int& s : sizes) s = static_cast<int>(rng.below(60));
    const QuotaMatrix q = allocate_quotas(sizes, kDefaultPhaseWeights);
    for (int b = 0; b < kBuckets; ++b) {
      int col = 0;
      for (int p = 0; p < kPhases; ++p) {
        CHECK(q[p][b] >= 0);
        col += q[p][b];
      }
      CHECK(col == sizes[b]);
    }
  }
}

TEST_CASE("plan of 400 equal-bucket samples") {
  const auto records = bucketize(spread(400));
  const EpochPlan plan = plan_epoch(records, 9);
  for (const auto& phase : plan.phases) CHECK(phase.size() == 100);
  CHECK(plan.quotas[0][0] == 50);
  const PlanReport rep = verify_plan(plan, records);
  CHECK(rep.ok());
  for (double l1 : rep.l1_deviation) CHECK(l1 <= 1e-12);
  for (int p = 1; p < kPhases; ++p) {
    CHECK(rep.expected_phase_mean_d[p] > rep.expected_phase_mean_d[p - 1]);
    CHECK(rep.phase_mean_d[p] > rep.phase_mean_d[p - 1]);
  }
  // Independent expectation: quota-weighted bucket means.
  std::array<double, 4> bucket_mean{};
  std::array<int, 4> count{};
  for (const auto& r : records) bucket_mean[r.bucket] += r.d, ++count[r.bucket];
  for (int b = 0; b < 4; ++b) bucket_mean[b] /= count[b];
  for (int p = 0; p < kPhases; ++p) {
    double e = 0;
    for (int b = 0; b < kBuckets; ++b) e += plan.quotas[p][b] * bucket_mean[b];
    CHECK(rep.expected_phase_mean_d[p] == doctest::Approx(e / 100).epsilon(1e-12));
  }
}

TEST_CASE("N = 4 plans still cover every sample once") {
  const auto records = bucketize(spread(4));
  const EpochPlan plan = plan_epoch(records, 1);
  std::size_t total = 0;
  for (const auto& phase : plan.phases) total += phase.size();
  CHECK(total == 4);
  CHECK(verify_plan(plan, records).permutation_ok);
}

TEST_CASE("plans are permutations, deterministic and seed dependent") {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const int n = 4 + static_cast<int>(KeyedRng(seed, "n", "n").below(300));
    const auto records = bucketize(random_records(n, seed));
    for (bool stochastic : {false, true}) {
      PlanOptions opt;
      opt.stochastic = stochastic;
      const EpochPlan plan = plan_epoch(records, seed, 0, opt);
      auto ids = flatten(plan);
      CHECK(ids.size() == records.size());
      std::sort(ids.begin(), ids.end());
      CHECK(std::adjacent_find(ids.begin(), ids.end()) == ids.end());
      CHECK(verify_plan(plan, records).permutation_ok);
      CHECK(plan == plan_epoch(records, seed, 0, opt));
    }
  }
  const auto records = bucketize(spread(100));
  CHECK(flatten(plan_epoch(records, 1)) != flatten(plan_epoch(records, 2)));
  CHECK(flatten(plan_epoch(records, 1, 0)) != flatten(plan_epoch(records, 1, 1)));
}

TEST_CASE("plan_epoch rejects unbucketized or duplicate records") {
  CHECK_THROWS(plan_epoch(spread(8), 1));
  auto records = bucketize(spread(8));
  records[1].sample_id = records[0].sample_id;
  CHECK_THROWS_AS(plan_epoch(records, 1), ValidationError);
}

TEST_CASE("verify_plan names duplicated and missing ids") {
  const auto records = bucketize(spread(40));
  EpochPlan plan = plan_epoch(records, 3);
  const std::string dropped = plan.phases[3].back().sample_id;
  plan.phases[3].back() = plan.phases[0].front();
  const PlanReport rep = verify_plan(plan, records);
  CHECK_FALSE(rep.permutation_ok);
  CHECK(rep.duplicates == std::vector<std::string>{plan.phases[0].front().sample_id});
  CHECK(rep.missing == std::vector<std::string>{dropped});
}

TEST_CASE("score and plan files round trip") {
  const auto dir = std::filesystem::temp_directory_path() / "navforge_test_tripa";
  std::filesystem::create_directories(dir);
  auto records = bucketize(random_records(30, 8));
  records[0].bucket = -1;
  write_scores(records, dir / "scores.jsonl");
  CHECK(read_scores(dir / "scores.jsonl") == records);

  const EpochPlan plan = plan_epoch(bucketize(random_records(30, 8)), 5, 2);
  write_plan(plan, dir / "plan.jsonl", Json{{"command", "plan"}});
  CHECK(read_plan(dir / "plan.jsonl") == plan);
  CHECK(render_plan(plan) == render_plan(read_plan(dir / "plan.jsonl")));
  std::filesystem::remove_all(dir);
}

TEST_CASE("score_episodes uses corpus normalization and is worker independent") {
  std::vector<Episode> eps;
  for (int i = 0; i < 12; ++i) {
    Episode ep;
    ep.episode_id = id(i);
    ep.instruction = std::string(static_cast<std::size_t>(i + 1) * 2, 'w');
    for (int k = 0; k <= i; ++k) ep.actions.push_back(k % 3 == 0 ? L : F);
    ep.actions.push_back(S);
    ep.frames = fold_frames("s", {}, ep.actions);
    eps.push_back(std::move(ep));
  }
  const auto a = score_episodes(eps, {}, 1);
  CHECK(a == score_episodes(eps, {}, 4));
  CHECK(a.front().s_traj == 0.0);
  CHECK(a.back().s_traj == 1.0);
  for (const auto& r : a) CHECK(r.s_instr == 0.0);  // one word each
}
