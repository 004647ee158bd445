#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "oracles.hpp"
#include "support.hpp"
#include "tsel/error.hpp"
#include "tsel/metrics.hpp"
#include "tsel/rankers.hpp"

using namespace tsel;
using testing_support::fixtures;
using testing_support::single_target;

namespace {

Ranking in_order(const TransferTable& t, std::vector<TaskId> ids) {
  Ranking r{t.targets().front(), "manual", {}};
  double score = static_cast<double>(ids.size());
  for (auto& id : ids) r.entries.push_back({std::move(id), score--});
  return r;
}

}  // namespace

TEST(Dcg, HandEvaluatedLists) {
  EXPECT_NEAR(dcg(std::vector<double>{3, 2, 1}), 7.0 + 3.0 / std::log2(3.0) + 0.5, 1e-12);
  EXPECT_NEAR(dcg(std::vector<double>{3, 2, 1}), 9.392789, 1e-6);
  EXPECT_NEAR(dcg(std::vector<double>{1, 2, 3}), 6.392789, 1e-6);
  EXPECT_EQ(dcg(std::vector<double>{0, 0, 0}), 0.0);
}

TEST(Dcg, RejectsNegativeAndNonFinite) {
  EXPECT_THROW(dcg(std::vector<double>{1, -0.5}), DomainError);
  EXPECT_THROW(dcg(std::vector<double>{NAN}), DomainError);
  EXPECT_THROW(dcg(std::vector<double>{INFINITY}), DomainError);
}

TEST(Dcg, LargeRelevancesStayFinite) {
  const double v = dcg(std::vector<double>{100, 100});
  EXPECT_TRUE(std::isfinite(v));
  EXPECT_NEAR(v / (std::pow(2.0, 100) - 1), 1.0 + 1.0 / std::log2(3.0), 1e-12);
}

TEST(Ndcg, IdealWorstAndFlat) {
  const auto t = single_target({3, 2, 1});
  EXPECT_DOUBLE_EQ(ndcg(in_order(t, {"a", "b", "c"}), t), 1.0);
  EXPECT_NEAR(ndcg(in_order(t, {"c", "b", "a"}), t), 6.392789 / 9.392789, 1e-6);
  EXPECT_NEAR(ndcg(in_order(t, {"c", "b", "a"}), t), 0.68061, 1e-5);
  const auto flat = single_target({5, 5, 5, 5});
  EXPECT_DOUBLE_EQ(ndcg(in_order(flat, {"d", "b", "a", "c"}), flat), 1.0);
}

TEST(Ndcg, MismatchedRankingIsStructural) {
  const auto t = single_target({3, 2, 1});
  EXPECT_THROW(ndcg(in_order(t, {"a", "b"}), t), StructuralError);
  EXPECT_THROW(ndcg(in_order(t, {"a", "b", "z"}), t), StructuralError);
  EXPECT_THROW(ndcg(in_order(t, {"a", "a", "b"}), t), StructuralError);
  Ranking wrong = in_order(t, {"a", "b", "c"});
  wrong.target = "X";
  EXPECT_THROW(ndcg(wrong, t), StructuralError);
}

TEST(Ndcg, InvariantUnderSwappingEqualRelevance) {
  const auto t = single_target({4, 2, 4, 1});
  EXPECT_DOUBLE_EQ(ndcg(in_order(t, {"b", "a", "d", "c"}), t), ndcg(in_order(t, {"b", "c", "d", "a"}), t));
}

TEST(Regret, FullDepthIsZeroAndRangeIsChecked) {
  const auto t = single_target({3, 9, 1});
  const auto r = in_order(t, {"c", "a", "b"});
  EXPECT_EQ(regret_at_k(r, t, 3), 0.0);
  EXPECT_NEAR(regret_at_k(r, t, 1), 100.0 * 8 / 9, 1e-12);
  EXPECT_THROW(regret_at_k(r, t, 0), DomainError);
  EXPECT_THROW(regret_at_k(r, t, 4), DomainError);
}

TEST(Regret, FixtureRteTopThree) {
  const auto& t = fixtures().roberta;
  const auto col = t.column(t.target_index("RTE"));
  // Rank every intermediate by its RTE score but push the optimum (ANLI) last.
  std::map<TaskId, double> s;
  for (std::size_t i = 0; i < col.size(); ++i) s[t.intermediates()[i]] = col[i];
  s["ANLI"] = -1;
  const Ranking r = rank_by_scores(s, "RTE");
  EXPECT_EQ(t.score(r.entries[0].id, "RTE"), 83.47);
  EXPECT_EQ(t.score(r.entries[1].id, "RTE"), 83.32);
  EXPECT_EQ(t.score(r.entries[2].id, "RTE"), 79.21);
  EXPECT_NEAR(regret_at_k(r, t, 3), 100.0 * (84.40 - 83.47) / 84.40, 1e-9);
  EXPECT_NEAR(regret_at_k(r, t, 3), 1.10, 0.005);
}

TEST(Regret, FixtureCopyYelpFirst) {
  const auto& t = fixtures().roberta;
  std::map<TaskId, double> s;
  for (const auto& id : t.intermediates()) s[id] = id == "Yelp Polarity" ? 1.0 : 0.0;
  const Ranking r = rank_by_scores(s, "COPA");
  EXPECT_NEAR(regret_at_k(r, t, 1), 100.0 * (79.92 - 65.80) / 79.92, 1e-9);
  EXPECT_NEAR(regret_at_k(r, t, 1), 17.67, 0.005);
}

TEST(Regret, NonIncreasingInKAndZeroIffOptimumOnTop) {
  std::mt19937_64 gen(7);
  std::uniform_real_distribution<double> u(1, 100);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<double> v(7);
    for (double& x : v) x = std::round(u(gen));
    const auto t = single_target(v);
    Ranking r = rank_random(t.intermediates(), "T", trial);
    double prev = 101;
    for (std::size_t k = 1; k <= 7; ++k) {
      const double g = regret_at_k(r, t, k);
      EXPECT_LE(g, prev);
      EXPECT_GE(g, 0.0);
      prev = g;
    }
    const double top = t.score(r.entries[0].id, "T");
    EXPECT_EQ(regret_at_k(r, t, 1) == 0.0, top == *std::max_element(v.begin(), v.end()));
  }
}

TEST(ExpectedRandomRegret, SmallEnumerations) {
  const std::vector<double> s{10, 8, 2};
  EXPECT_NEAR(expected_random_regret(s, 1), 100.0 * (10 - 20.0 / 3) / 10, 1e-12);
  EXPECT_NEAR(expected_random_regret(s, 2), 100.0 * (10 - 28.0 / 3) / 10, 1e-12);
  EXPECT_EQ(expected_random_regret(s, 3), 0.0);
  EXPECT_THROW(expected_random_regret(s, 0), DomainError);
  EXPECT_THROW(expected_random_regret(s, 4), DomainError);
}

TEST(ExpectedRandomRegret, MatchesSubsetEnumeration) {
  std::mt19937_64 gen(11);
  std::uniform_real_distribution<double> u(0, 100);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t n = 1 + trial % 8;
    std::vector<double> v(n);
    for (double& x : v) x = trial % 3 == 0 ? std::round(u(gen) / 20) * 20 + 1 : u(gen) + 1e-3;
    for (std::size_t k = 1; k <= n; ++k) {
      EXPECT_NEAR(expected_random_regret(v, k), oracle::expected_random_regret(v, k), 1e-12);
    }
  }
}

TEST(ExpectedRandomNdcg, TrivialCasesAndDeterminism) {
  const std::vector<double> flat{7, 7, 7};
  EXPECT_DOUBLE_EQ(expected_random_ndcg_estimate(flat, 100, 3).mean, 1.0);
  EXPECT_DOUBLE_EQ(expected_random_ndcg_estimate(std::vector<double>{42}, 10, 1).mean, 1.0);
  const std::vector<double> r{3, 2, 1};
  const auto a = expected_random_ndcg_estimate(r, 500, 9);
  const auto b = expected_random_ndcg_estimate(r, 500, 9);
  EXPECT_EQ(a.mean, b.mean);
  EXPECT_EQ(a.std_error, b.std_error);
  EXPECT_NE(a.mean, expected_random_ndcg_estimate(r, 500, 10).mean);
}

TEST(ExpectedRandomNdcg, CloseToPermutationEnumeration) {
  const std::vector<double> r{3, 2, 1};
  EXPECT_NEAR(expected_random_ndcg_estimate(r, 6000, 1).mean, oracle::exact_random_ndcg(r), 0.02);
  std::mt19937_64 gen(5);
  std::uniform_real_distribution<double> u(0, 6);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<double> v(2 + trial % 5);
    for (double& x : v) x = u(gen);
    const auto est = expected_random_ndcg_estimate(v, 4000, trial);
    EXPECT_NEAR(est.mean, oracle::exact_random_ndcg(v), 3 * est.std_error + 1e-12);
  }
}

TEST(EvaluateRanking, ClampsDeepKs) {
  const auto t = single_target({1, 2});
  const auto row = evaluate_ranking(in_order(t, {"a", "b"}), t);
  EXPECT_EQ(row.regret.size(), 3u);
  EXPECT_EQ(row.regret.at(3), 0.0);
  EXPECT_EQ(row.regret.at(5), 0.0);
}

namespace {

Manifest groups_manifest() {
  return Manifest({{"s", TaskType::classification, 1, "acc", TaskRole::intermediate},
                   {"c1", TaskType::classification, 1, "acc", TaskRole::target},
                   {"c2", TaskType::classification, 1, "acc", TaskRole::target},
                   {"q1", TaskType::extractive_qa, 1, "F1", TaskRole::target}});
}

MetricRow row(double ndcg, double r1) { return MetricRow{ndcg, {{1, r1}}}; }

}  // namespace

TEST(Aggregate, GroupMeansAndOverall) {
  std::map<MethodTarget, MetricRow> rows{
      {{"m", "c1"}, row(0.5, 10)}, {{"m", "c2"}, row(0.7, 20)}, {{"m", "q1"}, row(0.9, 30)}};
  const auto rep = aggregate(rows, groups_manifest());
  EXPECT_DOUBLE_EQ(rep.per_group.at({"m", TaskType::classification}).regret.at(1), 15.0);
  EXPECT_DOUBLE_EQ(rep.per_group.at({"m", TaskType::classification}).ndcg, 0.6);
  EXPECT_DOUBLE_EQ(rep.per_group.at({"m", TaskType::extractive_qa}).ndcg, 0.9);
  EXPECT_DOUBLE_EQ(rep.overall.at("m").regret.at(1), 20.0);
  EXPECT_EQ(rep.methods(), std::vector<std::string>{"m"});
}

TEST(Aggregate, EqualRowsGiveThatRow) {
  std::map<MethodTarget, MetricRow> rows{{{"m", "c1"}, row(0.4, 3)}, {{"m", "q1"}, row(0.4, 3)}};
  const auto rep = aggregate(rows, groups_manifest(), {"c1", "q1"});
  EXPECT_EQ(rep.per_group.at({"m", TaskType::classification}), row(0.4, 3));
  EXPECT_EQ(rep.per_group.at({"m", TaskType::extractive_qa}), row(0.4, 3));
  EXPECT_EQ(rep.overall.at("m"), row(0.4, 3));
}

TEST(Aggregate, MissingGroupMakesOverallAbsent) {
  std::map<MethodTarget, MetricRow> rows{{{"knn", "c1"}, row(0.5, 10)},
                                         {{"knn", "c2"}, row(0.7, 20)},
                                         {{"size", "c1"}, row(0.1, 1)},
                                         {{"size", "c2"}, row(0.1, 1)},
                                         {{"size", "q1"}, row(0.1, 1)}};
  const auto rep = aggregate(rows, groups_manifest());
  EXPECT_TRUE(rep.per_group.count({"knn", TaskType::classification}));
  EXPECT_FALSE(rep.per_group.count({"knn", TaskType::extractive_qa}));
  EXPECT_FALSE(rep.overall.count("knn"));
  EXPECT_TRUE(rep.overall.count("size"));
}

TEST(Aggregate, MissingTaskTypeIsAnError) {
  std::map<MethodTarget, MetricRow> rows{{{"m", "zz"}, row(0.5, 10)}};
  EXPECT_THROW(aggregate(rows, groups_manifest()), LookupError);
}

TEST(MonteCarloRow, DeterministicAndAveraged) {
  const auto t = single_target({9, 3, 5, 1});
  auto draw = [&](std::uint64_t s) { return rank_random(t.intermediates(), "T", s); };
  const auto a = monte_carlo_row(t, 2000, 3, draw);
  EXPECT_EQ(a, monte_carlo_row(t, 2000, 3, draw));
  EXPECT_NEAR(a.regret.at(1), expected_random_regret(t.column(0), 1), 2.0);
}
