#include <gtest/gtest.h>

#include <cmath>
#include <map>

#include "support.hpp"
#include "tsel/error.hpp"
#include "tsel/rankers.hpp"

using namespace tsel;
using testing_support::fixtures;

namespace {

Ranking manual(std::vector<TaskId> ids, std::string method = "m", TaskId target = "T") {
  Ranking r{std::move(target), std::move(method), {}};
  double s = static_cast<double>(ids.size());
  for (auto& id : ids) r.entries.push_back({std::move(id), s--});
  return r;
}

}  // namespace

TEST(MakeRanking, DescendingWithIdTieBreak) {
  const auto r = make_ranking("T", "m", {{"b", 1}, {"a", 1}, {"c", 2}});
  EXPECT_EQ(r.ids(), (std::vector<TaskId>{"c", "a", "b"}));
  EXPECT_THROW(make_ranking("T", "m", {{"a", NAN}}), DomainError);
  EXPECT_THROW(make_ranking("T", "m", {{"a", 1}, {"a", 2}}), StructuralError);
}

TEST(SizeRanker, FixtureTopThree) {
  const auto& fx = fixtures();
  const auto r = rank_by_size(fx.manifest, fx.roberta.intermediates(), "RTE");
  ASSERT_EQ(r.size(), 42u);
  EXPECT_EQ(r.method, "size");
  EXPECT_EQ(r.entries[0].id, "Yelp Polarity");
  EXPECT_EQ(r.entries[1].id, "SNLI");
  EXPECT_EQ(r.entries[2].id, "MNLI");
  EXPECT_EQ(r.entries[0].score, 560000.0);
  for (std::size_t i = 1; i < r.size(); ++i) EXPECT_GE(r.entries[i - 1].score, r.entries[i].score);
}

TEST(SizeRanker, UnknownIdIsLookupError) {
  const std::vector<TaskId> ids{"NotATask"};
  EXPECT_THROW(rank_by_size(fixtures().manifest, ids, "RTE"), LookupError);
}

TEST(RandomRanker, DeterministicAndOrderIndependent) {
  const std::vector<TaskId> a{"x", "y", "z", "w"};
  const std::vector<TaskId> b{"w", "z", "y", "x"};
  EXPECT_EQ(rank_random(a, "T", 3), rank_random(b, "T", 3));
  const auto r = rank_random(a, "T", 3);
  EXPECT_EQ(r.method, "random");
  for (std::size_t i = 0; i < r.size(); ++i) EXPECT_EQ(r.entries[i].score, 4.0 - static_cast<double>(i));
  const std::vector<TaskId> dup{"x", "x"};
  EXPECT_THROW(rank_random(dup, "T", 0), StructuralError);
}

TEST(RandomRanker, TopPositionIsUniform) {
  const std::vector<TaskId> ids{"a", "b", "c"};
  std::map<TaskId, int> top;
  const int n = 30000;
  for (int s = 0; s < n; ++s) ++top[rank_random(ids, "T", static_cast<std::uint64_t>(s)).entries[0].id];
  for (const auto& id : ids) EXPECT_NEAR(static_cast<double>(top[id]) / n, 1.0 / 3.0, 0.02) << id;
}

TEST(CosineRanker, OrdersBySimilarity) {
  const EmbeddingSet e(EmbeddingKind::sentence, 2,
                       {{"T", {1, 0}}, {"near", {0.9, 0.1}}, {"mid", {1, 1}}, {"far", {-1, 0.2}}});
  const std::vector<TaskId> ids{"far", "mid", "near"};
  const auto r = rank_by_cosine(e, ids, "T");
  EXPECT_EQ(r.ids(), (std::vector<TaskId>{"near", "mid", "far"}));
  EXPECT_EQ(r.method, "semb");
  EXPECT_NEAR(r.entries[1].score, 1 / std::sqrt(2.0), 1e-12);
}

TEST(CosineRanker, DuplicatedTargetVectorScoresOne) {
  const EmbeddingSet e(EmbeddingKind::text_mean, 3, {{"T", {0.3, -1, 2}}, {"same", {0.3, -1, 2}}, {"o", {1, 1, 1}}});
  const std::vector<TaskId> ids{"o", "same"};
  const auto r = rank_by_cosine(e, ids, "T");
  EXPECT_EQ(r.entries[0].id, "same");
  EXPECT_NEAR(r.entries[0].score, 1.0, 1e-12);
  EXPECT_EQ(r.method, "textemb");
}

TEST(CosineRanker, MissingOrZeroVectorNamesTheTask) {
  const EmbeddingSet e(EmbeddingKind::text_mean, 2, {{"T", {1, 0}}, {"zero", {0, 0}}});
  const std::vector<TaskId> zero{"zero"};
  const std::vector<TaskId> missing{"ghost"};
  try {
    rank_by_cosine(e, zero, "T");
    FAIL();
  } catch (const DomainError& err) {
    EXPECT_NE(std::string(err.what()).find("zero"), std::string::npos);
  }
  try {
    rank_by_cosine(e, missing, "T");
    FAIL();
  } catch (const DomainError& err) {
    EXPECT_NE(std::string(err.what()).find("ghost"), std::string::npos);
  }
}

TEST(ScoreRanker, UsesListedIntermediates) {
  const std::map<TaskId, double> s{{"a", 0.1}, {"b", 0.9}, {"c", 0.5}};
  EXPECT_EQ(rank_by_scores(s, "T").ids(), (std::vector<TaskId>{"b", "c", "a"}));
  const std::vector<TaskId> sub{"a", "c"};
  EXPECT_EQ(rank_by_scores(s, "T", sub, "fsft").ids(), (std::vector<TaskId>{"c", "a"}));
  EXPECT_EQ(rank_by_scores(s, "T", sub, "fsft").method, "fsft");
  const std::vector<TaskId> bad{"a", "zz"};
  EXPECT_THROW(rank_by_scores(s, "T", bad), LookupError);
  EXPECT_THROW(rank_by_scores({{"a", INFINITY}}, "T"), DomainError);
}

TEST(TypePrerank, StablePartition) {
  const Manifest m({{"qa1", TaskType::extractive_qa, 1, "F1", TaskRole::intermediate},
                    {"cls1", TaskType::classification, 1, "acc", TaskRole::intermediate},
                    {"qa2", TaskType::extractive_qa, 1, "F1", TaskRole::intermediate},
                    {"cls2", TaskType::classification, 1, "acc", TaskRole::intermediate}});
  const auto r = type_prerank(manual({"qa1", "cls1", "qa2"}, "size"), m, TaskType::classification);
  EXPECT_EQ(r.ids(), (std::vector<TaskId>{"cls1", "qa1", "qa2"}));
  EXPECT_EQ(r.method, "size-T");
  EXPECT_EQ(type_prerank(r, m, TaskType::classification).method, "size-T");
  const auto q = type_prerank(manual({"cls2", "qa1", "cls1", "qa2"}), m, TaskType::extractive_qa);
  EXPECT_EQ(q.ids(), (std::vector<TaskId>{"qa1", "qa2", "cls2", "cls1"}));
}

TEST(TypePrerank, KeepsEntryScores) {
  const Manifest m({{"a", TaskType::tagging, 1, "F1", TaskRole::intermediate},
                    {"b", TaskType::classification, 1, "acc", TaskRole::intermediate}});
  const auto r = type_prerank(manual({"a", "b"}), m, TaskType::classification);
  EXPECT_EQ(r.entries[0], (RankEntry{"b", 1.0}));
  EXPECT_EQ(r.entries[1], (RankEntry{"a", 2.0}));
}

TEST(Rrf, WorkedExample) {
  const std::vector<Ranking> in{manual({"A", "B", "C"}, "x"), manual({"B", "A", "C"}, "y")};
  const auto f = rrf_fuse(in);
  ASSERT_EQ(f.size(), 3u);
  EXPECT_EQ(f.entries[0].id, "A");
  EXPECT_EQ(f.entries[1].id, "B");
  EXPECT_EQ(f.entries[2].id, "C");
  EXPECT_NEAR(f.entries[0].score, 1.0 / 61 + 1.0 / 62, 1e-15);
  EXPECT_NEAR(f.entries[0].score, 0.0325225, 1e-7);
  EXPECT_EQ(f.entries[0].score, f.entries[1].score);
  EXPECT_NEAR(f.entries[2].score, 2.0 / 63, 1e-15);
  EXPECT_NEAR(f.entries[2].score, 0.031746, 1e-6);
  EXPECT_EQ(f.method, "x+y");
}

TEST(Rrf, ReversedPairTiesTheEnds) {
  const std::vector<Ranking> in{manual({"A", "B", "C"}), manual({"C", "B", "A"})};
  const auto f = rrf_fuse(in);
  EXPECT_EQ(f.ids(), (std::vector<TaskId>{"A", "C", "B"}));
  EXPECT_EQ(f.entries[0].score, f.entries[1].score);
  EXPECT_GT(f.entries[1].score, f.entries[2].score);
}

TEST(Rrf, IdenticalInputsReproduceOrder) {
  const std::vector<Ranking> in{manual({"q", "b", "z", "a"}), manual({"q", "b", "z", "a"}),
                                manual({"q", "b", "z", "a"})};
  EXPECT_EQ(rrf_fuse(in).ids(), (std::vector<TaskId>{"q", "b", "z", "a"}));
}

TEST(Rrf, StructuralChecks) {
  const std::vector<Ranking> one{manual({"A"})};
  EXPECT_THROW(rrf_fuse(one), StructuralError);
  const std::vector<Ranking> diff_ids{manual({"A", "B"}), manual({"A", "C"})};
  EXPECT_THROW(rrf_fuse(diff_ids), StructuralError);
  const std::vector<Ranking> diff_target{manual({"A", "B"}, "m", "T"), manual({"A", "B"}, "m", "U")};
  EXPECT_THROW(rrf_fuse(diff_target), StructuralError);
  const std::vector<Ranking> ok{manual({"A", "B"}), manual({"B", "A"})};
  EXPECT_THROW(rrf_fuse(ok, 0.0), DomainError);
}

TEST(MethodSpecTest, Validation) {
  EXPECT_NO_THROW((MethodSpec{"size", MethodKind::size, {}}.validate()));
  EXPECT_THROW((MethodSpec{"r", MethodKind::random, {}}.validate()), UnsupportedConfigError);
  EXPECT_THROW((MethodSpec{"r", MethodKind::random, {{"seed", "-1"}}}.validate()), UnsupportedConfigError);
  EXPECT_NO_THROW((MethodSpec{"r", MethodKind::random, {{"seed", "12"}}}.validate()));
  EXPECT_THROW((MethodSpec{"e", MethodKind::embedding_cosine, {{"embedding", "word2vec"}}}.validate()),
               UnsupportedConfigError);
  EXPECT_NO_THROW((MethodSpec{"e", MethodKind::embedding_cosine, {{"embedding", "task_fim"}}}.validate()));
  EXPECT_THROW((MethodSpec{"s", MethodKind::score_table, {}}.validate()), UnsupportedConfigError);
  EXPECT_THROW((MethodSpec{"f", MethodKind::fused, {{"components", "a"}}}.validate()), UnsupportedConfigError);
  EXPECT_THROW((MethodSpec{"f", MethodKind::fused, {{"components", "a,b"}, {"constant", "x"}}}.validate()),
               UnsupportedConfigError);
  EXPECT_NO_THROW((MethodSpec{"f", MethodKind::fused, {{"components", "a,b"}, {"constant", "60"}}}.validate()));
}

TEST(MethodSpecTest, PreferSameTypeFlag) {
  EXPECT_FALSE((MethodSpec{"s", MethodKind::size, {}}.prefer_same_type()));
  EXPECT_TRUE((MethodSpec{"s", MethodKind::size, {{"prefer_same_type", "true"}}}.prefer_same_type()));
  EXPECT_TRUE((MethodSpec{"s", MethodKind::size, {{"prefer_same_type", "1"}}}.prefer_same_type()));
  EXPECT_FALSE((MethodSpec{"s", MethodKind::size, {{"prefer_same_type", "no"}}}.prefer_same_type()));
}
