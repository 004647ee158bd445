#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <set>

#include "tsel/error.hpp"
#include "tsel/toylab.hpp"

using namespace tsel;

namespace {

ToyUniverseConfig small_universe(std::uint64_t seed = 0) {
  ToyUniverseConfig c;
  c.n_intermediates = 5;
  c.n_targets = 2;
  c.dim = 4;
  c.examples_per_intermediate = 200;
  c.target_train_cap = 60;
  c.validation_examples = 150;
  c.test_examples = 150;
  c.domain_drift = 0.0;
  c.seed = seed;
  return c;
}

ToyTrainConfig small_train() {
  ToyTrainConfig c;
  c.restarts = 2;
  c.epochs_max = 6;
  c.early_stop_patience = 2;
  c.few_shot_steps = 10;
  return c;
}

}  // namespace

TEST(ToyConfig, Validation) {
  EXPECT_NO_THROW(ToyUniverseConfig{}.validate());
  auto u = ToyUniverseConfig{};
  u.classes = 1;
  EXPECT_THROW(u.validate(), UnsupportedConfigError);
  u = ToyUniverseConfig{};
  u.n_targets = 0;
  EXPECT_THROW(u.validate(), UnsupportedConfigError);
  u = ToyUniverseConfig{};
  u.domain_drift = -1;
  EXPECT_THROW(u.validate(), UnsupportedConfigError);
  auto t = ToyTrainConfig{};
  EXPECT_NO_THROW(t.validate());
  t.early_stop_patience = t.epochs_max;
  EXPECT_THROW(t.validate(), UnsupportedConfigError);
  t = ToyTrainConfig{};
  t.batch_size = 0;
  EXPECT_THROW(t.validate(), UnsupportedConfigError);
}

TEST(ToyUniverseTest, ShapeAndDeterminism) {
  const auto cfg = small_universe();
  const auto u = gen_universe(cfg);
  EXPECT_EQ(u.intermediate_ids(), (std::vector<TaskId>{"s00", "s01", "s02", "s03", "s04"}));
  EXPECT_EQ(u.target_ids(), (std::vector<TaskId>{"t00", "t01"}));
  EXPECT_EQ(u.manifest().size(), 7u);
  for (const auto& t : u.targets) {
    EXPECT_EQ(t.train.examples.size(), 60u);
    EXPECT_EQ(t.meta.train_size, 60u);
    EXPECT_EQ(t.meta.role, TaskRole::target);
    EXPECT_EQ(t.validation.examples.size(), 150u);
  }
  for (const auto& s : u.intermediates) {
    EXPECT_GE(s.train.examples.size(), 100u);
    EXPECT_LE(s.train.examples.size(), 300u);
    EXPECT_NO_THROW(s.train.validate());
  }
  const auto v = gen_universe(cfg);
  EXPECT_EQ(u.intermediates[3].train, v.intermediates[3].train);
  EXPECT_NE(u.intermediates[3].train, gen_universe(small_universe(1)).intermediates[3].train);
  EXPECT_THROW(u.task("nope"), LookupError);
}

TEST(ToyUniverseTest, CopiesShareCentersWithoutDrift) {
  const auto u = gen_universe(small_universe());
  EXPECT_EQ(u.intermediates[0].centers, u.targets[0].centers);
  EXPECT_EQ(u.intermediates[1].centers, u.targets[1].centers);
  EXPECT_NE(u.intermediates[2].centers, u.targets[0].centers);
  auto drifted = small_universe();
  drifted.domain_drift = 0.5;
  const auto d = gen_universe(drifted);
  EXPECT_NE(d.intermediates[0].centers, d.targets[0].centers);
  double dist = 0;
  for (std::size_t j = 0; j < 4; ++j) dist += std::pow(d.intermediates[0].centers[0][j] - d.targets[0].centers[0][j], 2);
  EXPECT_LT(std::sqrt(dist), 3.0);
}

TEST(ToyUniverseTest, CapChangesOnlyTargetTraining) {
  auto a = small_universe();
  auto b = small_universe();
  b.target_train_cap = 30;
  const auto ua = gen_universe(a), ub = gen_universe(b);
  EXPECT_EQ(ua.intermediates[4].train, ub.intermediates[4].train);
  EXPECT_EQ(ua.targets[0].test, ub.targets[0].test);
  EXPECT_EQ(ub.targets[0].train.examples.size(), 30u);
}

TEST(Probes, TrainingLearnsSeparableData) {
  auto cfg = small_universe();
  cfg.cluster_separation = 8;
  const auto u = gen_universe(cfg);
  const auto& t = u.intermediates[2];
  const auto fit = train_probe(t.train, t.validation, small_train(), 1);
  EXPECT_GT(fit.best_validation_accuracy, 0.9);
  EXPECT_GE(fit.best_epoch, 1u);
  EXPECT_NEAR(accuracy(fit.model, t.validation), fit.best_validation_accuracy, 1e-12);
  EXPECT_EQ(fit.model, train_probe(t.train, t.validation, small_train(), 1).model);
}

TEST(Probes, EarlyStoppingKeepsInitialCandidate) {
  const auto u = gen_universe(small_universe());
  const auto& t = u.intermediates[0];
  auto cfg = small_train();
  cfg.learning_rate = 0.0;
  const auto fit = train_probe(t.train, t.validation, cfg, 0);
  EXPECT_EQ(fit.best_epoch, 0u);
}

TEST(Probes, Preconditions) {
  const auto u = gen_universe(small_universe());
  auto one = u.intermediates[0].train;
  for (auto& e : one.examples) e.label = 0;
  EXPECT_THROW(train_probe(one, u.intermediates[0].validation, small_train(), 0), UnsupportedConfigError);
  const auto wrong = ProbeModel::zeros(2, 4);
  EXPECT_THROW(train_probe(u.intermediates[0].train, u.intermediates[0].validation, small_train(), 0, &wrong),
               StructuralError);
  const auto init = ProbeModel::zeros(3, 4);
  EXPECT_EQ(fine_tune_steps(init, u.targets[0].train, small_train(), 0, 0), init);
  EXPECT_NE(fine_tune_steps(init, u.targets[0].train, small_train(), 3, 0), init);
}

TEST(Transfer, SequentialIsDeterministicAndBounded) {
  const auto u = gen_universe(small_universe());
  const auto cfg = small_train();
  const auto fit = train_probe(u.intermediates[0].train, u.intermediates[0].validation, cfg, 0);
  const double a = sequential_transfer(fit.model, u.targets[0], cfg, 5);
  EXPECT_EQ(a, sequential_transfer(fit.model, u.targets[0], cfg, 5));
  EXPECT_GE(a, 0.0);
  EXPECT_LE(a, 100.0);
  const double b = no_transfer_score(u.targets[0], cfg, 5);
  EXPECT_GE(b, 0.0);
  EXPECT_LE(b, 100.0);
  // A probe with another class count is replaced, not reused.
  auto other = small_universe();
  other.classes = 2;
  const auto v = gen_universe(other);
  const auto fit2 = train_probe(v.intermediates[0].train, v.intermediates[0].validation, cfg, 0);
  EXPECT_EQ(sequential_transfer(fit2.model, u.targets[0], cfg, 5), b);
}

class ToyLabTest : public ::testing::Test {
 protected:
  static void SetUpTestSuite() { lab_ = new ToyLab(gen_universe(small_universe()), small_train()); }
  static void TearDownTestSuite() {
    delete lab_;
    lab_ = nullptr;
  }
  static ToyLab* lab_;
};

ToyLab* ToyLabTest::lab_ = nullptr;

TEST_F(ToyLabTest, TableShape) {
  const auto& t = lab_->table();
  EXPECT_EQ(t.model_tag(), "toy-probe");
  EXPECT_EQ(t.num_intermediates(), 5u);
  EXPECT_EQ(t.num_targets(), 2u);
  for (double v : t.raw_scores()) {
    EXPECT_GE(v, 0.0);
    EXPECT_LE(v, 100.0);
  }
  EXPECT_EQ(&t, &lab_->table());
}

TEST_F(ToyLabTest, EveryDefaultMethodRanksThePool) {
  std::set<TaskId> pool;
  for (const auto& id : lab_->universe().intermediate_ids()) pool.insert(id);
  for (const auto& m : default_lab_methods(3)) {
    const auto r = lab_->rank(m, "t01");
    EXPECT_EQ(r.method, m.name);
    auto ids = r.ids();
    EXPECT_EQ(std::set<TaskId>(ids.begin(), ids.end()), pool) << m.name;
    EXPECT_EQ(ids.size(), pool.size());
    EXPECT_EQ(r, lab_->rank(m, "t01")) << m.name;
  }
}

TEST_F(ToyLabTest, OracleIsIdeal) {
  const MethodSpec oracle{"oracle", MethodKind::score_table, {{"source", "oracle"}}};
  for (const auto& t : lab_->universe().target_ids()) {
    const auto row = evaluate_ranking(lab_->rank(oracle, t), lab_->table());
    EXPECT_DOUBLE_EQ(row.ndcg, 1.0);
    EXPECT_EQ(row.regret.at(1), 0.0);
  }
}

TEST_F(ToyLabTest, FewShotStepsParameter) {
  const auto a = lab_->fsft_scores("t00", 0);
  const auto b = lab_->fsft_scores("t00", 10);
  EXPECT_EQ(a.size(), 5u);
  EXPECT_NE(a, b);
  const MethodSpec m{"fsft", MethodKind::score_table, {{"source", "fsft"}, {"steps", "0"}}};
  EXPECT_EQ(lab_->rank(m, "t00").ids(), rank_by_scores(a, "t00").ids());
  for (const auto& [id, p] : lab_->fs_taskemb_pairs("t00", 0)) EXPECT_EQ(p.first, p.second) << id;
}

TEST_F(ToyLabTest, EmbeddingsAndProxyInputs) {
  const auto text = lab_->text_embeddings();
  EXPECT_EQ(text.kind(), EmbeddingKind::text_mean);
  EXPECT_EQ(text.vectors().size(), 7u);
  const auto task = lab_->task_embeddings();
  EXPECT_EQ(task.kind(), EmbeddingKind::task_fim);
  EXPECT_EQ(task.dim(), 3u * 4u + 3u);
  const auto emb = lab_->embedded_target("t00");
  EXPECT_EQ(emb.size(), 5u);
  for (const auto& [id, d] : emb) {
    EXPECT_EQ(d.dim, 3u);
    EXPECT_EQ(d.examples.size(), 60u);
    EXPECT_NO_THROW(d.validate());
  }
}

TEST_F(ToyLabTest, FusionAndPrerank) {
  const MethodSpec fused{"fused", MethodKind::fused, {{"components", "size,textemb"}}};
  const auto r = lab_->rank(fused, "t00");
  EXPECT_EQ(r.method, "fused");
  EXPECT_EQ(r.size(), 5u);
  const MethodSpec bad{"fused", MethodKind::fused, {{"components", "size,nothing"}}};
  EXPECT_THROW(lab_->rank(bad, "t00"), UnsupportedConfigError);
  const MethodSpec t{"size", MethodKind::size, {{"prefer_same_type", "true"}}};
  EXPECT_EQ(lab_->rank(t, "t00").method, "size-T");
}

TEST_F(ToyLabTest, UnsupportedSpecs) {
  EXPECT_THROW(lab_->rank({"semb", MethodKind::embedding_cosine, {{"embedding", "sentence"}}}, "t00"),
               UnsupportedConfigError);
  EXPECT_THROW(lab_->rank({"x", MethodKind::score_table, {{"source", "magic"}}}, "t00"), UnsupportedConfigError);
  EXPECT_THROW(lab_->rank({"r", MethodKind::random, {}}, "t00"), UnsupportedConfigError);
}

TEST_F(ToyLabTest, BenchmarkHasEveryMethod) {
  const auto methods = default_lab_methods();
  const auto rep = lab_->run_benchmark(methods);
  for (const auto& m : methods) {
    ASSERT_TRUE(rep.overall.count(m.name)) << m.name;
    EXPECT_TRUE(rep.per_target.count({m.name, "t00"}));
    EXPECT_TRUE(rep.per_group.count({m.name, TaskType::classification}));
  }
  EXPECT_DOUBLE_EQ(rep.overall.at("oracle").ndcg, 1.0);
}

TEST(Sweeps, OnePointPerValue) {
  const std::vector<MethodSpec> methods{{"size", MethodKind::size, {}},
                                        {"fsft", MethodKind::score_table, {{"source", "fsft"}}}};
  const std::vector<std::size_t> caps{20, 40};
  const auto cap = sweep_target_cap(small_universe(), caps, methods, small_train());
  ASSERT_EQ(cap.size(), 2u);
  EXPECT_EQ(cap[0].parameter, "target_train_cap");
  EXPECT_EQ(cap[1].value, 40u);
  EXPECT_TRUE(cap[1].report.overall.count("fsft"));
  const std::vector<std::size_t> steps{1, 5, 10};
  const auto st = sweep_few_shot_steps(small_universe(), steps, methods, small_train());
  ASSERT_EQ(st.size(), 3u);
  EXPECT_EQ(st[2].value, 10u);
  // Size ignores the step count.
  EXPECT_EQ(st[0].report.overall.at("size"), st[2].report.overall.at("size"));
}

TEST(PlantedSignal, CopiesWinWithoutDrift) {
  ToyUniverseConfig c;
  c.domain_drift = 0.0;
  c.target_train_cap = 100;
  ToyLab lab(gen_universe(c), ToyTrainConfig{});
  const auto& t = lab.table();
  for (std::size_t j = 0; j < t.num_targets(); ++j) {
    const auto col = t.column(j);
    EXPECT_EQ(std::max_element(col.begin(), col.end()) - col.begin(), static_cast<long>(j)) << t.targets()[j];
  }
}
