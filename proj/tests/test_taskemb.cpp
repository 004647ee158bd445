#include <gtest/gtest.h>

#include <cmath>
#include <numeric>

#include "oracles.hpp"
#include "tsel/error.hpp"
#include "tsel/random.hpp"
#include "tsel/taskemb.hpp"

using namespace tsel;

namespace {

ProbeModel random_probe(std::size_t classes, std::size_t dim, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<double> theta(classes * dim + classes);
  for (double& t : theta) t = rng.normal();
  return ProbeModel::unflatten(classes, dim, theta);
}

EmbeddedDataset gaussian_data(std::size_t n, std::size_t dim, std::size_t classes, std::uint64_t seed) {
  Rng rng(seed);
  EmbeddedDataset d{LabelKind::class_index, dim, classes, "s", "t", {}};
  for (std::size_t i = 0; i < n; ++i) {
    EmbeddedExample e;
    e.vector.resize(dim);
    for (double& x : e.vector) x = rng.normal();
    e.label = static_cast<int>(rng.uniform_index(classes));
    d.examples.push_back(e);
  }
  return d;
}

double rel_error(const std::vector<double>& a, const std::vector<double>& b) {
  double num = 0, den = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    num += (a[i] - b[i]) * (a[i] - b[i]);
    den += b[i] * b[i];
  }
  return std::sqrt(num) / std::max(std::sqrt(den), 1e-300);
}

}  // namespace

TEST(Probe, FlattenLayoutAndRoundTrip) {
  auto m = ProbeModel::zeros(2, 3);
  m.weights = {1, 2, 3, 4, 5, 6};
  m.bias = {7, 8};
  EXPECT_EQ(m.flatten(), (std::vector<double>{1, 2, 3, 4, 5, 6, 7, 8}));
  EXPECT_EQ(ProbeModel::unflatten(2, 3, m.flatten()), m);
  EXPECT_EQ(m.param_count(), 8u);
  const std::vector<double> short_theta(7);
  EXPECT_THROW(ProbeModel::unflatten(2, 3, short_theta), InvariantError);
}

TEST(Probe, Validate) {
  EXPECT_NO_THROW(ProbeModel::zeros(2, 2).validate());
  EXPECT_THROW(ProbeModel::zeros(0, 2).validate(), InvariantError);
  auto m = ProbeModel::zeros(2, 2);
  m.bias[1] = INFINITY;
  EXPECT_THROW(m.validate(), InvariantError);
  m = ProbeModel::zeros(2, 2);
  m.weights.pop_back();
  EXPECT_THROW(m.validate(), InvariantError);
}

TEST(Probe, ProbabilitiesMatchReference) {
  const auto m = random_probe(4, 3, 1);
  const std::vector<double> x{0.5, -1.2, 2.0};
  const auto p = m.probabilities(x);
  const auto ref = oracle::softmax(m, x);
  for (std::size_t c = 0; c < 4; ++c) EXPECT_NEAR(p[c], ref[c], 1e-14);
  EXPECT_NEAR(std::accumulate(p.begin(), p.end(), 0.0), 1.0, 1e-14);
  EXPECT_NEAR(m.log_likelihood(x, 2), std::log(ref[2]), 1e-12);
  EXPECT_EQ(m.predict(x), static_cast<int>(std::max_element(ref.begin(), ref.end()) - ref.begin()));
  const std::vector<double> wrong{1.0};
  EXPECT_THROW(m.logits(wrong), StructuralError);
}

TEST(Probe, LogLikelihoodIsStableForLargeLogits) {
  auto m = ProbeModel::zeros(2, 1);
  m.weights = {1000, -1000};
  const std::vector<double> x{1.0};
  EXPECT_NEAR(m.log_likelihood(x, 0), 0.0, 1e-12);
  EXPECT_NEAR(m.log_likelihood(x, 1), -2000.0, 1e-9);
}

TEST(Gradient, MatchesFiniteDifferences) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const std::size_t classes = 2 + seed % 4, dim = 1 + seed % 5;
    const auto m = random_probe(classes, dim, seed);
    const auto d = gaussian_data(1, dim, classes, seed + 100);
    const auto& e = d.examples[0];
    const auto g = loglik_grad(m, e.vector, e.label);
    EXPECT_LT(rel_error(g, oracle::finite_difference_grad(m, e.vector, e.label)), 1e-6) << seed;
  }
  EXPECT_THROW(loglik_grad(ProbeModel::zeros(2, 1), std::vector<double>{1.0}, 2), DomainError);
}

TEST(Fim, EmpiricalMatchesReference) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const auto m = random_probe(3, 4, seed);
    const auto d = gaussian_data(40, 4, 3, seed + 7);
    const auto f = fim_diagonal(m, d);
    const auto ref = oracle::fim_diagonal(m, d);
    ASSERT_EQ(f.size(), ref.size());
    EXPECT_LT(rel_error(f, ref), 1e-12);
    for (double v : f) EXPECT_GE(v, 0.0);
  }
}

TEST(Fim, EmpiricalMatchesSquaredFiniteDifferences) {
  const auto m = random_probe(3, 2, 5);
  const auto d = gaussian_data(25, 2, 3, 6);
  std::vector<double> acc(m.param_count(), 0.0);
  for (const auto& e : d.examples) {
    const auto g = oracle::finite_difference_grad(m, e.vector, e.label);
    for (std::size_t i = 0; i < g.size(); ++i) acc[i] += g[i] * g[i] / 25.0;
  }
  EXPECT_LT(rel_error(fim_diagonal(m, d), acc), 1e-4);
}

TEST(Fim, SampledModeIsDeterministicAndUnbiased) {
  const auto m = random_probe(3, 2, 11);
  auto d = gaussian_data(1, 2, 3, 12);
  EXPECT_EQ(fim_diagonal(m, d, FimMode::sampled, 4), fim_diagonal(m, d, FimMode::sampled, 4));
  // Replicating one example many times: the sampled FIM converges to the
  // expectation over the predictive distribution.
  const auto p = m.probabilities(d.examples[0].vector);
  std::vector<double> expected(m.param_count(), 0.0);
  for (int y = 0; y < 3; ++y) {
    const auto g = loglik_grad(m, d.examples[0].vector, y);
    for (std::size_t i = 0; i < g.size(); ++i) expected[i] += p[static_cast<std::size_t>(y)] * g[i] * g[i];
  }
  d.examples.assign(20000, d.examples[0]);
  EXPECT_LT(rel_error(fim_diagonal(m, d, FimMode::sampled, 1), expected), 0.03);
}

TEST(Fim, Preconditions) {
  const auto m = random_probe(2, 2, 0);
  auto d = gaussian_data(5, 3, 2, 0);
  EXPECT_THROW(fim_diagonal(m, d), StructuralError);
  d = gaussian_data(0, 2, 2, 0);
  EXPECT_THROW(fim_diagonal(m, d), UnsupportedConfigError);
  d = gaussian_data(5, 2, 2, 0);
  d.label_kind = LabelKind::real_value;
  EXPECT_THROW(fim_diagonal(m, d), UnsupportedConfigError);
  d = gaussian_data(5, 2, 3, 0);
  d.examples[0].label = 2;
  EXPECT_THROW(fim_diagonal(m, d), DomainError);
}

TEST(TaskEmbRank, RequiresFisherEmbeddings) {
  const EmbeddingSet fim(EmbeddingKind::task_fim, 2, {{"T", {1, 0}}, {"a", {1, 0.1}}, {"b", {0.1, 1}}});
  const std::vector<TaskId> ids{"b", "a"};
  const auto r = taskemb_rank(fim, ids, "T");
  EXPECT_EQ(r.ids(), (std::vector<TaskId>{"a", "b"}));
  EXPECT_EQ(r.method, "taskemb");
  const EmbeddingSet text(EmbeddingKind::text_mean, 2, {{"T", {1, 0}}, {"a", {1, 0.1}}});
  EXPECT_THROW(taskemb_rank(text, ids, "T"), UnsupportedConfigError);
}

TEST(FsTaskEmb, RanksByStability) {
  const std::map<TaskId, EmbeddingPair> pairs{
      {"stable", {{1, 2, 3}, {1.1, 2, 3}}}, {"moved", {{1, 0, 0}, {0, 1, 0}}}, {"same", {{4, 4, 1}, {4, 4, 1}}}};
  const auto r = fs_taskemb_rank(pairs, "T");
  EXPECT_EQ(r.ids(), (std::vector<TaskId>{"same", "stable", "moved"}));
  EXPECT_EQ(r.method, "fs-taskemb");
  EXPECT_NEAR(r.entries[0].score, 1.0, 1e-12);
  EXPECT_NEAR(r.entries[2].score, 0.0, 1e-12);
}

TEST(FsTaskEmb, ErrorsNameTheTask) {
  try {
    fs_taskemb_rank({{"flat", {{0, 0}, {1, 1}}}}, "T");
    FAIL();
  } catch (const DomainError& e) {
    EXPECT_NE(std::string(e.what()).find("flat"), std::string::npos);
  }
  EXPECT_THROW(fs_taskemb_rank({{"x", {{1, 0}, {1}}}}, "T"), StructuralError);
}
