#pragma once

// Synthetic transfer universe: Gaussian-mixture classification tasks, softmax
// probes in place of adapters, and the two-stage intermediate -> target recipe.

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "tsel/metrics.hpp"
#include "tsel/proxy.hpp"
#include "tsel/rankers.hpp"
#include "tsel/taskemb.hpp"
#include "tsel/types.hpp"

namespace tsel {

struct ToyUniverseConfig {
  std::size_t n_intermediates = 8;
  std::size_t n_targets = 3;
  std::size_t dim = 8;
  std::size_t classes = 3;
  double cluster_separation = 2.0;
  double domain_drift = 0.5;
  std::size_t examples_per_intermediate = 1000;
  std::size_t target_train_cap = 1000;
  std::size_t validation_examples = 1000;
  std::size_t test_examples = 1000;
  std::uint64_t seed = 0;

  /// Throws UnsupportedConfigError.
  void validate() const;
};

struct ToyTrainConfig {
  std::size_t epochs_max = 15;
  std::size_t early_stop_patience = 3;
  double learning_rate = 0.02;
  std::size_t batch_size = 32;
  std::size_t restarts = 5;
  std::size_t few_shot_steps = 50;
  std::uint64_t seed = 0;

  void validate() const;
};

struct ToyTask {
  TaskMeta meta;
  std::vector<std::vector<double>> centers;  // one per class
  EmbeddedDataset train;
  EmbeddedDataset validation;
  EmbeddedDataset test;
};

struct ToyUniverse {
  ToyUniverseConfig config;
  std::vector<ToyTask> intermediates;
  std::vector<ToyTask> targets;

  Manifest manifest() const;
  std::vector<TaskId> intermediate_ids() const;
  std::vector<TaskId> target_ids() const;
  const ToyTask& task(std::string_view id) const;
};

/// Intermediate i < n_targets samples target i's mixture with every center
/// moved by domain_drift * N(0, I); the others get fresh random centers.
/// Intermediate training sizes vary in [0.5, 1.5] x examples_per_intermediate.
ToyUniverse gen_universe(const ToyUniverseConfig& cfg);

struct ProbeFit {
  ProbeModel model;
  std::size_t best_epoch = 0;  // 0 = the initial parameters
  double best_validation_accuracy = 0.0;
};

double accuracy(const ProbeModel& model, const EmbeddedDataset& data);

/// Mini-batch SGD on mean cross-entropy with early stopping on validation
/// accuracy. Starts from `init` when given, else from small random weights.
ProbeFit train_probe(const EmbeddedDataset& train, const EmbeddedDataset& validation, const ToyTrainConfig& cfg,
                     std::uint64_t seed, const ProbeModel* init = nullptr);

/// Exactly `steps` SGD updates (no early stopping), cycling through shuffled
/// epochs of `train`.
ProbeModel fine_tune_steps(const ProbeModel& init, const EmbeddedDataset& train, const ToyTrainConfig& cfg,
                           std::size_t steps, std::uint64_t seed);

/// Fine-tunes the intermediate probe on the target's training split; the mean
/// test accuracy x100 over cfg.restarts runs. A probe with a different class
/// count cannot be reused and is replaced by a fresh one.
double sequential_transfer(const ProbeModel& intermediate, const ToyTask& target, const ToyTrainConfig& cfg,
                           std::uint64_t seed);

/// Same protocol from a fresh random initialization.
double no_transfer_score(const ToyTask& target, const ToyTrainConfig& cfg, std::uint64_t seed);

/// Trains every probe once and caches what the rankers need.
class ToyLab {
 public:
  ToyLab(ToyUniverse universe, ToyTrainConfig cfg);

  const ToyUniverse& universe() const noexcept { return universe_; }
  const ToyTrainConfig& train_config() const noexcept { return cfg_; }
  const ProbeModel& probe(std::string_view id) const;

  /// Ground-truth transfer table; computed on first use.
  const TransferTable& table();

  /// Mean training feature vector of every task.
  EmbeddingSet text_embeddings() const;
  /// FIM diagonal of every task's own probe on its own training data.
  EmbeddingSet task_embeddings() const;

  /// Validation accuracy x100 of every intermediate after few-shot steps.
  std::map<TaskId, double> fsft_scores(const TaskId& target, std::size_t steps) const;
  std::map<TaskId, EmbeddingPair> fs_taskemb_pairs(const TaskId& target, std::size_t steps) const;
  /// Target training split as seen through each intermediate probe (logits).
  std::map<TaskId, EmbeddedDataset> embedded_target(const TaskId& target) const;

  /// Ranking of one lab method for one target. Recognized specs:
  ///   random, size, embedding_cosine (text_mean | task_fim), fused, and
  ///   score_table with source = fsft | fs-taskemb | knn | linear | oracle.
  Ranking rank(const MethodSpec& method, const TaskId& target);

  AggregatedReport run_benchmark(std::span<const MethodSpec> methods);

 private:
  ToyUniverse universe_;
  ToyTrainConfig cfg_;
  std::map<TaskId, ProbeModel> probes_;
  std::optional<TransferTable> table_;
};

TransferTable build_transfer_table(const ToyUniverse& universe, const ToyTrainConfig& cfg);
AggregatedReport run_benchmark(const ToyUniverse& universe, std::span<const MethodSpec> methods,
                               const ToyTrainConfig& cfg);

/// The lab's default method list: random, size, textemb, taskemb, fsft,
/// fs-taskemb, knn, linear, oracle.
std::vector<MethodSpec> default_lab_methods(std::uint64_t seed = 0);

struct SweepPoint {
  std::string parameter;
  std::size_t value = 0;
  AggregatedReport report;
};

/// One report per target_train_cap value; the universe is regenerated with
/// the same seed so only the cap changes.
std::vector<SweepPoint> sweep_target_cap(const ToyUniverseConfig& ucfg, std::span<const std::size_t> caps,
                                         std::span<const MethodSpec> methods, const ToyTrainConfig& cfg);
std::vector<SweepPoint> sweep_few_shot_steps(const ToyUniverseConfig& ucfg, std::span<const std::size_t> steps,
                                             std::span<const MethodSpec> methods, const ToyTrainConfig& cfg);

}  // namespace tsel
