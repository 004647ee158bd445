#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "tsel/types.hpp"

namespace tsel {

enum class LabelKind { class_index, real_value, choice_group, token_tag };

std::string_view to_string(LabelKind kind);
LabelKind parse_label_kind(std::string_view text);

/// One embedded example. Which label fields are meaningful depends on the
/// dataset's LabelKind:
///   class_index / token_tag  -> label
///   real_value               -> value
///   choice_group             -> group, choice, correct
struct EmbeddedExample {
  std::vector<double> vector;
  int label = 0;
  double value = 0.0;
  std::int64_t group = 0;
  int choice = 0;
  bool correct = false;

  friend bool operator==(const EmbeddedExample&, const EmbeddedExample&) = default;
};

/// A target dataset as embedded by one intermediate model.
struct EmbeddedDataset {
  LabelKind label_kind = LabelKind::class_index;
  std::size_t dim = 0;
  std::size_t num_classes = 0;  // class_index / token_tag only
  TaskId source_model;
  TaskId target;
  std::vector<EmbeddedExample> examples;

  /// Throws InvariantError on any violated invariant.
  void validate() const;

  friend bool operator==(const EmbeddedDataset&, const EmbeddedDataset&) = default;
};

struct CvConfig {
  std::size_t folds = 5;
  std::uint64_t seed = 0;
  std::size_t max_iterations = 500;
  double learning_rate = 0.1;
  double l2_penalty = 1e-4;
  std::size_t token_sample = 1000;  // token_tag datasets are subsampled to this size by proxy_rank
};

/// Fold index per example. Non-grouped kinds: examples are shuffled by seed,
/// stably sorted by label (stratification; real values are not stratified)
/// and dealt round-robin. Choice groups are dealt as whole groups.
std::vector<std::size_t> assign_folds(const EmbeddedDataset& data, std::size_t folds, std::uint64_t seed);

/// Number of CV units: distinct groups for choice_group, examples otherwise.
std::size_t cv_units(const EmbeddedDataset& data);

/// Mean held-out 1-NN accuracy (k = 1, Euclidean, distance ties to the lowest
/// example index). For choice groups each choice votes with the correctness of
/// its nearest training neighbour; the group prediction is the choice with a
/// "correct" vote at the smallest distance, or, when no choice has one, the
/// choice whose "incorrect" neighbour is farthest.
double knn_cv_score(const EmbeddedDataset& data, const CvConfig& cfg);

struct CvResult {
  double score = 0.0;
  std::size_t folds_used = 0;
  std::size_t folds_skipped = 0;
  bool degenerate = false;
  std::vector<std::string> warnings;
};

/// Logistic / linear-regression proxy. Features are standardized with the
/// training fold's statistics.
///   class_index, token_tag: multinomial logistic regression, accuracy
///   real_value:             ridge regression, Spearman of predictions
///   choice_group:           binary correct-vs-incorrect logistic regression,
///                           per-group argmax accuracy
/// A training fold with a single label is skipped with a warning. When every
/// fold is skipped the call fails, unless the whole dataset carries a single
/// label, in which case the constant predictor's score is returned and the
/// result is flagged degenerate.
CvResult linear_cv(const EmbeddedDataset& data, const CvConfig& cfg);
double linear_cv_score(const EmbeddedDataset& data, const CvConfig& cfg);

/// Uniform sample of min(n, size) token examples without replacement, kept in
/// original order. Deterministic per seed.
EmbeddedDataset sample_tokens(const EmbeddedDataset& data, std::size_t n, std::uint64_t seed);

enum class ProxyKind { knn, linear };

/// Scores every intermediate's view of the target and ranks by the CV score.
/// Extractive-QA targets are rejected with UnsupportedConfigError.
Ranking proxy_rank(const std::map<TaskId, EmbeddedDataset>& datasets, const CvConfig& cfg, ProxyKind proxy,
                   const TaskId& target, TaskType target_type);

}  // namespace tsel
