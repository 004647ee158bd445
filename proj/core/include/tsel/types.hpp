#pragma once

// Domain types shared by every module. All of them are immutable once
// constructed; constructors enforce the documented invariants.

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace tsel {

using TaskId = std::string;

enum class TaskType { classification, multiple_choice, extractive_qa, tagging };

inline constexpr TaskType kAllTaskTypes[] = {TaskType::classification, TaskType::multiple_choice,
                                             TaskType::extractive_qa, TaskType::tagging};

std::string_view to_string(TaskType type);
/// Throws ParseError for anything but the four canonical names.
TaskType parse_task_type(std::string_view text);

enum class TaskRole { intermediate, target };

std::string_view to_string(TaskRole role);
TaskRole parse_task_role(std::string_view text);

struct TaskMeta {
  TaskId id;
  TaskType task_type = TaskType::classification;
  std::uint64_t train_size = 1;
  std::string metric_name;
  TaskRole role = TaskRole::intermediate;
};

/// A set of task metadata records with unique ids, in insertion order.
class Manifest {
 public:
  Manifest() = default;
  explicit Manifest(std::vector<TaskMeta> tasks);

  const std::vector<TaskMeta>& tasks() const noexcept { return tasks_; }
  std::size_t size() const noexcept { return tasks_.size(); }
  bool contains(std::string_view id) const;
  /// Throws LookupError naming the id.
  const TaskMeta& at(std::string_view id) const;
  const TaskMeta* find(std::string_view id) const;

  std::vector<TaskId> ids_with_role(TaskRole role) const;

 private:
  std::vector<TaskMeta> tasks_;
  std::unordered_map<std::string, std::size_t> index_;
};

/// Ground-truth target performance for every (intermediate, target) pair,
/// plus the no-transfer baseline per target. Scores are in [0, 100].
class TransferTable {
 public:
  TransferTable() = default;
  /// `scores` is row-major |intermediates| x |targets|; `baseline` is aligned
  /// with `targets`. Throws InvariantError on any violated invariant.
  TransferTable(std::string model_tag, std::vector<TaskId> intermediates, std::vector<TaskId> targets,
                std::vector<double> baseline, std::vector<double> scores);

  const std::string& model_tag() const noexcept { return model_tag_; }
  const std::vector<TaskId>& intermediates() const noexcept { return intermediates_; }
  const std::vector<TaskId>& targets() const noexcept { return targets_; }
  std::size_t num_intermediates() const noexcept { return intermediates_.size(); }
  std::size_t num_targets() const noexcept { return targets_.size(); }

  std::size_t intermediate_index(std::string_view id) const;
  std::size_t target_index(std::string_view id) const;
  bool has_intermediate(std::string_view id) const { return s_index_.count(std::string(id)) != 0; }
  bool has_target(std::string_view id) const { return t_index_.count(std::string(id)) != 0; }

  double score(std::string_view intermediate, std::string_view target) const;
  double score(std::size_t s, std::size_t t) const { return scores_[s * targets_.size() + t]; }
  double baseline(std::string_view target) const;
  double baseline(std::size_t t) const { return baseline_[t]; }

  /// Scores of every intermediate on target `t`, in intermediate order.
  std::vector<double> column(std::size_t t) const;
  std::span<const double> raw_scores() const noexcept { return scores_; }
  std::span<const double> raw_baseline() const noexcept { return baseline_; }

 private:
  std::string model_tag_;
  std::vector<TaskId> intermediates_;
  std::vector<TaskId> targets_;
  std::vector<double> baseline_;
  std::vector<double> scores_;
  std::unordered_map<std::string, std::size_t> s_index_;
  std::unordered_map<std::string, std::size_t> t_index_;
};

enum class EmbeddingKind { text_mean, sentence, task_fim };

std::string_view to_string(EmbeddingKind kind);
EmbeddingKind parse_embedding_kind(std::string_view text);

/// One real vector per task, all of the same dimension.
class EmbeddingSet {
 public:
  EmbeddingSet() = default;
  /// Throws InvariantError on dimension mismatch, non-finite entries, or a
  /// negative entry in a task_fim set.
  EmbeddingSet(EmbeddingKind kind, std::size_t dim, std::map<TaskId, std::vector<double>> vectors);

  EmbeddingKind kind() const noexcept { return kind_; }
  std::size_t dim() const noexcept { return dim_; }
  const std::map<TaskId, std::vector<double>>& vectors() const noexcept { return vectors_; }
  bool contains(std::string_view id) const { return vectors_.count(std::string(id)) != 0; }
  const std::vector<double>& at(std::string_view id) const;

 private:
  EmbeddingKind kind_ = EmbeddingKind::text_mean;
  std::size_t dim_ = 0;
  std::map<TaskId, std::vector<double>> vectors_;
};

struct RankEntry {
  TaskId id;
  double score = 0.0;

  friend bool operator==(const RankEntry&, const RankEntry&) = default;
};

/// One method's ordering of the intermediate pool for one target.
struct Ranking {
  TaskId target;
  std::string method;
  std::vector<RankEntry> entries;

  std::vector<TaskId> ids() const;
  std::size_t size() const noexcept { return entries.size(); }

  friend bool operator==(const Ranking&, const Ranking&) = default;
};

}  // namespace tsel
