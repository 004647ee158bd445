#include "tsel/types.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_set>

#include "tsel/error.hpp"

namespace tsel {

std::string_view to_string(TaskType type) {
  switch (type) {
    case TaskType::classification: return "classification";
    case TaskType::multiple_choice: return "multiple_choice";
    case TaskType::extractive_qa: return "extractive_qa";
    case TaskType::tagging: return "tagging";
  }
  return "unknown";
}

TaskType parse_task_type(std::string_view text) {
  for (TaskType t : kAllTaskTypes) {
    if (to_string(t) == text) return t;
  }
  throw ParseError("unknown task type '" + std::string(text) + "'");
}

std::string_view to_string(TaskRole role) {
  return role == TaskRole::intermediate ? "intermediate" : "target";
}

TaskRole parse_task_role(std::string_view text) {
  if (text == "intermediate") return TaskRole::intermediate;
  if (text == "target") return TaskRole::target;
  throw ParseError("unknown task role '" + std::string(text) + "'");
}

std::string_view to_string(EmbeddingKind kind) {
  switch (kind) {
    case EmbeddingKind::text_mean: return "text_mean";
    case EmbeddingKind::sentence: return "sentence";
    case EmbeddingKind::task_fim: return "task_fim";
  }
  return "unknown";
}

EmbeddingKind parse_embedding_kind(std::string_view text) {
  if (text == "text_mean") return EmbeddingKind::text_mean;
  if (text == "sentence") return EmbeddingKind::sentence;
  if (text == "task_fim") return EmbeddingKind::task_fim;
  throw ParseError("unknown embedding kind '" + std::string(text) + "'");
}

// ---------------------------------------------------------------------------

Manifest::Manifest(std::vector<TaskMeta> tasks) : tasks_(std::move(tasks)) {
  for (std::size_t i = 0; i < tasks_.size(); ++i) {
    const TaskMeta& m = tasks_[i];
    if (m.id.empty()) throw InvariantError("task id must not be empty");
    if (m.train_size == 0) throw InvariantError("task '" + m.id + "' has train_size 0");
    if (!index_.emplace(m.id, i).second) throw InvariantError("duplicate task id '" + m.id + "'");
  }
}

bool Manifest::contains(std::string_view id) const { return index_.count(std::string(id)) != 0; }

const TaskMeta* Manifest::find(std::string_view id) const {
  auto it = index_.find(std::string(id));
  return it == index_.end() ? nullptr : &tasks_[it->second];
}

const TaskMeta& Manifest::at(std::string_view id) const {
  if (const TaskMeta* m = find(id)) return *m;
  throw LookupError(std::string(id), "no metadata for task '" + std::string(id) + "'");
}

std::vector<TaskId> Manifest::ids_with_role(TaskRole role) const {
  std::vector<TaskId> out;
  for (const auto& m : tasks_) {
    if (m.role == role) out.push_back(m.id);
  }
  return out;
}

// ---------------------------------------------------------------------------

TransferTable::TransferTable(std::string model_tag, std::vector<TaskId> intermediates,
                             std::vector<TaskId> targets, std::vector<double> baseline,
                             std::vector<double> scores)
    : model_tag_(std::move(model_tag)),
      intermediates_(std::move(intermediates)),
      targets_(std::move(targets)),
      baseline_(std::move(baseline)),
      scores_(std::move(scores)) {
  if (intermediates_.empty() || targets_.empty()) {
    throw InvariantError("transfer table needs at least one intermediate and one target");
  }
  for (std::size_t i = 0; i < intermediates_.size(); ++i) {
    if (!s_index_.emplace(intermediates_[i], i).second) {
      throw InvariantError("duplicate intermediate id '" + intermediates_[i] + "'");
    }
  }
  for (std::size_t j = 0; j < targets_.size(); ++j) {
    if (!t_index_.emplace(targets_[j], j).second) {
      throw InvariantError("duplicate target id '" + targets_[j] + "'");
    }
    if (s_index_.count(targets_[j])) {
      throw InvariantError("id '" + targets_[j] + "' is both an intermediate and a target");
    }
  }
  if (baseline_.size() != targets_.size()) {
    throw InvariantError("baseline must have one score per target");
  }
  if (scores_.size() != intermediates_.size() * targets_.size()) {
    throw InvariantError("score matrix is incomplete");
  }
  auto check = [](double v, const std::string& where) {
    if (!std::isfinite(v) || v < 0.0 || v > 100.0) {
      throw InvariantError("score at " + where + " is not a finite value in [0, 100]");
    }
  };
  for (std::size_t j = 0; j < targets_.size(); ++j) check(baseline_[j], "baseline/" + targets_[j]);
  for (std::size_t i = 0; i < intermediates_.size(); ++i) {
    for (std::size_t j = 0; j < targets_.size(); ++j) {
      check(scores_[i * targets_.size() + j], intermediates_[i] + "/" + targets_[j]);
    }
  }
}

std::size_t TransferTable::intermediate_index(std::string_view id) const {
  auto it = s_index_.find(std::string(id));
  if (it == s_index_.end()) {
    throw LookupError(std::string(id), "unknown intermediate task '" + std::string(id) + "'");
  }
  return it->second;
}

std::size_t TransferTable::target_index(std::string_view id) const {
  auto it = t_index_.find(std::string(id));
  if (it == t_index_.end()) {
    throw LookupError(std::string(id), "unknown target task '" + std::string(id) + "'");
  }
  return it->second;
}

double TransferTable::score(std::string_view intermediate, std::string_view target) const {
  return score(intermediate_index(intermediate), target_index(target));
}

double TransferTable::baseline(std::string_view target) const { return baseline_[target_index(target)]; }

std::vector<double> TransferTable::column(std::size_t t) const {
  std::vector<double> out(intermediates_.size());
  for (std::size_t s = 0; s < intermediates_.size(); ++s) out[s] = score(s, t);
  return out;
}

// ---------------------------------------------------------------------------

EmbeddingSet::EmbeddingSet(EmbeddingKind kind, std::size_t dim, std::map<TaskId, std::vector<double>> vectors)
    : kind_(kind), dim_(dim), vectors_(std::move(vectors)) {
  if (dim_ == 0) throw InvariantError("embedding dimension must be positive");
  for (const auto& [id, v] : vectors_) {
    if (v.size() != dim_) {
      throw InvariantError("embedding for '" + id + "' has dimension " + std::to_string(v.size()) +
                           ", expected " + std::to_string(dim_));
    }
    for (double x : v) {
      if (!std::isfinite(x)) throw InvariantError("embedding for '" + id + "' has a non-finite entry");
      if (kind_ == EmbeddingKind::task_fim && x < 0.0) {
        throw InvariantError("task_fim embedding for '" + id + "' has a negative entry");
      }
    }
  }
}

const std::vector<double>& EmbeddingSet::at(std::string_view id) const {
  auto it = vectors_.find(std::string(id));
  if (it == vectors_.end()) throw LookupError(std::string(id), "no embedding for task '" + std::string(id) + "'");
  return it->second;
}

std::vector<TaskId> Ranking::ids() const {
  std::vector<TaskId> out;
  out.reserve(entries.size());
  for (const auto& e : entries) out.push_back(e.id);
  return out;
}

}  // namespace tsel
