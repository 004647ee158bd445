#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "tsel/types.hpp"

namespace tsel {

/// Builds a ranking from (id, score) pairs: descending score, ties broken by
/// ascending id. Throws DomainError on a NaN score and StructuralError on a
/// duplicate id.
Ranking make_ranking(TaskId target, std::string method, std::vector<RankEntry> entries);

/// Descending train size; method score = train size.
Ranking rank_by_size(const Manifest& metas, std::span<const TaskId> intermediates, const TaskId& target);

/// Uniform shuffle. Deterministic in (seed, target, sorted intermediate set);
/// method score = n - position so scores stay non-increasing.
Ranking rank_random(std::span<const TaskId> intermediates, const TaskId& target, std::uint64_t seed);

double cosine_similarity(std::span<const double> a, std::span<const double> b);

/// Cosine similarity of every intermediate's vector to the target's. Missing
/// or zero-norm vectors raise DomainError naming the id. Used for TextEmb,
/// SEmb and TaskEmb alike; only the embedding set differs.
Ranking rank_by_cosine(const EmbeddingSet& embeddings, std::span<const TaskId> intermediates, const TaskId& target);

/// Descending by a precomputed per-intermediate score (FSFT, proxies, ...).
/// When `intermediates` is non-empty every one of them must have a score.
Ranking rank_by_scores(const std::map<TaskId, double>& scores, const TaskId& target,
                       std::span<const TaskId> intermediates = {}, std::string method = "scores");

/// Stable partition: tasks of `target_type` first, then the rest, each block
/// keeping its relative order. Method name gains a "-T" suffix once.
Ranking type_prerank(const Ranking& ranking, const Manifest& metas, TaskType target_type);

inline constexpr double kDefaultFusionConstant = 60.0;

/// Reciprocal rank fusion: score(d) = sum over inputs of 1 / (c + rank(d)),
/// ranks 1-based. Needs >= 2 rankings for one target over the same id set.
Ranking rrf_fuse(std::span<const Ranking> rankings, double c = kDefaultFusionConstant);

enum class MethodKind { random, size, embedding_cosine, score_table, fused };

std::string_view to_string(MethodKind kind);

/// Declarative description of a selection method. Params are method specific:
///   random:            seed
///   embedding_cosine:  embedding (text_mean | sentence | task_fim)
///   score_table:       source (free-form label of the score provider)
///   fused:             components (comma-separated method names), constant
/// Any kind may carry prefer_same_type = true.
struct MethodSpec {
  std::string name;
  MethodKind kind = MethodKind::size;
  std::map<std::string, std::string> params;

  bool prefer_same_type() const;
  std::string param(const std::string& key, const std::string& fallback = {}) const;
  /// Throws UnsupportedConfigError when a required parameter is missing or malformed.
  void validate() const;
};

}  // namespace tsel
