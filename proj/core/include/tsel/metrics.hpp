#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "tsel/types.hpp"

namespace tsel {

/// DCG over the full list: sum_i (2^rel_i - 1) / log2(i + 1), i 1-based.
/// Relevances must be finite and non-negative (DomainError otherwise).
double dcg(std::span<const double> relevances_in_rank_order);

/// Throws StructuralError unless `ranking` is a permutation of the table's
/// intermediates and names one of its targets.
void check_ranking(const Ranking& ranking, const TransferTable& table);

/// DCG of the predicted order over DCG of the score-descending order. The
/// relevance of an intermediate is its raw transfer score on the target.
double ndcg(const Ranking& ranking, const TransferTable& table);

/// 100 * (O - M_k) / O with O the column optimum and M_k the best score among
/// the top k ranked intermediates. Requires 1 <= k <= |S|.
double regret_at_k(const Ranking& ranking, const TransferTable& table, std::size_t k);

/// Exact E[Regret@k] over uniformly random rankings of `scores`.
double expected_random_regret(std::span<const double> scores, std::size_t k);
double expected_random_regret(const TransferTable& table, std::string_view target, std::size_t k);

struct MonteCarloEstimate {
  double mean = 0.0;
  double std_error = 0.0;
  std::uint64_t samples = 0;
};

/// Mean NDCG over `samples` uniform permutations. Sample i is drawn from its
/// own substream of `seed`, so the result does not depend on scheduling.
MonteCarloEstimate expected_random_ndcg_estimate(std::span<const double> relevances, std::uint64_t samples,
                                                 std::uint64_t seed);
double expected_random_ndcg(const TransferTable& table, std::string_view target, std::uint64_t samples,
                            std::uint64_t seed);

inline constexpr std::size_t kDefaultRegretKs[] = {1, 3, 5};

struct MetricRow {
  double ndcg = 0.0;
  std::map<std::size_t, double> regret;  // k -> percent

  friend bool operator==(const MetricRow&, const MetricRow&) = default;
};

/// NDCG plus Regret@k for each k. A k larger than the pool is evaluated at
/// k = |S| (regret 0); the row still reports it under the requested k.
MetricRow evaluate_ranking(const Ranking& ranking, const TransferTable& table,
                           std::span<const std::size_t> ks = kDefaultRegretKs);

/// Random-baseline row: exact expected regret and Monte-Carlo NDCG.
MetricRow random_baseline_row(const TransferTable& table, std::string_view target, std::uint64_t samples,
                              std::uint64_t seed, std::span<const std::size_t> ks = kDefaultRegretKs);

/// Mean metric row of a randomized ranker: `draw(seed_i)` produces sample i
/// from substream i of `seed`.
MetricRow monte_carlo_row(const TransferTable& table, std::uint64_t samples, std::uint64_t seed,
                          const std::function<Ranking(std::uint64_t)>& draw,
                          std::span<const std::size_t> ks = kDefaultRegretKs);

using MethodTarget = std::pair<std::string, TaskId>;
using MethodGroup = std::pair<std::string, TaskType>;

struct AggregatedReport {
  std::map<MethodTarget, MetricRow> per_target;
  std::map<MethodGroup, MetricRow> per_group;
  std::map<std::string, MetricRow> overall;

  std::vector<std::string> methods() const;
};

/// Group rows are arithmetic means over the group's targets. A (method, group)
/// cell is absent when any target of the group has no row for that method, and
/// the overall row is absent when any populated group is absent. "Overall" is
/// the unweighted mean over all targets.
///
/// `targets` lists the target universe; when empty, the targets appearing in
/// `rows` are used.
AggregatedReport aggregate(const std::map<MethodTarget, MetricRow>& rows, const Manifest& metas,
                           const std::vector<TaskId>& targets = {});

}  // namespace tsel
