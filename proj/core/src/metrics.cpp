#include "tsel/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

#include "tsel/error.hpp"
#include "tsel/random.hpp"

namespace tsel {

double dcg(std::span<const double> relevances_in_rank_order) {
  double total = 0.0;
  for (std::size_t i = 0; i < relevances_in_rank_order.size(); ++i) {
    const double rel = relevances_in_rank_order[i];
    if (!std::isfinite(rel) || rel < 0.0) throw DomainError("dcg: relevance must be finite and non-negative");
    total += std::expm1(rel * std::numbers::ln2) / std::log2(static_cast<double>(i) + 2.0);
  }
  return total;
}

void check_ranking(const Ranking& ranking, const TransferTable& table) {
  if (!table.has_target(ranking.target)) {
    throw StructuralError("ranking target '" + ranking.target + "' is not a target of the table");
  }
  if (ranking.entries.size() != table.num_intermediates()) {
    throw StructuralError("ranking for '" + ranking.target + "' has " + std::to_string(ranking.entries.size()) +
                          " entries, table has " + std::to_string(table.num_intermediates()) + " intermediates");
  }
  std::vector<bool> seen(table.num_intermediates(), false);
  for (const auto& e : ranking.entries) {
    if (!table.has_intermediate(e.id)) {
      throw StructuralError("ranking for '" + ranking.target + "' contains unknown intermediate '" + e.id + "'");
    }
    const std::size_t s = table.intermediate_index(e.id);
    if (seen[s]) throw StructuralError("ranking for '" + ranking.target + "' repeats '" + e.id + "'");
    seen[s] = true;
  }
}

namespace {

std::vector<double> relevances_in_order(const Ranking& ranking, const TransferTable& table, std::size_t t) {
  std::vector<double> rel;
  rel.reserve(ranking.entries.size());
  for (const auto& e : ranking.entries) rel.push_back(table.score(table.intermediate_index(e.id), t));
  return rel;
}

double ideal_dcg(std::vector<double> rel) {
  std::sort(rel.begin(), rel.end(), std::greater<>());
  return dcg(rel);
}

double ndcg_of(std::span<const double> rel_in_order, double ideal) {
  if (ideal == 0.0) return 1.0;  // every relevance is zero: all orders are ideal
  return dcg(rel_in_order) / ideal;
}

}  // namespace

double ndcg(const Ranking& ranking, const TransferTable& table) {
  check_ranking(ranking, table);
  const std::size_t t = table.target_index(ranking.target);
  const auto rel = relevances_in_order(ranking, table, t);
  return ndcg_of(rel, ideal_dcg(rel));
}

double regret_at_k(const Ranking& ranking, const TransferTable& table, std::size_t k) {
  check_ranking(ranking, table);
  if (k < 1 || k > ranking.entries.size()) {
    throw DomainError("regret_at_k: k=" + std::to_string(k) + " outside [1, " +
                      std::to_string(ranking.entries.size()) + "]");
  }
  const std::size_t t = table.target_index(ranking.target);
  const auto col = table.column(t);
  const double optimum = *std::max_element(col.begin(), col.end());
  double best = -1.0;
  for (std::size_t i = 0; i < k; ++i) {
    best = std::max(best, table.score(table.intermediate_index(ranking.entries[i].id), t));
  }
  if (optimum <= 0.0) return 0.0;
  return 100.0 * (optimum - best) / optimum;
}

double expected_random_regret(std::span<const double> scores, std::size_t k) {
  const std::size_t n = scores.size();
  if (k < 1 || k > n) {
    throw DomainError("expected_random_regret: k=" + std::to_string(k) + " outside [1, " + std::to_string(n) + "]");
  }
  std::vector<double> v(scores.begin(), scores.end());
  std::sort(v.begin(), v.end(), std::greater<>());
  // P(sorted position r is the best of a uniform k-subset) = C(n-r, k-1) / C(n, k).
  // The ratio is built incrementally: p_1 = k/n, p_{r+1} = p_r * (n-r-k+1)/(n-r).
  double expected_best = 0.0;
  double p = static_cast<double>(k) / static_cast<double>(n);
  for (std::size_t r = 1; r + k - 1 <= n; ++r) {
    expected_best += p * v[r - 1];
    if (n - r == 0) break;
    p *= static_cast<double>(n - r - k + 1) / static_cast<double>(n - r);
  }
  const double optimum = v.front();
  if (optimum <= 0.0) return 0.0;
  return std::max(0.0, 100.0 * (optimum - expected_best) / optimum);
}

double expected_random_regret(const TransferTable& table, std::string_view target, std::size_t k) {
  return expected_random_regret(table.column(table.target_index(target)), k);
}

MonteCarloEstimate expected_random_ndcg_estimate(std::span<const double> relevances, std::uint64_t samples,
                                                 std::uint64_t seed) {
  if (samples < 1) throw DomainError("expected_random_ndcg: samples must be >= 1");
  std::vector<double> base(relevances.begin(), relevances.end());
  const double ideal = ideal_dcg(base);
  double sum = 0.0, sum_sq = 0.0;
  std::vector<double> perm(base.size());
  for (std::uint64_t i = 0; i < samples; ++i) {
    perm = base;
    Rng rng(substream_seed(seed, i));
    rng.shuffle(perm);
    const double v = ndcg_of(perm, ideal);
    sum += v;
    sum_sq += v * v;
  }
  const double n = static_cast<double>(samples);
  MonteCarloEstimate est;
  est.mean = sum / n;
  est.samples = samples;
  if (samples > 1) {
    const double var = std::max(0.0, (sum_sq - n * est.mean * est.mean) / (n - 1.0));
    est.std_error = std::sqrt(var / n);
  }
  return est;
}

double expected_random_ndcg(const TransferTable& table, std::string_view target, std::uint64_t samples,
                            std::uint64_t seed) {
  return expected_random_ndcg_estimate(table.column(table.target_index(target)), samples, seed).mean;
}

MetricRow evaluate_ranking(const Ranking& ranking, const TransferTable& table, std::span<const std::size_t> ks) {
  MetricRow row;
  row.ndcg = ndcg(ranking, table);
  for (std::size_t k : ks) row.regret[k] = regret_at_k(ranking, table, std::min(k, ranking.entries.size()));
  return row;
}

MetricRow random_baseline_row(const TransferTable& table, std::string_view target, std::uint64_t samples,
                              std::uint64_t seed, std::span<const std::size_t> ks) {
  const auto col = table.column(table.target_index(target));
  MetricRow row;
  row.ndcg = expected_random_ndcg_estimate(col, samples, seed).mean;
  for (std::size_t k : ks) row.regret[k] = expected_random_regret(col, std::min(k, col.size()));
  return row;
}

MetricRow monte_carlo_row(const TransferTable& table, std::uint64_t samples, std::uint64_t seed,
                          const std::function<Ranking(std::uint64_t)>& draw, std::span<const std::size_t> ks) {
  if (samples == 0) throw DomainError("Monte Carlo needs at least one sample");
  MetricRow sum;
  for (std::size_t k : ks) sum.regret[k] = 0.0;
  for (std::uint64_t i = 0; i < samples; ++i) {
    const MetricRow r = evaluate_ranking(draw(substream_seed(seed, i)), table, ks);
    sum.ndcg += r.ndcg;
    for (const auto& [k, v] : r.regret) sum.regret[k] += v;
  }
  const double n = static_cast<double>(samples);
  sum.ndcg /= n;
  for (auto& [k, v] : sum.regret) v /= n;
  return sum;
}

std::vector<std::string> AggregatedReport::methods() const {
  std::set<std::string> names;
  for (const auto& [key, _] : per_target) names.insert(key.first);
  return {names.begin(), names.end()};
}

namespace {

MetricRow mean_row(const std::vector<const MetricRow*>& rows) {
  MetricRow out;
  for (const MetricRow* r : rows) {
    out.ndcg += r->ndcg;
    for (const auto& [k, v] : r->regret) out.regret[k] += v;
  }
  const double n = static_cast<double>(rows.size());
  out.ndcg /= n;
  for (auto& [k, v] : out.regret) v /= n;
  return out;
}

}  // namespace

AggregatedReport aggregate(const std::map<MethodTarget, MetricRow>& rows, const Manifest& metas,
                           const std::vector<TaskId>& targets) {
  std::vector<TaskId> universe = targets;
  std::set<std::string> methods;
  {
    std::set<TaskId> seen(universe.begin(), universe.end());
    for (const auto& [key, _] : rows) {
      methods.insert(key.first);
      if (targets.empty() && seen.insert(key.second).second) universe.push_back(key.second);
    }
  }
  std::map<TaskType, std::vector<TaskId>> groups;
  for (const auto& t : universe) groups[metas.at(t).task_type].push_back(t);

  AggregatedReport report;
  for (const auto& [key, row] : rows) report.per_target.emplace(key, row);

  for (const auto& method : methods) {
    bool all_groups_complete = true;
    for (const auto& [type, members] : groups) {
      std::vector<const MetricRow*> present;
      for (const auto& t : members) {
        auto it = rows.find({method, t});
        if (it != rows.end()) present.push_back(&it->second);
      }
      if (present.size() == members.size()) {
        report.per_group.emplace(MethodGroup{method, type}, mean_row(present));
      } else {
        all_groups_complete = false;
      }
    }
    if (all_groups_complete && !universe.empty()) {
      std::vector<const MetricRow*> all;
      for (const auto& t : universe) all.push_back(&rows.at({method, t}));
      report.overall.emplace(method, mean_row(all));
    }
  }
  return report;
}

}  // namespace tsel
