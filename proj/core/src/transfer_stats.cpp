#include "tsel/transfer_stats.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

#include "tsel/error.hpp"

namespace tsel {

double relative_gain(const TransferTable& table, std::string_view intermediate, std::string_view target) {
  const std::size_t s = table.intermediate_index(intermediate);
  const std::size_t t = table.target_index(target);
  const double base = table.baseline(t);
  if (base <= 0.0) throw DomainError("baseline for '" + std::string(target) + "' is zero");
  return 100.0 * (table.score(s, t) - base) / base;
}

GainStats gain_statistics(const TransferTable& table, const Manifest& metas) {
  const auto& inter = table.intermediates();
  const auto& targets = table.targets();
  for (const auto& id : inter) metas.at(id);
  for (const auto& id : targets) metas.at(id);

  GainStats out;
  double gain_sum = 0.0;
  for (std::size_t t = 0; t < targets.size(); ++t) {
    const double base = table.baseline(t);
    if (base <= 0.0) throw DomainError("baseline for '" + targets[t] + "' is zero");
    const TaskType target_type = metas.at(targets[t]).task_type;
    double col_sum = 0.0;
    double within_sum = 0.0, across_sum = 0.0;
    int within_n = 0, across_n = 0;
    for (std::size_t s = 0; s < inter.size(); ++s) {
      const double v = table.score(s, t);
      if (v > base) {
        ++out.positive_count;
      } else if (v < base) {
        ++out.negative_count;
      } else {
        ++out.tie_count;
      }
      const double gain = 100.0 * (v - base) / base;
      gain_sum += gain;
      col_sum += v;
      if (metas.at(inter[s]).task_type == target_type) {
        within_sum += gain;
        ++within_n;
      } else {
        across_sum += gain;
        ++across_n;
      }
    }
    if (col_sum / static_cast<double>(inter.size()) > base) out.benefiting_targets.push_back(targets[t]);
    if (within_n > 0) out.within_type_gain[targets[t]] = within_sum / within_n;
    if (across_n > 0) out.across_type_gain[targets[t]] = across_sum / across_n;
  }
  out.mean_relative_gain = gain_sum / static_cast<double>(inter.size() * targets.size());
  return out;
}

std::vector<double> average_ranks(std::span<const double> values) {
  const std::size_t n = values.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
  std::vector<double> ranks(n);
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i;
    while (j + 1 < n && values[order[j + 1]] == values[order[i]]) ++j;
    const double avg = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = avg;
    i = j + 1;
  }
  return ranks;
}

double spearman(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw StructuralError("spearman: inputs differ in length");
  if (a.size() < 2) throw StructuralError("spearman: need at least two observations");
  const auto ra = average_ranks(a);
  const auto rb = average_ranks(b);
  const double n = static_cast<double>(a.size());
  const double ma = std::accumulate(ra.begin(), ra.end(), 0.0) / n;
  const double mb = std::accumulate(rb.begin(), rb.end(), 0.0) / n;
  double sab = 0.0, saa = 0.0, sbb = 0.0;
  for (std::size_t i = 0; i < ra.size(); ++i) {
    const double da = ra[i] - ma;
    const double db = rb[i] - mb;
    sab += da * db;
    saa += da * da;
    sbb += db * db;
  }
  if (saa == 0.0 || sbb == 0.0) return 0.0;
  return sab / std::sqrt(saa * sbb);
}

CrossModelCorrelation cross_model_spearman(const TransferTable& a, const TransferTable& b) {
  const std::set<TaskId> sa(a.intermediates().begin(), a.intermediates().end());
  const std::set<TaskId> sb(b.intermediates().begin(), b.intermediates().end());
  const std::set<TaskId> ta(a.targets().begin(), a.targets().end());
  const std::set<TaskId> tb(b.targets().begin(), b.targets().end());
  if (sa != sb || ta != tb) throw StructuralError("cross_model_spearman: tables cover different id sets");

  const std::size_t ns = a.num_intermediates();
  const std::size_t nt = a.num_targets();
  // Map b's layout onto a's.
  std::vector<std::size_t> s_map(ns), t_map(nt);
  for (std::size_t s = 0; s < ns; ++s) s_map[s] = b.intermediate_index(a.intermediates()[s]);
  for (std::size_t t = 0; t < nt; ++t) t_map[t] = b.target_index(a.targets()[t]);

  std::vector<double> pooled_a, pooled_b;
  pooled_a.reserve(ns * nt);
  pooled_b.reserve(ns * nt);
  CrossModelCorrelation out;
  for (std::size_t t = 0; t < nt; ++t) {
    std::vector<double> ca(ns), cb(ns);
    for (std::size_t s = 0; s < ns; ++s) {
      ca[s] = a.score(s, t);
      cb[s] = b.score(s_map[s], t_map[t]);
      pooled_a.push_back(ca[s]);
      pooled_b.push_back(cb[s]);
    }
    out.per_target.push_back(ns >= 2 ? spearman(ca, cb) : 0.0);
  }
  out.overall = pooled_a.size() >= 2 ? spearman(pooled_a, pooled_b) : 0.0;
  out.per_target_mean = std::accumulate(out.per_target.begin(), out.per_target.end(), 0.0) / static_cast<double>(nt);

  if (nt >= 2) {
    double row_sum = 0.0;
    for (std::size_t s = 0; s < ns; ++s) {
      std::vector<double> ra(nt), rb(nt);
      for (std::size_t t = 0; t < nt; ++t) {
        ra[t] = a.score(s, t);
        rb[t] = b.score(s_map[s], t_map[t]);
      }
      row_sum += spearman(ra, rb);
    }
    out.per_intermediate_mean = row_sum / static_cast<double>(ns);
  }
  return out;
}

}  // namespace tsel
