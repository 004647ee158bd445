#pragma once

#include <map>
#include <span>
#include <string_view>
#include <vector>

#include "tsel/types.hpp"

namespace tsel {

/// Relative transfer gain in percent: 100 * (score - baseline) / baseline.
double relative_gain(const TransferTable& table, std::string_view intermediate, std::string_view target);

struct GainStats {
  int positive_count = 0;
  int negative_count = 0;
  int tie_count = 0;
  double mean_relative_gain = 0.0;  // percent, over all cells
  std::vector<TaskId> benefiting_targets;  // column mean exceeds baseline
  // Mean relative gain per target over intermediates of the same (within) or
  // a different (across) task type. Targets without such intermediates are absent.
  std::map<TaskId, double> within_type_gain;
  std::map<TaskId, double> across_type_gain;
};

/// Ties are exact floating-point equality with the baseline.
GainStats gain_statistics(const TransferTable& table, const Manifest& metas);

/// Spearman rank correlation with average ranks for ties. Returns 0 when
/// either input is constant. Throws StructuralError on length mismatch or n < 2.
double spearman(std::span<const double> a, std::span<const double> b);

/// Fractional 1-based ranks (ascending), averaging tied groups.
std::vector<double> average_ranks(std::span<const double> values);

struct CrossModelCorrelation {
  double overall = 0.0;           // pooled over all (s, t) cells
  double per_target_mean = 0.0;   // mean of per-column correlations
  double per_intermediate_mean = 0.0;  // mean of per-row correlations
  std::vector<double> per_target;  // aligned with a.targets()
};

/// Requires identical intermediate and target id sets (order may differ).
CrossModelCorrelation cross_model_spearman(const TransferTable& a, const TransferTable& b);

}  // namespace tsel
