#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <utility>
#include <vector>

#include "tsel/proxy.hpp"
#include "tsel/types.hpp"

namespace tsel {

/// Softmax-regression probe. Parameters flatten as the row-major weights
/// (classes x dim) followed by the bias.
struct ProbeModel {
  std::size_t classes = 0;
  std::size_t dim = 0;
  std::vector<double> weights;
  std::vector<double> bias;

  static ProbeModel zeros(std::size_t classes, std::size_t dim);
  std::size_t param_count() const noexcept { return classes * dim + classes; }
  std::vector<double> flatten() const;
  static ProbeModel unflatten(std::size_t classes, std::size_t dim, std::span<const double> params);
  /// Throws InvariantError on shape mismatch or non-finite parameters.
  void validate() const;

  std::vector<double> logits(std::span<const double> x) const;
  std::vector<double> probabilities(std::span<const double> x) const;
  double log_likelihood(std::span<const double> x, int y) const;
  int predict(std::span<const double> x) const;

  friend bool operator==(const ProbeModel&, const ProbeModel&) = default;
};

/// Gradient of log softmax(Wx + b)[y] w.r.t. the flattened parameters.
std::vector<double> loglik_grad(const ProbeModel& model, std::span<const double> x, int y);

enum class FimMode {
  empirical,  // observed labels
  sampled,    // labels drawn from the model's predictive distribution
};

/// Diagonal of the Fisher information: mean over examples of the squared
/// log-likelihood gradient. `seed` only matters for FimMode::sampled.
std::vector<double> fim_diagonal(const ProbeModel& model, const EmbeddedDataset& data,
                                 FimMode mode = FimMode::empirical, std::uint64_t seed = 0);

Ranking taskemb_rank(const EmbeddingSet& embeddings, std::span<const TaskId> intermediates, const TaskId& target);

using EmbeddingPair = std::pair<std::vector<double>, std::vector<double>>;

/// Ranks intermediates by cosine(before, after) of their task embeddings
/// around a few target fine-tuning steps.
Ranking fs_taskemb_rank(const std::map<TaskId, EmbeddingPair>& before_after, const TaskId& target);

}  // namespace tsel
