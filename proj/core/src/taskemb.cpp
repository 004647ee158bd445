#include "tsel/taskemb.hpp"

#include <algorithm>
#include <cmath>

#include "tsel/error.hpp"
#include "tsel/random.hpp"
#include "tsel/rankers.hpp"

namespace tsel {

ProbeModel ProbeModel::zeros(std::size_t classes, std::size_t dim) {
  return ProbeModel{classes, dim, std::vector<double>(classes * dim, 0.0), std::vector<double>(classes, 0.0)};
}

std::vector<double> ProbeModel::flatten() const {
  std::vector<double> out(weights);
  out.insert(out.end(), bias.begin(), bias.end());
  return out;
}

ProbeModel ProbeModel::unflatten(std::size_t classes, std::size_t dim, std::span<const double> params) {
  if (params.size() != classes * dim + classes) {
    throw InvariantError("probe parameter vector has length " + std::to_string(params.size()) + ", expected " +
                         std::to_string(classes * dim + classes));
  }
  ProbeModel m;
  m.classes = classes;
  m.dim = dim;
  m.weights.assign(params.begin(), params.begin() + static_cast<std::ptrdiff_t>(classes * dim));
  m.bias.assign(params.begin() + static_cast<std::ptrdiff_t>(classes * dim), params.end());
  return m;
}

void ProbeModel::validate() const {
  if (classes == 0 || dim == 0) throw InvariantError("probe needs at least one class and one feature");
  if (weights.size() != classes * dim || bias.size() != classes) throw InvariantError("probe parameter shape mismatch");
  for (double w : weights) {
    if (!std::isfinite(w)) throw InvariantError("probe has a non-finite weight");
  }
  for (double b : bias) {
    if (!std::isfinite(b)) throw InvariantError("probe has a non-finite bias");
  }
}

std::vector<double> ProbeModel::logits(std::span<const double> x) const {
  if (x.size() != dim) {
    throw StructuralError("input has dimension " + std::to_string(x.size()) + ", probe expects " + std::to_string(dim));
  }
  std::vector<double> z(bias);
  for (std::size_t c = 0; c < classes; ++c) {
    const double* row = weights.data() + c * dim;
    double acc = 0.0;
    for (std::size_t j = 0; j < dim; ++j) acc += row[j] * x[j];
    z[c] += acc;
  }
  return z;
}

std::vector<double> ProbeModel::probabilities(std::span<const double> x) const {
  std::vector<double> z = logits(x);
  const double zmax = *std::max_element(z.begin(), z.end());
  double total = 0.0;
  for (double& v : z) {
    v = std::exp(v - zmax);
    total += v;
  }
  for (double& v : z) v /= total;
  return z;
}

double ProbeModel::log_likelihood(std::span<const double> x, int y) const {
  const std::vector<double> z = logits(x);
  const double zmax = *std::max_element(z.begin(), z.end());
  double total = 0.0;
  for (double v : z) total += std::exp(v - zmax);
  return z[static_cast<std::size_t>(y)] - zmax - std::log(total);
}

int ProbeModel::predict(std::span<const double> x) const {
  const std::vector<double> z = logits(x);
  return static_cast<int>(std::max_element(z.begin(), z.end()) - z.begin());
}

namespace {

void check_label(const ProbeModel& model, int y) {
  if (y < 0 || static_cast<std::size_t>(y) >= model.classes) {
    throw DomainError("label " + std::to_string(y) + " outside [0, " + std::to_string(model.classes) + ")");
  }
}

// Accumulates the squared gradient for label y into `acc` without building the
// gradient vector: the class-c block is (1{c=y} - p_c) * [x, 1].
void accumulate_squared(const ProbeModel& m, std::span<const double> x, const std::vector<double>& p, int y,
                        std::vector<double>& acc) {
  const std::size_t bias_at = m.classes * m.dim;
  for (std::size_t c = 0; c < m.classes; ++c) {
    const double r = (static_cast<int>(c) == y ? 1.0 : 0.0) - p[c];
    const double r2 = r * r;
    double* row = acc.data() + c * m.dim;
    for (std::size_t j = 0; j < m.dim; ++j) row[j] += r2 * x[j] * x[j];
    acc[bias_at + c] += r2;
  }
}

int sample_label(const std::vector<double>& p, Rng& rng) {
  const double u = rng.uniform01();
  double cumulative = 0.0;
  for (std::size_t c = 0; c < p.size(); ++c) {
    cumulative += p[c];
    if (u < cumulative) return static_cast<int>(c);
  }
  return static_cast<int>(p.size() - 1);
}

}  // namespace

std::vector<double> loglik_grad(const ProbeModel& model, std::span<const double> x, int y) {
  check_label(model, y);
  const std::vector<double> p = model.probabilities(x);
  std::vector<double> g(model.param_count());
  const std::size_t bias_at = model.classes * model.dim;
  for (std::size_t c = 0; c < model.classes; ++c) {
    const double r = (static_cast<int>(c) == y ? 1.0 : 0.0) - p[c];
    for (std::size_t j = 0; j < model.dim; ++j) g[c * model.dim + j] = r * x[j];
    g[bias_at + c] = r;
  }
  return g;
}

std::vector<double> fim_diagonal(const ProbeModel& model, const EmbeddedDataset& data, FimMode mode,
                                 std::uint64_t seed) {
  if (data.label_kind != LabelKind::class_index && data.label_kind != LabelKind::token_tag) {
    throw UnsupportedConfigError("Fisher embedding needs class or tag labels");
  }
  if (data.examples.empty()) throw UnsupportedConfigError("Fisher embedding of an empty dataset");
  if (data.dim != model.dim) {
    throw StructuralError("dataset dimension " + std::to_string(data.dim) + " does not match probe dimension " +
                          std::to_string(model.dim));
  }
  std::vector<double> acc(model.param_count(), 0.0);
  for (std::size_t i = 0; i < data.examples.size(); ++i) {
    const auto& e = data.examples[i];
    const std::vector<double> p = model.probabilities(e.vector);
    int y = e.label;
    if (mode == FimMode::sampled) {
      Rng rng(substream_seed(seed, i));
      y = sample_label(p, rng);
    }
    check_label(model, y);
    accumulate_squared(model, e.vector, p, y, acc);
  }
  const double inv_n = 1.0 / static_cast<double>(data.examples.size());
  for (double& v : acc) v *= inv_n;
  return acc;
}

Ranking taskemb_rank(const EmbeddingSet& embeddings, std::span<const TaskId> intermediates, const TaskId& target) {
  if (embeddings.kind() != EmbeddingKind::task_fim) {
    throw UnsupportedConfigError("TaskEmb ranking needs a task_fim embedding set");
  }
  return rank_by_cosine(embeddings, intermediates, target);
}

Ranking fs_taskemb_rank(const std::map<TaskId, EmbeddingPair>& before_after, const TaskId& target) {
  std::map<TaskId, double> scores;
  for (const auto& [id, pair] : before_after) {
    if (pair.first.size() != pair.second.size()) {
      throw StructuralError("embeddings of '" + id + "' differ in length before and after fine-tuning");
    }
    try {
      scores[id] = cosine_similarity(pair.first, pair.second);
    } catch (const DomainError&) {
      throw DomainError("zero-norm task embedding for '" + id + "'");
    }
  }
  return rank_by_scores(scores, target, {}, "fs-taskemb");
}

}  // namespace tsel
