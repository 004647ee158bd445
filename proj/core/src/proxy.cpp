#include "tsel/proxy.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <set>

#include "tsel/error.hpp"
#include "tsel/random.hpp"
#include "tsel/rankers.hpp"
#include "tsel/transfer_stats.hpp"

namespace tsel {

std::string_view to_string(LabelKind kind) {
  switch (kind) {
    case LabelKind::class_index: return "class_index";
    case LabelKind::real_value: return "real_value";
    case LabelKind::choice_group: return "choice_group";
    case LabelKind::token_tag: return "token_tag";
  }
  return "unknown";
}

LabelKind parse_label_kind(std::string_view text) {
  if (text == "class_index") return LabelKind::class_index;
  if (text == "real_value") return LabelKind::real_value;
  if (text == "choice_group") return LabelKind::choice_group;
  if (text == "token_tag") return LabelKind::token_tag;
  throw ParseError("unknown label kind '" + std::string(text) + "'");
}

void EmbeddedDataset::validate() const {
  if (dim == 0) throw InvariantError("embedded dataset dimension must be positive");
  const bool classed = label_kind == LabelKind::class_index || label_kind == LabelKind::token_tag;
  if (classed && num_classes == 0) throw InvariantError("class-labelled dataset must declare num_classes");
  std::map<std::int64_t, int> correct_per_group;
  for (std::size_t i = 0; i < examples.size(); ++i) {
    const auto& e = examples[i];
    if (e.vector.size() != dim) {
      throw InvariantError("example " + std::to_string(i) + " has dimension " + std::to_string(e.vector.size()) +
                           ", expected " + std::to_string(dim));
    }
    for (double x : e.vector) {
      if (!std::isfinite(x)) throw InvariantError("example " + std::to_string(i) + " has a non-finite entry");
    }
    if (classed && (e.label < 0 || static_cast<std::size_t>(e.label) >= num_classes)) {
      throw InvariantError("example " + std::to_string(i) + " label " + std::to_string(e.label) +
                           " outside [0, " + std::to_string(num_classes) + ")");
    }
    if (label_kind == LabelKind::real_value && !std::isfinite(e.value)) {
      throw InvariantError("example " + std::to_string(i) + " has a non-finite value");
    }
    if (label_kind == LabelKind::choice_group) {
      if (e.choice < 0) throw InvariantError("example " + std::to_string(i) + " has a negative choice index");
      correct_per_group[e.group] += e.correct ? 1 : 0;
    }
  }
  for (const auto& [group, n] : correct_per_group) {
    if (n != 1) {
      throw InvariantError("choice group " + std::to_string(group) + " has " + std::to_string(n) +
                           " correct choices, expected exactly one");
    }
  }
}

std::size_t cv_units(const EmbeddedDataset& data) {
  if (data.label_kind != LabelKind::choice_group) return data.examples.size();
  std::set<std::int64_t> groups;
  for (const auto& e : data.examples) groups.insert(e.group);
  return groups.size();
}

std::vector<std::size_t> assign_folds(const EmbeddedDataset& data, std::size_t folds, std::uint64_t seed) {
  if (folds < 2) throw UnsupportedConfigError("cross-validation needs at least 2 folds");
  const std::size_t units = cv_units(data);
  if (folds > units) {
    throw UnsupportedConfigError("cross-validation with " + std::to_string(folds) + " folds needs at least " +
                                 std::to_string(folds) + " examples (groups), got " + std::to_string(units));
  }
  Rng rng(seed);
  std::vector<std::size_t> fold(data.examples.size());
  if (data.label_kind == LabelKind::choice_group) {
    std::set<std::int64_t> unique;
    for (const auto& e : data.examples) unique.insert(e.group);
    std::vector<std::int64_t> groups(unique.begin(), unique.end());
    rng.shuffle(groups);
    std::map<std::int64_t, std::size_t> group_fold;
    for (std::size_t i = 0; i < groups.size(); ++i) group_fold[groups[i]] = i % folds;
    for (std::size_t i = 0; i < data.examples.size(); ++i) fold[i] = group_fold[data.examples[i].group];
    return fold;
  }
  std::vector<std::size_t> order(data.examples.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  rng.shuffle(order);
  if (data.label_kind != LabelKind::real_value) {
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return data.examples[a].label < data.examples[b].label; });
  }
  for (std::size_t i = 0; i < order.size(); ++i) fold[order[i]] = i % folds;
  return fold;
}

namespace {

double squared_distance(const std::vector<double>& a, const std::vector<double>& b) {
  double d = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double diff = a[i] - b[i];
    d += diff * diff;
  }
  return d;
}

struct Neighbour {
  std::size_t index = 0;
  double distance = std::numeric_limits<double>::infinity();
};

Neighbour nearest(const EmbeddedDataset& data, const std::vector<std::size_t>& train, std::size_t query) {
  Neighbour best;
  // `train` is in ascending index order, so strict < keeps the lowest index on ties.
  for (std::size_t j : train) {
    const double d = squared_distance(data.examples[query].vector, data.examples[j].vector);
    if (d < best.distance) best = {j, d};
  }
  return best;
}

// Group id -> member indices, in ascending index order.
std::map<std::int64_t, std::vector<std::size_t>> group_members(const EmbeddedDataset& data,
                                                               const std::vector<std::size_t>& indices) {
  std::map<std::int64_t, std::vector<std::size_t>> groups;
  for (std::size_t i : indices) groups[data.examples[i].group].push_back(i);
  return groups;
}

void split_fold(const std::vector<std::size_t>& fold, std::size_t f, std::vector<std::size_t>& train,
                std::vector<std::size_t>& test) {
  train.clear();
  test.clear();
  for (std::size_t i = 0; i < fold.size(); ++i) (fold[i] == f ? test : train).push_back(i);
}

}  // namespace

double knn_cv_score(const EmbeddedDataset& data, const CvConfig& cfg) {
  if (data.label_kind == LabelKind::real_value) {
    throw UnsupportedConfigError("kNN proxy does not support real-valued labels");
  }
  data.validate();
  const auto fold = assign_folds(data, cfg.folds, cfg.seed);
  std::vector<std::size_t> train, test;
  double acc_sum = 0.0;
  for (std::size_t f = 0; f < cfg.folds; ++f) {
    split_fold(fold, f, train, test);
    std::size_t correct = 0, total = 0;
    if (data.label_kind == LabelKind::choice_group) {
      for (const auto& [group, members] : group_members(data, test)) {
        std::size_t pick = members.front();
        bool pick_voted = false;
        double pick_dist = std::numeric_limits<double>::infinity();
        bool first = true;
        for (std::size_t m : members) {
          const Neighbour nb = nearest(data, train, m);
          const bool voted = data.examples[nb.index].correct;
          bool better;
          if (first) {
            better = true;
          } else if (voted != pick_voted) {
            better = voted;
          } else if (voted) {
            better = nb.distance < pick_dist;
          } else {
            better = nb.distance > pick_dist;
          }
          if (better) {
            pick = m;
            pick_voted = voted;
            pick_dist = nb.distance;
          }
          first = false;
        }
        correct += data.examples[pick].correct ? 1 : 0;
        ++total;
      }
    } else {
      for (std::size_t q : test) {
        const Neighbour nb = nearest(data, train, q);
        correct += data.examples[nb.index].label == data.examples[q].label ? 1 : 0;
        ++total;
      }
    }
    acc_sum += static_cast<double>(correct) / static_cast<double>(total);
  }
  return acc_sum / static_cast<double>(cfg.folds);
}

namespace {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

struct Standardizer {
  Eigen::RowVectorXd mean;
  Eigen::RowVectorXd scale;

  static Standardizer fit(const Matrix& x) {
    Standardizer s;
    s.mean = x.colwise().mean();
    const Matrix centered = x.rowwise() - s.mean;
    s.scale = (centered.array().square().colwise().sum() / static_cast<double>(x.rows())).sqrt();
    for (Eigen::Index j = 0; j < s.scale.size(); ++j) {
      if (s.scale(j) < 1e-12) s.scale(j) = 1.0;
    }
    return s;
  }
  Matrix apply(const Matrix& x) const { return (x.rowwise() - mean).array().rowwise() / scale.array(); }
};

Matrix gather(const EmbeddedDataset& data, const std::vector<std::size_t>& idx) {
  Matrix x(static_cast<Eigen::Index>(idx.size()), static_cast<Eigen::Index>(data.dim));
  for (std::size_t r = 0; r < idx.size(); ++r) {
    const auto& v = data.examples[idx[r]].vector;
    for (std::size_t c = 0; c < data.dim; ++c) x(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = v[c];
  }
  return x;
}

struct SoftmaxModel {
  Matrix weights;  // dim x classes
  Eigen::RowVectorXd bias;

  Matrix logits(const Matrix& x) const { return (x * weights).rowwise() + bias; }
};

// Full-batch gradient descent on mean cross-entropy + (l2/2)|W|^2.
SoftmaxModel fit_softmax(const Matrix& x, const std::vector<int>& labels, std::size_t classes, const CvConfig& cfg) {
  const Eigen::Index n = x.rows();
  const auto k = static_cast<Eigen::Index>(classes);
  SoftmaxModel m{Matrix::Zero(x.cols(), k), Eigen::RowVectorXd::Zero(k)};
  Matrix onehot = Matrix::Zero(n, k);
  for (Eigen::Index i = 0; i < n; ++i) onehot(i, labels[static_cast<std::size_t>(i)]) = 1.0;
  const double inv_n = 1.0 / static_cast<double>(n);
  for (std::size_t it = 0; it < cfg.max_iterations; ++it) {
    Matrix z = m.logits(x);
    z = z.colwise() - z.rowwise().maxCoeff();
    Matrix p = z.array().exp().matrix();
    p = p.array().colwise() / p.rowwise().sum().array();
    const Matrix residual = p - onehot;
    const Matrix grad_w = x.transpose() * residual * inv_n + cfg.l2_penalty * m.weights;
    const Eigen::RowVectorXd grad_b = residual.colwise().sum() * inv_n;
    m.weights -= cfg.learning_rate * grad_w;
    m.bias -= cfg.learning_rate * grad_b;
  }
  return m;
}

int argmax_row(const Matrix& z, Eigen::Index r) {
  Eigen::Index best = 0;
  for (Eigen::Index c = 1; c < z.cols(); ++c) {
    if (z(r, c) > z(r, best)) best = c;
  }
  return static_cast<int>(best);
}

}  // namespace

CvResult linear_cv(const EmbeddedDataset& data, const CvConfig& cfg) {
  data.validate();
  const auto fold = assign_folds(data, cfg.folds, cfg.seed);
  CvResult result;
  std::vector<std::size_t> train, test;
  double sum = 0.0;

  // Label of an example as seen by the learner; used for degeneracy checks.
  auto key = [&](std::size_t i) -> double {
    const auto& e = data.examples[i];
    switch (data.label_kind) {
      case LabelKind::real_value: return e.value;
      case LabelKind::choice_group: return e.correct ? 1.0 : 0.0;
      default: return static_cast<double>(e.label);
    }
  };
  auto single_label = [&](const std::vector<std::size_t>& idx) {
    return std::all_of(idx.begin(), idx.end(), [&](std::size_t i) { return key(i) == key(idx.front()); });
  };

  for (std::size_t f = 0; f < cfg.folds; ++f) {
    split_fold(fold, f, train, test);
    if (single_label(train)) {
      ++result.folds_skipped;
      result.warnings.push_back("fold " + std::to_string(f) + " skipped: training fold has a single label");
      continue;
    }
    const Standardizer st = Standardizer::fit(gather(data, train));
    const Matrix xtr = st.apply(gather(data, train));
    const Matrix xte = st.apply(gather(data, test));
    double fold_score = 0.0;

    if (data.label_kind == LabelKind::real_value) {
      Vector y(xtr.rows());
      for (std::size_t r = 0; r < train.size(); ++r) y(static_cast<Eigen::Index>(r)) = data.examples[train[r]].value;
      const double y_mean = y.mean();
      const double inv_n = 1.0 / static_cast<double>(train.size());
      Matrix gram = xtr.transpose() * xtr * inv_n;
      gram.diagonal().array() += cfg.l2_penalty;
      const Vector w = gram.ldlt().solve(xtr.transpose() * (y.array() - y_mean).matrix() * inv_n);
      const Vector pred = (xte * w).array() + y_mean;
      std::vector<double> p(pred.data(), pred.data() + pred.size());
      std::vector<double> truth;
      for (std::size_t i : test) truth.push_back(data.examples[i].value);
      fold_score = test.size() >= 2 ? spearman(p, truth) : 0.0;
    } else if (data.label_kind == LabelKind::choice_group) {
      std::vector<int> labels;
      for (std::size_t i : train) labels.push_back(data.examples[i].correct ? 1 : 0);
      const SoftmaxModel m = fit_softmax(xtr, labels, 2, cfg);
      const Matrix z = m.logits(xte);
      std::map<std::size_t, Eigen::Index> row_of;
      for (std::size_t r = 0; r < test.size(); ++r) row_of[test[r]] = static_cast<Eigen::Index>(r);
      std::size_t correct = 0, groups = 0;
      for (const auto& [group, members] : group_members(data, test)) {
        std::size_t pick = members.front();
        double best = -std::numeric_limits<double>::infinity();
        for (std::size_t mi : members) {
          const Eigen::Index r = row_of[mi];
          const double margin = z(r, 1) - z(r, 0);
          if (margin > best) {
            best = margin;
            pick = mi;
          }
        }
        correct += data.examples[pick].correct ? 1 : 0;
        ++groups;
      }
      fold_score = static_cast<double>(correct) / static_cast<double>(groups);
    } else {
      std::vector<int> labels;
      for (std::size_t i : train) labels.push_back(data.examples[i].label);
      const SoftmaxModel m = fit_softmax(xtr, labels, data.num_classes, cfg);
      const Matrix z = m.logits(xte);
      std::size_t correct = 0;
      for (std::size_t r = 0; r < test.size(); ++r) {
        correct += argmax_row(z, static_cast<Eigen::Index>(r)) == data.examples[test[r]].label ? 1 : 0;
      }
      fold_score = static_cast<double>(correct) / static_cast<double>(test.size());
    }
    sum += fold_score;
    ++result.folds_used;
  }

  if (result.folds_used == 0) {
    std::vector<std::size_t> all(data.examples.size());
    std::iota(all.begin(), all.end(), std::size_t{0});
    if (!single_label(all)) throw UnsupportedConfigError("linear proxy: every training fold is degenerate");
    // A constant predictor is exact on a single-label dataset. Regression on a
    // constant target has no defined rank correlation.
    result.degenerate = true;
    result.score = data.label_kind == LabelKind::real_value ? 0.0 : 1.0;
    result.warnings.push_back("dataset carries a single label; constant predictor used");
    return result;
  }
  result.degenerate = result.folds_skipped > 0;
  result.score = sum / static_cast<double>(result.folds_used);
  return result;
}

double linear_cv_score(const EmbeddedDataset& data, const CvConfig& cfg) { return linear_cv(data, cfg).score; }

EmbeddedDataset sample_tokens(const EmbeddedDataset& data, std::size_t n, std::uint64_t seed) {
  if (data.label_kind != LabelKind::token_tag) {
    throw UnsupportedConfigError("sample_tokens applies to token_tag datasets only");
  }
  if (n >= data.examples.size()) return data;
  std::vector<std::size_t> idx(data.examples.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  Rng rng(seed);
  // Partial Fisher-Yates: the first n slots become a uniform n-subset.
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t j = i + static_cast<std::size_t>(rng.uniform_index(idx.size() - i));
    std::swap(idx[i], idx[j]);
  }
  idx.resize(n);
  std::sort(idx.begin(), idx.end());
  EmbeddedDataset out = data;
  out.examples.clear();
  out.examples.reserve(n);
  for (std::size_t i : idx) out.examples.push_back(data.examples[i]);
  return out;
}

Ranking proxy_rank(const std::map<TaskId, EmbeddedDataset>& datasets, const CvConfig& cfg, ProxyKind proxy,
                   const TaskId& target, TaskType target_type) {
  if (target_type == TaskType::extractive_qa) {
    throw UnsupportedConfigError("proxy models are not defined for extractive QA target '" + target + "'");
  }
  if (datasets.empty()) throw UnsupportedConfigError("proxy_rank: no embedded datasets for '" + target + "'");
  const std::size_t n_examples = datasets.begin()->second.examples.size();
  std::map<TaskId, double> scores;
  for (const auto& [id, raw] : datasets) {
    if (raw.examples.size() != n_examples) {
      throw StructuralError("embedded datasets for '" + target + "' differ in example count");
    }
    const EmbeddedDataset data = raw.label_kind == LabelKind::token_tag && raw.examples.size() > cfg.token_sample
                                     ? sample_tokens(raw, cfg.token_sample, cfg.seed)
                                     : raw;
    scores[id] = proxy == ProxyKind::knn ? knn_cv_score(data, cfg) : linear_cv_score(data, cfg);
  }
  return rank_by_scores(scores, target, {}, proxy == ProxyKind::knn ? "knn" : "linear");
}

}  // namespace tsel
