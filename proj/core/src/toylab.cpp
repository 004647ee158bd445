#include "tsel/toylab.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <sstream>

#include "tsel/error.hpp"
#include "tsel/random.hpp"

namespace tsel {

namespace {

std::uint64_t seed_for(std::uint64_t seed, std::string_view tag) { return substream_seed(seed, fnv1a(tag)); }

std::string indexed_id(char prefix, std::size_t i) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "%c%02zu", prefix, i);
  return buf;
}

std::vector<double> random_direction(Rng& rng, std::size_t dim) {
  std::vector<double> v(dim);
  double norm = 0.0;
  do {
    norm = 0.0;
    for (double& x : v) {
      x = rng.normal();
      norm += x * x;
    }
  } while (norm == 0.0);
  norm = std::sqrt(norm);
  for (double& x : v) x /= norm;
  return v;
}

std::vector<std::vector<double>> random_centers(const ToyUniverseConfig& cfg, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<std::vector<double>> centers;
  for (std::size_t c = 0; c < cfg.classes; ++c) {
    auto v = random_direction(rng, cfg.dim);
    for (double& x : v) x *= cfg.cluster_separation;
    centers.push_back(std::move(v));
  }
  return centers;
}

// Balanced labels (i mod classes), unit-variance Gaussian noise.
EmbeddedDataset sample_mixture(const std::vector<std::vector<double>>& centers, std::size_t n, std::uint64_t seed,
                               const TaskId& id) {
  EmbeddedDataset d;
  d.label_kind = LabelKind::class_index;
  d.dim = centers.front().size();
  d.num_classes = centers.size();
  d.source_model = id;
  d.target = id;
  d.examples.reserve(n);
  Rng rng(seed);
  for (std::size_t i = 0; i < n; ++i) {
    EmbeddedExample e;
    e.label = static_cast<int>(i % centers.size());
    const auto& mu = centers[static_cast<std::size_t>(e.label)];
    e.vector.resize(mu.size());
    for (std::size_t j = 0; j < mu.size(); ++j) e.vector[j] = mu[j] + rng.normal();
    d.examples.push_back(std::move(e));
  }
  return d;
}

ToyTask make_task(const ToyUniverseConfig& cfg, TaskId id, TaskRole role, std::vector<std::vector<double>> centers,
                  std::size_t train_size) {
  ToyTask t;
  t.meta = TaskMeta{id, TaskType::classification, train_size, "acc", role};
  t.centers = std::move(centers);
  t.train = sample_mixture(t.centers, train_size, seed_for(cfg.seed, "train:" + id), id);
  t.validation = sample_mixture(t.centers, cfg.validation_examples, seed_for(cfg.seed, "validation:" + id), id);
  t.test = sample_mixture(t.centers, cfg.test_examples, seed_for(cfg.seed, "test:" + id), id);
  return t;
}

void check_trainable(const EmbeddedDataset& train) {
  if (train.examples.empty()) throw UnsupportedConfigError("probe training needs examples");
  const int first = train.examples.front().label;
  const bool single = std::all_of(train.examples.begin(), train.examples.end(),
                                  [&](const EmbeddedExample& e) { return e.label == first; });
  if (single) throw UnsupportedConfigError("probe training needs at least two classes in the data");
}

ProbeModel random_probe(std::size_t classes, std::size_t dim, std::uint64_t seed) {
  ProbeModel m = ProbeModel::zeros(classes, dim);
  Rng rng(seed);
  for (double& w : m.weights) w = 0.01 * rng.normal();
  return m;
}

// One SGD update on the mean cross-entropy of the batch.
void sgd_step(ProbeModel& m, const EmbeddedDataset& data, std::span<const std::size_t> batch, double lr) {
  std::vector<double> grad(m.param_count(), 0.0);
  const std::size_t bias_at = m.classes * m.dim;
  for (std::size_t i : batch) {
    const auto& e = data.examples[i];
    const std::vector<double> p = m.probabilities(e.vector);
    for (std::size_t c = 0; c < m.classes; ++c) {
      const double r = p[c] - (static_cast<int>(c) == e.label ? 1.0 : 0.0);
      for (std::size_t j = 0; j < m.dim; ++j) grad[c * m.dim + j] += r * e.vector[j];
      grad[bias_at + c] += r;
    }
  }
  const double scale = lr / static_cast<double>(batch.size());
  for (std::size_t k = 0; k < bias_at; ++k) m.weights[k] -= scale * grad[k];
  for (std::size_t c = 0; c < m.classes; ++c) m.bias[c] -= scale * grad[bias_at + c];
}

ProbeModel starting_point(const ProbeModel* init, const EmbeddedDataset& train, std::uint64_t seed) {
  if (init == nullptr) return random_probe(train.num_classes, train.dim, seed_for(seed, "init"));
  if (init->dim != train.dim || init->classes != train.num_classes) {
    throw StructuralError("initial probe shape does not match the training data");
  }
  return *init;
}

bool reusable(const ProbeModel& m, const ToyTask& target) {
  return m.classes == target.train.num_classes && m.dim == target.train.dim;
}

}  // namespace

void ToyUniverseConfig::validate() const {
  if (n_intermediates == 0 || n_targets == 0 || dim == 0 || examples_per_intermediate == 0 ||
      target_train_cap == 0 || validation_examples == 0 || test_examples == 0) {
    throw UnsupportedConfigError("toy universe counts must all be at least 1");
  }
  if (classes < 2) throw UnsupportedConfigError("toy tasks need at least 2 classes");
  if (!(cluster_separation >= 0.0) || !(domain_drift >= 0.0)) {
    throw UnsupportedConfigError("cluster_separation and domain_drift must be non-negative");
  }
}

void ToyTrainConfig::validate() const {
  if (epochs_max == 0 || batch_size == 0 || restarts == 0) {
    throw UnsupportedConfigError("epochs_max, batch_size and restarts must be positive");
  }
  if (early_stop_patience >= epochs_max) throw UnsupportedConfigError("early_stop_patience must be below epochs_max");
  if (!(learning_rate >= 0.0)) throw UnsupportedConfigError("learning_rate must be non-negative");
}

Manifest ToyUniverse::manifest() const {
  std::vector<TaskMeta> metas;
  for (const auto& t : intermediates) metas.push_back(t.meta);
  for (const auto& t : targets) metas.push_back(t.meta);
  return Manifest(std::move(metas));
}

std::vector<TaskId> ToyUniverse::intermediate_ids() const {
  std::vector<TaskId> ids;
  for (const auto& t : intermediates) ids.push_back(t.meta.id);
  return ids;
}

std::vector<TaskId> ToyUniverse::target_ids() const {
  std::vector<TaskId> ids;
  for (const auto& t : targets) ids.push_back(t.meta.id);
  return ids;
}

const ToyTask& ToyUniverse::task(std::string_view id) const {
  for (const auto* pool : {&intermediates, &targets}) {
    for (const auto& t : *pool) {
      if (t.meta.id == id) return t;
    }
  }
  throw LookupError(std::string(id), "no toy task '" + std::string(id) + "'");
}

ToyUniverse gen_universe(const ToyUniverseConfig& cfg) {
  cfg.validate();
  ToyUniverse u;
  u.config = cfg;
  for (std::size_t j = 0; j < cfg.n_targets; ++j) {
    const TaskId id = indexed_id('t', j);
    u.targets.push_back(make_task(cfg, id, TaskRole::target, random_centers(cfg, seed_for(cfg.seed, "centers:" + id)),
                                  cfg.target_train_cap));
  }
  for (std::size_t i = 0; i < cfg.n_intermediates; ++i) {
    const TaskId id = indexed_id('s', i);
    std::vector<std::vector<double>> centers;
    if (i < cfg.n_targets) {
      centers = u.targets[i].centers;
      Rng rng(seed_for(cfg.seed, "drift:" + id));
      for (auto& c : centers) {
        for (double& x : c) x += cfg.domain_drift * rng.normal();
      }
    } else {
      centers = random_centers(cfg, seed_for(cfg.seed, "centers:" + id));
    }
    Rng size_rng(seed_for(cfg.seed, "size:" + id));
    const double scale = 0.5 + size_rng.uniform01();
    const auto size = std::max<std::size_t>(
        2 * cfg.classes, static_cast<std::size_t>(std::llround(scale * static_cast<double>(cfg.examples_per_intermediate))));
    u.intermediates.push_back(make_task(cfg, id, TaskRole::intermediate, std::move(centers), size));
  }
  return u;
}

double accuracy(const ProbeModel& model, const EmbeddedDataset& data) {
  if (data.examples.empty()) throw UnsupportedConfigError("accuracy of an empty dataset");
  std::size_t correct = 0;
  for (const auto& e : data.examples) correct += model.predict(e.vector) == e.label ? 1 : 0;
  return static_cast<double>(correct) / static_cast<double>(data.examples.size());
}

ProbeFit train_probe(const EmbeddedDataset& train, const EmbeddedDataset& validation, const ToyTrainConfig& cfg,
                     std::uint64_t seed, const ProbeModel* init) {
  cfg.validate();
  check_trainable(train);
  ProbeModel model = starting_point(init, train, seed);
  ProbeFit best{model, 0, accuracy(model, validation)};
  Rng order_rng(seed_for(seed, "order"));
  std::vector<std::size_t> order(train.examples.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::size_t stale = 0;
  for (std::size_t epoch = 1; epoch <= cfg.epochs_max; ++epoch) {
    order_rng.shuffle(order);
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      const std::size_t len = std::min(cfg.batch_size, order.size() - start);
      sgd_step(model, train, std::span<const std::size_t>(order).subspan(start, len), cfg.learning_rate);
    }
    const double acc = accuracy(model, validation);
    if (acc > best.best_validation_accuracy) {
      best = {model, epoch, acc};
      stale = 0;
    } else if (++stale >= cfg.early_stop_patience) {
      break;
    }
  }
  return best;
}

ProbeModel fine_tune_steps(const ProbeModel& init, const EmbeddedDataset& train, const ToyTrainConfig& cfg,
                           std::size_t steps, std::uint64_t seed) {
  if (train.examples.empty()) throw UnsupportedConfigError("fine-tuning needs examples");
  ProbeModel model = starting_point(&init, train, seed);
  Rng order_rng(seed_for(seed, "order"));
  std::vector<std::size_t> order(train.examples.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::size_t pos = order.size();
  for (std::size_t s = 0; s < steps; ++s) {
    if (pos >= order.size()) {
      order_rng.shuffle(order);
      pos = 0;
    }
    const std::size_t len = std::min(cfg.batch_size, order.size() - pos);
    sgd_step(model, train, std::span<const std::size_t>(order).subspan(pos, len), cfg.learning_rate);
    pos += len;
  }
  return model;
}

double sequential_transfer(const ProbeModel& intermediate, const ToyTask& target, const ToyTrainConfig& cfg,
                           std::uint64_t seed) {
  const ProbeModel* init = reusable(intermediate, target) ? &intermediate : nullptr;
  double sum = 0.0;
  for (std::size_t r = 0; r < cfg.restarts; ++r) {
    const ProbeFit fit = train_probe(target.train, target.validation, cfg, substream_seed(seed, r), init);
    sum += accuracy(fit.model, target.test);
  }
  return 100.0 * sum / static_cast<double>(cfg.restarts);
}

double no_transfer_score(const ToyTask& target, const ToyTrainConfig& cfg, std::uint64_t seed) {
  double sum = 0.0;
  for (std::size_t r = 0; r < cfg.restarts; ++r) {
    const ProbeFit fit = train_probe(target.train, target.validation, cfg, substream_seed(seed, r));
    sum += accuracy(fit.model, target.test);
  }
  return 100.0 * sum / static_cast<double>(cfg.restarts);
}

ToyLab::ToyLab(ToyUniverse universe, ToyTrainConfig cfg) : universe_(std::move(universe)), cfg_(cfg) {
  cfg_.validate();
  for (const auto* pool : {&universe_.intermediates, &universe_.targets}) {
    for (const auto& t : *pool) {
      probes_.emplace(t.meta.id, train_probe(t.train, t.validation, cfg_, seed_for(cfg_.seed, "probe:" + t.meta.id)).model);
    }
  }
}

const ProbeModel& ToyLab::probe(std::string_view id) const {
  auto it = probes_.find(std::string(id));
  if (it == probes_.end()) throw LookupError(std::string(id), "no probe for '" + std::string(id) + "'");
  return it->second;
}

const TransferTable& ToyLab::table() {
  if (table_) return *table_;
  const auto s_ids = universe_.intermediate_ids();
  const auto t_ids = universe_.target_ids();
  std::vector<double> baseline, scores(s_ids.size() * t_ids.size());
  for (std::size_t t = 0; t < t_ids.size(); ++t) {
    const ToyTask& target = universe_.targets[t];
    // Transfer runs and the baseline share one seed per target, so they differ
    // only in their initial parameters.
    const std::uint64_t seed = seed_for(cfg_.seed, "transfer:" + t_ids[t]);
    baseline.push_back(no_transfer_score(target, cfg_, seed));
    for (std::size_t s = 0; s < s_ids.size(); ++s) {
      scores[s * t_ids.size() + t] = sequential_transfer(probe(s_ids[s]), target, cfg_, seed);
    }
  }
  table_.emplace("toy-probe", s_ids, t_ids, std::move(baseline), std::move(scores));
  return *table_;
}

EmbeddingSet ToyLab::text_embeddings() const {
  std::map<TaskId, std::vector<double>> vectors;
  for (const auto* pool : {&universe_.intermediates, &universe_.targets}) {
    for (const auto& t : *pool) {
      std::vector<double> mean(t.train.dim, 0.0);
      for (const auto& e : t.train.examples) {
        for (std::size_t j = 0; j < mean.size(); ++j) mean[j] += e.vector[j];
      }
      for (double& x : mean) x /= static_cast<double>(t.train.examples.size());
      vectors.emplace(t.meta.id, std::move(mean));
    }
  }
  return EmbeddingSet(EmbeddingKind::text_mean, universe_.config.dim, std::move(vectors));
}

EmbeddingSet ToyLab::task_embeddings() const {
  std::map<TaskId, std::vector<double>> vectors;
  std::size_t dim = 0;
  for (const auto* pool : {&universe_.intermediates, &universe_.targets}) {
    for (const auto& t : *pool) {
      auto v = fim_diagonal(probe(t.meta.id), t.train);
      dim = v.size();
      vectors.emplace(t.meta.id, std::move(v));
    }
  }
  return EmbeddingSet(EmbeddingKind::task_fim, dim, std::move(vectors));
}

namespace {

ProbeModel transfer_init(const ProbeModel& intermediate, const ToyTask& target, std::uint64_t seed) {
  if (reusable(intermediate, target)) return intermediate;
  return random_probe(target.train.num_classes, target.train.dim, seed_for(seed, "init"));
}

}  // namespace

std::map<TaskId, double> ToyLab::fsft_scores(const TaskId& target, std::size_t steps) const {
  const ToyTask& t = universe_.task(target);
  const std::uint64_t seed = seed_for(cfg_.seed, "few-shot:" + target);
  std::map<TaskId, double> scores;
  for (const auto& s : universe_.intermediates) {
    const ProbeModel tuned = fine_tune_steps(transfer_init(probe(s.meta.id), t, seed), t.train, cfg_, steps, seed);
    scores[s.meta.id] = 100.0 * accuracy(tuned, t.validation);
  }
  return scores;
}

std::map<TaskId, EmbeddingPair> ToyLab::fs_taskemb_pairs(const TaskId& target, std::size_t steps) const {
  const ToyTask& t = universe_.task(target);
  const std::uint64_t seed = seed_for(cfg_.seed, "few-shot:" + target);
  std::map<TaskId, EmbeddingPair> pairs;
  for (const auto& s : universe_.intermediates) {
    const ProbeModel before = transfer_init(probe(s.meta.id), t, seed);
    const ProbeModel after = fine_tune_steps(before, t.train, cfg_, steps, seed);
    pairs.emplace(s.meta.id, EmbeddingPair{fim_diagonal(before, t.train), fim_diagonal(after, t.train)});
  }
  return pairs;
}

std::map<TaskId, EmbeddedDataset> ToyLab::embedded_target(const TaskId& target) const {
  const ToyTask& t = universe_.task(target);
  std::map<TaskId, EmbeddedDataset> out;
  for (const auto& s : universe_.intermediates) {
    const ProbeModel& m = probe(s.meta.id);
    EmbeddedDataset d;
    d.label_kind = LabelKind::class_index;
    d.dim = m.classes;
    d.num_classes = t.train.num_classes;
    d.source_model = s.meta.id;
    d.target = target;
    for (const auto& e : t.train.examples) {
      EmbeddedExample x;
      x.vector = m.logits(e.vector);
      x.label = e.label;
      d.examples.push_back(std::move(x));
    }
    out.emplace(s.meta.id, std::move(d));
  }
  return out;
}

namespace {

std::vector<std::string> split_components(const std::string& text) {
  std::vector<std::string> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

std::size_t steps_param(const MethodSpec& m, std::size_t fallback) {
  const std::string s = m.param("steps");
  return s.empty() ? fallback : static_cast<std::size_t>(std::stoull(s));
}

}  // namespace

Ranking ToyLab::rank(const MethodSpec& method, const TaskId& target) {
  method.validate();
  const auto ids = universe_.intermediate_ids();
  Ranking r;
  switch (method.kind) {
    case MethodKind::random:
      r = rank_random(ids, target, std::stoull(method.param("seed")));
      break;
    case MethodKind::size:
      r = rank_by_size(universe_.manifest(), ids, target);
      break;
    case MethodKind::embedding_cosine: {
      const EmbeddingKind kind = parse_embedding_kind(method.param("embedding"));
      if (kind == EmbeddingKind::text_mean) {
        r = rank_by_cosine(text_embeddings(), ids, target);
      } else if (kind == EmbeddingKind::task_fim) {
        r = taskemb_rank(task_embeddings(), ids, target);
      } else {
        throw UnsupportedConfigError("the toy lab has no sentence embeddings");
      }
      break;
    }
    case MethodKind::score_table: {
      const std::string source = method.param("source");
      const std::size_t steps = steps_param(method, cfg_.few_shot_steps);
      if (source == "fsft") {
        r = rank_by_scores(fsft_scores(target, steps), target, ids);
      } else if (source == "fs-taskemb") {
        r = fs_taskemb_rank(fs_taskemb_pairs(target, steps), target);
      } else if (source == "knn" || source == "linear") {
        CvConfig cv;
        cv.seed = seed_for(cfg_.seed, "cv:" + target);
        r = proxy_rank(embedded_target(target), cv, source == "knn" ? ProxyKind::knn : ProxyKind::linear, target,
                       universe_.task(target).meta.task_type);
      } else if (source == "oracle") {
        const TransferTable& tab = table();
        const auto column = tab.column(tab.target_index(target));
        std::map<TaskId, double> scores;
        for (std::size_t s = 0; s < ids.size(); ++s) scores[tab.intermediates()[s]] = column[s];
        r = rank_by_scores(scores, target, ids);
      } else {
        throw UnsupportedConfigError("unknown toy-lab score source '" + source + "'");
      }
      break;
    }
    case MethodKind::fused: {
      const auto lab_methods = default_lab_methods(0);
      std::vector<Ranking> parts;
      for (const auto& name : split_components(method.param("components"))) {
        auto it = std::find_if(lab_methods.begin(), lab_methods.end(), [&](const MethodSpec& m) { return m.name == name; });
        if (it == lab_methods.end()) throw UnsupportedConfigError("unknown fusion component '" + name + "'");
        MethodSpec part = *it;
        if (part.kind == MethodKind::random && !method.param("seed").empty()) part.params["seed"] = method.param("seed");
        if (!method.param("steps").empty()) part.params["steps"] = method.param("steps");
        parts.push_back(rank(part, target));
      }
      const std::string c = method.param("constant");
      r = rrf_fuse(parts, c.empty() ? kDefaultFusionConstant : std::stod(c));
      break;
    }
  }
  r.method = method.name;
  if (method.prefer_same_type()) r = type_prerank(r, universe_.manifest(), universe_.task(target).meta.task_type);
  return r;
}

AggregatedReport ToyLab::run_benchmark(std::span<const MethodSpec> methods) {
  const TransferTable& tab = table();
  std::map<MethodTarget, MetricRow> rows;
  for (const auto& m : methods) {
    for (const auto& t : universe_.target_ids()) {
      const Ranking r = rank(m, t);
      rows[{r.method, t}] = evaluate_ranking(r, tab);
    }
  }
  return aggregate(rows, universe_.manifest(), universe_.target_ids());
}

TransferTable build_transfer_table(const ToyUniverse& universe, const ToyTrainConfig& cfg) {
  ToyLab lab(universe, cfg);
  return lab.table();
}

AggregatedReport run_benchmark(const ToyUniverse& universe, std::span<const MethodSpec> methods,
                               const ToyTrainConfig& cfg) {
  ToyLab lab(universe, cfg);
  return lab.run_benchmark(methods);
}

std::vector<MethodSpec> default_lab_methods(std::uint64_t seed) {
  return {
      {"random", MethodKind::random, {{"seed", std::to_string(seed)}}},
      {"size", MethodKind::size, {}},
      {"textemb", MethodKind::embedding_cosine, {{"embedding", "text_mean"}}},
      {"taskemb", MethodKind::embedding_cosine, {{"embedding", "task_fim"}}},
      {"fsft", MethodKind::score_table, {{"source", "fsft"}}},
      {"fs-taskemb", MethodKind::score_table, {{"source", "fs-taskemb"}}},
      {"knn", MethodKind::score_table, {{"source", "knn"}}},
      {"linear", MethodKind::score_table, {{"source", "linear"}}},
      {"oracle", MethodKind::score_table, {{"source", "oracle"}}},
  };
}

std::vector<SweepPoint> sweep_target_cap(const ToyUniverseConfig& ucfg, std::span<const std::size_t> caps,
                                         std::span<const MethodSpec> methods, const ToyTrainConfig& cfg) {
  std::vector<SweepPoint> out;
  for (std::size_t cap : caps) {
    ToyUniverseConfig c = ucfg;
    c.target_train_cap = cap;
    ToyLab lab(gen_universe(c), cfg);
    out.push_back({"target_train_cap", cap, lab.run_benchmark(methods)});
  }
  return out;
}

std::vector<SweepPoint> sweep_few_shot_steps(const ToyUniverseConfig& ucfg, std::span<const std::size_t> steps,
                                             std::span<const MethodSpec> methods, const ToyTrainConfig& cfg) {
  ToyLab lab(gen_universe(ucfg), cfg);
  std::vector<SweepPoint> out;
  for (std::size_t n : steps) {
    std::vector<MethodSpec> ms(methods.begin(), methods.end());
    for (auto& m : ms) m.params["steps"] = std::to_string(n);
    out.push_back({"few_shot_steps", n, lab.run_benchmark(ms)});
  }
  return out;
}

}  // namespace tsel
