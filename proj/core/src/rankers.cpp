#include "tsel/rankers.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>
#include <string_view>
#include <unordered_set>

#include "tsel/error.hpp"
#include "tsel/random.hpp"

namespace tsel {

Ranking make_ranking(TaskId target, std::string method, std::vector<RankEntry> entries) {
  std::unordered_set<std::string> seen;
  for (const auto& e : entries) {
    if (std::isnan(e.score)) throw DomainError("score for '" + e.id + "' is NaN");
    if (!seen.insert(e.id).second) throw StructuralError("duplicate id '" + e.id + "' in ranking input");
  }
  std::sort(entries.begin(), entries.end(), [](const RankEntry& a, const RankEntry& b) {
    if (a.score != b.score) return a.score > b.score;
    return a.id < b.id;
  });
  return Ranking{std::move(target), std::move(method), std::move(entries)};
}

Ranking rank_by_size(const Manifest& metas, std::span<const TaskId> intermediates, const TaskId& target) {
  std::vector<RankEntry> entries;
  entries.reserve(intermediates.size());
  for (const auto& id : intermediates) {
    entries.push_back({id, static_cast<double>(metas.at(id).train_size)});
  }
  return make_ranking(target, "size", std::move(entries));
}

Ranking rank_random(std::span<const TaskId> intermediates, const TaskId& target, std::uint64_t seed) {
  std::vector<TaskId> ids(intermediates.begin(), intermediates.end());
  std::sort(ids.begin(), ids.end());
  if (std::adjacent_find(ids.begin(), ids.end()) != ids.end()) {
    throw StructuralError("duplicate id in random ranking input");
  }
  Rng rng(substream_seed(seed, fnv1a(target)));
  rng.shuffle(ids);
  Ranking r{target, "random", {}};
  const double n = static_cast<double>(ids.size());
  for (std::size_t i = 0; i < ids.size(); ++i) r.entries.push_back({ids[i], n - static_cast<double>(i)});
  return r;
}

double cosine_similarity(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw StructuralError("cosine: vectors differ in dimension");
  double ab = 0.0, aa = 0.0, bb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    ab += a[i] * b[i];
    aa += a[i] * a[i];
    bb += b[i] * b[i];
  }
  if (aa == 0.0 || bb == 0.0) throw DomainError("cosine: zero-norm vector");
  return std::clamp(ab / (std::sqrt(aa) * std::sqrt(bb)), -1.0, 1.0);
}

namespace {

const std::vector<double>& nonzero_vector(const EmbeddingSet& embeddings, const TaskId& id) {
  if (!embeddings.contains(id)) throw DomainError("no embedding for task '" + id + "'");
  const auto& v = embeddings.at(id);
  if (std::all_of(v.begin(), v.end(), [](double x) { return x == 0.0; })) {
    throw DomainError("embedding for task '" + id + "' has zero norm");
  }
  return v;
}

std::string cosine_method_name(EmbeddingKind kind) {
  switch (kind) {
    case EmbeddingKind::text_mean: return "textemb";
    case EmbeddingKind::sentence: return "semb";
    case EmbeddingKind::task_fim: return "taskemb";
  }
  return "cosine";
}

}  // namespace

Ranking rank_by_cosine(const EmbeddingSet& embeddings, std::span<const TaskId> intermediates, const TaskId& target) {
  const auto& tv = nonzero_vector(embeddings, target);
  std::vector<RankEntry> entries;
  entries.reserve(intermediates.size());
  for (const auto& id : intermediates) {
    entries.push_back({id, cosine_similarity(nonzero_vector(embeddings, id), tv)});
  }
  return make_ranking(target, cosine_method_name(embeddings.kind()), std::move(entries));
}

Ranking rank_by_scores(const std::map<TaskId, double>& scores, const TaskId& target,
                       std::span<const TaskId> intermediates, std::string method) {
  std::vector<RankEntry> entries;
  if (intermediates.empty()) {
    for (const auto& [id, v] : scores) entries.push_back({id, v});
  } else {
    for (const auto& id : intermediates) {
      auto it = scores.find(id);
      if (it == scores.end()) throw LookupError(id, "no score for intermediate '" + id + "'");
      entries.push_back({id, it->second});
    }
  }
  for (const auto& e : entries) {
    if (!std::isfinite(e.score)) throw DomainError("score for '" + e.id + "' is not finite");
  }
  return make_ranking(target, std::move(method), std::move(entries));
}

Ranking type_prerank(const Ranking& ranking, const Manifest& metas, TaskType target_type) {
  Ranking out{ranking.target, ranking.method, {}};
  if (!out.method.ends_with("-T")) out.method += "-T";
  out.entries.reserve(ranking.entries.size());
  std::vector<RankEntry> rest;
  for (const auto& e : ranking.entries) {
    if (metas.at(e.id).task_type == target_type) {
      out.entries.push_back(e);
    } else {
      rest.push_back(e);
    }
  }
  out.entries.insert(out.entries.end(), rest.begin(), rest.end());
  return out;
}

Ranking rrf_fuse(std::span<const Ranking> rankings, double c) {
  if (rankings.size() < 2) throw StructuralError("rrf_fuse needs at least two rankings");
  if (!(c > 0.0) || !std::isfinite(c)) throw DomainError("rrf_fuse: fusion constant must be positive");
  const auto& first = rankings.front();
  const std::set<TaskId> ids = [&] {
    auto v = first.ids();
    return std::set<TaskId>(v.begin(), v.end());
  }();
  if (ids.size() != first.entries.size()) throw StructuralError("rrf_fuse: duplicate id in input ranking");
  std::map<TaskId, double> fused;
  std::string method;
  for (const auto& r : rankings) {
    if (r.target != first.target) throw StructuralError("rrf_fuse: rankings are for different targets");
    auto v = r.ids();
    if (std::set<TaskId>(v.begin(), v.end()) != ids || v.size() != ids.size()) {
      throw StructuralError("rrf_fuse: rankings cover different id sets");
    }
    for (std::size_t i = 0; i < r.entries.size(); ++i) {
      fused[r.entries[i].id] += 1.0 / (c + static_cast<double>(i + 1));
    }
  }
  // The name is built from sorted component names so input order does not matter.
  std::vector<std::string> names;
  for (const auto& r : rankings) names.push_back(r.method);
  std::sort(names.begin(), names.end());
  for (const auto& n : names) method += (method.empty() ? "" : "+") + n;
  std::vector<RankEntry> entries;
  for (const auto& [id, score] : fused) entries.push_back({id, score});
  return make_ranking(first.target, method, std::move(entries));
}

std::string_view to_string(MethodKind kind) {
  switch (kind) {
    case MethodKind::random: return "random";
    case MethodKind::size: return "size";
    case MethodKind::embedding_cosine: return "embedding_cosine";
    case MethodKind::score_table: return "score_table";
    case MethodKind::fused: return "fused";
  }
  return "unknown";
}

bool MethodSpec::prefer_same_type() const {
  const auto v = param("prefer_same_type");
  return v == "true" || v == "1";
}

std::string MethodSpec::param(const std::string& key, const std::string& fallback) const {
  auto it = params.find(key);
  return it == params.end() ? fallback : it->second;
}

void MethodSpec::validate() const {
  auto require = [&](const std::string& key) {
    if (params.count(key) == 0) {
      throw UnsupportedConfigError("method '" + name + "' (" + std::string(to_string(kind)) + ") requires parameter '" +
                                   key + "'");
    }
  };
  switch (kind) {
    case MethodKind::random: {
      require("seed");
      const auto& s = params.at("seed");
      if (s.empty() || s.find_first_not_of("0123456789") != std::string::npos) {
        throw UnsupportedConfigError("method '" + name + "': seed must be a non-negative integer");
      }
      break;
    }
    case MethodKind::size: break;
    case MethodKind::embedding_cosine:
      require("embedding");
      try {
        parse_embedding_kind(params.at("embedding"));
      } catch (const ParseError& e) {
        throw UnsupportedConfigError("method '" + name + "': " + e.what());
      }
      break;
    case MethodKind::score_table: require("source"); break;
    case MethodKind::fused: {
      require("components");
      const auto& comps = params.at("components");
      if (std::count(comps.begin(), comps.end(), ',') < 1) {
        throw UnsupportedConfigError("method '" + name + "': fusion needs at least two components");
      }
      if (params.count("constant")) {
        double c = 0.0;
        try {
          c = std::stod(params.at("constant"));
        } catch (const std::exception&) {
          c = -1.0;
        }
        if (!(c > 0.0)) throw UnsupportedConfigError("method '" + name + "': fusion constant must be positive");
      }
      break;
    }
  }
}

}  // namespace tsel
