#include "cli.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <optional>
#include <ostream>
#include <set>

#include "tsel/cost_model.hpp"
#include "tsel/error.hpp"
#include "tsel/fixtures.hpp"
#include "tsel/io.hpp"
#include "tsel/metrics.hpp"
#include "tsel/proxy.hpp"
#include "tsel/rankers.hpp"
#include "tsel/taskemb.hpp"
#include "tsel/toylab.hpp"
#include "tsel/transfer_stats.hpp"

namespace tsel::cli {

namespace {

namespace fs = std::filesystem;

// A required flag is missing or a flag value is malformed.
class UsageError : public Error {
 public:
  using Error::Error;
};

struct Options {
  std::string method;
  std::string manifest;
  std::string table;
  std::string embeddings;
  std::string datasets;
  std::string scores;
  std::vector<std::string> targets;
  std::vector<std::string> rankings;
  bool prefer_same_type = false;
  double fuse_constant = kDefaultFusionConstant;
  std::uint64_t seed = 0;
  std::uint64_t samples = 10000;
  std::string out;
  std::string format = "tsv";
};

struct Inputs {
  std::optional<TransferTable> table;
  std::optional<Manifest> manifest;
  std::optional<EmbeddingSet> embeddings;
  std::optional<ScoreFile> scores;
  std::map<TaskId, std::map<TaskId, EmbeddedDataset>> datasets;  // target -> source model -> data
};

void emit(const Options& o, std::ostream& out, const std::string& text) {
  if (o.out.empty()) {
    out << text;
  } else {
    write_file(o.out, text);
  }
}

std::map<TaskId, std::map<TaskId, EmbeddedDataset>> load_datasets(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw IoError("dataset directory '" + dir.string() + "' does not exist");
  std::vector<fs::path> files;
  for (const auto& e : fs::directory_iterator(dir)) {
    if (e.is_regular_file() && e.path().extension() == ".jsonl") files.push_back(e.path());
  }
  std::sort(files.begin(), files.end());
  std::map<TaskId, std::map<TaskId, EmbeddedDataset>> out;
  for (const auto& f : files) {
    EmbeddedDataset d;
    try {
      d = parse_embedded_dataset(read_file(f));
    } catch (const ParseError& e) {
      throw ParseError(f.string() + ": " + e.what());
    }
    if (d.target.empty() || d.source_model.empty()) {
      throw ParseError(f.string() + ": header must name source_model and target");
    }
    if (!out[d.target].emplace(d.source_model, d).second) {
      throw ParseError(f.string() + ": second dataset for (" + d.source_model + ", " + d.target + ")");
    }
  }
  if (out.empty()) throw IoError("no .jsonl datasets in '" + dir.string() + "'");
  return out;
}

template <typename Fn>
auto with_file(const std::string& path, Fn&& parse) {
  const std::string text = read_file(path);
  try {
    return parse(text);
  } catch (const ParseError& e) {
    throw ParseError(path + ": " + e.what());
  } catch (const InvariantError& e) {
    throw InvariantError(path + ": " + e.what());
  }
}

Inputs load_inputs(const Options& o) {
  Inputs in;
  if (!o.table.empty()) in.table = with_file(o.table, parse_transfer_table);
  if (!o.manifest.empty()) in.manifest = with_file(o.manifest, parse_manifest);
  if (!o.embeddings.empty()) in.embeddings = with_file(o.embeddings, parse_embeddings);
  if (!o.scores.empty()) in.scores = with_file(o.scores, parse_scores);
  if (!o.datasets.empty()) in.datasets = load_datasets(o.datasets);
  return in;
}

std::vector<TaskId> resolve_targets(const Options& o, const Inputs& in) {
  if (!o.targets.empty()) return o.targets;
  if (in.table) return in.table->targets();
  if (in.manifest) {
    auto ids = in.manifest->ids_with_role(TaskRole::target);
    if (!ids.empty()) return ids;
  }
  std::vector<TaskId> ids;
  if (in.scores) {
    for (const auto& [t, _] : *in.scores) ids.push_back(t);
  } else {
    for (const auto& [t, _] : in.datasets) ids.push_back(t);
  }
  if (ids.empty()) throw UsageError("no targets: pass --targets or an input that lists them");
  return ids;
}

std::vector<TaskId> resolve_pool(const Inputs& in, const TaskId& target, const std::vector<TaskId>& all_targets) {
  if (in.table) return in.table->intermediates();
  if (in.manifest) {
    auto ids = in.manifest->ids_with_role(TaskRole::intermediate);
    if (!ids.empty()) return ids;
  }
  std::vector<TaskId> ids;
  if (in.scores && in.scores->count(target)) {
    for (const auto& [s, _] : in.scores->at(target)) ids.push_back(s);
  } else if (in.datasets.count(target)) {
    for (const auto& [s, _] : in.datasets.at(target)) ids.push_back(s);
  } else if (in.embeddings) {
    const std::set<TaskId> excluded(all_targets.begin(), all_targets.end());
    for (const auto& [id, _] : in.embeddings->vectors()) {
      if (!excluded.count(id)) ids.push_back(id);
    }
  }
  if (ids.empty()) throw UsageError("cannot determine the intermediate pool for '" + target + "'");
  return ids;
}

const Manifest& need_manifest(const Inputs& in, const std::string& why) {
  if (!in.manifest) throw UsageError(why + " needs --manifest");
  return *in.manifest;
}

TaskType target_type(const Inputs& in, const TaskId& target) {
  return need_manifest(in, "task types").at(target).task_type;
}

Ranking build_ranking(const std::string& method, const Options& o, const Inputs& in, const TaskId& target,
                      const std::vector<TaskId>& pool) {
  if (method == "size") return rank_by_size(need_manifest(in, "method 'size'"), pool, target);
  if (method == "random") return rank_random(pool, target, o.seed);
  if (method == "textemb" || method == "semb" || method == "taskemb" || method == "cosine") {
    if (!in.embeddings) throw UsageError("method '" + method + "' needs --embeddings");
    const EmbeddingKind kind = in.embeddings->kind();
    const bool ok = method == "cosine" || (method == "textemb" && kind == EmbeddingKind::text_mean) ||
                    (method == "semb" && kind == EmbeddingKind::sentence) ||
                    (method == "taskemb" && kind == EmbeddingKind::task_fim);
    if (!ok) {
      throw UnsupportedConfigError("method '" + method + "' cannot use a '" + std::string(to_string(kind)) +
                                   "' embedding file");
    }
    return rank_by_cosine(*in.embeddings, pool, target);
  }
  if (method == "fsft" || method == "fs-taskemb" || method == "scores") {
    if (!in.scores) throw UsageError("method '" + method + "' needs --scores");
    auto it = in.scores->find(target);
    if (it == in.scores->end()) throw LookupError(target, "score file has no rows for target '" + target + "'");
    return rank_by_scores(it->second, target, pool, method);
  }
  if (method == "knn" || method == "linear") {
    if (o.datasets.empty()) throw UsageError("method '" + method + "' needs --datasets");
    auto it = in.datasets.find(target);
    if (it == in.datasets.end()) throw LookupError(target, "no embedded datasets for target '" + target + "'");
    std::map<TaskId, EmbeddedDataset> views;
    for (const auto& id : pool) {
      auto d = it->second.find(id);
      if (d == it->second.end()) {
        throw LookupError(id, "no embedded dataset of target '" + target + "' for intermediate '" + id + "'");
      }
      views.emplace(id, d->second);
    }
    CvConfig cv;
    cv.seed = o.seed;
    const TaskType type = in.manifest ? target_type(in, target) : TaskType::classification;
    return proxy_rank(views, cv, method == "knn" ? ProxyKind::knn : ProxyKind::linear, target, type);
  }
  if (method == "oracle") {
    if (!in.table) throw UsageError("method 'oracle' needs --table");
    const auto col = in.table->column(in.table->target_index(target));
    std::map<TaskId, double> scores;
    for (std::size_t s = 0; s < col.size(); ++s) scores[in.table->intermediates()[s]] = col[s];
    return rank_by_scores(scores, target, pool, "oracle");
  }
  throw UsageError("unknown method '" + method + "'");
}

Ranking maybe_prerank(Ranking r, const Options& o, const Inputs& in) {
  if (!o.prefer_same_type) return r;
  return type_prerank(r, need_manifest(in, "--prefer-same-type"), target_type(in, r.target));
}

std::vector<std::string> split_list(const std::string& text) {
  std::vector<std::string> out;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const std::size_t comma = std::min(text.find(',', pos), text.size());
    if (comma > pos) out.push_back(text.substr(pos, comma - pos));
    pos = comma + 1;
  }
  return out;
}

// ---------------------------------------------------------------------------

int cmd_rank(const Options& o, std::ostream& out) {
  if (o.method.empty()) throw UsageError("rank needs --method");
  const Inputs in = load_inputs(o);
  const auto targets = resolve_targets(o, in);
  std::vector<Ranking> rankings;
  for (const auto& t : targets) {
    rankings.push_back(maybe_prerank(build_ranking(o.method, o, in, t, resolve_pool(in, t, targets)), o, in));
  }
  emit(o, out, serialize_rankings(rankings));
  return kOk;
}

int cmd_evaluate(const Options& o, std::ostream& out) {
  Inputs in = load_inputs(o);
  if (!in.table || !in.manifest) {
    const FixtureBundle fx = load_fixtures();
    if (!in.table) in.table = fx.roberta;
    if (!in.manifest) in.manifest = fx.manifest;
  }
  if (o.rankings.empty() && o.method.empty()) throw UsageError("evaluate needs ranking files or --method");
  const TransferTable& table = *in.table;
  const auto targets = o.targets.empty() ? table.targets() : o.targets;

  std::map<MethodTarget, MetricRow> rows;
  for (const auto& path : o.rankings) {
    for (const Ranking& r : with_file(path, parse_rankings)) {
      const Ranking ranked = maybe_prerank(r, o, in);
      rows[{ranked.method, ranked.target}] = evaluate_ranking(ranked, table);
    }
  }
  for (const auto& method : split_list(o.method)) {
    for (const auto& t : targets) {
      const auto& pool = table.intermediates();
      if (method == "random") {
        if (o.prefer_same_type) {
          const Manifest& m = *in.manifest;
          const TaskType type = target_type(in, t);
          rows[{"random-T", t}] = monte_carlo_row(table, o.samples, o.seed, [&](std::uint64_t s) {
            return type_prerank(rank_random(pool, t, s), m, type);
          });
        } else {
          rows[{"random", t}] = random_baseline_row(table, t, o.samples, o.seed);
        }
        continue;
      }
      const Ranking r = maybe_prerank(build_ranking(method, o, in, t, pool), o, in);
      rows[{r.method, t}] = evaluate_ranking(r, table);
    }
  }
  const AggregatedReport report = aggregate(rows, *in.manifest, targets);
  emit(o, out, serialize_report(report, parse_report_format(o.format)));
  return kOk;
}

int cmd_fuse(const Options& o, std::ostream& out) {
  if (o.rankings.size() < 1) throw UsageError("fuse needs ranking files");
  std::map<TaskId, std::vector<Ranking>> by_target;
  std::vector<TaskId> order;
  for (const auto& path : o.rankings) {
    for (Ranking& r : with_file(path, parse_rankings)) {
      if (!by_target.count(r.target)) order.push_back(r.target);
      by_target[r.target].push_back(std::move(r));
    }
  }
  std::vector<Ranking> fused;
  for (const auto& t : order) fused.push_back(rrf_fuse(by_target[t], o.fuse_constant));
  emit(o, out, serialize_rankings(fused));
  return kOk;
}

std::string sci(double v, int digits = 2) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*e", digits, v);
  return buf;
}

struct CostOptions {
  double f_macs = 1.10e13;
  double per_example_macs = 0.0;
  double examples = 0.0;
  double n = 42;
  double b_ratio = 1.0;
  double taskemb_epochs = 15;
};

std::string cost_table(const CostOptions& c) {
  const double f = c.per_example_macs > 0 ? calibrate_f(c.per_example_macs, c.examples) : c.f_macs;
  std::string text = "method\tformula\tn\te\tmacs\n";
  for (const auto& row : cost_report(f, c.n, c.b_ratio, c.taskemb_epochs)) {
    text += std::string(to_string(row.method)) + "\t" + row.formula + "\t" + format_double(row.params.n) + "\t" +
            format_double(row.params.e) + "\t" + sci(row.macs) + "\n";
  }
  return text;
}

int cmd_cost(const Options& o, const CostOptions& c, std::ostream& out) {
  emit(o, out, cost_table(c));
  return kOk;
}

struct ToyOptions {
  ToyUniverseConfig universe;
  ToyTrainConfig train;
  std::string methods;
  std::string sweep;  // "", "cap" or "steps"
  std::vector<std::size_t> values;
  std::string emit_dir;
};

int cmd_toylab(const Options& o, ToyOptions t, std::ostream& out) {
  t.universe.seed = o.seed;
  t.train.seed = o.seed;
  std::vector<MethodSpec> methods;
  const auto all = default_lab_methods(o.seed);
  if (t.methods.empty()) {
    methods = all;
  } else {
    for (const auto& name : split_list(t.methods)) {
      auto it = std::find_if(all.begin(), all.end(), [&](const MethodSpec& m) { return m.name == name; });
      if (it == all.end()) throw UsageError("unknown toy-lab method '" + name + "'");
      methods.push_back(*it);
    }
  }
  if (o.prefer_same_type) {
    for (auto& m : methods) m.params["prefer_same_type"] = "true";
  }
  const ReportFormat format = parse_report_format(o.format);

  if (t.sweep.empty()) {
    ToyLab lab(gen_universe(t.universe), t.train);
    if (!t.emit_dir.empty()) {
      fs::create_directories(t.emit_dir);
      const fs::path d(t.emit_dir);
      write_file(d / "table.tsv", serialize_transfer_table(lab.table()));
      write_file(d / "manifest.tsv", serialize_manifest(lab.universe().manifest()));
      write_file(d / "textemb.jsonl", serialize_embeddings(lab.text_embeddings()));
      write_file(d / "taskemb.jsonl", serialize_embeddings(lab.task_embeddings()));
    }
    emit(o, out, serialize_report(lab.run_benchmark(methods), format));
    return kOk;
  }
  if (t.values.empty()) throw UsageError("--sweep needs --values");
  std::vector<SweepPoint> points;
  if (t.sweep == "cap") {
    points = sweep_target_cap(t.universe, t.values, methods, t.train);
  } else if (t.sweep == "steps") {
    points = sweep_few_shot_steps(t.universe, t.values, methods, t.train);
  } else {
    throw UsageError("--sweep must be 'cap' or 'steps'");
  }
  std::string text;
  for (const auto& p : points) {
    if (format == ReportFormat::tsv) {
      text += "# " + p.parameter + "=" + std::to_string(p.value) + "\n";
    } else {
      text += "{\"sweep\":\"" + p.parameter + "\",\"value\":" + std::to_string(p.value) + "}\n";
    }
    text += serialize_report(p.report, format);
  }
  emit(o, out, text);
  return kOk;
}

// Headline statistics of the bundled tables, each checked against the
// reference value.
int cmd_reproduce(const Options& o, std::ostream& out) {
  const FixtureBundle fx = load_fixtures();
  const GainStats g = gain_statistics(fx.roberta, fx.manifest);
  const CrossModelCorrelation c = cross_model_spearman(fx.roberta, fx.bert);
  const auto cost = cost_report(1.10e13, 42, 1.0, 15);

  std::string text;
  char buf[256];
  std::snprintf(buf, sizeof buf, "positive=%d negative=%d tie=%d\n", g.positive_count, g.negative_count, g.tie_count);
  text += buf;
  std::snprintf(buf, sizeof buf, "mean_relative_gain=%.2f%%\n", g.mean_relative_gain);
  text += buf;
  text += "benefiting_targets=" + std::to_string(g.benefiting_targets.size()) + " (";
  for (std::size_t i = 0; i < g.benefiting_targets.size(); ++i) text += (i ? ", " : "") + g.benefiting_targets[i];
  text += ")\n";
  std::snprintf(buf, sizeof buf, "spearman_pooled=%.4f spearman_per_target=%.4f spearman_per_intermediate=%.4f\n",
                c.overall, c.per_target_mean, c.per_intermediate_mean);
  text += buf;
  for (const auto& row : cost) text += "cost " + std::string(to_string(row.method)) + "=" + sci(row.macs) + "\n";

  struct Check {
    std::string name;
    bool pass;
  };
  auto rel = [](double v, double ref) { return std::abs(v - ref) / ref; };
  const std::vector<Check> checks = {
      {"positive_count == 243", g.positive_count == 243},
      {"negative_count == 203", g.negative_count == 203},
      {"mean_relative_gain = 2.3 +- 0.2", std::abs(g.mean_relative_gain - 2.3) <= 0.2},
      {"benefiting_targets == 5", g.benefiting_targets.size() == 5},
      {"spearman_pooled = 0.94 +- 0.05", std::abs(c.overall - 0.94) <= 0.05},
      {"spearman_per_target = 0.68 +- 0.05", std::abs(c.per_target_mean - 0.68) <= 0.05},
      {"cost text_or_sent_emb == 1.10e13", cost[1].macs == 1.10e13},
      {"cost taskemb within 5% of 3.30e14", rel(cost[2].macs, 3.30e14) <= 0.05},
      {"cost knn_or_linear within 0.5% of 4.61e14", rel(cost[3].macs, 4.61e14) <= 0.005},
      {"cost fsft_or_fs_taskemb within 0.5% of 1.38e15", rel(cost[4].macs, 1.38e15) <= 0.005},
  };
  bool all = true;
  for (const auto& ch : checks) {
    text += std::string(ch.pass ? "ok   " : "FAIL ") + ch.name + "\n";
    all = all && ch.pass;
  }
  std::snprintf(buf, sizeof buf, "note: taskemb cost %s differs from 3.30e14 by %.2f%%\n", sci(cost[2].macs).c_str(),
                100.0 * rel(cost[2].macs, 3.30e14));
  text += buf;
  emit(o, out, text);
  return all ? kOk : kToleranceFailure;
}

void add_output(CLI::App* cmd, Options& o) {
  cmd->add_option("--out", o.out, "Output file (default stdout)");
  cmd->add_option("--format", o.format, "Report format: tsv | json-lines");
}

void add_common(CLI::App* cmd, Options& o) {
  add_output(cmd, o);
  cmd->add_option("--method", o.method, "Selection method");
  cmd->add_option("--manifest", o.manifest, "Task manifest (TSV)");
  cmd->add_option("--table", o.table, "Transfer table (TSV)");
  cmd->add_option("--embeddings", o.embeddings, "Embedding set (JSON lines)");
  cmd->add_option("--datasets", o.datasets, "Directory of embedded target datasets (JSON lines)");
  cmd->add_option("--scores", o.scores, "Score file (TSV)");
  cmd->add_option("--targets", o.targets, "Target ids")->delimiter(',');
  cmd->add_flag("--prefer-same-type", o.prefer_same_type, "Rank tasks of the target's type first");
  cmd->add_option("--seed", o.seed, "Random seed");
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Intermediate-task selection: rank, evaluate, fuse, cost, toylab, reproduce"};
  app.require_subcommand(1);
  Options o;
  CostOptions cost;
  ToyOptions toy;

  auto* rank = app.add_subcommand("rank", "Rank intermediates for each target");
  add_common(rank, o);

  auto* evaluate = app.add_subcommand("evaluate", "NDCG / Regret@k report for rankings");
  add_common(evaluate, o);
  evaluate->add_option("rankings", o.rankings, "Ranking files (TSV)");
  evaluate->add_option("--samples", o.samples, "Monte-Carlo samples for the random baseline");

  auto* fuse = app.add_subcommand("fuse", "Reciprocal rank fusion of ranking files");
  add_common(fuse, o);
  fuse->add_option("rankings", o.rankings, "Ranking files (TSV)")->required();
  fuse->add_option("--fuse-constant", o.fuse_constant, "Fusion constant c")->check(CLI::PositiveNumber);

  auto* costcmd = app.add_subcommand("cost", "Selection cost in MACs");
  add_output(costcmd, o);
  costcmd->add_option("--f-macs", cost.f_macs, "MACs of one forward pass over the target set");
  costcmd->add_option("--per-example-macs", cost.per_example_macs, "Derive f from per-example MACs");
  costcmd->add_option("--examples", cost.examples, "Target example count (with --per-example-macs)");
  costcmd->add_option("--n", cost.n, "Number of intermediate models");
  costcmd->add_option("--b-ratio", cost.b_ratio, "Backward / forward MAC ratio");
  costcmd->add_option("--taskemb-epochs", cost.taskemb_epochs, "Training epochs for TaskEmb");

  auto* toylab = app.add_subcommand("toylab", "Synthetic transfer universe benchmark");
  add_output(toylab, o);
  toylab->add_option("--seed", o.seed, "Universe and training seed");
  toylab->add_flag("--prefer-same-type", o.prefer_same_type, "Rank tasks of the target's type first");
  toylab->add_option("--n-intermediates", toy.universe.n_intermediates);
  toylab->add_option("--n-targets", toy.universe.n_targets);
  toylab->add_option("--dim", toy.universe.dim);
  toylab->add_option("--classes", toy.universe.classes);
  toylab->add_option("--separation", toy.universe.cluster_separation);
  toylab->add_option("--drift", toy.universe.domain_drift);
  toylab->add_option("--intermediate-examples", toy.universe.examples_per_intermediate);
  toylab->add_option("--cap", toy.universe.target_train_cap, "Target training examples");
  toylab->add_option("--restarts", toy.train.restarts);
  toylab->add_option("--steps", toy.train.few_shot_steps, "Few-shot fine-tuning steps");
  toylab->add_option("--learning-rate", toy.train.learning_rate);
  toylab->add_option("--methods", toy.methods, "Comma-separated subset of the lab methods");
  toylab->add_option("--sweep", toy.sweep, "Sweep parameter: cap | steps");
  toylab->add_option("--values", toy.values, "Sweep values")->delimiter(',');
  toylab->add_option("--emit", toy.emit_dir, "Write table, manifest and embeddings to this directory");

  auto* reproduce = app.add_subcommand("reproduce", "Headline statistics of the bundled tables");
  add_output(reproduce, o);

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kOk : kInputError;
  }

  try {
    if (*rank) return cmd_rank(o, out);
    if (*evaluate) return cmd_evaluate(o, out);
    if (*fuse) return cmd_fuse(o, out);
    if (*costcmd) return cmd_cost(o, cost, out);
    if (*toylab) return cmd_toylab(o, toy, out);
    if (*reproduce) return cmd_reproduce(o, out);
  } catch (const FixtureIntegrityError& e) {
    err << "fixture error: " << e.what() << "\n";
    return kFixtureError;
  } catch (const UsageError& e) {
    err << "error: " << e.what() << "\n";
    return kInputError;
  } catch (const ParseError& e) {
    err << "parse error: " << e.what() << "\n";
    return kInputError;
  } catch (const IoError& e) {
    err << "error: " << e.what() << "\n";
    return kInputError;
  } catch (const InvariantError& e) {
    err << "invalid input: " << e.what() << "\n";
    return kInputError;
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return kSemanticError;
  } catch (const std::exception& e) {
    err << "internal error: " << e.what() << "\n";
    return kInternal;
  }
  return kInputError;
}

}  // namespace tsel::cli
