#include "tsel/io.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <optional>
#include <set>
#include <sstream>

#include "json.hpp"

#include "tsel/error.hpp"

namespace tsel {

using nlohmann::json;

namespace {

struct Line {
  std::size_t number;
  std::string_view text;
};

// Non-empty lines with their 1-based numbers; trailing '\r' removed.
std::vector<Line> split_lines(std::string_view text) {
  std::vector<Line> out;
  std::size_t number = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const std::size_t end = std::min(text.find('\n', pos), text.size());
    std::string_view line = text.substr(pos, end - pos);
    ++number;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (!line.empty()) out.push_back({number, line});
    if (end == text.size()) break;
    pos = end + 1;
  }
  return out;
}

std::vector<std::string_view> split_tabs(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t pos = 0;
  while (true) {
    const std::size_t tab = line.find('\t', pos);
    if (tab == std::string_view::npos) {
      out.push_back(line.substr(pos));
      return out;
    }
    out.push_back(line.substr(pos, tab - pos));
    pos = tab + 1;
  }
}

std::uint64_t parse_count(std::string_view text, std::size_t line, std::size_t column) {
  std::uint64_t v = 0;
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc() || ptr != text.data() + text.size() || text.empty()) {
    throw ParseError("expected a non-negative integer, got '" + std::string(text) + "'", line, column);
  }
  return v;
}

template <typename Fn>
auto rethrow_at(std::size_t line, Fn&& fn) -> decltype(fn()) {
  try {
    return fn();
  } catch (const ParseError&) {
    throw;
  } catch (const Error& e) {
    throw ParseError(e.what(), line);
  }
}

}  // namespace

std::string format_double(double v) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  if (ec != std::errc()) throw DomainError("cannot format number");
  return std::string(buf, ptr);
}

double parse_double(std::string_view text, std::size_t line, std::size_t column) {
  double v = 0.0;
  const char* first = text.data();
  if (!text.empty() && text.front() == '+') ++first;
  const auto [ptr, ec] = std::from_chars(first, text.data() + text.size(), v);
  if (text.empty() || ec != std::errc() || ptr != text.data() + text.size()) {
    throw ParseError("expected a number, got '" + std::string(text) + "'", line, column);
  }
  if (!std::isfinite(v)) throw ParseError("non-finite number '" + std::string(text) + "'", line, column);
  return v;
}

// ---------------------------------------------------------------------------
// Transfer tables

TransferTable parse_transfer_table(std::string_view text) {
  std::string model_tag;
  std::vector<TaskId> targets;
  std::vector<TaskId> intermediates;
  std::vector<double> baseline;
  std::vector<double> scores;
  bool have_header = false;
  std::size_t header_line = 0;
  std::set<std::string> seen_rows;

  for (const Line& l : split_lines(text)) {
    if (l.text.front() == '#') {
      const auto cells = split_tabs(l.text.substr(1));
      std::string_view key = cells.front();
      while (!key.empty() && key.front() == ' ') key.remove_prefix(1);
      if (key == "model" && cells.size() >= 2) model_tag = std::string(cells[1]);
      continue;
    }
    const auto cells = split_tabs(l.text);
    if (!have_header) {
      if (cells.size() < 2) throw ParseError("header needs at least one target column", l.number);
      std::set<std::string> uniq;
      for (std::size_t c = 1; c < cells.size(); ++c) {
        if (cells[c].empty()) throw ParseError("empty target id", l.number, c + 1);
        if (!uniq.insert(std::string(cells[c])).second) {
          throw ParseError("duplicate target id '" + std::string(cells[c]) + "'", l.number, c + 1);
        }
        targets.emplace_back(cells[c]);
      }
      have_header = true;
      header_line = l.number;
      continue;
    }
    const std::string id(cells.front());
    if (id.empty()) throw ParseError("empty row id", l.number, 1);
    if (!seen_rows.insert(id).second) throw ParseError("duplicate row id '" + id + "'", l.number, 1);
    if (cells.size() != targets.size() + 1) {
      throw ParseError("row '" + id + "' has " + std::to_string(cells.size() - 1) + " cells, expected " +
                           std::to_string(targets.size()),
                       l.number, cells.size() < targets.size() + 1 ? cells.size() + 1 : targets.size() + 2);
    }
    std::vector<double> row;
    for (std::size_t c = 1; c < cells.size(); ++c) row.push_back(parse_double(cells[c], l.number, c + 1));
    if (id == kBaselineRow) {
      baseline = std::move(row);
    } else {
      intermediates.push_back(id);
      scores.insert(scores.end(), row.begin(), row.end());
    }
  }
  if (!have_header) throw ParseError("missing header row");
  if (baseline.empty()) throw ParseError("missing '" + std::string(kBaselineRow) + "' row", header_line);
  if (intermediates.empty()) throw ParseError("table has no intermediate rows", header_line);
  return rethrow_at(header_line, [&] {
    return TransferTable(model_tag, std::move(intermediates), std::move(targets), std::move(baseline),
                         std::move(scores));
  });
}

std::string serialize_transfer_table(const TransferTable& table) {
  std::string out;
  if (!table.model_tag().empty()) out += "# model\t" + table.model_tag() + "\n";
  out += "intermediate";
  for (const auto& t : table.targets()) out += "\t" + t;
  out += "\n";
  out += kBaselineRow;
  for (std::size_t t = 0; t < table.num_targets(); ++t) out += "\t" + format_double(table.baseline(t));
  out += "\n";
  for (std::size_t s = 0; s < table.num_intermediates(); ++s) {
    out += table.intermediates()[s];
    for (std::size_t t = 0; t < table.num_targets(); ++t) out += "\t" + format_double(table.score(s, t));
    out += "\n";
  }
  return out;
}

// ---------------------------------------------------------------------------
// Manifests

Manifest parse_manifest(std::string_view text) {
  const auto lines = split_lines(text);
  if (lines.empty()) throw ParseError("empty manifest");
  const auto header = split_tabs(lines.front().text);
  std::map<std::string, std::size_t> col;
  for (std::size_t c = 0; c < header.size(); ++c) col[std::string(header[c])] = c;
  for (const char* required : {"id", "task_type", "train_size", "metric"}) {
    if (!col.count(required)) throw ParseError(std::string("manifest header lacks column '") + required + "'", 1);
  }
  std::vector<TaskMeta> metas;
  for (std::size_t i = 1; i < lines.size(); ++i) {
    const auto& l = lines[i];
    const auto cells = split_tabs(l.text);
    if (cells.size() != header.size()) {
      throw ParseError("expected " + std::to_string(header.size()) + " fields, got " + std::to_string(cells.size()),
                       l.number);
    }
    TaskMeta m;
    m.id = std::string(cells[col["id"]]);
    const std::size_t tc = col["task_type"];
    try {
      m.task_type = parse_task_type(cells[tc]);
      if (col.count("role")) m.role = parse_task_role(cells[col["role"]]);
    } catch (const ParseError& e) {
      throw ParseError(e.what(), l.number, tc + 1);
    }
    m.train_size = parse_count(cells[col["train_size"]], l.number, col["train_size"] + 1);
    m.metric_name = std::string(cells[col["metric"]]);
    metas.push_back(std::move(m));
  }
  return rethrow_at(lines.front().number, [&] { return Manifest(std::move(metas)); });
}

std::string serialize_manifest(const Manifest& manifest) {
  std::string out = "id\trole\ttask_type\ttrain_size\tmetric\n";
  for (const auto& m : manifest.tasks()) {
    out += m.id + "\t" + std::string(to_string(m.role)) + "\t" + std::string(to_string(m.task_type)) + "\t" +
           std::to_string(m.train_size) + "\t" + m.metric_name + "\n";
  }
  return out;
}

// ---------------------------------------------------------------------------
// JSON lines

namespace {

json parse_json_line(const Line& l) {
  try {
    json j = json::parse(l.text);
    if (!j.is_object()) throw ParseError("expected a JSON object", l.number);
    return j;
  } catch (const json::parse_error& e) {
    throw ParseError(std::string("invalid JSON: ") + e.what(), l.number);
  }
}

template <typename T>
T field(const json& j, const char* key, std::size_t line) {
  auto it = j.find(key);
  if (it == j.end()) throw ParseError(std::string("missing field '") + key + "'", line);
  try {
    return it->get<T>();
  } catch (const json::exception&) {
    throw ParseError(std::string("field '") + key + "' has the wrong type", line);
  }
}

std::vector<double> number_array(const json& j, const char* key, std::size_t line) {
  auto it = j.find(key);
  if (it == j.end() || !it->is_array()) throw ParseError(std::string("field '") + key + "' must be an array", line);
  std::vector<double> out;
  out.reserve(it->size());
  for (const auto& v : *it) {
    if (!v.is_number()) throw ParseError(std::string("field '") + key + "' must hold numbers only", line);
    const double x = v.get<double>();
    if (!std::isfinite(x)) throw ParseError(std::string("non-finite value in '") + key + "'", line);
    out.push_back(x);
  }
  return out;
}

}  // namespace

EmbeddingSet parse_embeddings(std::string_view text) {
  std::optional<EmbeddingKind> kind;
  std::size_t dim = 0;
  std::map<TaskId, std::vector<double>> vectors;
  for (const Line& l : split_lines(text)) {
    const json j = parse_json_line(l);
    const auto id = field<std::string>(j, "task_id", l.number);
    EmbeddingKind k;
    try {
      k = parse_embedding_kind(field<std::string>(j, "kind", l.number));
    } catch (const ParseError& e) {
      throw ParseError(e.what(), l.number);
    }
    const auto d = field<std::size_t>(j, "dim", l.number);
    auto values = number_array(j, "values", l.number);
    if (values.size() != d) {
      throw ParseError("record '" + id + "' declares dim " + std::to_string(d) + " but has " +
                           std::to_string(values.size()) + " values",
                       l.number);
    }
    if (!kind) {
      kind = k;
      dim = d;
    } else if (k != *kind) {
      throw ParseError("record '" + id + "' has kind '" + std::string(to_string(k)) + "', file kind is '" +
                           std::string(to_string(*kind)) + "'",
                       l.number);
    } else if (d != dim) {
      throw ParseError("dimension mismatch: record '" + id + "' has dim " + std::to_string(d) + ", expected " +
                           std::to_string(dim),
                       l.number);
    }
    if (!vectors.emplace(id, std::move(values)).second) {
      throw ParseError("duplicate task_id '" + id + "'", l.number);
    }
  }
  if (!kind) throw ParseError("embedding file has no records");
  // Invariant violations (e.g. a negative FIM entry) surface as InvariantError.
  return EmbeddingSet(*kind, dim, std::move(vectors));
}

std::string serialize_embeddings(const EmbeddingSet& set) {
  std::string out;
  for (const auto& [id, values] : set.vectors()) {
    json j = {{"task_id", id}, {"kind", std::string(to_string(set.kind()))}, {"dim", set.dim()}, {"values", values}};
    out += j.dump() + "\n";
  }
  return out;
}

EmbeddedDataset parse_embedded_dataset(std::string_view text) {
  const auto lines = split_lines(text);
  if (lines.empty()) throw ParseError("embedded dataset is empty");
  const json h = parse_json_line(lines.front());
  const std::size_t hl = lines.front().number;
  EmbeddedDataset d;
  try {
    d.label_kind = parse_label_kind(field<std::string>(h, "label_kind", hl));
  } catch (const ParseError& e) {
    throw ParseError(e.what(), hl);
  }
  d.dim = field<std::size_t>(h, "dim", hl);
  if (h.contains("num_classes")) d.num_classes = field<std::size_t>(h, "num_classes", hl);
  if (h.contains("source_model")) d.source_model = field<std::string>(h, "source_model", hl);
  if (h.contains("target")) d.target = field<std::string>(h, "target", hl);
  for (std::size_t i = 1; i < lines.size(); ++i) {
    const Line& l = lines[i];
    const json j = parse_json_line(l);
    EmbeddedExample e;
    e.vector = number_array(j, "vector", l.number);
    if (e.vector.size() != d.dim) {
      throw ParseError("vector has " + std::to_string(e.vector.size()) + " entries, header dim is " +
                           std::to_string(d.dim),
                       l.number);
    }
    switch (d.label_kind) {
      case LabelKind::class_index:
      case LabelKind::token_tag: {
        e.label = field<int>(j, "label", l.number);
        if (e.label < 0 || static_cast<std::size_t>(e.label) >= d.num_classes) {
          throw ParseError("label " + std::to_string(e.label) + " outside [0, " + std::to_string(d.num_classes) + ")",
                           l.number);
        }
        break;
      }
      case LabelKind::real_value:
        e.value = field<double>(j, "value", l.number);
        break;
      case LabelKind::choice_group:
        e.group = field<std::int64_t>(j, "group", l.number);
        e.choice = field<int>(j, "choice", l.number);
        e.correct = field<bool>(j, "correct", l.number);
        break;
    }
    d.examples.push_back(std::move(e));
  }
  try {
    d.validate();
  } catch (const InvariantError& e) {
    throw ParseError(e.what());
  }
  return d;
}

std::string serialize_embedded_dataset(const EmbeddedDataset& d) {
  json h = {{"label_kind", std::string(to_string(d.label_kind))}, {"dim", d.dim}};
  if (d.label_kind == LabelKind::class_index || d.label_kind == LabelKind::token_tag) h["num_classes"] = d.num_classes;
  if (!d.source_model.empty()) h["source_model"] = d.source_model;
  if (!d.target.empty()) h["target"] = d.target;
  std::string out = h.dump() + "\n";
  for (const auto& e : d.examples) {
    json j = {{"vector", e.vector}};
    switch (d.label_kind) {
      case LabelKind::class_index:
      case LabelKind::token_tag: j["label"] = e.label; break;
      case LabelKind::real_value: j["value"] = e.value; break;
      case LabelKind::choice_group:
        j["group"] = e.group;
        j["choice"] = e.choice;
        j["correct"] = e.correct;
        break;
    }
    out += j.dump() + "\n";
  }
  return out;
}

// ---------------------------------------------------------------------------
// Rankings and score files

std::vector<Ranking> parse_rankings(std::string_view text) {
  const auto lines = split_lines(text);
  if (lines.empty()) throw ParseError("ranking file is empty");
  const auto header = split_tabs(lines.front().text);
  if (header != std::vector<std::string_view>{"target", "method", "rank", "intermediate", "score"}) {
    throw ParseError("ranking header must be target, method, rank, intermediate, score", lines.front().number);
  }
  std::vector<Ranking> out;
  std::map<std::pair<std::string, std::string>, std::size_t> slot;
  for (std::size_t i = 1; i < lines.size(); ++i) {
    const Line& l = lines[i];
    const auto c = split_tabs(l.text);
    if (c.size() != 5) throw ParseError("expected 5 fields, got " + std::to_string(c.size()), l.number);
    const std::pair<std::string, std::string> key{std::string(c[0]), std::string(c[1])};
    auto it = slot.find(key);
    if (it == slot.end()) {
      it = slot.emplace(key, out.size()).first;
      out.push_back(Ranking{key.first, key.second, {}});
    }
    Ranking& r = out[it->second];
    const auto rank = parse_count(c[2], l.number, 3);
    if (rank != r.entries.size() + 1) {
      throw ParseError("rank " + std::to_string(rank) + " out of sequence, expected " +
                           std::to_string(r.entries.size() + 1),
                       l.number, 3);
    }
    r.entries.push_back({std::string(c[3]), parse_double(c[4], l.number, 5)});
  }
  for (const auto& r : out) {
    std::set<std::string> ids;
    for (const auto& e : r.entries) {
      if (!ids.insert(e.id).second) {
        throw ParseError("ranking (" + r.target + ", " + r.method + ") lists '" + e.id + "' twice");
      }
    }
  }
  return out;
}

std::string serialize_rankings(const std::vector<Ranking>& rankings) {
  std::string out = "target\tmethod\trank\tintermediate\tscore\n";
  for (const auto& r : rankings) {
    for (std::size_t i = 0; i < r.entries.size(); ++i) {
      out += r.target + "\t" + r.method + "\t" + std::to_string(i + 1) + "\t" + r.entries[i].id + "\t" +
             format_double(r.entries[i].score) + "\n";
    }
  }
  return out;
}

ScoreFile parse_scores(std::string_view text) {
  const auto lines = split_lines(text);
  if (lines.empty()) throw ParseError("score file is empty");
  const auto header = split_tabs(lines.front().text);
  if (header != std::vector<std::string_view>{"target", "intermediate", "score"}) {
    throw ParseError("score header must be target, intermediate, score", lines.front().number);
  }
  ScoreFile out;
  for (std::size_t i = 1; i < lines.size(); ++i) {
    const Line& l = lines[i];
    const auto c = split_tabs(l.text);
    if (c.size() != 3) throw ParseError("expected 3 fields, got " + std::to_string(c.size()), l.number);
    auto& row = out[std::string(c[0])];
    if (!row.emplace(std::string(c[1]), parse_double(c[2], l.number, 3)).second) {
      throw ParseError("duplicate score for (" + std::string(c[0]) + ", " + std::string(c[1]) + ")", l.number);
    }
  }
  return out;
}

std::string serialize_scores(const ScoreFile& scores) {
  std::string out = "target\tintermediate\tscore\n";
  for (const auto& [t, row] : scores) {
    for (const auto& [s, v] : row) out += t + "\t" + s + "\t" + format_double(v) + "\n";
  }
  return out;
}

// ---------------------------------------------------------------------------
// Reports

ReportFormat parse_report_format(std::string_view text) {
  if (text == "tsv") return ReportFormat::tsv;
  if (text == "json-lines" || text == "jsonl") return ReportFormat::json_lines;
  throw ParseError("unknown report format '" + std::string(text) + "' (tsv | json-lines)");
}

namespace {

struct ReportLine {
  std::string scope;
  std::string method;
  std::string key;
  const MetricRow* row;
};

std::vector<ReportLine> report_lines(const AggregatedReport& report) {
  std::vector<ReportLine> out;
  for (const auto& [k, row] : report.per_target) out.push_back({"target", k.first, k.second, &row});
  for (const auto& [k, row] : report.per_group) out.push_back({"group", k.first, std::string(to_string(k.second)), &row});
  for (const auto& [m, row] : report.overall) out.push_back({"overall", m, "all", &row});
  return out;
}

}  // namespace

std::string serialize_report(const AggregatedReport& report, ReportFormat format) {
  const auto lines = report_lines(report);
  std::set<std::size_t> ks;
  for (const auto& l : lines) {
    for (const auto& [k, v] : l.row->regret) ks.insert(k);
  }
  std::string out;
  if (format == ReportFormat::tsv) {
    out = "scope\tmethod\tkey\tndcg";
    for (std::size_t k : ks) out += "\tregret@" + std::to_string(k);
    out += "\n";
    for (const auto& l : lines) {
      out += l.scope + "\t" + l.method + "\t" + l.key + "\t" + format_double(l.row->ndcg);
      for (std::size_t k : ks) {
        auto it = l.row->regret.find(k);
        out += "\t" + (it == l.row->regret.end() ? std::string("-") : format_double(it->second));
      }
      out += "\n";
    }
    return out;
  }
  for (const auto& l : lines) {
    json regret = json::object();
    for (const auto& [k, v] : l.row->regret) regret[std::to_string(k)] = v;
    json j = {{"scope", l.scope}, {"method", l.method}, {"key", l.key}, {"ndcg", l.row->ndcg}, {"regret", regret}};
    out += j.dump() + "\n";
  }
  return out;
}

// ---------------------------------------------------------------------------
// Files

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::filesystem::path& path, std::string_view content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write '" + path.string() + "'");
  out.write(content.data(), static_cast<std::streamsize>(content.size()));
  if (!out) throw IoError("failed writing '" + path.string() + "'");
}

}  // namespace tsel
