#pragma once

// Text formats. Tables, manifests, rankings and score files are TSV; embedding
// sets and embedded datasets are JSON lines. Every parser validates its result
// and reports malformed input as ParseError with a 1-based line (and column
// where one applies).

#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "tsel/metrics.hpp"
#include "tsel/proxy.hpp"
#include "tsel/types.hpp"

namespace tsel {

inline constexpr std::string_view kBaselineRow = "__baseline__";

/// Shortest decimal text that parses back to the same double.
std::string format_double(double v);
/// Whole-string decimal parse; throws ParseError at (line, column).
double parse_double(std::string_view text, std::size_t line = 0, std::size_t column = 0);

TransferTable parse_transfer_table(std::string_view text);
std::string serialize_transfer_table(const TransferTable& table);

/// Columns: id, role, task_type, train_size, metric. `role` may be omitted,
/// in which case tasks default to intermediates.
Manifest parse_manifest(std::string_view text);
std::string serialize_manifest(const Manifest& manifest);

/// One record per line: {"task_id", "kind", "dim", "values"}.
EmbeddingSet parse_embeddings(std::string_view text);
std::string serialize_embeddings(const EmbeddingSet& set);

/// Header record {"label_kind", "num_classes", "source_model", "target", "dim"},
/// then one example per line: {"vector", "label"} | {"vector", "value"} |
/// {"vector", "group", "choice", "correct"}.
EmbeddedDataset parse_embedded_dataset(std::string_view text);
std::string serialize_embedded_dataset(const EmbeddedDataset& data);

/// Columns: target, method, rank, intermediate, score. Rankings appear in file
/// order of their first row; ranks must run 1..n.
std::vector<Ranking> parse_rankings(std::string_view text);
std::string serialize_rankings(const std::vector<Ranking>& rankings);

/// target -> intermediate -> score. Columns: target, intermediate, score.
using ScoreFile = std::map<TaskId, std::map<TaskId, double>>;
ScoreFile parse_scores(std::string_view text);
std::string serialize_scores(const ScoreFile& scores);

enum class ReportFormat { tsv, json_lines };
ReportFormat parse_report_format(std::string_view text);

/// Rows: per-target, then per-group, then overall, each sorted by method.
std::string serialize_report(const AggregatedReport& report, ReportFormat format);

std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::string_view content);

}  // namespace tsel
