#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace tsel {

enum class CostMethod { metadata, text_or_sent_emb, taskemb, knn_or_linear, fsft_or_fs_taskemb };

std::string_view to_string(CostMethod method);
/// Accepts the enum names; throws UnsupportedConfigError otherwise.
CostMethod parse_cost_method(std::string_view text);

struct CostParams {
  double n = 42;         // intermediate models
  double e = 1;          // training epochs
  double f_macs = 0;     // one forward pass over the whole target set
  double b_ratio = 1.0;  // backward / forward MACs

  void validate() const;
};

/// MACs of one selection method, with b = b_ratio * f:
///   metadata 0, embeddings f, TaskEmb (e+1)f + eb, proxies nf,
///   few-shot 2nef + neb.
double complexity(CostMethod method, const CostParams& p);

/// f = per-example forward MACs x example count.
double calibrate_f(double per_example_macs, double examples);

struct CostRow {
  CostMethod method;
  std::string formula;
  CostParams params;
  double macs = 0.0;
};

/// One row per method. TaskEmb uses `taskemb_epochs`, few-shot methods use one
/// epoch.
std::vector<CostRow> cost_report(double f_macs, double n, double b_ratio = 1.0, double taskemb_epochs = 15);

}  // namespace tsel
