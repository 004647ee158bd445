#include "tsel/cost_model.hpp"

#include <cmath>

#include "tsel/error.hpp"

namespace tsel {

std::string_view to_string(CostMethod method) {
  switch (method) {
    case CostMethod::metadata: return "metadata";
    case CostMethod::text_or_sent_emb: return "text_or_sent_emb";
    case CostMethod::taskemb: return "taskemb";
    case CostMethod::knn_or_linear: return "knn_or_linear";
    case CostMethod::fsft_or_fs_taskemb: return "fsft_or_fs_taskemb";
  }
  return "unknown";
}

CostMethod parse_cost_method(std::string_view text) {
  for (CostMethod m : {CostMethod::metadata, CostMethod::text_or_sent_emb, CostMethod::taskemb,
                       CostMethod::knn_or_linear, CostMethod::fsft_or_fs_taskemb}) {
    if (text == to_string(m)) return m;
  }
  throw UnsupportedConfigError("unknown cost method '" + std::string(text) + "'");
}

void CostParams::validate() const {
  if (!(n >= 1) || !std::isfinite(n)) throw DomainError("cost model: n must be at least 1");
  if (!(f_macs > 0) || !std::isfinite(f_macs)) throw DomainError("cost model: f_macs must be positive");
  if (!(b_ratio > 0) || !std::isfinite(b_ratio)) throw DomainError("cost model: b_ratio must be positive");
  if (!(e >= 0) || !std::isfinite(e)) throw DomainError("cost model: e must be non-negative");
}

double complexity(CostMethod method, const CostParams& p) {
  p.validate();
  const double f = p.f_macs;
  const double b = p.b_ratio * f;
  switch (method) {
    case CostMethod::metadata: return 0.0;
    case CostMethod::text_or_sent_emb: return f;
    case CostMethod::taskemb: return (p.e + 1) * f + p.e * b;
    case CostMethod::knn_or_linear: return p.n * f;
    case CostMethod::fsft_or_fs_taskemb: return 2 * p.n * p.e * f + p.n * p.e * b;
  }
  throw UnsupportedConfigError("unknown cost method");
}

double calibrate_f(double per_example_macs, double examples) {
  if (!(per_example_macs > 0) || !(examples >= 0)) {
    throw DomainError("calibrate_f: per-example MACs must be positive and the example count non-negative");
  }
  return per_example_macs * examples;
}

std::vector<CostRow> cost_report(double f_macs, double n, double b_ratio, double taskemb_epochs) {
  std::vector<CostRow> rows = {
      {CostMethod::metadata, "1", {n, 0, f_macs, b_ratio}},
      {CostMethod::text_or_sent_emb, "f", {n, 0, f_macs, b_ratio}},
      {CostMethod::taskemb, "(e+1)f + eb", {n, taskemb_epochs, f_macs, b_ratio}},
      {CostMethod::knn_or_linear, "nf", {n, 0, f_macs, b_ratio}},
      {CostMethod::fsft_or_fs_taskemb, "2nef + neb", {n, 1, f_macs, b_ratio}},
  };
  for (auto& r : rows) r.macs = complexity(r.method, r.params);
  return rows;
}

}  // namespace tsel
