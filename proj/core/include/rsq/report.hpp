#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "rsq/plan.hpp"

namespace rsq {

struct WeightReport {
  double weighted_loss = 0.0;
  double unweighted_loss = 0.0;
};

/// End-to-end record of one quantization run. Serialized as canonical flat
/// key=value text: sorted keys, floats at 9 significant digits, one line per
/// entry, so identical runs emit identical bytes. The plan echo (plan.*) can
/// be fed back as a config file to reproduce the run.
struct RunReport {
  QuantPlan plan;
  std::string tool_version;
  std::map<std::string, WeightReport> weights;  // "layer.00.wq", "lm_head", "embedding"
  std::optional<double> perplexity;
  std::optional<double> retrieval_accuracy;
  std::optional<double> perplexity_full;  // full-precision reference, same eval set
  double total_seconds = 0.0;

  double mean_weighted_loss() const;
};

std::string format_float(double v);  // canonical 9-significant-digit rendering

std::map<std::string, std::string> report_to_kv(const RunReport& report, bool include_timing = true);
std::string emit_report_text(const RunReport& report, bool include_timing = true);
void emit_report(const RunReport& report, const std::string& path, bool include_timing = true);

RunReport parse_report_text(const std::string& text);
RunReport parse_report(const std::string& path);

/// Flat key=value parsing shared by reports and config files. Blank lines and
/// '#' comments are skipped; a leading "plan." prefix on config keys is
/// accepted so a report's plan echo is directly reusable.
std::map<std::string, std::string> parse_flat_kv(const std::string& text);
QuantPlan plan_from_kv(const std::map<std::string, std::string>& kv, const QuantPlan& defaults = {});
std::map<std::string, std::string> plan_to_kv(const QuantPlan& plan);

/// Comma-separated table with a header row; the companion format for sweep
/// and ablation outputs.
struct FlatTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  std::string to_csv() const;
  void write_csv(const std::string& path) const;
};

}  // namespace rsq
