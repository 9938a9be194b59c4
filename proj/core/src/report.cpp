#include "rsq/report.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "rsq/model.hpp"
#include "rsq/version.hpp"

namespace rsq {

void QuantPlan::validate() const {
  if (bits != 2 && bits != 3 && bits != 4 && bits != 8 && bits != 16) {
    throw std::invalid_argument("bits must be one of 2, 3, 4, 8 (16 = passthrough), got " +
                                std::to_string(bits));
  }
  if (group_size < 0) throw std::invalid_argument("group_size must be >= 0");
  if (!(damp_lambda > 0.0)) throw std::invalid_argument("damp must be > 0");
  RangeMap{r_min, 1.0}.validate();
  if (expansion < 1) throw std::invalid_argument("expansion must be >= 1");
  if (strategy == Strategy::first_n || strategy == Strategy::first_last_n) {
    if (strategy_n < 0) throw std::invalid_argument("n must be >= 0");
  }
  if (strategy == Strategy::chunk && (chunk_index < 0 || n_chunks < 1 || chunk_index >= n_chunks)) {
    throw std::invalid_argument("invalid chunk selection");
  }
  for (const auto& [name, s] : per_weight) {
    bool known = false;
    for (const auto& w : layer_weight_names()) known = known || w == name;
    if (!known) throw std::invalid_argument("per-weight override names unknown weight '" + name + "'");
    if (s == Strategy::chunk) throw std::invalid_argument("per-weight override cannot use chunk");
  }
}

double RunReport::mean_weighted_loss() const {
  if (weights.empty()) return 0.0;
  double acc = 0.0;
  for (const auto& [name, w] : weights) acc += w.weighted_loss;
  return acc / static_cast<double>(weights.size());
}

std::string format_float(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.9g", v);
  return buf;
}

namespace {

std::string bool_str(bool b) { return b ? "true" : "false"; }

bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  throw std::invalid_argument("expected true/false for " + key + ", got '" + v + "'");
}

long long parse_int(const std::string& key, const std::string& v) {
  try {
    std::size_t pos = 0;
    const long long r = std::stoll(v, &pos);
    if (pos != v.size()) throw std::invalid_argument(v);
    return r;
  } catch (const std::exception&) {
    throw std::invalid_argument("expected an integer for " + key + ", got '" + v + "'");
  }
}

double parse_double(const std::string& key, const std::string& v) {
  try {
    std::size_t pos = 0;
    const double r = std::stod(v, &pos);
    if (pos != v.size()) throw std::invalid_argument(v);
    return r;
  } catch (const std::exception&) {
    throw std::invalid_argument("expected a number for " + key + ", got '" + v + "'");
  }
}

std::string per_weight_str(const std::map<std::string, Strategy>& pw) {
  std::string out;
  for (const auto& [name, s] : pw) {
    if (!out.empty()) out += ",";
    out += name + "=" + strategy_name(s);
  }
  return out;
}

std::map<std::string, Strategy> parse_per_weight(const std::string& v) {
  std::map<std::string, Strategy> out;
  std::stringstream ss(v);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty()) continue;
    const auto eq = item.find('=');
    if (eq == std::string::npos) {
      throw std::invalid_argument("per-weight override must look like wv=attn-con, got '" + item + "'");
    }
    out[item.substr(0, eq)] = parse_strategy(item.substr(eq + 1));
  }
  return out;
}

}  // namespace

std::map<std::string, std::string> plan_to_kv(const QuantPlan& plan) {
  std::map<std::string, std::string> kv;
  kv["bits"] = std::to_string(plan.bits);
  kv["group_size"] = std::to_string(plan.group_size);
  kv["damp"] = format_float(plan.damp_lambda);
  kv["strategy"] = strategy_name(plan.strategy);
  kv["n"] = std::to_string(plan.strategy_n);
  kv["r_min"] = format_float(plan.r_min);
  kv["expansion"] = std::to_string(plan.expansion);
  kv["subsample"] = bool_str(plan.subsample);
  kv["rotate"] = bool_str(plan.rotate);
  kv["quantize_embeddings"] = bool_str(plan.quantize_embeddings);
  kv["seed"] = std::to_string(plan.seed);
  kv["column_order"] = "ascending";
  if (!plan.per_weight.empty()) kv["weight_strategy"] = per_weight_str(plan.per_weight);
  if (plan.strategy == Strategy::chunk) {
    kv["chunk_index"] = std::to_string(plan.chunk_index);
    kv["n_chunks"] = std::to_string(plan.n_chunks);
  }
  return kv;
}

QuantPlan plan_from_kv(const std::map<std::string, std::string>& kv, const QuantPlan& defaults) {
  QuantPlan plan = defaults;
  for (const auto& [raw_key, value] : kv) {
    std::string key = raw_key;
    if (key.rfind("plan.", 0) == 0) key = key.substr(5);
    if (key == "bits") plan.bits = static_cast<int>(parse_int(key, value));
    else if (key == "group_size") plan.group_size = static_cast<int>(parse_int(key, value));
    else if (key == "damp") plan.damp_lambda = parse_double(key, value);
    else if (key == "strategy") plan.strategy = parse_strategy(value);
    else if (key == "n") plan.strategy_n = static_cast<int>(parse_int(key, value));
    else if (key == "r_min") plan.r_min = parse_double(key, value);
    else if (key == "expansion") plan.expansion = static_cast<int>(parse_int(key, value));
    else if (key == "subsample") plan.subsample = parse_bool(key, value);
    else if (key == "rotate") plan.rotate = parse_bool(key, value);
    else if (key == "quantize_embeddings") plan.quantize_embeddings = parse_bool(key, value);
    else if (key == "seed") plan.seed = static_cast<std::uint64_t>(parse_int(key, value));
    else if (key == "column_order") {
      if (value != "ascending") throw std::invalid_argument("unsupported column_order '" + value + "'");
    } else if (key == "weight_strategy") plan.per_weight = parse_per_weight(value);
    else if (key == "chunk_index") plan.chunk_index = static_cast<int>(parse_int(key, value));
    else if (key == "n_chunks") plan.n_chunks = static_cast<int>(parse_int(key, value));
    else throw std::invalid_argument("unknown config key '" + raw_key + "'");
  }
  plan.validate();
  return plan;
}

std::map<std::string, std::string> parse_flat_kv(const std::string& text) {
  std::map<std::string, std::string> kv;
  std::stringstream ss(text);
  std::string line;
  int lineno = 0;
  while (std::getline(ss, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    std::size_t begin = line.find_first_not_of(" \t");
    if (begin == std::string::npos || line[begin] == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw std::invalid_argument("line " + std::to_string(lineno) + ": expected key=value, got '" + line + "'");
    }
    auto trim = [](std::string s) {
      const auto b = s.find_first_not_of(" \t");
      const auto e = s.find_last_not_of(" \t");
      return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
    };
    kv[trim(line.substr(0, eq))] = trim(line.substr(eq + 1));
  }
  return kv;
}

std::map<std::string, std::string> report_to_kv(const RunReport& report, bool include_timing) {
  std::map<std::string, std::string> kv;
  for (const auto& [k, v] : plan_to_kv(report.plan)) kv["plan." + k] = v;
  kv["tool.version"] = report.tool_version.empty() ? std::string(kVersion) : report.tool_version;
  for (const auto& [name, w] : report.weights) {
    kv["weights." + name + ".weighted_loss"] = format_float(w.weighted_loss);
    kv["weights." + name + ".unweighted_loss"] = format_float(w.unweighted_loss);
  }
  if (report.perplexity) kv["eval.perplexity"] = format_float(*report.perplexity);
  if (report.retrieval_accuracy) kv["eval.retrieval_accuracy"] = format_float(*report.retrieval_accuracy);
  if (report.perplexity_full) kv["eval.perplexity_full"] = format_float(*report.perplexity_full);
  if (include_timing) kv["timing.total_seconds"] = format_float(report.total_seconds);
  return kv;
}

std::string emit_report_text(const RunReport& report, bool include_timing) {
  std::string out;
  for (const auto& [k, v] : report_to_kv(report, include_timing)) {
    out += k;
    out += "=";
    out += v;
    out += "\n";
  }
  return out;
}

void emit_report(const RunReport& report, const std::string& path, bool include_timing) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot open for write: " + path);
  const std::string text = emit_report_text(report, include_timing);
  os.write(text.data(), static_cast<std::streamsize>(text.size()));
  if (!os) throw std::runtime_error("write failed: " + path);
}

RunReport parse_report_text(const std::string& text) {
  const auto kv = parse_flat_kv(text);
  RunReport report;
  std::map<std::string, std::string> plan_kv;
  for (const auto& [k, v] : kv) {
    if (k.rfind("plan.", 0) == 0) {
      plan_kv[k] = v;
    } else if (k.rfind("weights.", 0) == 0) {
      const std::string rest = k.substr(8);
      const auto dot = rest.rfind('.');
      if (dot == std::string::npos) throw std::invalid_argument("malformed report key '" + k + "'");
      const std::string name = rest.substr(0, dot);
      const std::string field = rest.substr(dot + 1);
      if (field == "weighted_loss") report.weights[name].weighted_loss = parse_double(k, v);
      else if (field == "unweighted_loss") report.weights[name].unweighted_loss = parse_double(k, v);
      else throw std::invalid_argument("malformed report key '" + k + "'");
    } else if (k == "eval.perplexity") {
      report.perplexity = parse_double(k, v);
    } else if (k == "eval.retrieval_accuracy") {
      report.retrieval_accuracy = parse_double(k, v);
    } else if (k == "eval.perplexity_full") {
      report.perplexity_full = parse_double(k, v);
    } else if (k == "timing.total_seconds") {
      report.total_seconds = parse_double(k, v);
    } else if (k == "tool.version") {
      report.tool_version = v;
    } else {
      throw std::invalid_argument("unknown report key '" + k + "'");
    }
  }
  report.plan = plan_from_kv(plan_kv);
  return report;
}

RunReport parse_report(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot open: " + path);
  std::string text((std::istreambuf_iterator<char>(is)), std::istreambuf_iterator<char>());
  return parse_report_text(text);
}

std::string FlatTable::to_csv() const {
  std::string out;
  auto append_row = [&out](const std::vector<std::string>& row) {
    for (std::size_t i = 0; i < row.size(); ++i) {
      if (i) out += ",";
      out += row[i];
    }
    out += "\n";
  };
  append_row(header);
  for (const auto& row : rows) append_row(row);
  return out;
}

void FlatTable::write_csv(const std::string& path) const {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot open for write: " + path);
  const std::string text = to_csv();
  os.write(text.data(), static_cast<std::streamsize>(text.size()));
  if (!os) throw std::runtime_error("write failed: " + path);
}

}  // namespace rsq
