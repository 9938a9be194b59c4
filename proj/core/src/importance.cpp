#include "rsq/importance.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace rsq {

Strategy parse_strategy(const std::string& name) {
  if (name == "uniform") return Strategy::uniform;
  if (name == "first-n") return Strategy::first_n;
  if (name == "first-last-n") return Strategy::first_last_n;
  if (name == "token-freq") return Strategy::token_freq;
  if (name == "act-norm") return Strategy::act_norm;
  if (name == "act-diff") return Strategy::act_diff;
  if (name == "token-sim") return Strategy::token_sim;
  if (name == "attn-con") return Strategy::attn_con;
  throw std::invalid_argument(
      "unknown strategy '" + name +
      "' (expected one of uniform|first-n|first-last-n|token-freq|act-norm|act-diff|token-sim|attn-con)");
}

std::string strategy_name(Strategy s) {
  switch (s) {
    case Strategy::uniform: return "uniform";
    case Strategy::first_n: return "first-n";
    case Strategy::first_last_n: return "first-last-n";
    case Strategy::token_freq: return "token-freq";
    case Strategy::act_norm: return "act-norm";
    case Strategy::act_diff: return "act-diff";
    case Strategy::token_sim: return "token-sim";
    case Strategy::attn_con: return "attn-con";
    case Strategy::chunk: return "chunk";
  }
  return "?";
}

bool strategy_is_dynamic(Strategy s) {
  switch (s) {
    case Strategy::token_freq:
    case Strategy::act_norm:
    case Strategy::act_diff:
    case Strategy::token_sim:
    case Strategy::attn_con:
      return true;
    default:
      return false;
  }
}

void RangeMap::validate() const {
  if (!(r_min > 0.0) || !(r_min <= 1.0)) {
    throw std::invalid_argument("r_min must be in (0, 1], got " + std::to_string(r_min));
  }
  if (r_max != 1.0) {
    throw std::invalid_argument("r_max is fixed to 1");
  }
}

ImportanceVector map_to_range(const std::vector<double>& raw, const RangeMap& rm) {
  rm.validate();
  if (raw.empty()) throw std::invalid_argument("map_to_range: empty input");
  double lo = raw[0];
  double hi = raw[0];
  for (double v : raw) {
    if (!std::isfinite(v)) throw std::invalid_argument("map_to_range: non-finite score");
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  ImportanceVector out;
  out.values.resize(raw.size());
  if (hi == lo) {
    // No information to discriminate: uniform weighting at r_max.
    std::fill(out.values.begin(), out.values.end(), rm.r_max);
    return out;
  }
  const double span = hi - lo;
  for (std::size_t i = 0; i < raw.size(); ++i) {
    const double t = (raw[i] - lo) / span;
    out.values[i] = rm.r_min + t * (rm.r_max - rm.r_min);
  }
  return out;
}

ImportanceVector uniform_importance(int t_len) {
  ImportanceVector out;
  out.strategy = Strategy::uniform;
  out.values.assign(t_len, 1.0);
  return out;
}

ImportanceVector first_n(int t_len, int n) {
  if (n < 1 || n > t_len) {
    throw std::invalid_argument("first_n: need 1 <= n <= T, got n=" + std::to_string(n) +
                                " T=" + std::to_string(t_len));
  }
  ImportanceVector out;
  out.strategy = Strategy::first_n;
  out.values.assign(t_len, 0.0);
  for (int i = 0; i < n; ++i) out.values[i] = 1.0;
  return out;
}

ImportanceVector first_last_n(int t_len, int n) {
  if (n < 0 || n > t_len) {
    throw std::invalid_argument("first_last_n: need 0 <= n <= T, got n=" + std::to_string(n) +
                                " T=" + std::to_string(t_len));
  }
  ImportanceVector out;
  out.strategy = Strategy::first_last_n;
  out.values.assign(t_len, 0.0);
  for (int i = 1; i <= t_len; ++i) {
    if (i <= n || i > t_len - n) out.values[i - 1] = 1.0;
  }
  return out;
}

ImportanceVector chunk_mask(int t_len, int chunk_index, int n_chunks) {
  if (n_chunks < 1 || t_len % n_chunks != 0) {
    throw std::invalid_argument("chunk_mask: n_chunks must divide T");
  }
  if (chunk_index < 0 || chunk_index >= n_chunks) {
    throw std::invalid_argument("chunk_mask: chunk index out of range");
  }
  const int chunk = t_len / n_chunks;
  ImportanceVector out;
  out.strategy = Strategy::chunk;
  out.values.assign(t_len, 0.0);
  for (int i = chunk_index * chunk; i < (chunk_index + 1) * chunk; ++i) out.values[i] = 1.0;
  return out;
}

TokenCounts TokenCounts::from_corpus(const std::vector<TokenSeq>& corpus) {
  TokenCounts tc;
  for (const auto& seq : corpus) {
    for (std::int32_t t : seq) ++tc.counts[t];
  }
  return tc;
}

long long TokenCounts::at(std::int32_t token) const {
  auto it = counts.find(token);
  if (it == counts.end()) {
    throw std::invalid_argument("token " + std::to_string(token) +
                                " absent from the calibration counts");
  }
  return it->second;
}

ImportanceVector token_freq(const TokenSeq& tokens, const TokenCounts& counts, const RangeMap& rm) {
  std::vector<double> raw(tokens.size());
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    raw[i] = -static_cast<double>(counts.at(tokens[i]));
  }
  ImportanceVector out = map_to_range(raw, rm);
  out.strategy = Strategy::token_freq;
  return out;
}

namespace {

double row_norm(const Matrix& m, int r) {
  double acc = 0.0;
  const double* row = m.row(r);
  for (int j = 0; j < m.cols(); ++j) acc += row[j] * row[j];
  return std::sqrt(acc);
}

double row_dist(const Matrix& a, int i, const Matrix& b, int j) {
  double acc = 0.0;
  const double* x = a.row(i);
  const double* y = b.row(j);
  for (int k = 0; k < a.cols(); ++k) {
    const double d = x[k] - y[k];
    acc += d * d;
  }
  return std::sqrt(acc);
}

}  // namespace

ImportanceVector act_norm(const Matrix& z, const RangeMap& rm) {
  std::vector<double> raw(z.rows());
  for (int i = 0; i < z.rows(); ++i) raw[i] = row_norm(z, i);
  ImportanceVector out = map_to_range(raw, rm);
  out.strategy = Strategy::act_norm;
  return out;
}

ImportanceVector act_diff(const Matrix& z, const Matrix& layer_output, const RangeMap& rm) {
  if (z.rows() != layer_output.rows() || z.cols() != layer_output.cols()) {
    throw std::invalid_argument("act_diff: shape mismatch between layer input and output");
  }
  std::vector<double> raw(z.rows());
  for (int i = 0; i < z.rows(); ++i) raw[i] = -row_dist(layer_output, i, z, i);
  ImportanceVector out = map_to_range(raw, rm);
  out.strategy = Strategy::act_diff;
  return out;
}

ImportanceVector token_sim(const Matrix& z, const RangeMap& rm) {
  // Exact O(T^2 d); fine at calibration scale.
  std::vector<double> raw(z.rows(), 0.0);
  for (int i = 0; i < z.rows(); ++i) {
    for (int j = 0; j < z.rows(); ++j) raw[i] += row_dist(z, i, z, j);
  }
  ImportanceVector out = map_to_range(raw, rm);
  out.strategy = Strategy::token_sim;
  return out;
}

ImportanceVector attn_con(const std::vector<Matrix>& attn_heads, const RangeMap& rm) {
  if (attn_heads.empty()) throw std::invalid_argument("attn_con: no attention heads");
  const int t_len = attn_heads.front().rows();
  std::vector<double> raw(t_len, 0.0);
  for (const Matrix& a : attn_heads) {
    if (a.rows() != t_len || a.cols() != t_len) throw std::invalid_argument("attn_con: ragged attention map");
    for (int i = 0; i < t_len; ++i) {
      double row_sum = 0.0;
      for (int j = 0; j < t_len; ++j) row_sum += a.at(i, j);
      if (std::fabs(row_sum - 1.0) > 1e-6) {
        throw std::invalid_argument("attn_con: attention row " + std::to_string(i) +
                                    " is not normalized (sum=" + std::to_string(row_sum) + ")");
      }
      for (int j = 0; j <= i; ++j) raw[j] += a.at(i, j);
    }
  }
  ImportanceVector out = map_to_range(raw, rm);
  out.strategy = Strategy::attn_con;
  return out;
}

std::vector<TokenSeq> expand_dataset(const std::vector<TokenSeq>& samples, const ExpansionConfig& cfg) {
  if (cfg.factor < 1) throw std::invalid_argument("expand_dataset: factor must be >= 1");
  std::vector<TokenSeq> out;
  out.reserve(samples.size() * cfg.factor);
  for (const auto& seq : samples) {
    const int t_len = static_cast<int>(seq.size());
    if (cfg.factor > t_len) {
      throw std::invalid_argument("expand_dataset: factor " + std::to_string(cfg.factor) +
                                  " exceeds sequence length " + std::to_string(t_len));
    }
    const int step = t_len / cfg.factor;
    out.push_back(seq);
    for (int k = 1; k < cfg.factor; ++k) {
      const int shift = k * step;  // right-cyclic: last `shift` tokens move to the front
      TokenSeq rotated(t_len);
      for (int i = 0; i < t_len; ++i) rotated[i] = seq[(i + t_len - shift) % t_len];
      out.push_back(std::move(rotated));
    }
  }
  return out;
}

}  // namespace rsq
