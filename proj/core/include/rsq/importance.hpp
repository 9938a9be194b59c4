#pragma once

#include <map>
#include <string>
#include <vector>

#include "rsq/data.hpp"
#include "rsq/matrix.hpp"

namespace rsq {

enum class Strategy {
  uniform,
  first_n,
  first_last_n,
  token_freq,
  act_norm,
  act_diff,
  token_sim,
  attn_con,
  chunk,  // internal: one chunk of the chunk-ablation experiment
};

Strategy parse_strategy(const std::string& name);
std::string strategy_name(Strategy s);
bool strategy_is_dynamic(Strategy s);

/// Eq-style affine range map for dynamic importance scores: min(raw) maps to
/// r_min, max(raw) to r_max (= 1), affine in between. A constant input maps
/// everything to r_max.
struct RangeMap {
  double r_min = 0.01;
  double r_max = 1.0;

  void validate() const;
};

/// Per-token nonnegative weights for one (sample, layer) pair.
struct ImportanceVector {
  std::vector<double> values;
  Strategy strategy = Strategy::uniform;
  int layer_index = -1;
};

ImportanceVector map_to_range(const std::vector<double>& raw, const RangeMap& rm);

ImportanceVector uniform_importance(int t_len);

/// r_i = 1 for i <= n (1-indexed), 0 otherwise.
ImportanceVector first_n(int t_len, int n);

/// r_i = 1 for i <= n or i > T - n, 0 otherwise. The two ends may overlap.
ImportanceVector first_last_n(int t_len, int n);

/// Binary mask for tokens in chunk `chunk_index` (0-based) of `n_chunks`
/// equal contiguous chunks.
ImportanceVector chunk_mask(int t_len, int chunk_index, int n_chunks);

/// Occurrence counts over the (post-expansion) calibration corpus.
struct TokenCounts {
  std::map<std::int32_t, long long> counts;

  static TokenCounts from_corpus(const std::vector<TokenSeq>& corpus);
  long long at(std::int32_t token) const;  // throws on unknown token
};

/// Rarer tokens matter more: raw score -C(t_i), then the range map.
ImportanceVector token_freq(const TokenSeq& tokens, const TokenCounts& counts, const RangeMap& rm);

/// Larger-norm activations matter more: raw score ||z_i||.
ImportanceVector act_norm(const Matrix& z, const RangeMap& rm);

/// Steadier tokens matter more: raw score -||Layer(z_i) - z_i||.
ImportanceVector act_diff(const Matrix& z, const Matrix& layer_output, const RangeMap& rm);

/// Rarer-information tokens matter more: raw score sum_j ||z_i - z_j||.
ImportanceVector token_sim(const Matrix& z, const RangeMap& rm);

/// Tokens receiving more attention matter more: raw score
/// sum over heads and query rows of the attention each token receives.
/// Throws if any attention row does not sum to 1 within 1e-6.
ImportanceVector attn_con(const std::vector<Matrix>& attn_heads, const RangeMap& rm);

struct ExpansionConfig {
  int factor = 8;  // M >= 1
};

/// For each sample, append the M-1 right-cyclic rotations by multiples of
/// floor(T/M): every token gets a chance to sit in the positions the
/// importance signals favor.
std::vector<TokenSeq> expand_dataset(const std::vector<TokenSeq>& samples, const ExpansionConfig& cfg);

}  // namespace rsq
