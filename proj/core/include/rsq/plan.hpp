#pragma once

#include <cstdint>
#include <map>
#include <string>

#include "rsq/importance.hpp"

namespace rsq {

enum class ColumnOrder { ascending };

/// Every knob of one quantization run. A plan plus a root seed pins the run
/// bit for bit.
struct QuantPlan {
  int bits = 3;              // {2,3,4,8}; 16 = passthrough (no quantization)
  int group_size = 0;        // 0 = whole row
  double damp_lambda = 0.01;
  Strategy strategy = Strategy::attn_con;
  int strategy_n = 0;        // N for first-n / first-last-n; 0 means N = T
  double r_min = 0.01;
  int expansion = 8;
  bool subsample = false;  // keep the token budget fixed after expansion
  bool rotate = true;
  bool quantize_embeddings = true;
  std::uint64_t seed = 0;
  ColumnOrder column_order = ColumnOrder::ascending;
  std::map<std::string, Strategy> per_weight;  // optional per-weight strategy override
  // Internal knobs for the chunk-ablation experiment (not user-facing).
  int chunk_index = -1;
  int n_chunks = 0;

  void validate() const;
};

}  // namespace rsq
