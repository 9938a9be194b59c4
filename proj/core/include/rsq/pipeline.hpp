#pragma once

#include <string>
#include <vector>

#include "rsq/eval.hpp"
#include "rsq/model.hpp"
#include "rsq/plan.hpp"
#include "rsq/report.hpp"

namespace rsq {

struct QuantizeOutput {
  ModelContainer model;
  RunReport report;
};

/// Layer-wise quantization, end to end: fuse norm scales, rotate (optional),
/// expand the calibration set, then per layer (ascending) trace the still
/// full-precision block on inputs produced by the already-quantized prefix,
/// score token importance, accumulate the scaled-token Hessians, and quantize
/// all seven weights. The embedding and lm_head follow with uniform
/// importance. Deterministic for a fixed plan.
QuantizeOutput quantize_model(const ModelContainer& model, const std::vector<TokenSeq>& calib,
                              const QuantPlan& plan);

struct EvalSettings {
  std::vector<TokenSeq> corpus;  // held out from calibration
  int context_len = 0;           // 0 = calibration sequence length
  int retrieval_pairs = 8;
  int retrieval_prompts = 128;
};

/// Fill report.eval from a quantized container (and the full-precision
/// reference when given).
void evaluate_into_report(RunReport& report, const ModelContainer& quantized,
                          const ModelContainer* full_reference, const EvalSettings& eval);

/// Reproduction of the chunk experiment: one uniform run plus one run per
/// chunk mask (loss restricted to that chunk's tokens; every token still
/// flows through the forward pass). Emits one table row per configuration.
FlatTable chunk_ablation(const ModelContainer& model, const std::vector<TokenSeq>& calib,
                         const QuantPlan& plan, int n_chunks, const EvalSettings& eval,
                         const std::vector<std::uint64_t>& seeds);

enum class SweepAxis { n, r_min, expansion };

SweepAxis parse_sweep_axis(const std::string& name);

/// One quantization + evaluation per axis value; rows carry perplexity and
/// mean reconstruction loss (mean +/- std across seeds).
FlatTable sweep(const ModelContainer& model, const std::vector<TokenSeq>& calib, const QuantPlan& base_plan,
                SweepAxis axis, const std::vector<double>& values, const EvalSettings& eval,
                const std::vector<std::uint64_t>& seeds);

/// Uniform baseline vs the chosen strategy under shared seeds, with a delta row.
FlatTable compare_strategies(const ModelContainer& model, const std::vector<TokenSeq>& calib,
                             const QuantPlan& plan, const EvalSettings& eval,
                             const std::vector<std::uint64_t>& seeds);

}  // namespace rsq
