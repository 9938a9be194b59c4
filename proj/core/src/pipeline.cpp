#include "rsq/pipeline.hpp"

#include <chrono>
#include <cmath>
#include <stdexcept>

#include "rsq/log.hpp"
#include "rsq/quantize.hpp"
#include "rsq/rotate.hpp"
#include "rsq/version.hpp"

namespace rsq {

namespace {

const Matrix& trace_input(const LayerTrace& tr, const std::string& kind) {
  if (kind == "wq" || kind == "wk" || kind == "wv") return tr.h_norm1;
  if (kind == "wo") return tr.attn_ctx;
  if (kind == "wup" || kind == "wgate") return tr.h_norm2;
  if (kind == "wdown") return tr.ffn_act;
  throw std::invalid_argument("unknown weight kind " + kind);
}

ImportanceVector importance_for_trace(const QuantPlan& plan, Strategy strategy, const LayerTrace& tr,
                                      const TokenSeq& tokens, const TokenCounts& counts, int layer) {
  const int t_len = tr.z_in.rows();
  const RangeMap rm{plan.r_min, 1.0};
  ImportanceVector r;
  switch (strategy) {
    case Strategy::uniform:
      r = uniform_importance(t_len);
      break;
    case Strategy::first_n:
      r = first_n(t_len, plan.strategy_n == 0 ? t_len : plan.strategy_n);
      break;
    case Strategy::first_last_n:
      r = first_last_n(t_len, plan.strategy_n == 0 ? t_len : plan.strategy_n);
      break;
    case Strategy::token_freq:
      r = token_freq(tokens, counts, rm);
      break;
    case Strategy::act_norm:
      r = act_norm(tr.z_in, rm);
      break;
    case Strategy::act_diff:
      r = act_diff(tr.z_in, tr.z_out, rm);
      break;
    case Strategy::token_sim:
      r = token_sim(tr.z_in, rm);
      break;
    case Strategy::attn_con:
      r = attn_con(tr.attn, rm);
      break;
    case Strategy::chunk:
      r = chunk_mask(t_len, plan.chunk_index, plan.n_chunks);
      break;
  }
  r.layer_index = layer;
  return r;
}

double mean_of(const std::vector<double>& v) {
  double acc = 0.0;
  for (double x : v) acc += x;
  return acc / static_cast<double>(v.size());
}

double sample_std(const std::vector<double>& v) {
  if (v.size() < 2) return 0.0;
  const double mu = mean_of(v);
  double acc = 0.0;
  for (double x : v) acc += (x - mu) * (x - mu);
  return std::sqrt(acc / static_cast<double>(v.size() - 1));
}

}  // namespace

QuantizeOutput quantize_model(const ModelContainer& model, const std::vector<TokenSeq>& calib,
                              const QuantPlan& plan) {
  const auto t_start = std::chrono::steady_clock::now();
  plan.validate();
  if (model.precision != Precision::full) {
    throw std::invalid_argument("quantize_model: input container must be full-precision");
  }
  if (calib.empty()) throw std::invalid_argument("quantize_model: empty calibration set");
  const std::size_t t_len = calib.front().size();
  for (const auto& seq : calib) {
    if (seq.size() != t_len) throw std::invalid_argument("quantize_model: calibration sequences must share one length");
  }
  if (static_cast<int>(t_len) > model.arch.max_seq) {
    throw std::invalid_argument("quantize_model: calibration length exceeds max_seq");
  }

  QuantizeOutput out;
  out.report.plan = plan;
  out.report.tool_version = std::string(kVersion);

  ModelContainer work = fuse_norm_scales(model);
  if (plan.rotate) {
    const auto before = weight_range_stats(work);
    work = rotate_model(work, make_rotation(model.arch.d_model, plan.seed));
    const auto after = weight_range_stats(work);
    // Outlier summary over the tensors that will actually be quantized.
    double max_before = 0.0;
    double max_after = 0.0;
    auto track = [&](const std::string& name) {
      const TensorStats& b = before.at(name);
      const TensorStats& a = after.at(name);
      max_before = std::max(max_before, std::max(std::fabs(b.min), std::fabs(b.max)));
      max_after = std::max(max_after, std::max(std::fabs(a.min), std::fabs(a.max)));
    };
    for (int l = 0; l < model.arch.n_layers; ++l) {
      for (const auto& kind : layer_weight_names()) track(ModelContainer::layer_key(l, kind));
    }
    track("embedding");
    track("lm_head");
    log_info("rotation applied: quantized-weight max |w| ", max_before, " -> ", max_after);
  }

  if (plan.bits == 16) {
    // Passthrough: fuse + rotate only, nothing is quantized.
    out.model = std::move(work);
    out.report.total_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();
    return out;
  }

  std::vector<TokenSeq> expanded = expand_dataset(calib, ExpansionConfig{plan.expansion});
  if (plan.subsample && plan.expansion > 1) {
    // Fixed token budget: keep one sequence per original sample, cycling
    // through the rotation offsets so shifted positions still get coverage.
    std::vector<TokenSeq> picked;
    picked.reserve(calib.size());
    for (std::size_t s = 0; s < calib.size(); ++s) {
      picked.push_back(expanded[s * plan.expansion + s % plan.expansion]);
    }
    expanded = std::move(picked);
  }
  const TokenCounts counts = TokenCounts::from_corpus(expanded);
  const int n_samples = static_cast<int>(expanded.size());

  // Running activations: outputs of the already-quantized prefix of layers.
  std::vector<Matrix> z_cur(n_samples);
  for (int s = 0; s < n_samples; ++s) z_cur[s] = embed_tokens(work, expanded[s]);

  const std::vector<double> ones(t_len, 1.0);
  for (int l = 0; l < model.arch.n_layers; ++l) {
    std::map<std::string, HessianAccumulator> acc_weighted;
    std::map<std::string, HessianAccumulator> acc_uniform;
    for (const auto& kind : layer_weight_names()) {
      const int d_in = (kind == "wdown") ? model.arch.d_ff : model.arch.d_model;
      acc_weighted.emplace(kind, HessianAccumulator(d_in, plan.damp_lambda));
      acc_uniform.emplace(kind, HessianAccumulator(d_in, plan.damp_lambda));
    }

    bool need_attention = plan.strategy == Strategy::attn_con;
    for (const auto& entry : plan.per_weight) {
      need_attention = need_attention || entry.second == Strategy::attn_con;
    }
    for (int s = 0; s < n_samples; ++s) {
      const LayerTrace tr = forward_layer(work, l, z_cur[s], need_attention);
      if (!tr.z_out.all_finite()) {
        throw std::runtime_error("non-finite activation at layer " + std::to_string(l));
      }
      // One importance vector per (sample, layer), shared by all weights of
      // the layer unless a per-weight override says otherwise.
      std::map<Strategy, ImportanceVector> cache;
      auto importance = [&](Strategy strategy) -> const ImportanceVector& {
        auto it = cache.find(strategy);
        if (it == cache.end()) {
          it = cache.emplace(strategy, importance_for_trace(plan, strategy, tr, expanded[s], counts, l)).first;
        }
        return it->second;
      };
      for (const auto& kind : layer_weight_names()) {
        const auto ov = plan.per_weight.find(kind);
        const Strategy strategy = ov == plan.per_weight.end() ? plan.strategy : ov->second;
        const Matrix& x = trace_input(tr, kind);
        acc_weighted.at(kind).accumulate_rows(x, importance(strategy).values);
        acc_uniform.at(kind).accumulate_rows(x, ones);
      }
    }

    for (const auto& kind : layer_weight_names()) {
      const std::string key = ModelContainer::layer_key(l, kind);
      Tensor& tensor = work.tensor(key);
      const auto finalized = acc_weighted.at(kind).finalize();
      if (!finalized.dead_columns.empty()) {
        log_debug("layer ", l, " ", kind, ": ", finalized.dead_columns.size(), " dead input columns");
      }
      QuantizedWeight qw = gptq_quantize_weight(tensor.values, finalized.h, plan.bits, plan.group_size,
                                                &acc_weighted.at(kind).raw());
      WeightReport wr;
      wr.weighted_loss = qw.weighted_loss;
      wr.unweighted_loss = reconstruction_loss(tensor.values, qw.dequant, acc_uniform.at(kind).raw());
      out.report.weights[key] = wr;
      tensor.quant = std::move(qw.codes);
      tensor.values = dequantize(*tensor.quant, tensor.values.rows(), tensor.values.cols(), tensor.dtype);
    }
    log_info("layer ", l, " quantized");

    // Re-run the now-quantized block so the next layer calibrates on the
    // inputs it will actually see at inference time.
    for (int s = 0; s < n_samples; ++s) {
      z_cur[s] = forward_layer(work, l, z_cur[s], /*capture_attention=*/false).z_out;
    }
  }

  if (plan.quantize_embeddings) {
    {
      Tensor& emb = work.tensor("embedding");
      QuantizedWeight qw = rtn_quantize_weight(emb.values, plan.bits, plan.group_size);
      WeightReport wr;
      double frob = 0.0;
      for (std::size_t i = 0; i < emb.values.data().size(); ++i) {
        const double d = emb.values.data()[i] - qw.dequant.data()[i];
        frob += d * d;
      }
      wr.weighted_loss = frob;
      wr.unweighted_loss = frob;
      out.report.weights["embedding"] = wr;
      emb.quant = std::move(qw.codes);
      emb.values = dequantize(*emb.quant, emb.values.rows(), emb.values.cols(), emb.dtype);
    }
    {
      HessianAccumulator acc(model.arch.d_model, plan.damp_lambda);
      for (int s = 0; s < n_samples; ++s) {
        acc.accumulate_rows(final_norm_output(work, z_cur[s]), ones);
      }
      Tensor& head = work.tensor("lm_head");
      const auto finalized = acc.finalize();
      QuantizedWeight qw =
          gptq_quantize_weight(head.values, finalized.h, plan.bits, plan.group_size, &acc.raw());
      WeightReport wr;
      wr.weighted_loss = qw.weighted_loss;
      wr.unweighted_loss = qw.weighted_loss;
      out.report.weights["lm_head"] = wr;
      head.quant = std::move(qw.codes);
      head.values = dequantize(*head.quant, head.values.rows(), head.values.cols(), head.dtype);
    }
  }

  work.precision = Precision::quantized;
  work.validate();
  out.model = std::move(work);
  out.report.total_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();
  return out;
}

void evaluate_into_report(RunReport& report, const ModelContainer& quantized,
                          const ModelContainer* full_reference, const EvalSettings& eval) {
  if (eval.corpus.empty()) return;
  const int ctx = eval.context_len > 0 ? eval.context_len : static_cast<int>(eval.corpus.front().size());
  report.perplexity = perplexity(quantized, eval.corpus, ctx);
  report.retrieval_accuracy =
      retrieval_accuracy(quantized, eval.retrieval_pairs, report.plan.seed, eval.retrieval_prompts);
  if (full_reference != nullptr) {
    report.perplexity_full = perplexity(*full_reference, eval.corpus, ctx);
  }
}

namespace {

struct RunMetrics {
  std::vector<double> ppl;
  std::vector<double> loss;
  std::vector<double> retrieval;
};

RunMetrics run_configs(const ModelContainer& model, const std::vector<TokenSeq>& calib, QuantPlan plan,
                       const EvalSettings& eval, const std::vector<std::uint64_t>& seeds,
                       bool with_retrieval) {
  RunMetrics m;
  for (std::uint64_t seed : seeds) {
    plan.seed = seed;
    QuantizeOutput out = quantize_model(model, calib, plan);
    evaluate_into_report(out.report, out.model, nullptr, eval);
    m.ppl.push_back(out.report.perplexity.value_or(0.0));
    m.loss.push_back(out.report.mean_weighted_loss());
    if (with_retrieval) m.retrieval.push_back(out.report.retrieval_accuracy.value_or(0.0));
  }
  return m;
}

}  // namespace

FlatTable chunk_ablation(const ModelContainer& model, const std::vector<TokenSeq>& calib,
                         const QuantPlan& plan, int n_chunks, const EvalSettings& eval,
                         const std::vector<std::uint64_t>& seeds) {
  if (n_chunks < 1) throw std::invalid_argument("chunk_ablation: n_chunks must be >= 1");
  const int t_len = static_cast<int>(calib.front().size());
  if (t_len % n_chunks != 0) {
    throw std::invalid_argument("chunk_ablation: n_chunks must divide the sequence length");
  }
  FlatTable table;
  table.header = {"config", "perplexity_mean", "perplexity_std", "recon_loss_mean", "recon_loss_std"};
  auto add_row = [&](const std::string& name, const RunMetrics& m) {
    table.rows.push_back({name, format_float(mean_of(m.ppl)), format_float(sample_std(m.ppl)),
                          format_float(mean_of(m.loss)), format_float(sample_std(m.loss))});
  };
  {
    QuantPlan uniform_plan = plan;
    uniform_plan.strategy = Strategy::uniform;
    add_row("uniform", run_configs(model, calib, uniform_plan, eval, seeds, false));
  }
  for (int k = 0; k < n_chunks; ++k) {
    QuantPlan chunk_plan = plan;
    chunk_plan.strategy = Strategy::chunk;
    chunk_plan.chunk_index = k;
    chunk_plan.n_chunks = n_chunks;
    add_row("chunk-" + std::to_string(k + 1), run_configs(model, calib, chunk_plan, eval, seeds, false));
  }
  return table;
}

SweepAxis parse_sweep_axis(const std::string& name) {
  if (name == "n") return SweepAxis::n;
  if (name == "r_min" || name == "r-min") return SweepAxis::r_min;
  if (name == "expansion") return SweepAxis::expansion;
  throw std::invalid_argument("unknown sweep axis '" + name + "' (expected n|r_min|expansion)");
}

FlatTable sweep(const ModelContainer& model, const std::vector<TokenSeq>& calib, const QuantPlan& base_plan,
                SweepAxis axis, const std::vector<double>& values, const EvalSettings& eval,
                const std::vector<std::uint64_t>& seeds) {
  if (values.empty()) throw std::invalid_argument("sweep: no values");
  FlatTable table;
  table.header = {"value", "perplexity_mean", "perplexity_std", "recon_loss_mean", "recon_loss_std"};
  for (double value : values) {
    QuantPlan plan = base_plan;
    switch (axis) {
      case SweepAxis::n:
        if (plan.strategy != Strategy::first_n && plan.strategy != Strategy::first_last_n) {
          throw std::invalid_argument("sweep over n needs strategy first-n or first-last-n");
        }
        plan.strategy_n = static_cast<int>(value);
        break;
      case SweepAxis::r_min:
        if (!strategy_is_dynamic(plan.strategy)) {
          throw std::invalid_argument("sweep over r_min needs a dynamic strategy");
        }
        plan.r_min = value;
        break;
      case SweepAxis::expansion:
        plan.expansion = static_cast<int>(value);
        break;
    }
    const RunMetrics m = run_configs(model, calib, plan, eval, seeds, false);
    table.rows.push_back({format_float(value), format_float(mean_of(m.ppl)), format_float(sample_std(m.ppl)),
                          format_float(mean_of(m.loss)), format_float(sample_std(m.loss))});
  }
  return table;
}

FlatTable compare_strategies(const ModelContainer& model, const std::vector<TokenSeq>& calib,
                             const QuantPlan& plan, const EvalSettings& eval,
                             const std::vector<std::uint64_t>& seeds) {
  FlatTable table;
  table.header = {"config",         "perplexity_mean", "perplexity_std", "retrieval_mean",
                  "retrieval_std",  "recon_loss_mean", "recon_loss_std"};
  QuantPlan uniform_plan = plan;
  uniform_plan.strategy = Strategy::uniform;
  const RunMetrics base = run_configs(model, calib, uniform_plan, eval, seeds, true);
  const RunMetrics ours = run_configs(model, calib, plan, eval, seeds, true);
  auto add_row = [&](const std::string& name, const RunMetrics& m) {
    table.rows.push_back({name, format_float(mean_of(m.ppl)), format_float(sample_std(m.ppl)),
                          format_float(mean_of(m.retrieval)), format_float(sample_std(m.retrieval)),
                          format_float(mean_of(m.loss)), format_float(sample_std(m.loss))});
  };
  add_row("uniform", base);
  add_row(strategy_name(plan.strategy), ours);
  table.rows.push_back({"delta", format_float(mean_of(ours.ppl) - mean_of(base.ppl)), "-",
                        format_float(mean_of(ours.retrieval) - mean_of(base.retrieval)), "-",
                        format_float(mean_of(ours.loss) - mean_of(base.loss)), "-"});
  return table;
}

}  // namespace rsq
