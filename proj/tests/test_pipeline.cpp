#include <doctest.h>

#include <stdexcept>

#include "rsq/model_io.hpp"
#include "rsq/pipeline.hpp"
#include "rsq/rng.hpp"
#include "test_util.hpp"

using namespace rsq;
using namespace rsq::testing;

namespace {

ModelArch small_arch(int layers = 2) {
  ModelArch a;
  a.n_layers = layers;
  a.d_model = 32;
  a.n_heads = 4;
  a.d_ff = 64;
  a.vocab = 64;
  a.max_seq = 64;
  return a;
}

QuantPlan small_plan() {
  QuantPlan plan;
  plan.bits = 3;
  plan.expansion = 2;
  plan.seed = 5;
  return plan;
}

bool containers_identical(const ModelContainer& a, const ModelContainer& b) {
  if (a.tensors.size() != b.tensors.size()) return false;
  for (const auto& [name, t] : a.tensors) {
    const Tensor& u = b.tensors.at(name);
    if (t.values.data() != u.values.data()) return false;
    if (t.quantized() != u.quantized()) return false;
    if (t.quantized()) {
      if (t.quant->codes != u.quant->codes) return false;
      if (t.quant->scales != u.quant->scales) return false;
      if (t.quant->zeros != u.quant->zeros) return false;
    }
  }
  return true;
}

}  // namespace

TEST_SUITE("pipeline") {

TEST_CASE("end-to-end smoke run emits per-weight losses and a usable model") {
  const auto model = generate_model(small_arch(), 1);
  const auto calib = gen_corpus(64, 4, 32, 2);
  const auto out = quantize_model(model, calib, small_plan());

  int layer_entries = 0;
  for (const auto& [name, w] : out.report.weights) {
    CHECK(w.weighted_loss >= 0.0);
    CHECK(w.unweighted_loss >= 0.0);
    if (name.rfind("layers.", 0) == 0) ++layer_entries;
  }
  CHECK(layer_entries == 2 * 7);
  CHECK(out.report.weights.count("embedding") == 1);
  CHECK(out.report.weights.count("lm_head") == 1);
  CHECK(out.model.precision == Precision::quantized);
  CHECK_NOTHROW(out.model.validate());
  CHECK_NOTHROW(forward(out.model, calib[0]));

  // A 3-bit model should still be a language model of the same shape.
  const auto eval_corpus = gen_corpus(64, 2, 32, 99);
  const double ppl = perplexity(out.model, eval_corpus, 32);
  CHECK(ppl >= 1.0);
  CHECK(ppl < 1e4);
}

TEST_CASE("first-n with N = T reproduces the uniform baseline bit for bit") {
  const auto model = generate_model(small_arch(), 2);
  const auto calib = gen_corpus(64, 3, 32, 3);
  QuantPlan uniform = small_plan();
  uniform.strategy = Strategy::uniform;
  QuantPlan first = small_plan();
  first.strategy = Strategy::first_n;
  first.strategy_n = 32;
  const auto a = quantize_model(model, calib, uniform);
  const auto b = quantize_model(model, calib, first);
  CHECK(containers_identical(a.model, b.model));
  for (const auto& [name, w] : a.report.weights) {
    CHECK(w.weighted_loss == b.report.weights.at(name).weighted_loss);
  }
}

TEST_CASE("plain-GPTQ path: no rotation plus uniform weighting, two spellings agree") {
  const auto model = generate_model(small_arch(), 3);
  const auto calib = gen_corpus(64, 3, 32, 4);
  QuantPlan uniform = small_plan();
  uniform.strategy = Strategy::uniform;
  uniform.rotate = false;
  QuantPlan first = uniform;
  first.strategy = Strategy::first_n;
  first.strategy_n = 32;
  const auto a = quantize_model(model, calib, uniform);
  const auto b = quantize_model(model, calib, first);
  CHECK(containers_identical(a.model, b.model));
  for (const auto& [name, w] : a.report.weights) {
    CHECK(w.weighted_loss == b.report.weights.at(name).weighted_loss);
    CHECK(w.unweighted_loss == b.report.weights.at(name).unweighted_loss);
  }
}

TEST_CASE("bits=16 passthrough preserves logits through fuse + rotate") {
  const auto model = generate_model(small_arch(), 4);
  const auto calib = gen_corpus(64, 2, 32, 5);
  QuantPlan plan = small_plan();
  plan.bits = 16;
  const auto out = quantize_model(model, calib, plan);
  CHECK(out.model.precision == Precision::full);
  Rng rng(6);
  for (int it = 0; it < 4; ++it) {
    TokenSeq tokens(16);
    for (auto& t : tokens) t = static_cast<std::int32_t>(rng.uniform_int(64));
    CHECK(rel_dev(forward(out.model, tokens), forward(model, tokens)) < 1e-4);
  }
}

TEST_CASE("identical plans and seeds give identical containers and reports") {
  const auto model = generate_model(small_arch(), 7);
  const auto calib = gen_corpus(64, 3, 32, 8);
  const QuantPlan plan = small_plan();
  const auto a = quantize_model(model, calib, plan);
  const auto b = quantize_model(model, calib, plan);
  CHECK(containers_identical(a.model, b.model));
  CHECK(emit_report_text(a.report, false) == emit_report_text(b.report, false));
}

TEST_CASE("layer quantization depends only on the quantized prefix") {
  // A 1-layer clone of a 2-layer model must reproduce layer 0's codes exactly:
  // later layers cannot influence earlier calibration.
  const auto two = generate_model(small_arch(2), 9);
  ModelContainer one;
  one.arch = small_arch(1);
  one.precision = Precision::full;
  one.dtype = two.dtype;
  for (const auto& name : {"embedding", "pos_embedding", "lm_head", "final_norm_scale"}) {
    one.tensors[name] = two.tensors.at(name);
  }
  for (const auto& kind : layer_weight_names()) {
    one.tensors[ModelContainer::layer_key(0, kind)] = two.tensors.at(ModelContainer::layer_key(0, kind));
  }
  one.tensors[ModelContainer::layer_key(0, "norm1_scale")] =
      two.tensors.at(ModelContainer::layer_key(0, "norm1_scale"));
  one.tensors[ModelContainer::layer_key(0, "norm2_scale")] =
      two.tensors.at(ModelContainer::layer_key(0, "norm2_scale"));
  one.validate();

  const auto calib = gen_corpus(64, 3, 32, 10);
  const QuantPlan plan = small_plan();
  const auto out_two = quantize_model(two, calib, plan);
  const auto out_one = quantize_model(one, calib, plan);
  for (const auto& kind : layer_weight_names()) {
    const std::string key = ModelContainer::layer_key(0, kind);
    CHECK(out_two.model.tensor(key).quant->codes == out_one.model.tensor(key).quant->codes);
  }
}

TEST_CASE("per-weight strategy override changes only the targeted weight") {
  const auto model = generate_model(small_arch(1), 11);
  const auto calib = gen_corpus(64, 3, 32, 12);
  QuantPlan uniform = small_plan();
  uniform.strategy = Strategy::uniform;
  QuantPlan override_v = uniform;
  override_v.per_weight["wv"] = Strategy::attn_con;
  const auto a = quantize_model(model, calib, uniform);
  const auto b = quantize_model(model, calib, override_v);
  CHECK(a.model.tensor(ModelContainer::layer_key(0, "wq")).quant->codes ==
        b.model.tensor(ModelContainer::layer_key(0, "wq")).quant->codes);
  CHECK(a.model.tensor(ModelContainer::layer_key(0, "wv")).quant->codes !=
        b.model.tensor(ModelContainer::layer_key(0, "wv")).quant->codes);
}

TEST_CASE("subsampling keeps the token budget fixed but mixes in rotations") {
  const auto model = generate_model(small_arch(1), 28);
  const auto calib = gen_corpus(64, 4, 32, 29);
  QuantPlan plain = small_plan();
  plain.expansion = 1;
  QuantPlan sub = small_plan();
  sub.expansion = 4;
  sub.subsample = true;
  const auto a = quantize_model(model, calib, plain);
  const auto b = quantize_model(model, calib, sub);
  // Same sample count flowed through, but rotated sequences change the codes.
  CHECK(!containers_identical(a.model, b.model));
  CHECK(b.report.weights.size() == a.report.weights.size());
}

TEST_CASE("keep-embeddings leaves the lookup tables in full precision") {
  const auto model = generate_model(small_arch(1), 13);
  const auto calib = gen_corpus(64, 2, 32, 14);
  QuantPlan plan = small_plan();
  plan.quantize_embeddings = false;
  const auto out = quantize_model(model, calib, plan);
  CHECK(!out.model.tensor("embedding").quantized());
  CHECK(!out.model.tensor("lm_head").quantized());
  CHECK(out.model.tensor(ModelContainer::layer_key(0, "wq")).quantized());
}

TEST_CASE("chunk ablation emits one row per configuration") {
  const auto model = generate_model(small_arch(1), 15);
  const auto calib = gen_corpus(64, 2, 32, 16);
  EvalSettings eval;
  eval.corpus = gen_corpus(64, 2, 32, 17);
  QuantPlan plan = small_plan();
  plan.expansion = 1;
  const auto table = chunk_ablation(model, calib, plan, 4, eval, {5ull});
  CHECK(table.rows.size() == 5);
  CHECK(table.rows[0][0] == "uniform");
  CHECK(table.rows[1][0] == "chunk-1");
  CHECK(table.header.size() == 5);
  CHECK_THROWS_AS(chunk_ablation(model, calib, plan, 5, eval, {5ull}), std::invalid_argument);
}

TEST_CASE("sweep emits one row per value and validates the axis") {
  const auto model = generate_model(small_arch(1), 18);
  const auto calib = gen_corpus(64, 2, 32, 19);
  EvalSettings eval;
  eval.corpus = gen_corpus(64, 2, 32, 20);
  QuantPlan plan = small_plan();
  plan.expansion = 1;
  const auto table = sweep(model, calib, plan, SweepAxis::r_min, {0.01, 0.1}, eval, {5ull});
  CHECK(table.rows.size() == 2);

  QuantPlan heuristic = plan;
  heuristic.strategy = Strategy::first_n;
  const auto table_n = sweep(model, calib, heuristic, SweepAxis::n, {16, 32}, eval, {5ull});
  CHECK(table_n.rows.size() == 2);

  CHECK_THROWS_AS(sweep(model, calib, plan, SweepAxis::n, {16}, eval, {5ull}), std::invalid_argument);
  CHECK_THROWS_AS(sweep(model, calib, heuristic, SweepAxis::r_min, {0.01}, eval, {5ull}),
                  std::invalid_argument);
}

TEST_CASE("sweeping N at the full length lands on the uniform baseline") {
  const auto model = generate_model(small_arch(1), 21);
  const auto calib = gen_corpus(64, 2, 32, 22);
  EvalSettings eval;
  eval.corpus = gen_corpus(64, 2, 32, 23);
  QuantPlan plan = small_plan();
  plan.expansion = 1;
  plan.strategy = Strategy::first_n;
  const auto swept = sweep(model, calib, plan, SweepAxis::n, {32}, eval, {5ull});
  QuantPlan uniform = plan;
  uniform.strategy = Strategy::uniform;
  const auto out = quantize_model(model, calib, uniform);
  RunReport report = out.report;
  evaluate_into_report(report, out.model, nullptr, eval);
  CHECK(swept.rows[0][1] == format_float(report.perplexity.value()));
}

TEST_CASE("compare table: uniform row, strategy row, delta row") {
  const auto model = generate_model(small_arch(1), 24);
  const auto calib = gen_corpus(64, 2, 32, 25);
  EvalSettings eval;
  eval.corpus = gen_corpus(64, 2, 32, 26);
  eval.retrieval_prompts = 16;
  QuantPlan plan = small_plan();
  plan.expansion = 1;
  const auto table = compare_strategies(model, calib, plan, eval, {5ull, 6ull});
  REQUIRE(table.rows.size() == 3);
  CHECK(table.rows[0][0] == "uniform");
  CHECK(table.rows[1][0] == "attn-con");
  CHECK(table.rows[2][0] == "delta");
  CHECK(table.header.size() == 7);
}

TEST_CASE("f64 containers run through the full pipeline") {
  const auto model = generate_model(small_arch(1), 30, Dtype::f64);
  const auto calib = gen_corpus(64, 2, 32, 31);
  QuantPlan plan = small_plan();
  plan.expansion = 1;
  const auto out = quantize_model(model, calib, plan);
  CHECK(out.model.dtype == Dtype::f64);
  CHECK(out.model.tensor(ModelContainer::layer_key(0, "wq")).quantized());
  CHECK_NOTHROW(forward(out.model, calib[0]));
}

TEST_CASE("bad calibration inputs are rejected") {
  const auto model = generate_model(small_arch(1), 27);
  CHECK_THROWS_AS(quantize_model(model, {}, small_plan()), std::invalid_argument);
  CHECK_THROWS_AS(quantize_model(model, {TokenSeq(8, 1), TokenSeq(9, 1)}, small_plan()),
                  std::invalid_argument);
  CHECK_THROWS_AS(quantize_model(model, {TokenSeq(65, 1)}, small_plan()), std::invalid_argument);
}

}  // TEST_SUITE
