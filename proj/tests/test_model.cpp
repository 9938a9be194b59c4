#include <doctest.h>

#include <stdexcept>

#include <cstdio>
#include <fstream>

#include "rsq/model.hpp"
#include "rsq/model_io.hpp"
#include "rsq/quantize.hpp"
#include "rsq/rng.hpp"
#include "test_util.hpp"

using namespace rsq;
using namespace rsq::testing;

namespace {

ModelArch tiny_arch() {
  ModelArch arch;
  arch.n_layers = 2;
  arch.d_model = 32;
  arch.n_heads = 4;
  arch.d_ff = 64;
  arch.vocab = 64;
  arch.max_seq = 64;
  return arch;
}

TokenSeq random_tokens(int t_len, int vocab, Rng& rng) {
  TokenSeq seq(t_len);
  for (auto& t : seq) t = static_cast<std::int32_t>(rng.uniform_int(vocab));
  return seq;
}

}  // namespace

TEST_SUITE("model") {

TEST_CASE("generation is deterministic and shaped by the arch") {
  const auto a = generate_model(tiny_arch(), 5);
  const auto b = generate_model(tiny_arch(), 5);
  for (const auto& [name, t] : a.tensors) {
    CHECK(t.values.data() == b.tensors.at(name).values.data());
  }
  CHECK(a.tensor(ModelContainer::layer_key(0, "wq")).values.rows() == 32);
  CHECK(a.tensor(ModelContainer::layer_key(0, "wq")).values.cols() == 32);
  CHECK(a.tensor(ModelContainer::layer_key(1, "wup")).values.rows() == 64);
  CHECK(a.tensor("embedding").values.rows() == 64);

  // Norm scales are drawn away from one so fusion stays nontrivial.
  bool any_nonunit = false;
  for (double v : a.tensor(ModelContainer::layer_key(0, "norm1_scale")).values.data()) {
    any_nonunit = any_nonunit || v != 1.0;
  }
  CHECK(any_nonunit);
}

TEST_CASE("forward shape and token validation") {
  const auto model = generate_model(tiny_arch(), 5);
  const Matrix logits = forward(model, {3});
  CHECK(logits.rows() == 1);
  CHECK(logits.cols() == 64);

  CHECK_THROWS_WITH_AS(forward(model, {3, 99}), doctest::Contains("position 1"), std::invalid_argument);
  CHECK_THROWS_AS(forward(model, TokenSeq(65, 1)), std::invalid_argument);
}

TEST_CASE("causality: a suffix change leaves prefix logits bit-identical") {
  const auto model = generate_model(tiny_arch(), 6);
  Rng rng(1);
  TokenSeq tokens = random_tokens(16, 64, rng);
  const Matrix base = forward(model, tokens);
  TokenSeq mutated = tokens;
  mutated[10] = (mutated[10] + 1) % 64;
  const Matrix changed = forward(model, mutated);
  for (int i = 0; i < 10; ++i) {
    for (int v = 0; v < 64; ++v) CHECK(base.at(i, v) == changed.at(i, v));
  }
  // ...and the perturbed position itself does change.
  CHECK(max_abs_diff(submatrix(base, 10, 16, 0, 64), submatrix(changed, 10, 16, 0, 64)) > 0.0);
}

TEST_CASE("attention maps are causal row-stochastic") {
  const auto model = generate_model(tiny_arch(), 7);
  Rng rng(2);
  const auto traced = forward_with_trace(model, random_tokens(12, 64, rng));
  REQUIRE(traced.layers.size() == 2);
  for (const auto& layer : traced.layers) {
    REQUIRE(layer.attn.size() == 4);
    for (const auto& head : layer.attn) {
      for (int i = 0; i < head.rows(); ++i) {
        double sum = 0.0;
        for (int j = 0; j < head.cols(); ++j) {
          sum += head.at(i, j);
          CHECK(head.at(i, j) >= 0.0);
          if (j > i) CHECK(head.at(i, j) == 0.0);  // exact zero above the diagonal
        }
        CHECK(sum == doctest::Approx(1.0).epsilon(1e-6));
      }
    }
  }
}

TEST_CASE("trace chains layer outputs into the next layer's input") {
  const auto model = generate_model(tiny_arch(), 8);
  Rng rng(3);
  const auto tokens = random_tokens(10, 64, rng);
  const auto traced = forward_with_trace(model, tokens);
  CHECK(max_abs_diff(traced.layers[0].z_out, traced.layers[1].z_in) == 0.0);
  // Recompute one block in isolation from its captured input.
  const LayerTrace redo = forward_layer(model, 1, traced.layers[1].z_in, true);
  CHECK(max_abs_diff(redo.z_out, traced.layers[1].z_out) < 1e-6);
  CHECK(max_abs_diff(forward(model, tokens), traced.logits) == 0.0);
}

TEST_CASE("fusing unit scales is a no-op") {
  auto model = generate_model(tiny_arch(), 9);
  for (int l = 0; l < 2; ++l) {
    for (double& v : model.tensor(ModelContainer::layer_key(l, "norm1_scale")).values.data()) v = 1.0;
    for (double& v : model.tensor(ModelContainer::layer_key(l, "norm2_scale")).values.data()) v = 1.0;
  }
  for (double& v : model.tensor("final_norm_scale").values.data()) v = 1.0;
  const auto fused = fuse_norm_scales(model);
  for (const auto& [name, t] : model.tensors) {
    CHECK(t.values.data() == fused.tensors.at(name).values.data());
  }
}

TEST_CASE("a scalar norm scale doubles the consuming weight's columns") {
  auto model = generate_model(tiny_arch(), 10);
  for (double& v : model.tensor(ModelContainer::layer_key(0, "norm1_scale")).values.data()) v = 2.0;
  const auto fused = fuse_norm_scales(model);
  const Matrix& wq_before = model.tensor(ModelContainer::layer_key(0, "wq")).values;
  const Matrix& wq_after = fused.tensor(ModelContainer::layer_key(0, "wq")).values;
  for (int r = 0; r < wq_before.rows(); ++r) {
    for (int c = 0; c < wq_before.cols(); ++c) {
      CHECK(wq_after.at(r, c) == doctest::Approx(2.0 * wq_before.at(r, c)));
    }
  }
  for (double v : fused.tensor(ModelContainer::layer_key(0, "norm1_scale")).values.data()) CHECK(v == 1.0);
}

TEST_CASE("fusion preserves logits within 1e-5 relative") {
  const auto model = generate_model(tiny_arch(), 11);
  const auto fused = fuse_norm_scales(model);
  CHECK(norm_scales_are_unit(fused));
  Rng rng(4);
  for (int it = 0; it < 4; ++it) {
    const auto tokens = random_tokens(14, 64, rng);
    CHECK(rel_dev(forward(fused, tokens), forward(model, tokens)) < 1e-5);
  }
}

TEST_CASE("quantized forward equals full-precision forward on dequantized tensors") {
  const auto model = generate_model(tiny_arch(), 12);
  ModelContainer quantized = model;
  ModelContainer dequantized = model;
  for (int l = 0; l < 2; ++l) {
    for (const auto& kind : layer_weight_names()) {
      const std::string key = ModelContainer::layer_key(l, kind);
      Tensor& qt = quantized.tensor(key);
      QuantizedWeight qw = rtn_quantize_weight(qt.values, 4, 0);
      qt.quant = std::move(qw.codes);
      qt.values = dequantize(*qt.quant, qt.values.rows(), qt.values.cols(), qt.dtype);
      dequantized.tensor(key).values = qt.values;
    }
  }
  quantized.precision = Precision::quantized;
  Rng rng(5);
  const auto tokens = random_tokens(9, 64, rng);
  CHECK(max_abs_diff(forward(quantized, tokens), forward(dequantized, tokens)) == 0.0);
}

TEST_CASE("model file round trip is exact, full precision and quantized") {
  const auto model = generate_model(tiny_arch(), 13);
  const std::string path = "test_model_roundtrip.rsqm";
  write_model(model, path);
  const auto back = read_model(path);
  CHECK(back.arch.d_model == model.arch.d_model);
  for (const auto& [name, t] : model.tensors) {
    CHECK(t.values.data() == back.tensors.at(name).values.data());
  }

  ModelContainer quantized = model;
  Tensor& wq = quantized.tensor(ModelContainer::layer_key(0, "wq"));
  QuantizedWeight qw = rtn_quantize_weight(wq.values, 3, 8);
  wq.quant = std::move(qw.codes);
  wq.values = dequantize(*wq.quant, wq.values.rows(), wq.values.cols(), wq.dtype);
  quantized.precision = Precision::quantized;
  write_model(quantized, path);
  const auto qback = read_model(path);
  const Tensor& wq_back = qback.tensor(ModelContainer::layer_key(0, "wq"));
  REQUIRE(wq_back.quantized());
  CHECK(wq_back.quant->codes == wq.quant->codes);
  CHECK(wq_back.quant->scales == wq.quant->scales);
  CHECK(wq_back.quant->zeros == wq.quant->zeros);
  CHECK(wq_back.values.data() == wq.values.data());
  std::remove(path.c_str());
}

TEST_CASE("f64 mode stores doubles losslessly") {
  const auto model = generate_model(tiny_arch(), 14, Dtype::f64);
  const std::string path = "test_model_f64.rsqm";
  write_model(model, path);
  const auto back = read_model(path);
  CHECK(back.dtype == Dtype::f64);
  for (const auto& [name, t] : model.tensors) {
    CHECK(t.values.data() == back.tensors.at(name).values.data());
  }
  std::remove(path.c_str());
}

TEST_CASE("corrupt model files are rejected") {
  const std::string path = "test_model_bad.rsqm";
  {
    std::ofstream os(path, std::ios::binary);
    os << "JUNKJUNKJUNKJUNK";
  }
  CHECK_THROWS_WITH_AS(read_model(path), doctest::Contains("magic"), std::runtime_error);
  std::remove(path.c_str());
}

}  // TEST_SUITE
