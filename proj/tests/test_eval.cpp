#include <doctest.h>

#include <stdexcept>

#include <cmath>

#include "rsq/eval.hpp"
#include "rsq/model.hpp"
#include "rsq/rotate.hpp"
#include "rsq/rng.hpp"

using namespace rsq;

namespace {

ModelArch arch16() {
  ModelArch a;
  a.n_layers = 1;
  a.d_model = 16;
  a.n_heads = 2;
  a.d_ff = 32;
  a.vocab = 16;
  a.max_seq = 32;
  return a;
}

// All layer weights zero: blocks are identity maps on the residual stream.
ModelContainer passthrough_model() {
  ModelContainer m = generate_model(arch16(), 1);
  for (const auto& kind : layer_weight_names()) {
    for (double& v : m.tensor(ModelContainer::layer_key(0, kind)).values.data()) v = 0.0;
  }
  for (double& v : m.tensor("pos_embedding").values.data()) v = 0.0;
  for (double& v : m.tensor(ModelContainer::layer_key(0, "norm1_scale")).values.data()) v = 1.0;
  for (double& v : m.tensor(ModelContainer::layer_key(0, "norm2_scale")).values.data()) v = 1.0;
  for (double& v : m.tensor("final_norm_scale").values.data()) v = 1.0;
  return m;
}

}  // namespace

TEST_SUITE("eval") {

TEST_CASE("uniform logits give perplexity = vocab") {
  ModelContainer m = passthrough_model();
  for (double& v : m.tensor("lm_head").values.data()) v = 0.0;
  const auto corpus = gen_corpus(16, 4, 16, 3);
  CHECK(perplexity(m, corpus, 16) == doctest::Approx(16.0).epsilon(1e-9));
}

TEST_CASE("an oracle next-token model reaches perplexity 1") {
  // One-hot embeddings scaled huge + identity lm_head: probability mass
  // collapses onto the repeated token of a constant sequence.
  ModelContainer m = passthrough_model();
  {
    Matrix& e = m.tensor("embedding").values;
    for (double& v : e.data()) v = 0.0;
    for (int t = 0; t < 16; ++t) e.at(t, t) = 1000.0;
    Matrix& head = m.tensor("lm_head").values;
    for (double& v : head.data()) v = 0.0;
    for (int t = 0; t < 16; ++t) head.at(t, t) = 1000.0;
  }
  std::vector<TokenSeq> corpus;
  for (int c = 0; c < 4; ++c) corpus.push_back(TokenSeq(12, c));
  CHECK(perplexity(m, corpus, 12) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("perplexity respects the context window split") {
  const ModelContainer m = generate_model(arch16(), 5);
  const auto corpus = gen_corpus(16, 2, 16, 7);
  const double full = perplexity(m, corpus, 16);
  const double halved = perplexity(m, corpus, 8);
  CHECK(full > 1.0);
  CHECK(halved > 1.0);
  CHECK(full != halved);  // fewer conditioning tokens per window
  // A window longer than the sequence degenerates to one window per sequence.
  CHECK(perplexity(m, corpus, 32) == full);
}

TEST_CASE("retrieval accuracy: deterministic, near chance for a random model") {
  const ModelContainer m = generate_model(arch16(), 9);
  const double a = retrieval_accuracy(m, 4, 11, 256);
  const double b = retrieval_accuracy(m, 4, 11, 256);
  CHECK(a == b);
  CHECK(a <= 0.15);  // chance level is 1/16
  CHECK_THROWS_AS(retrieval_accuracy(m, 100, 11, 4), std::invalid_argument);
}

TEST_CASE("perplexity is invariant under fuse + rotate within 1e-3 relative") {
  const ModelContainer m = generate_model(arch16(), 13);
  const ModelContainer rotated = rotate_model(fuse_norm_scales(m), make_rotation(16, 13));
  const auto corpus = gen_corpus(16, 4, 16, 17);
  const double before = perplexity(m, corpus, 16);
  const double after = perplexity(rotated, corpus, 16);
  CHECK(std::fabs(after - before) / before < 1e-3);
}

TEST_CASE("empty corpus is rejected") {
  const ModelContainer m = generate_model(arch16(), 15);
  CHECK_THROWS_AS(perplexity(m, {}, 8), std::invalid_argument);
}

}  // TEST_SUITE
