#include "rsq/eval.hpp"

#include <cmath>
#include <stdexcept>

#include "rsq/rng.hpp"

namespace rsq {

namespace {

// Log-softmax denominator for one logits row.
double log_sum_exp(const double* row, int n) {
  double mx = row[0];
  for (int i = 1; i < n; ++i) mx = std::max(mx, row[i]);
  double acc = 0.0;
  for (int i = 0; i < n; ++i) acc += std::exp(row[i] - mx);
  return mx + std::log(acc);
}

int argmax(const double* row, int n) {
  int best = 0;
  for (int i = 1; i < n; ++i) {
    if (row[i] > row[best]) best = i;
  }
  return best;
}

}  // namespace

double perplexity(const ModelContainer& model, const std::vector<TokenSeq>& corpus, int context_len) {
  if (corpus.empty()) throw std::invalid_argument("perplexity: empty corpus");
  if (context_len < 2) throw std::invalid_argument("perplexity: context_len must be >= 2");
  double nll = 0.0;
  long long predicted = 0;
  for (const TokenSeq& seq : corpus) {
    if (seq.size() < 2) throw std::invalid_argument("perplexity: sequences must have length >= 2");
    for (std::size_t begin = 0; begin + 1 < seq.size(); begin += context_len) {
      const std::size_t end = std::min(seq.size(), begin + context_len);
      if (end - begin < 2) break;
      const TokenSeq window(seq.begin() + begin, seq.begin() + end);
      const Matrix logits = forward(model, window);
      for (std::size_t i = 0; i + 1 < window.size(); ++i) {
        const double* row = logits.row(static_cast<int>(i));
        nll += log_sum_exp(row, model.arch.vocab) - row[window[i + 1]];
        ++predicted;
      }
    }
  }
  return std::exp(nll / static_cast<double>(predicted));
}

double retrieval_accuracy(const ModelContainer& model, int n_pairs, std::uint64_t seed, int n_prompts) {
  const int vocab = model.arch.vocab;
  const int prompt_len = 2 * n_pairs + 1;
  if (n_pairs < 1) throw std::invalid_argument("retrieval: n_pairs must be >= 1");
  if (prompt_len > model.arch.max_seq) {
    throw std::invalid_argument("retrieval: prompt of " + std::to_string(prompt_len) +
                                " tokens exceeds max_seq " + std::to_string(model.arch.max_seq));
  }
  Rng rng(derive_seed(seed, SeedStage::retrieval));
  int hits = 0;
  for (int p = 0; p < n_prompts; ++p) {
    // Distinct keys so the query is unambiguous.
    std::vector<std::int32_t> keys;
    while (static_cast<int>(keys.size()) < n_pairs) {
      const auto k = static_cast<std::int32_t>(rng.uniform_int(vocab));
      bool dup = false;
      for (std::int32_t existing : keys) dup = dup || existing == k;
      if (!dup) keys.push_back(k);
    }
    TokenSeq prompt;
    std::vector<std::int32_t> values(n_pairs);
    for (int i = 0; i < n_pairs; ++i) {
      values[i] = static_cast<std::int32_t>(rng.uniform_int(vocab));
      prompt.push_back(keys[i]);
      prompt.push_back(values[i]);
    }
    const int query = static_cast<int>(rng.uniform_int(n_pairs));
    prompt.push_back(keys[query]);
    const Matrix logits = forward(model, prompt);
    const int guess = argmax(logits.row(prompt_len - 1), vocab);
    if (guess == values[query]) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(n_prompts);
}

}  // namespace rsq
