#pragma once

#include <cstdint>
#include <vector>

#include "rsq/data.hpp"
#include "rsq/model.hpp"

namespace rsq {

/// exp(mean next-token negative log-likelihood) over all predicted positions,
/// with each sequence split into non-overlapping windows of `context_len`.
double perplexity(const ModelContainer& model, const std::vector<TokenSeq>& corpus, int context_len);

/// Synthetic key-value retrieval: prompts of `n_pairs` (key, value) token
/// pairs followed by a query key; the model greedily decodes the value.
/// Returns the exact-match fraction over `n_prompts` prompts.
double retrieval_accuracy(const ModelContainer& model, int n_pairs, std::uint64_t seed, int n_prompts = 128);

}  // namespace rsq
