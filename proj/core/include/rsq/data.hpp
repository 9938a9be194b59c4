#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace rsq {

using TokenSeq = std::vector<std::int32_t>;

/// Seeded synthetic corpus: marginal token frequencies follow an approximate
/// Zipf law (exponent 1.1) and half of the transitions are an order-2 Markov
/// lookup, so both frequency- and attention-based importance signals have
/// structure to latch onto. The bigram transition table is a fixed property
/// of the generator; the seed only drives the sampling stream, so corpora
/// from different seeds are disjoint draws from the same language.
std::vector<TokenSeq> gen_corpus(int vocab, int n_samples, int seq_len, std::uint64_t seed);

/// Byte-level tokenization: ids 0..255.
TokenSeq tokenize_bytes(std::string_view text);

/// Token file format "RSQT": magic, version, n_samples, seq_len (u32 LE each),
/// then ids as u32 LE. All samples share one length.
void write_token_file(const std::string& path, const std::vector<TokenSeq>& samples);
std::vector<TokenSeq> read_token_file(const std::string& path);

}  // namespace rsq
