#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "mssnn/rng.hpp"
#include "mssnn/vocab.hpp"

namespace mssnn {

struct LoadStats {
    std::size_t lines = 0;
    std::size_t malformed = 0;
};

// TSV corpus: one "query<TAB>response" per line. Malformed lines (no tab, or
// an empty side) are skipped and counted; more than 50% malformed is an error.
std::vector<RawPair> load_corpus(const std::string& path, LoadStats* stats = nullptr);

// Responses-only file: one response per line (queryless utterances are usable
// for indexing though never for training).
std::vector<std::string> load_responses(const std::string& path);

struct QRPair {
    std::vector<int> q;  // no BOS/EOS; consumers add them
    std::vector<int> r;
};

// Tokenize+encode, truncating each side to max_len tokens; pairs that come up
// empty on either side are dropped and counted.
std::vector<QRPair> encode_pairs(const std::vector<RawPair>& raw, const Vocabulary& vocab,
                                 std::size_t max_len = 50, std::size_t* dropped = nullptr);

struct WordTargets {
    std::vector<std::pair<int, double>> probs;  // sorted by token id, sums to 1
};

// Normalized tf-idf over the bag of all responses sharing a query (grouped by
// exact query id-sequence). smoothed: idf = ln((1+N)/(1+df)) + 1; otherwise
// idf = ln(N/df). Queries whose bags hold only reserved tokens are excluded
// (their slot in the result is empty) and counted.
std::vector<WordTargets> build_word_targets(const std::vector<QRPair>& pairs, bool smoothed_idf,
                                            std::size_t* excluded = nullptr);

// Uniform draw over corpus responses, rejecting token-identical ones to
// pairs[index].r. Throws if every response matches.
std::size_t sample_negative(std::size_t index, const std::vector<QRPair>& pairs, Rng& rng);

struct TrainingExample {
    std::size_t pair;      // index of (q, r+) in the corpus
    std::size_t negative;  // index of the pair providing r-
};

// One negative per positive; pairs without word targets are skipped.
std::vector<TrainingExample> make_examples(const std::vector<QRPair>& pairs,
                                           const std::vector<WordTargets>& targets, Rng& rng);

}  // namespace mssnn
