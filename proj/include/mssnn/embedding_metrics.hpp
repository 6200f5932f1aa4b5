#pragma once

#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "mssnn/common.hpp"

namespace mssnn {

// Word vectors for sentence-similarity metrics, independent of model weights.
struct WordEmbeddings {
    std::size_t dim = 0;
    std::unordered_map<std::string, std::vector<double>> table;

    bool has(const std::string& tok) const { return table.count(tok) != 0; }
};

// Text format: header "count dim", then one "token v1 v2 ..." per line.
WordEmbeddings load_embeddings(const std::string& path);
void save_embeddings(const std::string& path, const WordEmbeddings& emb);

struct SentenceScores {
    double greedy = 0.0;
    double average = 0.0;
    double extrema = 0.0;
};

// Similarity between two token sequences: greedy max-cosine matching averaged
// over both directions; cosine of mean vectors; cosine of per-dimension
// extrema (largest-magnitude value, sign preserved). Out-of-table tokens are
// dropped; nullopt when either side has no usable tokens.
std::optional<SentenceScores> sentence_similarity(const std::vector<std::string>& a,
                                                  const std::vector<std::string>& b,
                                                  const WordEmbeddings& emb);

// Mean score of the true response against each of a query's top-k retrieved
// responses, then averaged over queries. Pairs skipped for missing vectors
// are counted.
struct EmbeddingMetricResult {
    SentenceScores mean;
    std::size_t pairs_used = 0;
    std::size_t pairs_skipped = 0;
};

EmbeddingMetricResult embedding_metrics_at_k(
    const std::vector<std::vector<std::string>>& true_responses,   // tokens per query
    const std::vector<std::vector<std::vector<std::string>>>& retrieved,  // per query, top-k token lists
    const WordEmbeddings& emb, std::size_t k);

}  // namespace mssnn
