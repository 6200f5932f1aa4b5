#pragma once

#include <cstdint>
#include <string>
#include <unordered_map>
#include <vector>

#include "mssnn/response_index.hpp"

namespace mssnn {

// TF-IDF keyword baseline over tokenized responses: postings per token,
// cosine-normalized scoring, smoothed idf = ln((1+N)/(1+df)) + 1.
class InvertedIndex {
  public:
    static InvertedIndex build(const std::vector<std::string>& docs);

    // Top-k by cosine TF-IDF; queries sharing no token with any document
    // return an empty result.
    RetrievalResult search(const std::string& query, std::size_t k) const;

    std::size_t size() const { return doc_norm_.size(); }
    double idf(const std::string& token) const;

  private:
    struct Posting {
        std::uint32_t doc;
        std::uint32_t tf;
    };
    std::unordered_map<std::string, std::vector<Posting>> postings_;  // sorted by doc id
    std::vector<double> doc_norm_;  // per-doc tf-idf vector length
};

}  // namespace mssnn
