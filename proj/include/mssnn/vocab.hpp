#pragma once

#include <string>
#include <unordered_map>
#include <vector>

#include "mssnn/common.hpp"

namespace mssnn {

// Lowercase, split on whitespace, peel terminal punctuation (.,!?;:) off each
// piece into separate tokens.
std::vector<std::string> tokenize(const std::string& text);

struct RawPair {
    std::string query;
    std::string response;
};

class Vocabulary {
  public:
    static constexpr int PAD = 0;
    static constexpr int UNK = 1;
    static constexpr int BOS = 2;
    static constexpr int EOS = 3;
    static const char* const RESERVED[4];  // "<pad>", "<unk>", "<bos>", "<eos>"

    Vocabulary();

    // Keeps the most frequent tokens across queries and responses; ties break
    // lexicographically. max_size includes the four reserved slots.
    static Vocabulary build(const std::vector<RawPair>& pairs, std::size_t max_size);

    int id(const std::string& token) const;  // UNK when absent
    const std::string& token(int id) const;
    bool contains(const std::string& token) const { return tok2id_.count(token) != 0; }
    std::size_t size() const { return id2tok_.size(); }

    std::vector<int> encode(const std::vector<std::string>& tokens) const;
    std::vector<std::string> decode(const std::vector<int>& ids) const;

    // One token per line; line number - 1 = id; first four lines reserved.
    void save(const std::string& path) const;
    static Vocabulary load(const std::string& path);

  private:
    std::vector<std::string> id2tok_;
    std::unordered_map<std::string, int> tok2id_;
};

}  // namespace mssnn
