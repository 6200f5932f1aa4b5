#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "mssnn/embedding_metrics.hpp"

namespace mssnn {

// Built-in word-vector trainer so the similarity metrics work without an
// external embedding file. Plain skip-gram with negative sampling and SGD.
struct SkipGramConfig {
    std::size_t dim = 64;
    std::size_t window = 4;     // symmetric context width
    std::size_t negatives = 5;  // noise samples per positive pair
    std::size_t epochs = 5;
    double lr = 0.025;          // decays linearly per epoch, floor 5%
    std::size_t min_count = 1;  // rarer tokens are dropped
    std::uint64_t seed = 0;
};

WordEmbeddings train_skipgram(const std::vector<std::vector<std::string>>& sentences,
                              const SkipGramConfig& cfg);

}  // namespace mssnn
