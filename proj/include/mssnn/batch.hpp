#pragma once

#include <cstddef>
#include <vector>

#include "mssnn/corpus.hpp"

namespace mssnn {

// Row-major padded id matrix plus true lengths.
struct PaddedSeqs {
    std::vector<int> ids;  // size x width, PAD past each row's length
    std::vector<int> len;
    std::size_t width = 0;
    std::size_t size = 0;

    int at(std::size_t row, std::size_t col) const { return ids[row * width + col]; }
};

struct Batch {
    std::size_t size = 0;
    PaddedSeqs q;
    PaddedSeqs rpos;
    PaddedSeqs rneg;
    // Teacher forcing on r+: input rows are BOS + r+, target rows are r+ + EOS,
    // both padded to the same width; dec.len = rpos.len + 1.
    PaddedSeqs dec_in;
    PaddedSeqs dec_target;
    SparseTargets word_targets;           // per row
    std::vector<std::size_t> example_of;  // row -> index into the example list
};

PaddedSeqs pad_rows(const std::vector<const std::vector<int>*>& rows);

Batch assemble_batch(const std::vector<QRPair>& pairs, const std::vector<WordTargets>& targets,
                     const std::vector<TrainingExample>& examples,
                     const std::vector<std::size_t>& take);

// Shuffles example order when rng is given, then chunks; the final batch may
// be partial.
std::vector<Batch> make_batches(const std::vector<QRPair>& pairs,
                                const std::vector<WordTargets>& targets,
                                const std::vector<TrainingExample>& examples,
                                std::size_t batch_size, Rng* rng);

}  // namespace mssnn
