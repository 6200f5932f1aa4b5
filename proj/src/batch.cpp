#include "mssnn/batch.hpp"

#include <algorithm>
#include <numeric>

namespace mssnn {

PaddedSeqs pad_rows(const std::vector<const std::vector<int>*>& rows) {
    PaddedSeqs out;
    out.size = rows.size();
    for (const auto* r : rows) out.width = std::max(out.width, r->size());
    out.ids.assign(out.size * out.width, Vocabulary::PAD);
    for (std::size_t i = 0; i < rows.size(); ++i) {
        out.len.push_back(static_cast<int>(rows[i]->size()));
        std::copy(rows[i]->begin(), rows[i]->end(), out.ids.begin() + i * out.width);
    }
    return out;
}

Batch assemble_batch(const std::vector<QRPair>& pairs, const std::vector<WordTargets>& targets,
                     const std::vector<TrainingExample>& examples,
                     const std::vector<std::size_t>& take) {
    Batch b;
    b.size = take.size();
    std::vector<const std::vector<int>*> qs, rps, rns;
    std::vector<std::vector<int>> din, dtg;
    for (std::size_t k : take) {
        const TrainingExample& ex = examples[k];
        const QRPair& pos = pairs[ex.pair];
        qs.push_back(&pos.q);
        rps.push_back(&pos.r);
        rns.push_back(&pairs[ex.negative].r);
        std::vector<int> in{Vocabulary::BOS};
        in.insert(in.end(), pos.r.begin(), pos.r.end());
        std::vector<int> tg(pos.r);
        tg.push_back(Vocabulary::EOS);
        din.push_back(std::move(in));
        dtg.push_back(std::move(tg));
        b.word_targets.emplace_back(targets[ex.pair].probs.begin(), targets[ex.pair].probs.end());
        b.example_of.push_back(k);
    }
    std::vector<const std::vector<int>*> dinp, dtgp;
    for (const auto& v : din) dinp.push_back(&v);
    for (const auto& v : dtg) dtgp.push_back(&v);
    b.q = pad_rows(qs);
    b.rpos = pad_rows(rps);
    b.rneg = pad_rows(rns);
    b.dec_in = pad_rows(dinp);
    b.dec_target = pad_rows(dtgp);
    return b;
}

std::vector<Batch> make_batches(const std::vector<QRPair>& pairs,
                                const std::vector<WordTargets>& targets,
                                const std::vector<TrainingExample>& examples,
                                std::size_t batch_size, Rng* rng) {
    if (batch_size < 1) throw ContractError("batch_size must be >= 1");
    std::vector<std::size_t> order(examples.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    if (rng) rng->shuffle(order);
    std::vector<Batch> out;
    for (std::size_t start = 0; start < order.size(); start += batch_size) {
        const std::size_t end = std::min(order.size(), start + batch_size);
        out.push_back(assemble_batch(pairs, targets, examples,
                                     {order.begin() + start, order.begin() + end}));
    }
    return out;
}

}  // namespace mssnn
