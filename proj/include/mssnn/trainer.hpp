#pragma once

#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "mssnn/adam.hpp"
#include "mssnn/batch.hpp"
#include "mssnn/checkpoint.hpp"
#include "mssnn/model.hpp"

namespace mssnn {

template <typename T>
struct Trainer {
    Model<T> model;
    AdamState<T> adam;
    std::uint64_t epochs_done = 0;

    static Trainer fresh(const ModelConfig& cfg) {
        Trainer t;
        t.model = Model<T>::init(cfg);
        t.adam = AdamState<T>(AdamConfig<T>{static_cast<T>(cfg.lr)}, t.model.params);
        return t;
    }

    static Trainer from_checkpoint(const std::string& path) {
        Checkpoint<T> ck = load_checkpoint<T>(path);
        Trainer t;
        t.model = std::move(ck.model);
        t.epochs_done = ck.epochs_done;
        if (ck.has_adam) {
            t.adam = std::move(ck.adam);
        } else {
            t.adam = AdamState<T>(AdamConfig<T>{static_cast<T>(t.model.cfg.lr)}, t.model.params);
        }
        return t;
    }
};

// One optimizer step over a prepared batch; returns the batch's losses.
template <typename T>
LossBreakdown train_step(Trainer<T>& tr, const Batch& batch) {
    Tape<T> tape;
    BoundModel<T> bm = bind(tr.model, tape, true);
    JointOut<T> out = joint_loss(bm, batch);
    LossBreakdown lb = out.values();
    if (std::isnan(lb.total) || std::isnan(lb.nll) || std::isnan(lb.kl) || std::isnan(lb.rank))
        throw NumericError("NaN loss");
    tape.backward(out.total);
    std::vector<const Array<T>*> grads;
    std::vector<Array<T>> zero_hold;
    zero_hold.reserve(bm.vars.size());
    for (std::size_t i = 0; i < bm.vars.size(); ++i) {
        const Array<T>* g = tape.grad_if_any(bm.vars[i]);
        if (!g) {
            zero_hold.push_back(Array<T>::zeros(tr.model.params.entries()[i].value.shape));
            g = &zero_hold.back();
        }
        grads.push_back(g);
    }
    tr.adam.step(tr.model.params, grads);
    return lb;
}

// Per-epoch means: nll weighted by valid target tokens, kl/rank by rows;
// total recomputed from the weighted components so the alpha/beta/gamma
// linearity holds at the epoch level too.
struct EpochAccumulator {
    double nll_sum = 0.0, kl_sum = 0.0, rank_sum = 0.0;
    double tokens = 0.0, rows = 0.0;

    void add(const LossBreakdown& lb, std::size_t batch_rows, std::size_t batch_tokens) {
        nll_sum += lb.nll * static_cast<double>(batch_tokens);
        kl_sum += lb.kl * static_cast<double>(batch_rows);
        rank_sum += lb.rank * static_cast<double>(batch_rows);
        tokens += static_cast<double>(batch_tokens);
        rows += static_cast<double>(batch_rows);
    }

    LossBreakdown mean(double alpha, double beta, double gamma) const {
        LossBreakdown lb;
        lb.nll = tokens > 0 ? nll_sum / tokens : 0.0;
        lb.kl = rows > 0 ? kl_sum / rows : 0.0;
        lb.rank = rows > 0 ? rank_sum / rows : 0.0;
        lb.total = alpha * lb.nll + beta * lb.kl + gamma * lb.rank;
        return lb;
    }
};

inline std::size_t batch_token_count(const Batch& b) {
    std::size_t n = 0;
    for (int L : b.dec_target.len) n += static_cast<std::size_t>(L);
    return n;
}

// Runs epochs [epochs_done, epochs_total). Negatives are resampled and the
// example order reshuffled per epoch from substreams keyed by (seed, epoch),
// so a resumed run replays the exact batches of an uninterrupted one.
template <typename T>
std::vector<LossBreakdown> train(
    Trainer<T>& tr, const std::vector<QRPair>& pairs, const std::vector<WordTargets>& targets,
    std::size_t epochs_total, std::size_t batch_size,
    const std::function<void(const Trainer<T>&, std::size_t, const LossBreakdown&)>& on_epoch =
        nullptr) {
    if (pairs.empty()) throw DataError("train: empty corpus");
    const ModelConfig& cfg = tr.model.cfg;
    std::vector<LossBreakdown> log;
    for (std::size_t epoch = tr.epochs_done; epoch < epochs_total; ++epoch) {
        Rng neg_rng = Rng::substream(cfg.seed, "neg", epoch);
        std::vector<TrainingExample> examples = make_examples(pairs, targets, neg_rng);
        if (examples.empty()) throw DataError("train: no usable training examples");
        Rng shuffle_rng = Rng::substream(cfg.seed, "shuffle", epoch);
        std::vector<Batch> batches =
            make_batches(pairs, targets, examples, batch_size, &shuffle_rng);
        EpochAccumulator acc;
        for (std::size_t bi = 0; bi < batches.size(); ++bi) {
            LossBreakdown lb;
            try {
                lb = train_step(tr, batches[bi]);
            } catch (const NumericError& e) {
                throw NumericError(std::string(e.what()) + " (epoch " + std::to_string(epoch) +
                                   ", batch " + std::to_string(bi) + ")");
            }
            acc.add(lb, batches[bi].size, batch_token_count(batches[bi]));
        }
        const LossBreakdown epoch_mean = acc.mean(cfg.alpha, cfg.beta, cfg.gamma);
        tr.epochs_done = epoch + 1;
        log.push_back(epoch_mean);
        if (on_epoch) on_epoch(tr, epoch, epoch_mean);
    }
    return log;
}

// Training log line: epoch<TAB>nll<TAB>kl<TAB>rank<TAB>total.
std::string format_log_line(std::size_t epoch, const LossBreakdown& lb);

}  // namespace mssnn
