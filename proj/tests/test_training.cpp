#include <cmath>
#include <cstring>
#include <filesystem>
#include <string>
#include <vector>

#include "doctest.h"
#include "mssnn/trainer.hpp"

using namespace mssnn;

namespace {

std::string temp_path(const char* name) {
    return (std::filesystem::temp_directory_path() / name).string();
}

ModelConfig small_cfg(double lr = 0.01) {
    ModelConfig c;
    c.vocab = 16;
    c.d = 4;
    c.emb = 4;
    c.hidden = 6;
    c.pieces = 2;
    c.lr = lr;
    c.seed = 42;
    return c;
}

std::vector<QRPair> small_corpus() {
    return {
        {{4, 5, 6}, {7, 8}},
        {{9, 10}, {11}},
        {{12, 4}, {13, 14, 15}},
        {{6, 7}, {5, 9}},
    };
}

template <typename T>
bool params_equal(const Model<T>& a, const Model<T>& b) {
    if (a.params.size() != b.params.size()) return false;
    for (std::size_t i = 0; i < a.params.size(); ++i) {
        const auto& x = a.params.entries()[i].value.data;
        const auto& y = b.params.entries()[i].value.data;
        if (x.size() != y.size()) return false;
        if (std::memcmp(x.data(), y.data(), x.size() * sizeof(T)) != 0) return false;
    }
    return true;
}

}  // namespace

TEST_CASE("same seed, same data: training is bit-for-bit repeatable") {
    auto pairs = small_corpus();
    auto targets = build_word_targets(pairs, true);

    auto run = [&]() {
        auto tr = Trainer<float>::fresh(small_cfg());
        train(tr, pairs, targets, 5, 2);
        return tr;
    };
    auto a = run();
    auto b = run();
    CHECK(params_equal(a.model, b.model));
    CHECK(a.epochs_done == 5);

    const std::string pa = temp_path("train_rep_a.ckpt");
    const std::string pb = temp_path("train_rep_b.ckpt");
    save_checkpoint(pa, a.model, &a.adam, a.epochs_done);
    save_checkpoint(pb, b.model, &b.adam, b.epochs_done);
    CHECK(read_text_file(pa) == read_text_file(pb));
    std::filesystem::remove(pa);
    std::filesystem::remove(pb);
}

TEST_CASE("resuming from a checkpoint replays the uninterrupted run") {
    auto pairs = small_corpus();
    auto targets = build_word_targets(pairs, true);

    auto straight = Trainer<float>::fresh(small_cfg());
    train(straight, pairs, targets, 6, 2);

    auto half = Trainer<float>::fresh(small_cfg());
    train(half, pairs, targets, 3, 2);
    const std::string path = temp_path("train_resume.ckpt");
    save_checkpoint(path, half.model, &half.adam, half.epochs_done);

    auto resumed = Trainer<float>::from_checkpoint(path);
    CHECK(resumed.epochs_done == 3);
    train(resumed, pairs, targets, 6, 2);

    CHECK(params_equal(straight.model, resumed.model));
    CHECK(resumed.epochs_done == 6);

    const std::string pa = temp_path("train_resume_a.ckpt");
    const std::string pb = temp_path("train_resume_b.ckpt");
    save_checkpoint(pa, straight.model, &straight.adam, straight.epochs_done);
    save_checkpoint(pb, resumed.model, &resumed.adam, resumed.epochs_done);
    CHECK(read_text_file(pa) == read_text_file(pb));
    for (const auto& p : {path, pa, pb}) std::filesystem::remove(p);
}

TEST_CASE("a tiny corpus is memorized: loss falls over training") {
    auto pairs = small_corpus();
    auto targets = build_word_targets(pairs, true);
    auto tr = Trainer<float>::fresh(small_cfg(0.01));
    auto log = train(tr, pairs, targets, 100, 2);
    REQUIRE(log.size() == 100);
    CHECK(log.back().total < log.front().total);
    CHECK(log.back().nll < log.front().nll);
}

TEST_CASE("zero generation and prediction weights leave the decoder untouched") {
    auto pairs = small_corpus();
    auto targets = build_word_targets(pairs, true);
    Rng neg(1);
    auto batch = make_batches(pairs, targets, make_examples(pairs, targets, neg), 4, nullptr)[0];

    ModelConfig c = small_cfg();
    c.alpha = 0.0;
    c.beta = 0.0;
    c.gamma = 1.0;
    auto m = Model<float>::init(c);
    Tape<float> tape;
    BoundModel<float> bm = bind(m, tape, true);
    JointOut<float> out = joint_loss(bm, batch);
    tape.backward(out.total);

    // Diagnostics still describe the silenced tasks.
    LossBreakdown lb = out.values();
    CHECK(lb.nll > 0.0);
    CHECK(lb.kl >= 0.0);
    CHECK(lb.total == doctest::Approx(lb.rank).epsilon(1e-12));

    std::size_t decoder_entries = 0;
    bool matcher_touched = false;
    for (std::size_t i = 0; i < m.params.size(); ++i) {
        const std::string& name = m.params.entries()[i].name;
        const Array<float>* g = tape.grad_if_any(bm.vars[i]);
        const bool is_decoder = name.rfind("dec.", 0) == 0 || name.rfind("att.", 0) == 0;
        if (is_decoder) {
            ++decoder_entries;
            if (g)
                for (float x : g->data) CHECK(x == 0.0f);
        } else if (name.rfind("match.", 0) == 0 && g) {
            for (float x : g->data)
                if (x != 0.0f) matcher_touched = true;
        }
    }
    CHECK(decoder_entries == 22);  // two 9-tensor GRUs, attention triplet, readout
    CHECK(matcher_touched);
}

TEST_CASE("reported total is the weighted sum on every batch") {
    auto pairs = small_corpus();
    auto targets = build_word_targets(pairs, true);
    auto tr = Trainer<float>::fresh(small_cfg());
    for (std::size_t epoch = 0; epoch < 3; ++epoch) {
        Rng neg = Rng::substream(42, "neg", epoch);
        auto examples = make_examples(pairs, targets, neg);
        Rng shuf = Rng::substream(42, "shuffle", epoch);
        for (auto& b : make_batches(pairs, targets, examples, 2, &shuf)) {
            LossBreakdown lb = train_step(tr, b);
            CHECK(std::abs(lb.total - (lb.nll + lb.kl + lb.rank)) < 1e-6);
        }
    }
}

TEST_CASE("non-finite losses fail loudly with their position") {
    auto pairs = small_corpus();
    auto targets = build_word_targets(pairs, true);
    auto tr = Trainer<float>::fresh(small_cfg());
    tr.model.params.get("emb").data[4 * 4] = std::nanf("");
    try {
        train(tr, pairs, targets, 1, 2);
        FAIL("expected NumericError");
    } catch (const NumericError& e) {
        const std::string msg = e.what();
        CHECK(msg.find("epoch 0") != std::string::npos);
        CHECK(msg.find("batch 0") != std::string::npos);
    }
}

TEST_CASE("epoch means weight sequence loss by tokens, the rest by rows") {
    EpochAccumulator acc;
    acc.add(LossBreakdown{2.0, 0.5, 0.25, 0.0}, 2, 10);
    acc.add(LossBreakdown{1.0, 0.1, 0.75, 0.0}, 3, 5);
    LossBreakdown m = acc.mean(1.0, 2.0, 3.0);
    CHECK(m.nll == doctest::Approx((2.0 * 10 + 1.0 * 5) / 15.0).epsilon(1e-12));
    CHECK(m.kl == doctest::Approx((0.5 * 2 + 0.1 * 3) / 5.0).epsilon(1e-12));
    CHECK(m.rank == doctest::Approx((0.25 * 2 + 0.75 * 3) / 5.0).epsilon(1e-12));
    CHECK(m.total == doctest::Approx(m.nll + 2.0 * m.kl + 3.0 * m.rank).epsilon(1e-12));
}

TEST_CASE("log lines carry epoch and the four losses at fixed precision") {
    LossBreakdown lb{1.5, 0.25, 0.125, 1.875};
    CHECK(format_log_line(3, lb) == "3\t1.500000000\t0.250000000\t0.125000000\t1.875000000");
    LossBreakdown zero{};
    CHECK(format_log_line(0, zero) == "0\t0.000000000\t0.000000000\t0.000000000\t0.000000000");
}
