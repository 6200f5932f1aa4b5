#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "mssnn/model.hpp"

namespace mssnn {

// Every knob for the command-line pipeline, persisted as flat key=value text
// grouped in sections. Rendering is canonical, so render(parse(render(c)))
// is byte-identical; unknown or duplicate keys are rejected.
struct RunConfig {
    std::uint64_t seed = 0;

    // [model]
    std::size_t vocab_size = 30000;
    std::size_t embedding_dim = 512;  // token embedding width |E|
    std::size_t hidden_dim = 1024;    // GRU state width |H|
    std::size_t projection_dim = 512; // query/response vector width d
    std::size_t maxout_pieces = 2;
    double alpha = 1.0;  // generation loss weight
    double beta = 1.0;   // word-prediction loss weight
    double gamma = 1.0;  // ranking loss weight

    // [data]
    std::string corpus = "data/corpus.tsv";
    std::string vocab = "data/vocab.txt";
    std::string targets = "data/targets.txt";
    std::string manifest = "data/manifest.txt";
    std::size_t max_len = 50;
    bool smoothed_idf = true;

    // [train]
    std::string checkpoint = "artifacts/model.ckpt";
    std::string train_log = "artifacts/train.log";
    std::size_t epochs = 10;
    std::size_t batch_size = 64;
    double lr = 0.0002;
    bool resume = false;

    // [index]
    std::string index = "artifacts/index.bin";
    std::string responses;  // optional pool file, one response per line; empty -> corpus responses
    std::size_t trees = 400;
    std::size_t leaf_size = 16;
    std::size_t search_budget = 200;  // per-tree candidate budget for ann queries

    // [eval]
    std::string eval_set = "data/eval.tsv";
    std::string report = "artifacts/report.tsv";
    std::string embeddings;  // optional word-vector file; empty -> train in-process
    std::vector<std::size_t> recall_ks{1, 2, 5, 10};
    std::vector<std::size_t> coverage_ks{10, 100};
    std::vector<std::size_t> embedding_ks{10};
    std::string bench_report = "artifacts/bench.tsv";
    std::vector<std::size_t> bench_ks{10, 30, 50, 70, 90, 110, 130, 150, 170, 190};

    ModelConfig model() const {
        ModelConfig mc;
        mc.vocab = vocab_size;
        mc.d = projection_dim;
        mc.emb = embedding_dim;
        mc.hidden = hidden_dim;
        mc.pieces = maxout_pieces;
        mc.alpha = alpha;
        mc.beta = beta;
        mc.gamma = gamma;
        mc.lr = lr;
        mc.seed = seed;
        return mc;
    }

    void validate() const;
};

RunConfig parse_config(const std::string& text);
std::string render_config(const RunConfig& cfg);

RunConfig load_config(const std::string& path);
void save_config(const std::string& path, const RunConfig& cfg);

}  // namespace mssnn
