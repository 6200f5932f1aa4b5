#include "mssnn/pipeline.hpp"

#include <algorithm>
#include <charconv>
#include <filesystem>
#include <ostream>
#include <set>
#include <sstream>

#include "mssnn/checkpoint.hpp"
#include "mssnn/embedding_metrics.hpp"
#include "mssnn/inverted_index.hpp"
#include "mssnn/io.hpp"
#include "mssnn/latency.hpp"
#include "mssnn/metrics.hpp"
#include "mssnn/skipgram.hpp"
#include "mssnn/trainer.hpp"

namespace mssnn {

namespace {

std::string fmt_double(double v) {
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

std::vector<int> encode_text(const std::string& text, const Vocabulary& vocab,
                             std::size_t max_len) {
    std::vector<int> ids = vocab.encode(tokenize(text));
    if (ids.size() > max_len) ids.resize(max_len);
    return ids;
}

struct PreparedData {
    std::vector<RawPair> raw;
    LoadStats stats;
    Vocabulary vocab;
    std::vector<QRPair> pairs;
    std::size_t dropped = 0;
};

// Shared by train/index/eval: the corpus re-encoded under the saved vocabulary.
PreparedData load_prepared(const RunConfig& cfg) {
    PreparedData d;
    d.raw = load_corpus(cfg.corpus, &d.stats);
    d.vocab = Vocabulary::load(cfg.vocab);
    d.pairs = encode_pairs(d.raw, d.vocab, cfg.max_len, &d.dropped);
    if (d.pairs.empty()) throw DataError("corpus " + cfg.corpus + " encodes to zero pairs");
    return d;
}

Model<real> load_model(const RunConfig& cfg) {
    Checkpoint<real> ck = load_checkpoint<real>(cfg.checkpoint);
    return std::move(ck.model);
}

// Structural fields must match to reuse a checkpoint at all; the training
// hyperparameters must match too or a resumed run would silently diverge
// from what the config claims.
std::string full_config_mismatch(const ModelConfig& file, const ModelConfig& expect) {
    std::string diff = config_mismatch(file, expect);
    auto cmp_d = [&](const char* name, double a, double b) {
        if (a != b)
            diff += std::string(diff.empty() ? "" : ", ") + name + ": checkpoint=" +
                    fmt_double(a) + " config=" + fmt_double(b);
    };
    cmp_d("alpha", file.alpha, expect.alpha);
    cmp_d("beta", file.beta, expect.beta);
    cmp_d("gamma", file.gamma, expect.gamma);
    cmp_d("lr", file.lr, expect.lr);
    if (file.seed != expect.seed)
        diff += std::string(diff.empty() ? "" : ", ") + "seed: checkpoint=" +
                std::to_string(file.seed) + " config=" + std::to_string(expect.seed);
    return diff;
}

std::vector<int> distinct_content_ids(const std::vector<int>& ids) {
    std::set<int> s;
    for (int id : ids)
        if (id >= 4) s.insert(id);  // reserved ids 0..3 never count as content
    return std::vector<int>(s.begin(), s.end());
}

}  // namespace

void save_targets(const std::string& path, const std::vector<WordTargets>& targets) {
    std::string out;
    for (const auto& t : targets) {
        for (std::size_t i = 0; i < t.probs.size(); ++i) {
            if (i) out += ' ';
            out += std::to_string(t.probs[i].first) + ":" + fmt_double(t.probs[i].second);
        }
        out += '\n';
    }
    write_text_file(path, out);
}

std::vector<WordTargets> load_targets(const std::string& path) {
    const std::string body = read_text_file(path);
    std::vector<WordTargets> out;
    std::istringstream in(body);
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        WordTargets t;
        std::istringstream ls(line);
        std::string entry;
        int prev_id = -1;
        while (ls >> entry) {
            const std::size_t colon = entry.find(':');
            if (colon == std::string::npos)
                throw DataError("targets " + path + ": line " + std::to_string(lineno) +
                                ": entry '" + entry + "' is not id:prob");
            int id = 0;
            double p = 0;
            auto r1 = std::from_chars(entry.data(), entry.data() + colon, id);
            auto r2 = std::from_chars(entry.data() + colon + 1, entry.data() + entry.size(), p);
            if (r1.ec != std::errc() || r2.ec != std::errc() ||
                r2.ptr != entry.data() + entry.size() || id <= prev_id || p <= 0.0)
                throw DataError("targets " + path + ": line " + std::to_string(lineno) +
                                ": bad entry '" + entry + "'");
            prev_id = id;
            t.probs.emplace_back(id, p);
        }
        out.push_back(std::move(t));
    }
    return out;
}

void cmd_prepare(const RunConfig& cfg, bool quiet, std::ostream& out) {
    LoadStats stats;
    const std::vector<RawPair> raw = load_corpus(cfg.corpus, &stats);
    if (raw.empty()) throw DataError("prepare: corpus " + cfg.corpus + " has no usable pairs");
    const Vocabulary vocab = Vocabulary::build(raw, cfg.vocab_size);
    std::size_t dropped = 0;
    const std::vector<QRPair> pairs = encode_pairs(raw, vocab, cfg.max_len, &dropped);
    if (pairs.empty()) throw DataError("prepare: every pair came up empty after encoding");
    std::size_t excluded = 0;
    const std::vector<WordTargets> targets = build_word_targets(pairs, cfg.smoothed_idf, &excluded);

    // All computation precedes all writes, so a bad corpus leaves nothing behind.
    vocab.save(cfg.vocab);
    save_targets(cfg.targets, targets);
    std::string manifest;
    manifest += "corpus_lines\t" + std::to_string(stats.lines) + "\n";
    manifest += "malformed_lines\t" + std::to_string(stats.malformed) + "\n";
    manifest += "pairs_encoded\t" + std::to_string(pairs.size()) + "\n";
    manifest += "pairs_dropped_empty\t" + std::to_string(dropped) + "\n";
    manifest += "vocab_size\t" + std::to_string(vocab.size()) + "\n";
    manifest += "targets_excluded\t" + std::to_string(excluded) + "\n";
    manifest += "max_len\t" + std::to_string(cfg.max_len) + "\n";
    manifest += "smoothed_idf\t" + std::string(cfg.smoothed_idf ? "true" : "false") + "\n";
    manifest += "seed\t" + std::to_string(cfg.seed) + "\n";
    write_text_file(cfg.manifest, manifest);

    if (!quiet)
        out << "prepared " << pairs.size() << " pairs (" << stats.malformed << " malformed, "
            << dropped << " dropped), vocab " << vocab.size() << ", " << excluded
            << " pairs without word targets\n";
}

void cmd_train(const RunConfig& cfg, bool quiet, std::ostream& out) {
    const PreparedData data = load_prepared(cfg);
    const std::vector<WordTargets> targets = load_targets(cfg.targets);
    if (targets.size() != data.pairs.size())
        throw DataError("train: targets " + cfg.targets + " holds " +
                        std::to_string(targets.size()) + " entries but the corpus encodes to " +
                        std::to_string(data.pairs.size()) + " pairs; rerun prepare");
    // vocab_size is a cap; the embedding tables are sized to the vocabulary
    // prepare actually built, or top-k word lookups could emit dead ids.
    ModelConfig mc = cfg.model();
    mc.vocab = data.vocab.size();

    Trainer<real> tr;
    if (cfg.resume && std::filesystem::exists(cfg.checkpoint)) {
        tr = Trainer<real>::from_checkpoint(cfg.checkpoint);
        const std::string diff = full_config_mismatch(tr.model.cfg, mc);
        if (!diff.empty())
            throw DataError("train: checkpoint " + cfg.checkpoint +
                            " does not match the config: " + diff);
        if (!quiet) out << "resuming after epoch " << tr.epochs_done << "\n";
    } else {
        tr = Trainer<real>::fresh(mc);
    }
    if (tr.epochs_done >= cfg.epochs) {
        if (!quiet)
            out << "checkpoint already has " << tr.epochs_done << " epochs (config asks for "
                << cfg.epochs << "); nothing to do\n";
        return;
    }

    // The log always mirrors the epochs completed so far, also across resumes.
    std::vector<std::string> log_lines;
    if (cfg.resume && std::filesystem::exists(cfg.train_log)) {
        std::istringstream in(read_text_file(cfg.train_log));
        std::string line;
        while (std::getline(in, line) && log_lines.size() < tr.epochs_done)
            if (!line.empty()) log_lines.push_back(line);
    }

    train<real>(tr, data.pairs, targets, cfg.epochs, cfg.batch_size,
                [&](const Trainer<real>& t, std::size_t epoch, const LossBreakdown& lb) {
                    const std::string line = format_log_line(epoch + 1, lb);
                    log_lines.push_back(line);
                    if (!quiet) out << line << "\n";
                    save_checkpoint(cfg.checkpoint + ".ep" + std::to_string(epoch + 1), t.model,
                                    &t.adam, t.epochs_done);
                    save_checkpoint(cfg.checkpoint, t.model, &t.adam, t.epochs_done);
                    std::string log;
                    for (const auto& l : log_lines) log += l + "\n";
                    write_text_file(cfg.train_log, log);
                });
    if (!quiet) out << "trained through epoch " << tr.epochs_done << " -> " << cfg.checkpoint
                    << "\n";
}

void cmd_index(const RunConfig& cfg, bool quiet, std::ostream& out) {
    const Model<real> model = load_model(cfg);
    const Vocabulary vocab = Vocabulary::load(cfg.vocab);

    std::vector<std::string> texts;
    if (!cfg.responses.empty()) {
        texts = load_responses(cfg.responses);
    } else {
        for (const auto& p : load_corpus(cfg.corpus)) texts.push_back(p.response);
    }
    if (texts.empty()) throw DataError("index: no responses to index");

    auto project = [&](const std::string& text) {
        const std::vector<int> ids = encode_text(text, vocab, cfg.max_len);
        if (ids.empty()) throw NumericError("response has no tokens");
        const Array<real> v = project_response(model, ids);
        return std::vector<real>(v.data.begin(), v.data.end());
    };
    const AnnConfig ann{cfg.trees, cfg.leaf_size, cfg.seed};
    const ResponseIndex idx = build_response_index(texts, project, ann);
    idx.save(cfg.index);
    if (!quiet)
        out << "indexed " << idx.size() << " responses (d=" << idx.dim() << ", trees="
            << cfg.trees << ") -> " << cfg.index << "\n";
}

void cmd_query(const RunConfig& cfg, const std::string& text, std::size_t k, bool ann,
               std::ostream& out) {
    const Model<real> model = load_model(cfg);
    const Vocabulary vocab = Vocabulary::load(cfg.vocab);
    const ResponseIndex idx = ResponseIndex::load(cfg.index);
    if (idx.dim() != model.cfg.d)
        throw DataError("query: index dimension " + std::to_string(idx.dim()) +
                        " does not match checkpoint d=" + std::to_string(model.cfg.d));

    const std::vector<int> ids = encode_text(text, vocab, cfg.max_len);
    if (ids.empty()) throw DataError("query: text has no tokens");
    const Array<real> qa = project_query(model, ids);
    const std::vector<real> qv(qa.data.begin(), qa.data.end());
    const RetrievalResult res =
        ann ? idx.search_ann(qv, k, cfg.search_budget) : idx.search_exact(qv, k);
    char buf[32];
    for (std::size_t i = 0; i < res.size(); ++i) {
        std::snprintf(buf, sizeof(buf), "%zu\t%.4f\t", i + 1,
                      static_cast<double>(res[i].score));
        out << buf << idx.text(res[i].id) << "\n";
    }
}

void cmd_eval(const RunConfig& cfg, bool quiet, std::ostream& out) {
    const Model<real> model = load_model(cfg);
    const Vocabulary vocab = Vocabulary::load(cfg.vocab);
    const ResponseIndex idx = ResponseIndex::load(cfg.index);
    if (idx.dim() != model.cfg.d)
        throw DataError("eval: index dimension " + std::to_string(idx.dim()) +
                        " does not match checkpoint d=" + std::to_string(model.cfg.d));
    const EvalSet es = load_eval_set(cfg.eval_set);
    validate_eval_set(es, idx.size());

    // Rank the full pool once per query; every rank-based metric reads from it.
    std::vector<std::vector<int>> query_ids(es.queries.size());
    std::vector<RetrievalResult> results(es.queries.size());
    for (std::size_t i = 0; i < es.queries.size(); ++i) {
        query_ids[i] = encode_text(es.queries[i], vocab, cfg.max_len);
        if (query_ids[i].empty())
            throw DataError("eval: query '" + es.queries[i] + "' has no tokens");
        const Array<real> qa = project_query(model, query_ids[i]);
        results[i] = idx.search_exact(std::vector<real>(qa.data.begin(), qa.data.end()),
                                      idx.size());
    }

    std::vector<MetricLine> lines;
    for (std::size_t k : cfg.recall_ks)
        lines.push_back({"r_at", k, recall_at_k(results, es, k)});
    lines.push_back({"r_precision", 0, r_precision(results, es)});

    // Word vectors for the sentence-similarity metrics: an external table if
    // configured, otherwise trained in-process on the corpus.
    WordEmbeddings emb;
    if (!cfg.embeddings.empty()) {
        emb = load_embeddings(cfg.embeddings);
    } else {
        std::vector<std::vector<std::string>> sentences;
        for (const auto& p : load_corpus(cfg.corpus)) {
            sentences.push_back(tokenize(p.query));
            sentences.push_back(tokenize(p.response));
        }
        SkipGramConfig sg;
        sg.seed = cfg.seed;
        emb = train_skipgram(sentences, sg);
    }
    std::vector<std::vector<std::string>> truth_tokens(es.queries.size());
    for (std::size_t i = 0; i < es.queries.size(); ++i)
        truth_tokens[i] = tokenize(idx.text(es.truth[i][0]));
    for (std::size_t k : cfg.embedding_ks) {
        std::vector<std::vector<std::vector<std::string>>> retrieved(es.queries.size());
        for (std::size_t i = 0; i < es.queries.size(); ++i) {
            const std::size_t upto = std::min(k, results[i].size());
            for (std::size_t j = 0; j < upto; ++j)
                retrieved[i].push_back(tokenize(idx.text(results[i][j].id)));
        }
        const EmbeddingMetricResult em = embedding_metrics_at_k(truth_tokens, retrieved, emb, k);
        lines.push_back({"em_greedy", k, em.mean.greedy});
        lines.push_back({"em_average", k, em.mean.average});
        lines.push_back({"em_extrema", k, em.mean.extrema});
    }

    // Coverage: reference sets from the true responses and, for the -gen
    // variants, from the model's own greedy generations.
    std::vector<std::vector<int>> refs_true(es.queries.size());
    std::vector<std::vector<int>> refs_gen(es.queries.size());
    for (std::size_t i = 0; i < es.queries.size(); ++i) {
        std::vector<int> pooled;
        for (std::uint32_t id : es.truth[i]) {
            const std::vector<int> ids = encode_text(idx.text(id), vocab, cfg.max_len);
            pooled.insert(pooled.end(), ids.begin(), ids.end());
        }
        refs_true[i] = distinct_content_ids(pooled);
        refs_gen[i] = distinct_content_ids(greedy_decode(model, query_ids[i], cfg.max_len));
    }
    // An undertrained model can generate nothing but EOS; the -gen coverage
    // rows are not measurable then and are dropped rather than failing eval.
    bool any_gen = false;
    for (const auto& r : refs_gen) any_gen = any_gen || !r.empty();
    if (!any_gen && !quiet) out << "no generated content tokens; cov_*_gen rows skipped\n";
    for (std::size_t k : cfg.coverage_ks) {
        const std::size_t kk = std::min(k, model.cfg.vocab);
        std::vector<std::vector<int>> pred_words(es.queries.size());
        std::vector<std::vector<int>> pred_first(es.queries.size());
        for (std::size_t i = 0; i < es.queries.size(); ++i) {
            pred_words[i] = predict_topk_words(model, query_ids[i], kk);
            pred_first[i] = first_step_topk(model, query_ids[i], kk);
        }
        lines.push_back({"cov_pred", k, coverage_at_k(pred_words, refs_true, kk)});
        if (any_gen) lines.push_back({"cov_pred_gen", k, coverage_at_k(pred_words, refs_gen, kk)});
        lines.push_back({"cov_first", k, coverage_at_k(pred_first, refs_true, kk)});
        if (any_gen)
            lines.push_back({"cov_first_gen", k, coverage_at_k(pred_first, refs_gen, kk)});
    }

    const std::string report = render_report(lines);
    write_text_file(cfg.report, report);
    if (!quiet) out << report;
}

void cmd_bench(const RunConfig& cfg, bool quiet, std::ostream& out) {
    const Model<real> model = load_model(cfg);
    const Vocabulary vocab = Vocabulary::load(cfg.vocab);
    const ResponseIndex idx = ResponseIndex::load(cfg.index);
    const EvalSet es = load_eval_set(cfg.eval_set);
    if (es.queries.empty()) throw DataError("bench: eval set has no queries");

    // Query vectors are prepared up front: the timed region is retrieval, not
    // encoding, so engines stay comparable (keyword search takes raw text and
    // tokenizes inside, that being its real cost).
    std::vector<std::vector<real>> qvecs(es.queries.size());
    for (std::size_t i = 0; i < es.queries.size(); ++i) {
        const std::vector<int> ids = encode_text(es.queries[i], vocab, cfg.max_len);
        if (ids.empty()) throw DataError("bench: query '" + es.queries[i] + "' has no tokens");
        const Array<real> qa = project_query(model, ids);
        qvecs[i].assign(qa.data.begin(), qa.data.end());
    }
    std::vector<std::string> pool_texts;
    pool_texts.reserve(idx.size());
    for (std::size_t i = 0; i < idx.size(); ++i) pool_texts.push_back(idx.text(i));
    const InvertedIndex kw = InvertedIndex::build(pool_texts);

    std::vector<BenchEngine> engines;
    engines.push_back({"exact", [&](std::size_t q, std::size_t k) { idx.search_exact(qvecs[q], k); }});
    engines.push_back({"ann", [&](std::size_t q, std::size_t k) {
                           idx.search_ann(qvecs[q], k, cfg.search_budget);
                       }});
    engines.push_back({"keyword", [&](std::size_t q, std::size_t k) {
                           kw.search(es.queries[q], k);
                       }});
    BenchConfig bc;
    bc.k_values = cfg.bench_ks;
    const LatencyTable table = run_latency_bench(engines, es.queries.size(), bc);
    const std::string text = render_latency_table(table);
    write_text_file(cfg.bench_report, text);
    if (!quiet) out << text;
}

}  // namespace mssnn
