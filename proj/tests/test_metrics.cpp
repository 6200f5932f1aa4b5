#include <algorithm>
#include <cmath>
#include <filesystem>
#include <set>
#include <string>
#include <vector>

#include "doctest.h"
#include "mssnn/embedding_metrics.hpp"
#include "mssnn/io.hpp"
#include "mssnn/metrics.hpp"
#include "mssnn/rng.hpp"
#include "mssnn/skipgram.hpp"

using namespace mssnn;

namespace {

std::string temp_path(const char* name) {
    return (std::filesystem::temp_directory_path() / name).string();
}

// A ranked result whose id order is the given permutation.
RetrievalResult ranked(const std::vector<std::uint32_t>& order) {
    RetrievalResult r;
    for (std::size_t i = 0; i < order.size(); ++i)
        r.push_back(Scored{order[i], real(1.0) / static_cast<real>(i + 1)});
    return r;
}

std::vector<std::uint32_t> random_permutation(std::size_t n, Rng& rng) {
    std::vector<std::uint32_t> p(n);
    for (std::size_t i = 0; i < n; ++i) p[i] = static_cast<std::uint32_t>(i);
    rng.shuffle(p);
    return p;
}

}  // namespace

TEST_CASE("recall@k matches a brute-force oracle") {
    Rng rng(41);
    for (int inst = 0; inst < 1000; ++inst) {
        const std::size_t pool = 15, nq = 1 + rng.below(4);
        const std::size_t k = 1 + rng.below(pool);
        EvalSet es;
        std::vector<RetrievalResult> results;
        for (std::size_t q = 0; q < nq; ++q) {
            es.queries.push_back("q" + std::to_string(q));
            std::set<std::uint32_t> truth;
            const std::size_t nt = 1 + rng.below(5);
            while (truth.size() < nt) truth.insert(static_cast<std::uint32_t>(rng.below(pool)));
            es.truth.emplace_back(truth.begin(), truth.end());
            results.push_back(ranked(random_permutation(pool, rng)));
        }
        double want = 0;
        for (std::size_t q = 0; q < nq; ++q) {
            std::size_t hits = 0;
            for (std::size_t j = 0; j < k; ++j)
                for (std::uint32_t t : es.truth[q])
                    if (results[q][j].id == t) ++hits;
            want += static_cast<double>(hits) / static_cast<double>(es.truth[q].size());
        }
        want /= static_cast<double>(nq);
        CHECK(recall_at_k(results, es, k) == doctest::Approx(want).epsilon(1e-9));
    }

    SUBCASE("frozen two-rank case") {
        EvalSet es;
        es.queries = {"q"};
        es.truth = {{3}};
        std::vector<RetrievalResult> res = {ranked({7, 3, 1, 0})};
        CHECK(recall_at_k(res, es, 1) == 0.0);
        CHECK(recall_at_k(res, es, 2) == 1.0);
        EvalSet empty;
        CHECK_THROWS_AS((void)recall_at_k({}, empty, 3), ContractError);
        CHECK_THROWS_AS((void)recall_at_k(res, empty, 3), ContractError);
    }
}

TEST_CASE("reciprocal rank scores the designated truth") {
    SUBCASE("rank four scores a quarter") {
        EvalSet es;
        es.queries = {"q"};
        es.truth = {{9}};
        std::vector<RetrievalResult> res = {ranked({1, 2, 3, 9, 4})};
        CHECK(r_precision(res, es) == doctest::Approx(0.25).epsilon(1e-12));
    }

    SUBCASE("an absent truth scores zero") {
        EvalSet es;
        es.queries = {"q"};
        es.truth = {{9}};
        std::vector<RetrievalResult> res = {ranked({1, 2, 3})};
        CHECK(r_precision(res, es) == 0.0);
    }

    SUBCASE("only the first listed truth counts") {
        EvalSet es;
        es.queries = {"q"};
        es.truth = {{7, 0}};  // id 0 ranks first but is not designated
        std::vector<RetrievalResult> res = {ranked({0, 1, 7})};
        CHECK(r_precision(res, es) == doctest::Approx(1.0 / 3.0).epsilon(1e-12));
    }

    SUBCASE("random instances match a direct oracle") {
        Rng rng(42);
        for (int inst = 0; inst < 1000; ++inst) {
            const std::size_t pool = 12, nq = 1 + rng.below(4);
            EvalSet es;
            std::vector<RetrievalResult> results;
            double want = 0;
            for (std::size_t q = 0; q < nq; ++q) {
                es.queries.push_back("q");
                const auto t = static_cast<std::uint32_t>(rng.below(pool + 3));  // may be absent
                es.truth.push_back({t});
                auto order = random_permutation(pool, rng);
                results.push_back(ranked(order));
                for (std::size_t r = 0; r < order.size(); ++r)
                    if (order[r] == t) {
                        want += 1.0 / static_cast<double>(r + 1);
                        break;
                    }
            }
            want /= static_cast<double>(nq);
            CHECK(r_precision(results, es) == doctest::Approx(want).epsilon(1e-9));
        }
    }
}

TEST_CASE("coverage@k matches a brute-force oracle") {
    Rng rng(43);
    for (int inst = 0; inst < 1000; ++inst) {
        const std::size_t V = 10, nq = 1 + rng.below(4);
        const std::size_t k = 1 + rng.below(V);
        std::vector<std::vector<int>> pred, refs;
        for (std::size_t q = 0; q < nq; ++q) {
            std::vector<int> p;
            for (std::size_t j = 0; j < V; ++j)
                p.push_back(static_cast<int>(rng.below(V)));  // duplicates likely
            pred.push_back(p);
            std::set<int> r;
            const std::size_t nr = rng.below(4);  // sometimes empty
            while (r.size() < nr) r.insert(static_cast<int>(rng.below(V)));
            refs.emplace_back(r.begin(), r.end());
        }
        double want = 0;
        std::size_t used = 0, want_excluded = 0;
        for (std::size_t q = 0; q < nq; ++q) {
            if (refs[q].empty()) {
                ++want_excluded;
                continue;
            }
            std::set<int> topk(pred[q].begin(),
                               pred[q].begin() + static_cast<std::ptrdiff_t>(k));
            std::size_t hits = 0;
            for (int t : refs[q]) hits += topk.count(t);
            want += static_cast<double>(hits) / static_cast<double>(refs[q].size());
            ++used;
        }
        std::size_t excluded = 0;
        if (used == 0) {
            CHECK_THROWS_AS((void)coverage_at_k(pred, refs, k, &excluded), ContractError);
            continue;
        }
        want /= static_cast<double>(used);
        CHECK(coverage_at_k(pred, refs, k, &excluded) == doctest::Approx(want).epsilon(1e-9));
        CHECK(excluded == want_excluded);
    }

    SUBCASE("full-width prediction covers everything") {
        std::vector<std::vector<int>> pred = {{0, 1, 2, 3, 4}};
        CHECK(coverage_at_k(pred, {{2, 4}}, 5) == 1.0);
        CHECK(coverage_at_k(pred, {{0, 3}}, 1) == 0.5);
    }

    SUBCASE("disjoint sets score zero") {
        CHECK(coverage_at_k({{0, 1}}, {{5, 6}}, 2) == 0.0);
    }

    SUBCASE("repeated predictions count once") {
        CHECK(coverage_at_k({{5, 5, 6}}, {{5, 6}}, 2) == 0.5);
    }
}

TEST_CASE("sentence similarity matches an independent reimplementation") {
    Rng rng(44);
    WordEmbeddings emb;
    emb.dim = 5;
    std::vector<std::string> vocab;
    for (int t = 0; t < 20; ++t) {
        std::string tok = "w" + std::to_string(t);
        std::vector<double> v(5);
        for (auto& x : v) x = rng.uniform(-1.0, 1.0);
        emb.table[tok] = v;
        vocab.push_back(tok);
    }

    auto cos = [](const std::vector<double>& a, const std::vector<double>& b) {
        double d = 0, na = 0, nb = 0;
        for (std::size_t i = 0; i < a.size(); ++i) {
            d += a[i] * b[i];
            na += a[i] * a[i];
            nb += b[i] * b[i];
        }
        return (na == 0 || nb == 0) ? 0.0 : d / (std::sqrt(na) * std::sqrt(nb));
    };
    auto vectors_of = [&](const std::vector<std::string>& s) {
        std::vector<std::vector<double>> vs;
        for (const auto& t : s)
            if (emb.has(t)) vs.push_back(emb.table.at(t));
        return vs;
    };
    auto reference = [&](const std::vector<std::string>& sa, const std::vector<std::string>& sb)
        -> std::optional<SentenceScores> {
        auto va = vectors_of(sa), vb = vectors_of(sb);
        if (va.empty() || vb.empty()) return std::nullopt;
        auto dir = [&](const std::vector<std::vector<double>>& xs,
                       const std::vector<std::vector<double>>& ys) {
            double sum = 0;
            for (const auto& x : xs) {
                double best = -1;
                for (const auto& y : ys) best = std::max(best, cos(x, y));
                sum += best;
            }
            return sum / static_cast<double>(xs.size());
        };
        auto pool = [&](const std::vector<std::vector<double>>& xs, bool extrema) {
            std::vector<double> out(emb.dim, 0.0);
            for (std::size_t i = 0; i < emb.dim; ++i) {
                if (extrema) {
                    double mx = xs[0][i], mn = xs[0][i];
                    for (const auto& x : xs) {
                        mx = std::max(mx, x[i]);
                        mn = std::min(mn, x[i]);
                    }
                    out[i] = mx > -mn ? mx : mn;
                } else {
                    for (const auto& x : xs) out[i] += x[i];
                    out[i] /= static_cast<double>(xs.size());
                }
            }
            return out;
        };
        SentenceScores s;
        s.greedy = 0.5 * (dir(va, vb) + dir(vb, va));
        s.average = cos(pool(va, false), pool(vb, false));
        s.extrema = cos(pool(va, true), pool(vb, true));
        return s;
    };

    for (int inst = 0; inst < 1000; ++inst) {
        std::vector<std::string> sa, sb;
        const std::size_t la = 1 + rng.below(4), lb = 1 + rng.below(4);
        for (std::size_t j = 0; j < la; ++j) sa.push_back(vocab[rng.below(vocab.size())]);
        for (std::size_t j = 0; j < lb; ++j) sb.push_back(vocab[rng.below(vocab.size())]);
        if (rng.below(8) == 0) sa.push_back("oov-token");
        auto got = sentence_similarity(sa, sb, emb);
        auto want = reference(sa, sb);
        REQUIRE(got.has_value() == want.has_value());
        if (!got) continue;
        CHECK(got->greedy == doctest::Approx(want->greedy).epsilon(1e-6));
        CHECK(got->average == doctest::Approx(want->average).epsilon(1e-6));
        CHECK(got->extrema == doctest::Approx(want->extrema).epsilon(1e-6));
    }

    SUBCASE("identical sentences score one everywhere") {
        std::vector<std::string> s = {"w1", "w5", "w9"};
        auto got = sentence_similarity(s, s, emb);
        REQUIRE(got.has_value());
        CHECK(got->greedy == doctest::Approx(1.0).epsilon(1e-6));
        CHECK(got->average == doctest::Approx(1.0).epsilon(1e-6));
        CHECK(got->extrema == doctest::Approx(1.0).epsilon(1e-6));
    }

    SUBCASE("orthogonal single tokens score zero") {
        WordEmbeddings basis;
        basis.dim = 2;
        basis.table["a"] = {1.0, 0.0};
        basis.table["b"] = {0.0, 1.0};
        auto got = sentence_similarity({"a"}, {"b"}, basis);
        REQUIRE(got.has_value());
        CHECK(std::abs(got->greedy) < 1e-12);
        CHECK(std::abs(got->average) < 1e-12);
        CHECK(std::abs(got->extrema) < 1e-12);
    }

    SUBCASE("unknown tokens are dropped, not scored") {
        auto bare = sentence_similarity({"w1"}, {"w2"}, emb);
        auto noisy = sentence_similarity({"w1", "???"}, {"w2"}, emb);
        REQUIRE(bare.has_value());
        REQUIRE(noisy.has_value());
        CHECK(bare->greedy == noisy->greedy);
        CHECK(!sentence_similarity({"???"}, {"w2"}, emb).has_value());
        CHECK(!sentence_similarity({"w1"}, {}, emb).has_value());
    }
}

TEST_CASE("embedding files round-trip") {
    WordEmbeddings emb;
    emb.dim = 3;
    Rng rng(45);
    for (int t = 0; t < 12; ++t) {
        std::vector<double> v(3);
        for (auto& x : v) x = rng.uniform(-2.0, 2.0);
        emb.table["tok" + std::to_string(t)] = v;
    }
    const std::string path = temp_path("emb_rt.txt");
    save_embeddings(path, emb);
    auto back = load_embeddings(path);
    CHECK(back.dim == 3);
    REQUIRE(back.table.size() == emb.table.size());
    for (const auto& [tok, v] : emb.table) {
        REQUIRE(back.has(tok));
        for (std::size_t i = 0; i < 3; ++i)
            CHECK(back.table.at(tok)[i] == doctest::Approx(v[i]).epsilon(1e-7));
    }

    // A second save is byte-identical: the writer sorts tokens.
    const std::string path2 = temp_path("emb_rt2.txt");
    save_embeddings(path2, back);
    CHECK(read_text_file(path) == read_text_file(path2));

    write_text_file(path, "5\n");
    CHECK_THROWS_AS((void)load_embeddings(path), DataError);
    write_text_file(path, "2 3\nfoo 1 2 3\nbar 4 5\n");
    CHECK_THROWS_AS((void)load_embeddings(path), DataError);
    std::filesystem::remove(path);
    std::filesystem::remove(path2);
}

TEST_CASE("retrieval embedding scores pool pairs and count skips") {
    WordEmbeddings emb;
    emb.dim = 2;
    emb.table["a"] = {1.0, 0.0};
    emb.table["b"] = {0.0, 1.0};

    std::vector<std::vector<std::string>> truth = {{"a"}, {"b"}};
    std::vector<std::vector<std::vector<std::string>>> retrieved = {
        {{"a"}, {"b"}},  // scores 1 and 0 against truth "a"
        {{"??"}},        // unusable: skipped
    };
    auto res = embedding_metrics_at_k(truth, retrieved, emb, 2);
    CHECK(res.pairs_used == 2);
    CHECK(res.pairs_skipped == 1);
    CHECK(res.mean.average == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(res.mean.greedy == doctest::Approx(0.5).epsilon(1e-12));

    // k clips the retrieved lists.
    auto res1 = embedding_metrics_at_k(truth, retrieved, emb, 1);
    CHECK(res1.pairs_used == 1);
    CHECK(res1.mean.average == doctest::Approx(1.0).epsilon(1e-12));

    CHECK_THROWS_AS((void)embedding_metrics_at_k({{"a"}}, {}, emb, 1), ContractError);
}

TEST_CASE("skip-gram vectors are deterministic and capture co-occurrence") {
    // Words sharing contexts end up with similar vectors: sun/moon both occur
    // beside bright/sky, cat/dog beside furry/paws.
    std::vector<std::vector<std::string>> sentences;
    for (int i = 0; i < 150; ++i) {
        sentences.push_back({"bright", "sun", "sky"});
        sentences.push_back({"bright", "moon", "sky"});
        sentences.push_back({"furry", "cat", "paws"});
        sentences.push_back({"furry", "dog", "paws"});
    }
    SkipGramConfig cfg;
    cfg.dim = 16;
    cfg.epochs = 5;
    cfg.seed = 3;

    auto emb = train_skipgram(sentences, cfg);
    REQUIRE(emb.dim == 16);
    for (const char* t : {"sun", "moon", "cat", "dog"}) REQUIRE(emb.has(t));

    auto cos = [&](const char* a, const char* b) {
        const auto& va = emb.table.at(a);
        const auto& vb = emb.table.at(b);
        double d = 0, na = 0, nb = 0;
        for (std::size_t i = 0; i < va.size(); ++i) {
            d += va[i] * vb[i];
            na += va[i] * va[i];
            nb += vb[i] * vb[i];
        }
        return d / (std::sqrt(na) * std::sqrt(nb));
    };
    CHECK(cos("sun", "moon") > cos("sun", "cat") + 0.05);
    CHECK(cos("cat", "dog") > cos("cat", "moon") + 0.05);

    SUBCASE("same seed, same vectors; new seed, new vectors") {
        auto again = train_skipgram(sentences, cfg);
        for (const auto& [tok, v] : emb.table) {
            REQUIRE(again.has(tok));
            CHECK(again.table.at(tok) == v);
        }
        SkipGramConfig other = cfg;
        other.seed = 4;
        auto shifted = train_skipgram(sentences, other);
        CHECK(shifted.table.at("sun") != emb.table.at("sun"));
    }

    SUBCASE("rare tokens fall below min_count") {
        auto with_rare = sentences;
        with_rare.push_back({"sun", "hapax"});
        SkipGramConfig mc = cfg;
        mc.min_count = 2;
        auto filtered = train_skipgram(with_rare, mc);
        CHECK(!filtered.has("hapax"));
        CHECK(filtered.has("sun"));
    }

    SUBCASE("degenerate configs are rejected") {
        SkipGramConfig bad = cfg;
        bad.epochs = 0;
        CHECK_THROWS_AS((void)train_skipgram(sentences, bad), ContractError);
        SkipGramConfig high = cfg;
        high.min_count = 1000;
        CHECK_THROWS_AS((void)train_skipgram(sentences, high), DataError);
    }
}
