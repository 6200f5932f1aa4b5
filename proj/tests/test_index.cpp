#include <algorithm>
#include <cmath>
#include <filesystem>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "doctest.h"
#include "mssnn/inverted_index.hpp"
#include "mssnn/io.hpp"
#include "mssnn/response_index.hpp"
#include "mssnn/vocab.hpp"

using namespace mssnn;

namespace {

std::string temp_path(const char* name) {
    return (std::filesystem::temp_directory_path() / name).string();
}

std::vector<real> unit_pool(std::size_t count, std::size_t dim, Rng& rng) {
    std::vector<real> v(count * dim);
    for (std::size_t i = 0; i < count; ++i) {
        real n2 = 0;
        for (std::size_t j = 0; j < dim; ++j) {
            v[i * dim + j] = static_cast<real>(rng.normal());
            n2 += v[i * dim + j] * v[i * dim + j];
        }
        const real inv = real(1) / std::sqrt(n2);
        for (std::size_t j = 0; j < dim; ++j) v[i * dim + j] *= inv;
    }
    return v;
}

std::vector<std::string> numbered_texts(std::size_t count) {
    std::vector<std::string> t;
    for (std::size_t i = 0; i < count; ++i) t.push_back("response " + std::to_string(i));
    return t;
}

RetrievalResult brute_force(const std::vector<real>& pool, std::size_t dim,
                            const std::vector<real>& q, std::size_t k) {
    RetrievalResult out;
    const std::size_t n = pool.size() / dim;
    for (std::size_t i = 0; i < n; ++i) {
        real s = 0;
        for (std::size_t j = 0; j < dim; ++j) s += pool[i * dim + j] * q[j];
        out.push_back(Scored{static_cast<std::uint32_t>(i), s});
    }
    std::sort(out.begin(), out.end(), [](const Scored& a, const Scored& b) {
        if (a.score != b.score) return a.score > b.score;
        return a.id < b.id;
    });
    out.resize(std::min(k, out.size()));
    return out;
}

}  // namespace

TEST_CASE("index build validates its inputs") {
    Rng rng(1);
    auto vecs = unit_pool(3, 4, rng);
    CHECK_THROWS_AS((void)ResponseIndex::build({}, {}, 4, {}), DataError);
    CHECK_THROWS_AS((void)ResponseIndex::build(numbered_texts(3), vecs, 5, {}), DimensionError);
    auto bad = vecs;
    bad[4] *= real(2);
    try {
        (void)ResponseIndex::build(numbered_texts(3), bad, 4, {});
        FAIL("expected ContractError");
    } catch (const ContractError& e) {
        CHECK(std::string(e.what()).find("1") != std::string::npos);
    }
}

TEST_CASE("every tree's leaves partition the pool") {
    Rng rng(2);
    const std::size_t n = 300, dim = 8;
    AnnConfig cfg{7, 16, 11};
    auto idx = ResponseIndex::build(numbered_texts(n), unit_pool(n, dim, rng), dim, cfg);
    REQUIRE(idx.forest().size() == 7);
    for (const auto& tree : idx.forest()) {
        std::vector<std::uint32_t> members;
        std::size_t internal = 0;
        for (const auto& node : tree.nodes) {
            if (node.is_leaf()) {
                CHECK(node.items.size() <= 16);
                CHECK(!node.items.empty());
                members.insert(members.end(), node.items.begin(), node.items.end());
            } else {
                ++internal;
                CHECK(node.split.size() == dim);
                CHECK(node.left > 0);
                CHECK(node.right > 0);
                CHECK(static_cast<std::size_t>(node.left) < tree.nodes.size());
                CHECK(static_cast<std::size_t>(node.right) < tree.nodes.size());
            }
        }
        CHECK(internal > 0);
        std::sort(members.begin(), members.end());
        REQUIRE(members.size() == n);
        for (std::size_t i = 0; i < n; ++i) CHECK(members[i] == i);
    }
}

TEST_CASE("exact search reproduces brute force") {
    Rng rng(3);
    const std::size_t n = 400, dim = 12;
    auto pool = unit_pool(n, dim, rng);
    auto idx = ResponseIndex::build(numbered_texts(n), pool, dim, AnnConfig{4, 16, 0});

    for (int qi = 0; qi < 20; ++qi) {
        auto q = unit_pool(1, dim, rng);
        auto got = idx.search_exact(q, 10);
        auto want = brute_force(pool, dim, q, 10);
        REQUIRE(got.size() == 10);
        for (std::size_t i = 0; i < 10; ++i) {
            CHECK(got[i].id == want[i].id);
            CHECK(got[i].score == want[i].score);
        }
    }

    SUBCASE("duplicate vectors tie toward the lower id") {
        std::vector<real> dup(n * dim);
        for (std::size_t i = 0; i < n * dim; ++i)
            dup[i] = pool[i / dim == 5 ? i + 4 * dim : i];
        auto idx2 = ResponseIndex::build(numbered_texts(n), dup, dim, AnnConfig{2, 16, 0});
        std::vector<real> probe(dup.begin() + 9 * dim, dup.begin() + 10 * dim);
        auto top = idx2.search_exact(probe, 2);
        REQUIRE(top.size() == 2);
        CHECK(top[0].id == 5);
        CHECK(top[1].id == 9);
        CHECK(top[0].score == top[1].score);
    }

    CHECK_THROWS_AS((void)idx.search_exact(std::vector<real>(dim, 0.1f), 0), ContractError);
    CHECK_THROWS_AS((void)idx.search_exact(std::vector<real>(dim + 1, 0.1f), 3), DimensionError);
}

TEST_CASE("forest search with a full budget is exact") {
    Rng rng(4);
    const std::size_t n = 500, dim = 16;
    auto pool = unit_pool(n, dim, rng);
    auto idx = ResponseIndex::build(numbered_texts(n), pool, dim, AnnConfig{12, 8, 21});
    for (std::size_t k : {std::size_t{1}, std::size_t{10}, std::size_t{50}}) {
        for (int qi = 0; qi < 5; ++qi) {
            auto q = unit_pool(1, dim, rng);
            auto exact = idx.search_exact(q, k);
            auto ann = idx.search_ann(q, k, n);
            REQUIRE(ann.size() == exact.size());
            for (std::size_t i = 0; i < exact.size(); ++i) {
                CHECK(ann[i].id == exact[i].id);
                CHECK(ann[i].score == exact[i].score);
            }
        }
    }
    CHECK_THROWS_AS((void)idx.search_ann(unit_pool(1, dim, rng), 10, 9), ContractError);
}

TEST_CASE("forest recall clears the floor and rises with the budget") {
    const std::size_t n = 400, dim = 16, k = 10;
    const std::size_t budgets[] = {10, 20, 50};
    double mean_recall[3] = {0, 0, 0};
    const int seeds = 20;
    for (int seed = 0; seed < seeds; ++seed) {
        Rng rng(static_cast<std::uint64_t>(seed) + 100);
        auto pool = unit_pool(n, dim, rng);
        auto idx = ResponseIndex::build(numbered_texts(n), pool, dim,
                                        AnnConfig{10, 8, static_cast<std::uint64_t>(seed)});
        double recall[3] = {0, 0, 0};
        const int queries = 25;
        for (int qi = 0; qi < queries; ++qi) {
            auto q = unit_pool(1, dim, rng);
            auto exact = idx.search_exact(q, k);
            std::set<std::uint32_t> truth;
            for (const auto& s : exact) truth.insert(s.id);
            for (int bi = 0; bi < 3; ++bi) {
                auto ann = idx.search_ann(q, k, budgets[bi]);
                std::size_t hit = 0;
                for (const auto& s : ann) hit += truth.count(s.id);
                recall[bi] += static_cast<double>(hit) / static_cast<double>(k);
            }
        }
        for (int bi = 0; bi < 3; ++bi) recall[bi] /= queries;
        // Candidate sets grow with the budget, so per-pool recall cannot drop.
        CHECK(recall[0] <= recall[1] + 1e-12);
        CHECK(recall[1] <= recall[2] + 1e-12);
        for (int bi = 0; bi < 3; ++bi) mean_recall[bi] += recall[bi] / seeds;
    }
    CHECK(mean_recall[0] >= 0.35);
    CHECK(mean_recall[1] >= 0.55);
    CHECK(mean_recall[2] >= 0.80);
    CHECK(mean_recall[2] < 1.0 + 1e-12);
}

TEST_CASE("index files round-trip byte for byte") {
    Rng rng(5);
    const std::size_t n = 60, dim = 6;
    auto idx = ResponseIndex::build(numbered_texts(n), unit_pool(n, dim, rng), dim,
                                    AnnConfig{3, 4, 7});
    const std::string p1 = temp_path("index_rt1.bin");
    const std::string p2 = temp_path("index_rt2.bin");
    idx.save(p1);
    auto loaded = ResponseIndex::load(p1);
    CHECK(loaded.size() == n);
    CHECK(loaded.dim() == dim);
    CHECK(loaded.config().trees == 3);
    CHECK(loaded.text(7) == "response 7");
    loaded.save(p2);
    CHECK(read_text_file(p1) == read_text_file(p2));

    auto q = unit_pool(1, dim, rng);
    auto a = idx.search_ann(q, 5, n);
    auto b = loaded.search_ann(q, 5, n);
    REQUIRE(a.size() == b.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
        CHECK(a[i].id == b[i].id);
        CHECK(a[i].score == b[i].score);
    }

    write_text_file(p1, read_text_file(p1) + "x");
    CHECK_THROWS_WITH_AS((void)ResponseIndex::load(p1),
                         doctest::Contains("trailing bytes"), DataError);
    std::filesystem::remove(p1);
    std::filesystem::remove(p2);
}

TEST_CASE("keyword search matches a tf-idf cosine oracle") {
    Rng rng(6);
    std::vector<std::string> docs;
    for (int d = 0; d < 30; ++d) {
        std::string doc;
        const std::size_t len = 3 + rng.below(6);
        for (std::size_t j = 0; j < len; ++j)
            doc += "t" + std::to_string(rng.below(10)) + " ";
        docs.push_back(doc);
    }
    docs.push_back(docs[4]);  // exact duplicate: a guaranteed score tie
    auto idx = InvertedIndex::build(docs);
    CHECK(idx.size() == docs.size());

    auto oracle = [&](const std::string& query, std::size_t k) {
        const double N = static_cast<double>(docs.size());
        auto df_of = [&](const std::string& tok) {
            double df = 0;
            for (const auto& d : docs) {
                auto toks = tokenize(d);
                if (std::find(toks.begin(), toks.end(), tok) != toks.end()) df += 1;
            }
            return df;
        };
        std::map<std::string, double> qtf;
        for (const auto& t : tokenize(query)) qtf[t] += 1;
        std::vector<double> scores(docs.size(), 0.0);
        double qnorm = 0.0;
        bool any = false;
        for (const auto& [tok, tf] : qtf) {
            const double widf = std::log((1.0 + N) / (1.0 + df_of(tok))) + 1.0;
            const double wq = tf * widf;
            qnorm += wq * wq;
            if (df_of(tok) == 0) continue;
            any = true;
            for (std::size_t d = 0; d < docs.size(); ++d) {
                std::map<std::string, double> dtf;
                for (const auto& t : tokenize(docs[d])) dtf[t] += 1;
                auto it = dtf.find(tok);
                if (it != dtf.end()) scores[d] += wq * it->second * widf;
            }
        }
        RetrievalResult out;
        if (!any || qnorm == 0.0) return out;
        qnorm = std::sqrt(qnorm);
        for (std::size_t d = 0; d < docs.size(); ++d) {
            if (scores[d] <= 0.0) continue;
            std::map<std::string, double> dtf;
            for (const auto& t : tokenize(docs[d])) dtf[t] += 1;
            double dn = 0.0;
            for (const auto& [tok, tf] : dtf) {
                const double w = tf * (std::log((1.0 + N) / (1.0 + df_of(tok))) + 1.0);
                dn += w * w;
            }
            out.push_back(Scored{static_cast<std::uint32_t>(d),
                                 static_cast<real>(scores[d] / (qnorm * std::sqrt(dn)))});
        }
        std::sort(out.begin(), out.end(), [](const Scored& a, const Scored& b) {
            if (a.score != b.score) return a.score > b.score;
            return a.id < b.id;
        });
        out.resize(std::min(k, out.size()));
        return out;
    };

    for (int qi = 0; qi < 20; ++qi) {
        std::string query;
        const std::size_t len = 2 + rng.below(3);
        for (std::size_t j = 0; j < len; ++j)
            query += "t" + std::to_string(rng.below(12)) + " ";  // t10/t11 never occur
        auto got = idx.search(query, 5);
        auto want = oracle(query, 5);
        REQUIRE(got.size() == want.size());
        for (std::size_t i = 0; i < got.size(); ++i) {
            CHECK(got[i].id == want[i].id);
            CHECK(got[i].score == doctest::Approx(want[i].score).epsilon(1e-6));
        }
    }

    SUBCASE("duplicate documents tie toward the lower id") {
        auto res = idx.search(docs[4], docs.size());
        REQUIRE(res.size() >= 2);
        CHECK(res[0].id == 4);
        CHECK(res[1].id == 30);
        CHECK(res[0].score == res[1].score);
        CHECK(res[0].score == doctest::Approx(1.0).epsilon(1e-6));
    }

    SUBCASE("no shared token, no results") {
        CHECK(idx.search("zebra quills", 5).empty());
        CHECK_THROWS_AS((void)idx.search("t1", 0), ContractError);
    }

    SUBCASE("idf is smoothed") {
        auto one = InvertedIndex::build({"a"});
        CHECK(one.idf("a") == doctest::Approx(1.0).epsilon(1e-12));
        CHECK(one.idf("zz") == doctest::Approx(std::log(2.0) + 1.0).epsilon(1e-12));
    }
}
