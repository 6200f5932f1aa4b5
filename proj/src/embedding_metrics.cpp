#include "mssnn/embedding_metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

#include "mssnn/io.hpp"

namespace mssnn {

WordEmbeddings load_embeddings(const std::string& path) {
    const std::string body = read_text_file(path);
    std::istringstream in(body);
    std::size_t count = 0, dim = 0;
    if (!(in >> count >> dim) || dim == 0)
        throw DataError("embeddings " + path + ": bad header (expected 'count dim')");
    WordEmbeddings emb;
    emb.dim = dim;
    for (std::size_t i = 0; i < count; ++i) {
        std::string tok;
        if (!(in >> tok)) throw DataError("embeddings " + path + ": truncated at entry " +
                                          std::to_string(i));
        std::vector<double> v(dim);
        for (auto& x : v)
            if (!(in >> x))
                throw DataError("embeddings " + path + ": truncated vector for '" + tok + "'");
        emb.table[tok] = std::move(v);
    }
    return emb;
}

void save_embeddings(const std::string& path, const WordEmbeddings& emb) {
    std::string out = std::to_string(emb.table.size()) + " " + std::to_string(emb.dim) + "\n";
    // Deterministic order for byte-identical artifacts.
    std::vector<std::string> toks;
    toks.reserve(emb.table.size());
    for (const auto& [tok, _] : emb.table) toks.push_back(tok);
    std::sort(toks.begin(), toks.end());
    char buf[64];
    for (const auto& tok : toks) {
        out += tok;
        for (double x : emb.table.at(tok)) {
            std::snprintf(buf, sizeof(buf), " %.8g", x);
            out += buf;
        }
        out += '\n';
    }
    write_text_file(path, out);
}

namespace {

double cosine(const std::vector<double>& a, const std::vector<double>& b) {
    double dot = 0, na = 0, nb = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        dot += a[i] * b[i];
        na += a[i] * a[i];
        nb += b[i] * b[i];
    }
    if (na == 0 || nb == 0) return 0.0;
    return dot / (std::sqrt(na) * std::sqrt(nb));
}

std::vector<const std::vector<double>*> lookup(const std::vector<std::string>& toks,
                                               const WordEmbeddings& emb) {
    std::vector<const std::vector<double>*> out;
    for (const auto& t : toks) {
        auto it = emb.table.find(t);
        if (it != emb.table.end()) out.push_back(&it->second);
    }
    return out;
}

double greedy_dir(const std::vector<const std::vector<double>*>& a,
                  const std::vector<const std::vector<double>*>& b) {
    double total = 0;
    for (const auto* va : a) {
        double best = -1.0;
        for (const auto* vb : b) best = std::max(best, cosine(*va, *vb));
        total += best;
    }
    return total / static_cast<double>(a.size());
}

std::vector<double> mean_vec(const std::vector<const std::vector<double>*>& vs, std::size_t dim) {
    std::vector<double> m(dim, 0.0);
    for (const auto* v : vs)
        for (std::size_t i = 0; i < dim; ++i) m[i] += (*v)[i];
    for (auto& x : m) x /= static_cast<double>(vs.size());
    return m;
}

std::vector<double> extrema_vec(const std::vector<const std::vector<double>*>& vs,
                                std::size_t dim) {
    std::vector<double> e(dim, 0.0);
    for (std::size_t i = 0; i < dim; ++i) {
        double mx = (*vs[0])[i], mn = (*vs[0])[i];
        for (const auto* v : vs) {
            mx = std::max(mx, (*v)[i]);
            mn = std::min(mn, (*v)[i]);
        }
        e[i] = mx > -mn ? mx : mn;
    }
    return e;
}

}  // namespace

std::optional<SentenceScores> sentence_similarity(const std::vector<std::string>& a,
                                                  const std::vector<std::string>& b,
                                                  const WordEmbeddings& emb) {
    const auto va = lookup(a, emb);
    const auto vb = lookup(b, emb);
    if (va.empty() || vb.empty()) return std::nullopt;
    SentenceScores s;
    s.greedy = 0.5 * (greedy_dir(va, vb) + greedy_dir(vb, va));
    s.average = cosine(mean_vec(va, emb.dim), mean_vec(vb, emb.dim));
    s.extrema = cosine(extrema_vec(va, emb.dim), extrema_vec(vb, emb.dim));
    return s;
}

EmbeddingMetricResult embedding_metrics_at_k(
    const std::vector<std::vector<std::string>>& true_responses,
    const std::vector<std::vector<std::vector<std::string>>>& retrieved,
    const WordEmbeddings& emb, std::size_t k) {
    if (true_responses.size() != retrieved.size())
        throw ContractError("embedding metrics: query count mismatch");
    EmbeddingMetricResult res;
    double g = 0, a = 0, e = 0;
    for (std::size_t q = 0; q < retrieved.size(); ++q) {
        const std::size_t upto = std::min(k, retrieved[q].size());
        for (std::size_t j = 0; j < upto; ++j) {
            auto s = sentence_similarity(true_responses[q], retrieved[q][j], emb);
            if (!s) {
                ++res.pairs_skipped;
                continue;
            }
            g += s->greedy;
            a += s->average;
            e += s->extrema;
            ++res.pairs_used;
        }
    }
    if (res.pairs_used > 0) {
        const double n = static_cast<double>(res.pairs_used);
        res.mean = SentenceScores{g / n, a / n, e / n};
    }
    return res;
}

}  // namespace mssnn
