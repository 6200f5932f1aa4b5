#include "mssnn/inverted_index.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "mssnn/vocab.hpp"

namespace mssnn {

InvertedIndex InvertedIndex::build(const std::vector<std::string>& docs) {
    if (docs.empty()) throw DataError("inverted index: empty document list");
    InvertedIndex idx;
    idx.doc_norm_.assign(docs.size(), 0.0);
    for (std::size_t d = 0; d < docs.size(); ++d) {
        std::map<std::string, std::uint32_t> tf;
        for (const auto& t : tokenize(docs[d])) ++tf[t];
        for (const auto& [tok, count] : tf)
            idx.postings_[tok].push_back(Posting{static_cast<std::uint32_t>(d), count});
    }
    for (std::size_t d = 0; d < docs.size(); ++d) idx.doc_norm_[d] = 0.0;
    for (const auto& [tok, plist] : idx.postings_) {
        const double w_idf = idx.idf(tok);
        for (const Posting& p : plist) {
            const double w = p.tf * w_idf;
            idx.doc_norm_[p.doc] += w * w;
        }
    }
    for (auto& n : idx.doc_norm_) n = std::sqrt(n);
    return idx;
}

double InvertedIndex::idf(const std::string& token) const {
    auto it = postings_.find(token);
    const double df = it == postings_.end() ? 0.0 : static_cast<double>(it->second.size());
    return std::log((1.0 + static_cast<double>(size())) / (1.0 + df)) + 1.0;
}

RetrievalResult InvertedIndex::search(const std::string& query, std::size_t k) const {
    if (k < 1) throw ContractError("search: k must be >= 1");
    std::map<std::string, std::uint32_t> qtf;
    for (const auto& t : tokenize(query)) ++qtf[t];

    std::vector<double> scores(size(), 0.0);
    double qnorm = 0.0;
    bool any = false;
    for (const auto& [tok, tf] : qtf) {
        const double w_idf = idf(tok);
        const double wq = tf * w_idf;
        qnorm += wq * wq;
        auto it = postings_.find(tok);
        if (it == postings_.end()) continue;
        any = true;
        for (const Posting& p : it->second) scores[p.doc] += wq * p.tf * w_idf;
    }
    RetrievalResult out;
    if (!any || qnorm == 0.0) return out;
    qnorm = std::sqrt(qnorm);
    for (std::size_t d = 0; d < scores.size(); ++d) {
        if (scores[d] <= 0.0) continue;
        out.push_back(Scored{static_cast<std::uint32_t>(d),
                             static_cast<real>(scores[d] / (qnorm * doc_norm_[d]))});
    }
    const std::size_t keep = std::min(k, out.size());
    std::partial_sort(out.begin(), out.begin() + static_cast<std::ptrdiff_t>(keep), out.end(),
                      [](const Scored& a, const Scored& b) {
                          if (a.score != b.score) return a.score > b.score;
                          return a.id < b.id;
                      });
    out.resize(keep);
    return out;
}

}  // namespace mssnn
