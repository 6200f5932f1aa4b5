#include "mssnn/corpus.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <sstream>
#include <unordered_map>

#include "mssnn/io.hpp"

namespace mssnn {

std::vector<RawPair> load_corpus(const std::string& path, LoadStats* stats) {
    const std::string body = read_text_file(path);
    std::vector<RawPair> pairs;
    LoadStats st;
    std::istringstream in(body);
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        ++st.lines;
        const auto tab = line.find('\t');
        if (tab == std::string::npos || tab == 0 || tab + 1 == line.size()) {
            ++st.malformed;
            continue;
        }
        pairs.push_back(RawPair{line.substr(0, tab), line.substr(tab + 1)});
    }
    if (st.lines > 0 && st.malformed * 2 > st.lines)
        throw DataError("corpus " + path + ": " + std::to_string(st.malformed) + " of " +
                        std::to_string(st.lines) + " lines malformed");
    if (stats) *stats = st;
    return pairs;
}

std::vector<std::string> load_responses(const std::string& path) {
    const std::string body = read_text_file(path);
    std::vector<std::string> out;
    std::istringstream in(body);
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (!line.empty()) out.push_back(line);
    }
    return out;
}

std::vector<QRPair> encode_pairs(const std::vector<RawPair>& raw, const Vocabulary& vocab,
                                 std::size_t max_len, std::size_t* dropped) {
    std::vector<QRPair> out;
    std::size_t drop = 0;
    for (const auto& rp : raw) {
        QRPair p;
        p.q = vocab.encode(tokenize(rp.query));
        p.r = vocab.encode(tokenize(rp.response));
        if (p.q.size() > max_len) p.q.resize(max_len);
        if (p.r.size() > max_len) p.r.resize(max_len);
        if (p.q.empty() || p.r.empty()) {
            ++drop;
            continue;
        }
        out.push_back(std::move(p));
    }
    if (dropped) *dropped = drop;
    return out;
}

std::vector<WordTargets> build_word_targets(const std::vector<QRPair>& pairs, bool smoothed_idf,
                                            std::size_t* excluded) {
    // Group pairs by exact query id-sequence, in first-occurrence order.
    std::map<std::vector<int>, std::size_t> group_of;
    std::vector<std::vector<std::size_t>> groups;
    for (std::size_t i = 0; i < pairs.size(); ++i) {
        auto [it, inserted] = group_of.try_emplace(pairs[i].q, groups.size());
        if (inserted) groups.emplace_back();
        groups[it->second].push_back(i);
    }

    const std::size_t nq = groups.size();
    auto reserved = [](int id) {
        return id == Vocabulary::PAD || id == Vocabulary::BOS || id == Vocabulary::EOS;
    };

    // Term frequency per group bag, document frequency across bags.
    std::vector<std::map<int, double>> tf(nq);
    std::unordered_map<int, std::size_t> df;
    for (std::size_t g = 0; g < nq; ++g) {
        for (std::size_t idx : groups[g])
            for (int id : pairs[idx].r)
                if (!reserved(id)) tf[g][id] += 1.0;
        for (const auto& [id, _] : tf[g]) ++df[id];
    }

    std::vector<WordTargets> per_group(nq);
    std::size_t skipped = 0;
    for (std::size_t g = 0; g < nq; ++g) {
        if (tf[g].empty()) {
            ++skipped;
            continue;
        }
        auto& probs = per_group[g].probs;
        double sum = 0.0;
        for (const auto& [id, count] : tf[g]) {
            const double n = static_cast<double>(nq);
            const double d = static_cast<double>(df[id]);
            const double idf = smoothed_idf ? std::log((1.0 + n) / (1.0 + d)) + 1.0
                                            : std::log(n / d);
            const double s = count * idf;
            probs.emplace_back(id, s);
            sum += s;
        }
        if (sum <= 0.0) {
            // Raw idf can zero out every weight (all tokens in all bags);
            // fall back to plain term-frequency mass.
            sum = 0.0;
            for (auto& [id, s] : probs) {
                s = tf[g][id];
                sum += s;
            }
        }
        for (auto& [id, s] : probs) s /= sum;
    }
    if (excluded) *excluded = skipped;

    std::vector<WordTargets> out(pairs.size());
    for (std::size_t g = 0; g < nq; ++g)
        for (std::size_t idx : groups[g]) out[idx] = per_group[g];
    return out;
}

std::size_t sample_negative(std::size_t index, const std::vector<QRPair>& pairs, Rng& rng) {
    if (pairs.size() < 2) throw DataError("negative sampling needs at least 2 responses");
    const std::vector<int>& rpos = pairs[index].r;
    for (int attempt = 0; attempt < 64; ++attempt) {
        const std::size_t j = static_cast<std::size_t>(rng.below(pairs.size()));
        if (pairs[j].r != rpos) return j;
    }
    // Heavy duplication: fall back to an explicit uniform draw over the valid set.
    std::vector<std::size_t> valid;
    for (std::size_t j = 0; j < pairs.size(); ++j)
        if (pairs[j].r != rpos) valid.push_back(j);
    if (valid.empty()) throw DataError("negative sampling: all responses identical");
    return valid[static_cast<std::size_t>(rng.below(valid.size()))];
}

std::vector<TrainingExample> make_examples(const std::vector<QRPair>& pairs,
                                           const std::vector<WordTargets>& targets, Rng& rng) {
    if (targets.size() != pairs.size())
        throw ContractError("make_examples: targets/pairs length mismatch");
    std::vector<TrainingExample> out;
    for (std::size_t i = 0; i < pairs.size(); ++i) {
        if (targets[i].probs.empty()) continue;
        out.push_back(TrainingExample{i, sample_negative(i, pairs, rng)});
    }
    return out;
}

}  // namespace mssnn
