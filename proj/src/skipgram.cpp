#include "mssnn/skipgram.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>

#include "mssnn/rng.hpp"

namespace mssnn {

namespace {

double sigmoid(double x) {
    if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
    const double e = std::exp(x);
    return e / (1.0 + e);
}

}  // namespace

WordEmbeddings train_skipgram(const std::vector<std::vector<std::string>>& sentences,
                              const SkipGramConfig& cfg) {
    if (cfg.dim == 0 || cfg.window == 0 || cfg.epochs == 0)
        throw ContractError("skip-gram: dim, window and epochs must be positive");

    // Count tokens; std::map keeps the id assignment independent of hash order.
    std::map<std::string, std::size_t> counts;
    for (const auto& sent : sentences)
        for (const auto& tok : sent) ++counts[tok];

    std::vector<std::pair<std::string, std::size_t>> kept;
    for (const auto& [tok, n] : counts)
        if (n >= cfg.min_count) kept.emplace_back(tok, n);
    if (kept.empty()) throw DataError("skip-gram: no token reaches min_count");
    std::sort(kept.begin(), kept.end(), [](const auto& a, const auto& b) {
        if (a.second != b.second) return a.second > b.second;
        return a.first < b.first;
    });

    std::unordered_map<std::string, std::size_t> id_of;
    for (std::size_t i = 0; i < kept.size(); ++i) id_of[kept[i].first] = i;
    const std::size_t v = kept.size();

    // Noise distribution: unigram counts raised to 3/4, drawn by inverse CDF.
    std::vector<double> cdf(v);
    double acc = 0;
    for (std::size_t i = 0; i < v; ++i) {
        acc += std::pow(static_cast<double>(kept[i].second), 0.75);
        cdf[i] = acc;
    }
    for (auto& x : cdf) x /= acc;

    std::vector<std::vector<std::size_t>> encoded;
    encoded.reserve(sentences.size());
    for (const auto& sent : sentences) {
        std::vector<std::size_t> ids;
        for (const auto& tok : sent) {
            auto it = id_of.find(tok);
            if (it != id_of.end()) ids.push_back(it->second);
        }
        if (ids.size() >= 2) encoded.push_back(std::move(ids));
    }

    std::vector<double> in(v * cfg.dim), out(v * cfg.dim, 0.0);
    {
        Rng init = Rng::substream(cfg.seed, "sg-init");
        const double half = 0.5 / static_cast<double>(cfg.dim);
        for (auto& x : in) x = init.uniform(-half, half);
    }

    std::vector<std::size_t> order(encoded.size());
    std::iota(order.begin(), order.end(), 0);
    std::vector<double> grad_center(cfg.dim);

    for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        Rng rng = Rng::substream(cfg.seed, "sg-epoch", epoch);
        rng.shuffle(order);
        const double frac = static_cast<double>(epoch) / static_cast<double>(cfg.epochs);
        const double lr = cfg.lr * std::max(0.05, 1.0 - frac);

        for (std::size_t si : order) {
            const auto& ids = encoded[si];
            for (std::size_t pos = 0; pos < ids.size(); ++pos) {
                const std::size_t center = ids[pos];
                double* vc = &in[center * cfg.dim];
                const std::size_t lo = pos >= cfg.window ? pos - cfg.window : 0;
                const std::size_t hi = std::min(ids.size(), pos + cfg.window + 1);
                for (std::size_t cpos = lo; cpos < hi; ++cpos) {
                    if (cpos == pos) continue;
                    std::fill(grad_center.begin(), grad_center.end(), 0.0);
                    for (std::size_t s = 0; s <= cfg.negatives; ++s) {
                        std::size_t target;
                        double label;
                        if (s == 0) {
                            target = ids[cpos];
                            label = 1.0;
                        } else {
                            const double u = rng.uniform();
                            target = static_cast<std::size_t>(
                                std::lower_bound(cdf.begin(), cdf.end(), u) - cdf.begin());
                            if (target == ids[cpos]) continue;  // noise hit the truth
                            label = 0.0;
                        }
                        double* uo = &out[target * cfg.dim];
                        double dot = 0;
                        for (std::size_t i = 0; i < cfg.dim; ++i) dot += vc[i] * uo[i];
                        const double g = lr * (label - sigmoid(dot));
                        for (std::size_t i = 0; i < cfg.dim; ++i) {
                            grad_center[i] += g * uo[i];
                            uo[i] += g * vc[i];
                        }
                    }
                    for (std::size_t i = 0; i < cfg.dim; ++i) vc[i] += grad_center[i];
                }
            }
        }
    }

    WordEmbeddings emb;
    emb.dim = cfg.dim;
    for (std::size_t i = 0; i < v; ++i)
        emb.table[kept[i].first] =
            std::vector<double>(in.begin() + static_cast<std::ptrdiff_t>(i * cfg.dim),
                                in.begin() + static_cast<std::ptrdiff_t>((i + 1) * cfg.dim));
    return emb;
}

}  // namespace mssnn
