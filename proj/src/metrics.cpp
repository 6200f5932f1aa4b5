#include "mssnn/metrics.hpp"

#include <algorithm>
#include <cstdio>
#include <sstream>
#include <unordered_set>

#include "mssnn/io.hpp"

namespace mssnn {

EvalSet load_eval_set(const std::string& path) {
    const std::string body = read_text_file(path);
    EvalSet es;
    std::istringstream in(body);
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        const auto tab = line.find('\t');
        if (tab == std::string::npos || tab == 0)
            throw DataError("eval set " + path + ": line " + std::to_string(lineno) +
                            " is not 'query<TAB>ids'");
        std::vector<std::uint32_t> ids;
        std::stringstream fields(line.substr(tab + 1));
        std::string field;
        while (std::getline(fields, field, ',')) {
            if (field.empty()) continue;
            try {
                ids.push_back(static_cast<std::uint32_t>(std::stoul(field)));
            } catch (const std::exception&) {
                throw DataError("eval set " + path + ": line " + std::to_string(lineno) +
                                " has a non-numeric id '" + field + "'");
            }
        }
        if (ids.empty())
            throw DataError("eval set " + path + ": line " + std::to_string(lineno) +
                            " lists no response ids");
        es.queries.push_back(line.substr(0, tab));
        es.truth.push_back(std::move(ids));
    }
    return es;
}

void validate_eval_set(const EvalSet& es, std::size_t pool_size) {
    std::string offenders;
    for (std::size_t i = 0; i < es.truth.size(); ++i)
        for (std::uint32_t id : es.truth[i])
            if (id >= pool_size)
                offenders += (offenders.empty() ? "" : ", ") + std::string("query ") +
                             std::to_string(i) + " id " + std::to_string(id);
    if (!offenders.empty())
        throw DataError("ground-truth ids outside the pool (size " + std::to_string(pool_size) +
                        "): " + offenders);
}

double recall_at_k(const std::vector<RetrievalResult>& results, const EvalSet& es,
                   std::size_t k) {
    if (results.size() != es.queries.size())
        throw ContractError("recall_at_k: results for " + std::to_string(results.size()) +
                            " queries, eval set has " + std::to_string(es.queries.size()));
    if (es.queries.empty()) throw ContractError("recall_at_k: empty eval set");
    double total = 0.0;
    for (std::size_t i = 0; i < results.size(); ++i) {
        std::unordered_set<std::uint32_t> truth(es.truth[i].begin(), es.truth[i].end());
        std::size_t hits = 0;
        const std::size_t upto = std::min(k, results[i].size());
        for (std::size_t j = 0; j < upto; ++j)
            if (truth.count(results[i][j].id)) ++hits;
        total += static_cast<double>(hits) / static_cast<double>(truth.size());
    }
    return total / static_cast<double>(results.size());
}

double r_precision(const std::vector<RetrievalResult>& results, const EvalSet& es) {
    if (results.size() != es.queries.size())
        throw ContractError("r_precision: results/eval set size mismatch");
    if (es.queries.empty()) throw ContractError("r_precision: empty eval set");
    double total = 0.0;
    for (std::size_t i = 0; i < results.size(); ++i) {
        const std::uint32_t want = es.truth[i][0];
        for (std::size_t rank = 0; rank < results[i].size(); ++rank) {
            if (results[i][rank].id == want) {
                total += 1.0 / static_cast<double>(rank + 1);
                break;
            }
        }
    }
    return total / static_cast<double>(results.size());
}

double coverage_at_k(const std::vector<std::vector<int>>& predicted,
                     const std::vector<std::vector<int>>& references, std::size_t k,
                     std::size_t* excluded) {
    if (predicted.size() != references.size())
        throw ContractError("coverage_at_k: predicted/reference size mismatch");
    double total = 0.0;
    std::size_t used = 0, skipped = 0;
    for (std::size_t i = 0; i < predicted.size(); ++i) {
        std::unordered_set<int> ref(references[i].begin(), references[i].end());
        if (ref.empty()) {
            ++skipped;
            continue;
        }
        std::unordered_set<int> seen;
        std::size_t hits = 0;
        const std::size_t upto = std::min(k, predicted[i].size());
        for (std::size_t j = 0; j < upto; ++j) {
            const int id = predicted[i][j];
            if (seen.insert(id).second && ref.count(id)) ++hits;
        }
        total += static_cast<double>(hits) / static_cast<double>(ref.size());
        ++used;
    }
    if (excluded) *excluded = skipped;
    if (used == 0) throw ContractError("coverage_at_k: every reference set is empty");
    return total / static_cast<double>(used);
}

std::string render_report(const std::vector<MetricLine>& lines) {
    std::string out;
    char buf[64];
    for (const auto& l : lines) {
        std::snprintf(buf, sizeof(buf), "%zu\t%.4f\n", l.k, l.value);
        out += l.name;
        out += '\t';
        out += buf;
    }
    return out;
}

std::vector<MetricLine> parse_report(const std::string& text) {
    std::vector<MetricLine> lines;
    std::istringstream in(text);
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        const auto t1 = line.find('\t');
        const auto t2 = line.find('\t', t1 == std::string::npos ? t1 : t1 + 1);
        if (t1 == std::string::npos || t2 == std::string::npos)
            throw DataError("report line is not 'name<TAB>k<TAB>value': " + line);
        MetricLine ml;
        ml.name = line.substr(0, t1);
        try {
            ml.k = std::stoul(line.substr(t1 + 1, t2 - t1 - 1));
            ml.value = std::stod(line.substr(t2 + 1));
        } catch (const std::exception&) {
            throw DataError("report line has non-numeric fields: " + line);
        }
        lines.push_back(std::move(ml));
    }
    return lines;
}

}  // namespace mssnn
