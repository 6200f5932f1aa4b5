#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "mssnn/response_index.hpp"

namespace mssnn {

// Retrieval ground truth: per query, the set of true response ids in a pool.
struct EvalSet {
    std::vector<std::string> queries;
    std::vector<std::vector<std::uint32_t>> truth;  // order as listed; first id is
                                                    // the designated truth for
                                                    // reciprocal-rank scoring
};

// File format: one query per line, "query<TAB>id,id,id".
EvalSet load_eval_set(const std::string& path);

// Every truth id must fall inside the pool; offenders are listed in the error.
void validate_eval_set(const EvalSet& es, std::size_t pool_size);

// Mean over queries of |top-k hits| / |truth set|.
double recall_at_k(const std::vector<RetrievalResult>& results, const EvalSet& es, std::size_t k);

// Mean reciprocal rank of each query's designated true response (truth[i][0]);
// a truth missing from the ranked list contributes 0.
double r_precision(const std::vector<RetrievalResult>& results, const EvalSet& es);

// Mean over queries of |predicted top-k  intersect  reference| / |reference|.
// Queries with empty reference sets are skipped and counted.
double coverage_at_k(const std::vector<std::vector<int>>& predicted,
                     const std::vector<std::vector<int>>& references, std::size_t k,
                     std::size_t* excluded = nullptr);

// Eval report: one metric per line, "name<TAB>k<TAB>value" with 4-decimal
// values; metrics without a k use k=0.
struct MetricLine {
    std::string name;
    std::size_t k = 0;
    double value = 0.0;
};

std::string render_report(const std::vector<MetricLine>& lines);
std::vector<MetricLine> parse_report(const std::string& text);

}  // namespace mssnn
