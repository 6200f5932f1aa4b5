#pragma once

#include <functional>
#include <string>
#include <vector>

#include "mssnn/common.hpp"

namespace mssnn {

// Wall-clock retrieval benchmark. Single-threaded by design; comparative
// numbers are only meaningful inside one run on one machine.
struct LatencyCell {
    std::string engine;
    std::size_t k = 0;
    double mean_us = 0.0;
    double p50_us = 0.0;
    double p95_us = 0.0;
    std::size_t runs = 0;
};

struct LatencyTable {
    std::vector<LatencyCell> cells;

    const LatencyCell* find(const std::string& engine, std::size_t k) const;
};

struct BenchEngine {
    std::string name;
    // Runs one query at the given k; the result is intentionally discarded.
    std::function<void(std::size_t query, std::size_t k)> run;
};

struct BenchConfig {
    std::vector<std::size_t> k_values{10, 30, 50, 70, 90, 110, 130, 150, 170, 190};
    std::size_t warmup = 10;    // discarded executions per (engine, k)
    std::size_t min_runs = 100; // measured executions per (engine, k)
};

// Cycles through `query_count` query indices until min_runs measurements are
// collected for every engine/k pair.
LatencyTable run_latency_bench(const std::vector<BenchEngine>& engines,
                               std::size_t query_count, const BenchConfig& cfg);

// Tab-separated table: header "k\t<engine>_mean\t<engine>_p50\t<engine>_p95..."
// then one row per k, microseconds with 2 decimals.
std::string render_latency_table(const LatencyTable& table);
LatencyTable parse_latency_table(const std::string& text);

}  // namespace mssnn
