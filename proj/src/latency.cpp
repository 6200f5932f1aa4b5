#include "mssnn/latency.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <sstream>

namespace mssnn {

const LatencyCell* LatencyTable::find(const std::string& engine, std::size_t k) const {
    for (const auto& c : cells)
        if (c.engine == engine && c.k == k) return &c;
    return nullptr;
}

namespace {

double percentile(std::vector<double>& sorted, double q) {
    // Nearest-rank on the sorted sample.
    const auto n = sorted.size();
    std::size_t idx = static_cast<std::size_t>(std::ceil(q * static_cast<double>(n)));
    if (idx > 0) --idx;
    return sorted[std::min(idx, n - 1)];
}

}  // namespace

LatencyTable run_latency_bench(const std::vector<BenchEngine>& engines,
                               std::size_t query_count, const BenchConfig& cfg) {
    if (engines.empty() || query_count == 0 || cfg.k_values.empty())
        throw ContractError("latency bench: engines, queries and k list must be nonempty");
    using clock = std::chrono::steady_clock;

    LatencyTable table;
    for (const auto& eng : engines) {
        for (std::size_t k : cfg.k_values) {
            std::size_t q = 0;
            for (std::size_t w = 0; w < cfg.warmup; ++w) {
                eng.run(q, k);
                q = (q + 1) % query_count;
            }
            std::vector<double> us;
            us.reserve(cfg.min_runs);
            while (us.size() < cfg.min_runs) {
                const auto t0 = clock::now();
                eng.run(q, k);
                const auto t1 = clock::now();
                us.push_back(std::chrono::duration<double, std::micro>(t1 - t0).count());
                q = (q + 1) % query_count;
            }
            LatencyCell cell;
            cell.engine = eng.name;
            cell.k = k;
            cell.runs = us.size();
            double total = 0;
            for (double x : us) total += x;
            cell.mean_us = total / static_cast<double>(us.size());
            std::sort(us.begin(), us.end());
            cell.p50_us = percentile(us, 0.50);
            cell.p95_us = percentile(us, 0.95);
            table.cells.push_back(std::move(cell));
        }
    }
    return table;
}

std::string render_latency_table(const LatencyTable& table) {
    // Column order follows first appearance; row order follows k values.
    std::vector<std::string> engines;
    std::vector<std::size_t> ks;
    for (const auto& c : table.cells) {
        if (std::find(engines.begin(), engines.end(), c.engine) == engines.end())
            engines.push_back(c.engine);
        if (std::find(ks.begin(), ks.end(), c.k) == ks.end()) ks.push_back(c.k);
    }
    std::string out = "k";
    for (const auto& e : engines)
        out += "\t" + e + "_mean\t" + e + "_p50\t" + e + "_p95";
    out += '\n';
    char buf[64];
    for (std::size_t k : ks) {
        out += std::to_string(k);
        for (const auto& e : engines) {
            const LatencyCell* c = table.find(e, k);
            if (c == nullptr) throw ContractError("latency table: missing cell " + e +
                                                  "@" + std::to_string(k));
            std::snprintf(buf, sizeof(buf), "\t%.2f\t%.2f\t%.2f", c->mean_us, c->p50_us,
                          c->p95_us);
            out += buf;
        }
        out += '\n';
    }
    return out;
}

LatencyTable parse_latency_table(const std::string& text) {
    std::istringstream in(text);
    std::string line;
    if (!std::getline(in, line)) throw DataError("latency table: empty");

    auto split_tabs = [](const std::string& s) {
        std::vector<std::string> fields;
        std::size_t start = 0;
        while (true) {
            const std::size_t tab = s.find('\t', start);
            fields.push_back(s.substr(start, tab - start));
            if (tab == std::string::npos) break;
            start = tab + 1;
        }
        return fields;
    };

    const auto header = split_tabs(line);
    if (header.empty() || header[0] != "k" || (header.size() - 1) % 3 != 0)
        throw DataError("latency table: bad header");
    std::vector<std::string> engines;
    for (std::size_t i = 1; i < header.size(); i += 3) {
        const std::string& h = header[i];
        if (h.size() < 6 || h.substr(h.size() - 5) != "_mean")
            throw DataError("latency table: bad column '" + h + "'");
        engines.push_back(h.substr(0, h.size() - 5));
    }

    LatencyTable table;
    std::size_t lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        const auto fields = split_tabs(line);
        if (fields.size() != 1 + engines.size() * 3)
            throw DataError("latency table: line " + std::to_string(lineno) +
                            " has wrong field count");
        try {
            const std::size_t k = std::stoul(fields[0]);
            for (std::size_t e = 0; e < engines.size(); ++e) {
                LatencyCell c;
                c.engine = engines[e];
                c.k = k;
                c.mean_us = std::stod(fields[1 + e * 3]);
                c.p50_us = std::stod(fields[2 + e * 3]);
                c.p95_us = std::stod(fields[3 + e * 3]);
                table.cells.push_back(std::move(c));
            }
        } catch (const std::logic_error&) {
            throw DataError("latency table: line " + std::to_string(lineno) +
                            " has a non-numeric field");
        }
    }
    return table;
}

}  // namespace mssnn
