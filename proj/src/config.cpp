#include "mssnn/config.hpp"

#include <charconv>
#include <functional>
#include <set>
#include <sstream>

#include "mssnn/io.hpp"

namespace mssnn {

namespace {

std::string trim(const std::string& s) {
    std::size_t b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return "";
    std::size_t e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

std::string fmt_double(double v) {
    // Shortest representation that parses back to the same bits.
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

std::string fmt_list(const std::vector<std::size_t>& v) {
    std::string out;
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (i) out += ',';
        out += std::to_string(v[i]);
    }
    return out;
}

std::size_t parse_size(const std::string& s, const std::string& where) {
    std::size_t v = 0;
    auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (res.ec != std::errc() || res.ptr != s.data() + s.size())
        throw DataError("config: " + where + ": expected a non-negative integer, got '" + s + "'");
    return v;
}

double parse_double(const std::string& s, const std::string& where) {
    double v = 0;
    auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (res.ec != std::errc() || res.ptr != s.data() + s.size())
        throw DataError("config: " + where + ": expected a number, got '" + s + "'");
    return v;
}

bool parse_bool(const std::string& s, const std::string& where) {
    if (s == "true") return true;
    if (s == "false") return false;
    throw DataError("config: " + where + ": expected true or false, got '" + s + "'");
}

std::vector<std::size_t> parse_list(const std::string& s, const std::string& where) {
    std::vector<std::size_t> out;
    if (s.empty()) return out;
    std::size_t start = 0;
    while (true) {
        const std::size_t comma = s.find(',', start);
        out.push_back(parse_size(trim(s.substr(start, comma - start)), where));
        if (comma == std::string::npos) break;
        start = comma + 1;
    }
    return out;
}

struct Binding {
    std::string section;
    std::string key;
    std::function<std::string(const RunConfig&)> get;
    std::function<void(RunConfig&, const std::string&, const std::string&)> set;
};

#define STR_FIELD(sec, name, field)                                                   \
    Binding{sec, name, [](const RunConfig& c) { return c.field; },                    \
            [](RunConfig& c, const std::string& v, const std::string&) { c.field = v; }}
#define SIZE_FIELD(sec, name, field)                                                  \
    Binding{sec, name, [](const RunConfig& c) { return std::to_string(c.field); },    \
            [](RunConfig& c, const std::string& v, const std::string& w) {            \
                c.field = parse_size(v, w);                                           \
            }}
#define DOUBLE_FIELD(sec, name, field)                                                \
    Binding{sec, name, [](const RunConfig& c) { return fmt_double(c.field); },        \
            [](RunConfig& c, const std::string& v, const std::string& w) {            \
                c.field = parse_double(v, w);                                         \
            }}
#define BOOL_FIELD(sec, name, field)                                                  \
    Binding{sec, name,                                                                \
            [](const RunConfig& c) { return std::string(c.field ? "true" : "false"); },\
            [](RunConfig& c, const std::string& v, const std::string& w) {            \
                c.field = parse_bool(v, w);                                           \
            }}
#define LIST_FIELD(sec, name, field)                                                  \
    Binding{sec, name, [](const RunConfig& c) { return fmt_list(c.field); },          \
            [](RunConfig& c, const std::string& v, const std::string& w) {            \
                c.field = parse_list(v, w);                                           \
            }}

const std::vector<Binding>& bindings() {
    static const std::vector<Binding> b = {
        Binding{"", "seed", [](const RunConfig& c) { return std::to_string(c.seed); },
                [](RunConfig& c, const std::string& v, const std::string& w) {
                    c.seed = static_cast<std::uint64_t>(parse_size(v, w));
                }},
        SIZE_FIELD("model", "vocab_size", vocab_size),
        SIZE_FIELD("model", "embedding_dim", embedding_dim),
        SIZE_FIELD("model", "hidden_dim", hidden_dim),
        SIZE_FIELD("model", "projection_dim", projection_dim),
        SIZE_FIELD("model", "maxout_pieces", maxout_pieces),
        DOUBLE_FIELD("model", "alpha", alpha),
        DOUBLE_FIELD("model", "beta", beta),
        DOUBLE_FIELD("model", "gamma", gamma),
        STR_FIELD("data", "corpus", corpus),
        STR_FIELD("data", "vocab", vocab),
        STR_FIELD("data", "targets", targets),
        STR_FIELD("data", "manifest", manifest),
        SIZE_FIELD("data", "max_len", max_len),
        BOOL_FIELD("data", "smoothed_idf", smoothed_idf),
        STR_FIELD("train", "checkpoint", checkpoint),
        STR_FIELD("train", "train_log", train_log),
        SIZE_FIELD("train", "epochs", epochs),
        SIZE_FIELD("train", "batch_size", batch_size),
        DOUBLE_FIELD("train", "lr", lr),
        BOOL_FIELD("train", "resume", resume),
        STR_FIELD("index", "index", index),
        STR_FIELD("index", "responses", responses),
        SIZE_FIELD("index", "trees", trees),
        SIZE_FIELD("index", "leaf_size", leaf_size),
        SIZE_FIELD("index", "search_budget", search_budget),
        STR_FIELD("eval", "eval_set", eval_set),
        STR_FIELD("eval", "report", report),
        STR_FIELD("eval", "embeddings", embeddings),
        LIST_FIELD("eval", "recall_ks", recall_ks),
        LIST_FIELD("eval", "coverage_ks", coverage_ks),
        LIST_FIELD("eval", "embedding_ks", embedding_ks),
        STR_FIELD("eval", "bench_report", bench_report),
        LIST_FIELD("eval", "bench_ks", bench_ks),
    };
    return b;
}

#undef STR_FIELD
#undef SIZE_FIELD
#undef DOUBLE_FIELD
#undef BOOL_FIELD
#undef LIST_FIELD

const Binding* find_binding(const std::string& section, const std::string& key) {
    for (const auto& b : bindings())
        if (b.section == section && b.key == key) return &b;
    return nullptr;
}

}  // namespace

void RunConfig::validate() const {
    model().validate();
    if (batch_size == 0) throw ContractError("config: batch_size must be positive");
    if (max_len == 0) throw ContractError("config: max_len must be positive");
    if (trees == 0 || leaf_size == 0)
        throw ContractError("config: trees and leaf_size must be positive");
    if (search_budget == 0) throw ContractError("config: search_budget must be positive");
    for (const auto* ks : {&recall_ks, &coverage_ks, &embedding_ks, &bench_ks})
        for (std::size_t k : *ks)
            if (k == 0) throw ContractError("config: metric k values must be positive");
}

RunConfig parse_config(const std::string& text) {
    RunConfig cfg;
    std::set<std::pair<std::string, std::string>> seen;
    std::istringstream in(text);
    std::string line, section;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const std::string t = trim(line);
        if (t.empty() || t[0] == '#') continue;
        if (t.front() == '[') {
            if (t.back() != ']')
                throw DataError("config: line " + std::to_string(lineno) +
                                ": unterminated section header");
            section = trim(t.substr(1, t.size() - 2));
            continue;
        }
        const std::size_t eq = t.find('=');
        if (eq == std::string::npos)
            throw DataError("config: line " + std::to_string(lineno) + ": expected key = value");
        const std::string key = trim(t.substr(0, eq));
        const std::string value = trim(t.substr(eq + 1));
        const std::string where =
            (section.empty() ? key : section + "." + key) + " (line " + std::to_string(lineno) + ")";
        const Binding* b = find_binding(section, key);
        if (b == nullptr)
            throw DataError("config: unknown key '" +
                            (section.empty() ? key : section + "." + key) + "' at line " +
                            std::to_string(lineno));
        if (!seen.insert({section, key}).second)
            throw DataError("config: duplicate key '" +
                            (section.empty() ? key : section + "." + key) + "' at line " +
                            std::to_string(lineno));
        b->set(cfg, value, where);
    }
    return cfg;
}

std::string render_config(const RunConfig& cfg) {
    std::string out;
    std::string section;
    bool first = true;
    for (const auto& b : bindings()) {
        if (b.section != section || first) {
            if (!first) out += '\n';
            if (!b.section.empty()) out += "[" + b.section + "]\n";
            section = b.section;
            first = false;
        }
        out += b.key + " = " + b.get(cfg) + "\n";
    }
    return out;
}

RunConfig load_config(const std::string& path) { return parse_config(read_text_file(path)); }

void save_config(const std::string& path, const RunConfig& cfg) {
    write_text_file(path, render_config(cfg));
}

}  // namespace mssnn
