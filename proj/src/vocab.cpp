#include "mssnn/vocab.hpp"

#include <algorithm>
#include <cctype>
#include <map>
#include <sstream>

#include "mssnn/io.hpp"

namespace mssnn {

const char* const Vocabulary::RESERVED[4] = {"<pad>", "<unk>", "<bos>", "<eos>"};

namespace {

bool is_terminal_punct(char c) {
    return c == '.' || c == ',' || c == '!' || c == '?' || c == ';' || c == ':';
}

}  // namespace

std::vector<std::string> tokenize(const std::string& text) {
    std::vector<std::string> out;
    std::string piece;
    auto flush = [&]() {
        if (piece.empty()) return;
        std::string tail;
        while (piece.size() > 1 && is_terminal_punct(piece.back())) {
            tail.push_back(piece.back());
            piece.pop_back();
        }
        out.push_back(piece);
        for (auto it = tail.rbegin(); it != tail.rend(); ++it) out.push_back(std::string(1, *it));
        piece.clear();
    };
    for (unsigned char c : text) {
        if (std::isspace(c)) {
            flush();
        } else {
            piece.push_back(static_cast<char>(std::tolower(c)));
        }
    }
    flush();
    return out;
}

Vocabulary::Vocabulary() {
    for (const char* t : RESERVED) {
        tok2id_[t] = static_cast<int>(id2tok_.size());
        id2tok_.push_back(t);
    }
}

Vocabulary Vocabulary::build(const std::vector<RawPair>& pairs, std::size_t max_size) {
    if (max_size < 5)
        throw ContractError("vocab max_size must be >= 5, got " + std::to_string(max_size));
    std::unordered_map<std::string, std::size_t> freq;
    for (const auto& p : pairs) {
        for (const auto& t : tokenize(p.query)) ++freq[t];
        for (const auto& t : tokenize(p.response)) ++freq[t];
    }
    Vocabulary v;
    for (const char* r : RESERVED) freq.erase(r);
    std::vector<std::pair<std::string, std::size_t>> ranked(freq.begin(), freq.end());
    std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
        if (a.second != b.second) return a.second > b.second;
        return a.first < b.first;
    });
    const std::size_t keep = std::min(ranked.size(), max_size - 4);
    for (std::size_t i = 0; i < keep; ++i) {
        v.tok2id_[ranked[i].first] = static_cast<int>(v.id2tok_.size());
        v.id2tok_.push_back(ranked[i].first);
    }
    return v;
}

int Vocabulary::id(const std::string& token) const {
    auto it = tok2id_.find(token);
    return it == tok2id_.end() ? UNK : it->second;
}

const std::string& Vocabulary::token(int id) const {
    if (id < 0 || static_cast<std::size_t>(id) >= id2tok_.size())
        throw ContractError("token id out of range: " + std::to_string(id));
    return id2tok_[static_cast<std::size_t>(id)];
}

std::vector<int> Vocabulary::encode(const std::vector<std::string>& tokens) const {
    std::vector<int> ids;
    ids.reserve(tokens.size());
    for (const auto& t : tokens) ids.push_back(id(t));
    return ids;
}

std::vector<std::string> Vocabulary::decode(const std::vector<int>& ids) const {
    std::vector<std::string> tokens;
    tokens.reserve(ids.size());
    for (int i : ids) tokens.push_back(token(i));
    return tokens;
}

void Vocabulary::save(const std::string& path) const {
    std::string body;
    for (const auto& t : id2tok_) {
        body += t;
        body += '\n';
    }
    write_text_file(path, body);
}

Vocabulary Vocabulary::load(const std::string& path) {
    const std::string body = read_text_file(path);
    Vocabulary v;
    v.id2tok_.clear();
    v.tok2id_.clear();
    std::istringstream in(body);
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) throw DataError("vocab file: empty line at id " +
                                          std::to_string(v.id2tok_.size()) + " in " + path);
        if (v.tok2id_.count(line))
            throw DataError("vocab file: duplicate token '" + line + "' in " + path);
        v.tok2id_[line] = static_cast<int>(v.id2tok_.size());
        v.id2tok_.push_back(line);
    }
    if (v.id2tok_.size() < 4) throw DataError("vocab file too short: " + path);
    for (int i = 0; i < 4; ++i)
        if (v.id2tok_[static_cast<std::size_t>(i)] != RESERVED[i])
            throw DataError("vocab file: reserved slot " + std::to_string(i) + " holds '" +
                            v.id2tok_[static_cast<std::size_t>(i)] + "', expected '" +
                            RESERVED[i] + "'");
    return v;
}

}  // namespace mssnn
