#pragma once

#include <string>
#include <unordered_map>
#include <vector>

#include "mssnn/tensor.hpp"

namespace mssnn {

// Named parameter bank. Registration order is the canonical iteration order
// (optimizer updates, serialization), so runs are reproducible.
template <typename T>
class ParamStore {
  public:
    struct Entry {
        std::string name;
        Array<T> value;
    };

    Array<T>& add(const std::string& name, Array<T> v) {
        if (index_.count(name)) throw ContractError("duplicate parameter: " + name);
        index_[name] = entries_.size();
        entries_.push_back(Entry{name, std::move(v)});
        return entries_.back().value;
    }

    bool has(const std::string& name) const { return index_.count(name) != 0; }

    std::size_t index_of(const std::string& name) const {
        auto it = index_.find(name);
        if (it == index_.end()) throw ContractError("unknown parameter: " + name);
        return it->second;
    }

    Array<T>& get(const std::string& name) {
        auto it = index_.find(name);
        if (it == index_.end()) throw ContractError("unknown parameter: " + name);
        return entries_[it->second].value;
    }

    const Array<T>& get(const std::string& name) const {
        auto it = index_.find(name);
        if (it == index_.end()) throw ContractError("unknown parameter: " + name);
        return entries_[it->second].value;
    }

    std::vector<Entry>& entries() { return entries_; }
    const std::vector<Entry>& entries() const { return entries_; }

    std::size_t size() const { return entries_.size(); }

    std::size_t scalar_count() const {
        std::size_t n = 0;
        for (const auto& e : entries_) n += e.value.numel();
        return n;
    }

  private:
    std::vector<Entry> entries_;
    std::unordered_map<std::string, std::size_t> index_;
};

}  // namespace mssnn
