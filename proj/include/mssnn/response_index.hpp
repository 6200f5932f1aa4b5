#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "mssnn/common.hpp"
#include "mssnn/rng.hpp"

namespace mssnn {

struct AnnConfig {
    std::size_t trees = 50;
    std::size_t leaf_size = 16;
    std::uint64_t seed = 0;
};

struct Scored {
    std::uint32_t id;
    real score;
};

// Ranked (id, dot-product) list, scores non-increasing, ids distinct.
using RetrievalResult = std::vector<Scored>;

// Random-projection tree stored as a flat node array; node 0 is the root.
struct RpTree {
    struct Node {
        std::int32_t left = -1;   // -1 on leaves
        std::int32_t right = -1;
        real threshold = 0;
        std::vector<real> split;          // unit direction; empty on leaves
        std::vector<std::uint32_t> items; // leaf members; empty on internal
        bool is_leaf() const { return left < 0; }
    };
    std::vector<Node> nodes;
};

// Frozen pool of unit response vectors with exact and forest-based
// approximate dot-product search.
class ResponseIndex {
  public:
    // Vectors are count x dim row-major and must already be unit length.
    static ResponseIndex build(std::vector<std::string> texts, std::vector<real> vectors,
                               std::size_t dim, const AnnConfig& cfg);

    RetrievalResult search_exact(const std::vector<real>& query, std::size_t k) const;
    RetrievalResult search_ann(const std::vector<real>& query, std::size_t k,
                               std::size_t budget) const;

    void save(const std::string& path) const;
    static ResponseIndex load(const std::string& path);

    std::size_t size() const { return texts_.size(); }
    std::size_t dim() const { return dim_; }
    const std::string& text(std::size_t id) const { return texts_.at(id); }
    const AnnConfig& config() const { return cfg_; }
    const std::vector<RpTree>& forest() const { return trees_; }
    const real* vector_of(std::size_t id) const { return &vecs_[id * dim_]; }

  private:
    std::size_t dim_ = 0;
    std::vector<real> vecs_;  // size() x dim_
    std::vector<std::string> texts_;
    std::vector<RpTree> trees_;
    AnnConfig cfg_;
};

// Projects each text through the supplied embedding function and builds the
// index; a zero projection is reported with the offending response text.
ResponseIndex build_response_index(
    const std::vector<std::string>& texts,
    const std::function<std::vector<real>(const std::string&)>& project, const AnnConfig& cfg);

}  // namespace mssnn
