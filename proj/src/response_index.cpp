#include "mssnn/response_index.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <queue>

#include "mssnn/io.hpp"

namespace mssnn {

namespace {

constexpr char INDEX_MAGIC[4] = {'M', 'S', 'S', 'I'};
constexpr std::uint32_t INDEX_VERSION = 1;

real dot(const real* a, const real* b, std::size_t d) {
    real s = 0;
    for (std::size_t i = 0; i < d; ++i) s += a[i] * b[i];
    return s;
}

std::vector<real> random_unit(std::size_t d, Rng& rng) {
    std::vector<real> v(d);
    for (;;) {
        real norm2 = 0;
        for (auto& x : v) {
            x = static_cast<real>(rng.normal());
            norm2 += x * x;
        }
        if (norm2 > 0) {
            const real inv = real(1) / std::sqrt(norm2);
            for (auto& x : v) x *= inv;
            return v;
        }
    }
}

struct TreeBuilder {
    const std::vector<real>& vecs;
    std::size_t dim;
    std::size_t leaf_size;
    Rng& rng;
    RpTree tree;

    // Splits at the upper-median projection onto a random unit direction;
    // after a few degenerate draws (everything on one side) the node becomes
    // an oversized leaf.
    std::int32_t build(std::vector<std::uint32_t> items) {
        const std::int32_t id = static_cast<std::int32_t>(tree.nodes.size());
        tree.nodes.emplace_back();
        if (items.size() <= leaf_size) {
            tree.nodes[id].items = std::move(items);
            return id;
        }
        for (int attempt = 0; attempt < 8; ++attempt) {
            std::vector<real> split = random_unit(dim, rng);
            std::vector<real> proj(items.size());
            for (std::size_t i = 0; i < items.size(); ++i)
                proj[i] = dot(&vecs[items[i] * dim], split.data(), dim);
            std::vector<real> med(proj);
            const std::size_t mid = med.size() / 2;
            std::nth_element(med.begin(), med.begin() + static_cast<std::ptrdiff_t>(mid),
                             med.end());
            const real thr = med[mid];
            std::vector<std::uint32_t> left, right;
            for (std::size_t i = 0; i < items.size(); ++i)
                (proj[i] < thr ? left : right).push_back(items[i]);
            if (left.empty() || right.empty()) continue;
            tree.nodes[id].threshold = thr;
            tree.nodes[id].split = std::move(split);
            const std::int32_t l = build(std::move(left));
            const std::int32_t r = build(std::move(right));
            tree.nodes[id].left = l;
            tree.nodes[id].right = r;
            return id;
        }
        tree.nodes[id].items = std::move(items);
        return id;
    }
};

void rank_and_trim(RetrievalResult& out, std::size_t k) {
    const std::size_t keep = std::min(k, out.size());
    std::partial_sort(out.begin(), out.begin() + static_cast<std::ptrdiff_t>(keep), out.end(),
                      [](const Scored& a, const Scored& b) {
                          if (a.score != b.score) return a.score > b.score;
                          return a.id < b.id;
                      });
    out.resize(keep);
}

}  // namespace

ResponseIndex ResponseIndex::build(std::vector<std::string> texts, std::vector<real> vectors,
                                   std::size_t dim, const AnnConfig& cfg) {
    if (texts.empty()) throw DataError("index build: empty response pool");
    if (dim == 0 || vectors.size() != texts.size() * dim)
        throw DimensionError("index build: vector buffer size mismatch");
    for (std::size_t i = 0; i < texts.size(); ++i) {
        const real n2 = dot(&vectors[i * dim], &vectors[i * dim], dim);
        if (std::abs(n2 - real(1)) > real(1e-4))
            throw ContractError("index build: vector " + std::to_string(i) + " is not unit length");
    }
    ResponseIndex idx;
    idx.dim_ = dim;
    idx.vecs_ = std::move(vectors);
    idx.texts_ = std::move(texts);
    idx.cfg_ = cfg;
    std::vector<std::uint32_t> all(idx.texts_.size());
    for (std::size_t i = 0; i < all.size(); ++i) all[i] = static_cast<std::uint32_t>(i);
    for (std::size_t t = 0; t < cfg.trees; ++t) {
        Rng rng = Rng::substream(cfg.seed, "tree", t);
        TreeBuilder b{idx.vecs_, dim, std::max<std::size_t>(1, cfg.leaf_size), rng, {}};
        b.build(all);
        idx.trees_.push_back(std::move(b.tree));
    }
    return idx;
}

RetrievalResult ResponseIndex::search_exact(const std::vector<real>& query,
                                            std::size_t k) const {
    if (k < 1) throw ContractError("search: k must be >= 1");
    if (query.size() != dim_) throw DimensionError("search: query dimension mismatch");
    RetrievalResult out;
    out.reserve(size());
    for (std::size_t i = 0; i < size(); ++i)
        out.push_back(Scored{static_cast<std::uint32_t>(i), dot(&vecs_[i * dim_], query.data(), dim_)});
    rank_and_trim(out, k);
    return out;
}

// Annoy-style traversal: one max-heap of split margins shared across trees;
// the far side of each split re-enters the queue with the margin it would
// have to overcome, so promising branches in any tree are explored first.
// `budget` is the per-tree candidate allowance: each tree feeds in leaf items
// (margin order) until it has contributed that many; with budget = pool size
// every tree drains fully and the result equals exact search.
RetrievalResult ResponseIndex::search_ann(const std::vector<real>& query, std::size_t k,
                                          std::size_t budget) const {
    if (k < 1) throw ContractError("search: k must be >= 1");
    if (budget < k) throw ContractError("search: budget must be >= k");
    if (query.size() != dim_) throw DimensionError("search: query dimension mismatch");

    struct Entry {
        real margin;
        std::uint32_t tree;
        std::int32_t node;
        bool operator<(const Entry& o) const { return margin < o.margin; }
    };
    std::priority_queue<Entry> pq;
    const real inf = std::numeric_limits<real>::max();
    for (std::size_t t = 0; t < trees_.size(); ++t)
        pq.push(Entry{inf, static_cast<std::uint32_t>(t), 0});

    std::vector<std::size_t> contributed(trees_.size(), 0);
    std::size_t trees_capped = 0;
    std::vector<std::uint8_t> seen(size(), 0);
    std::vector<std::uint32_t> candidates;
    while (!pq.empty() && trees_capped < trees_.size() && candidates.size() < size()) {
        const Entry e = pq.top();
        pq.pop();
        if (contributed[e.tree] >= budget) continue;
        const RpTree::Node& node = trees_[e.tree].nodes[static_cast<std::size_t>(e.node)];
        if (node.is_leaf()) {
            for (std::uint32_t item : node.items) {
                if (contributed[e.tree] >= budget) break;
                ++contributed[e.tree];
                if (!seen[item]) {
                    seen[item] = 1;
                    candidates.push_back(item);
                }
            }
            if (contributed[e.tree] >= budget) ++trees_capped;
        } else {
            const real margin = dot(query.data(), node.split.data(), dim_) - node.threshold;
            pq.push(Entry{std::min(e.margin, margin), e.tree, node.right});
            pq.push(Entry{std::min(e.margin, -margin), e.tree, node.left});
        }
    }

    RetrievalResult out;
    out.reserve(candidates.size());
    for (std::uint32_t id : candidates)
        out.push_back(Scored{id, dot(&vecs_[id * dim_], query.data(), dim_)});
    rank_and_trim(out, k);
    return out;
}

void ResponseIndex::save(const std::string& path) const {
    BinaryWriter w(path);
    w.bytes(INDEX_MAGIC, 4);
    w.u32(INDEX_VERSION);
    w.u64(dim_);
    w.u64(texts_.size());
    w.u64(cfg_.trees);
    w.u64(cfg_.leaf_size);
    w.u64(cfg_.seed);
    for (real v : vecs_) w.f32(static_cast<float>(v));
    for (const auto& t : texts_) w.str(t);
    w.u64(trees_.size());
    for (const auto& tree : trees_) {
        w.u64(tree.nodes.size());
        for (const auto& n : tree.nodes) {
            w.u8(n.is_leaf() ? 1 : 0);
            if (n.is_leaf()) {
                w.u64(n.items.size());
                for (std::uint32_t it : n.items) w.u32(it);
            } else {
                w.u32(static_cast<std::uint32_t>(n.left));
                w.u32(static_cast<std::uint32_t>(n.right));
                w.f32(static_cast<float>(n.threshold));
                for (real v : n.split) w.f32(static_cast<float>(v));
            }
        }
    }
    w.commit();
}

ResponseIndex ResponseIndex::load(const std::string& path) {
    BinaryReader r(path);
    char magic[4];
    r.bytes(magic, 4);
    if (std::string(magic, 4) != std::string(INDEX_MAGIC, 4))
        throw DataError("not an index file (bad magic): " + path);
    const std::uint32_t version = r.u32();
    if (version != INDEX_VERSION)
        throw DataError("index version " + std::to_string(version) + " unsupported");
    ResponseIndex idx;
    idx.dim_ = r.u64();
    const std::uint64_t count = r.u64();
    idx.cfg_.trees = r.u64();
    idx.cfg_.leaf_size = r.u64();
    idx.cfg_.seed = r.u64();
    idx.vecs_.resize(count * idx.dim_);
    for (auto& v : idx.vecs_) v = static_cast<real>(r.f32());
    idx.texts_.reserve(count);
    for (std::uint64_t i = 0; i < count; ++i) idx.texts_.push_back(r.str());
    const std::uint64_t ntrees = r.u64();
    for (std::uint64_t t = 0; t < ntrees; ++t) {
        RpTree tree;
        const std::uint64_t nnodes = r.u64();
        for (std::uint64_t n = 0; n < nnodes; ++n) {
            RpTree::Node node;
            if (r.u8()) {
                const std::uint64_t nitems = r.u64();
                node.items.reserve(nitems);
                for (std::uint64_t i = 0; i < nitems; ++i) node.items.push_back(r.u32());
            } else {
                node.left = static_cast<std::int32_t>(r.u32());
                node.right = static_cast<std::int32_t>(r.u32());
                node.threshold = static_cast<real>(r.f32());
                node.split.resize(idx.dim_);
                for (auto& v : node.split) v = static_cast<real>(r.f32());
            }
            tree.nodes.push_back(std::move(node));
        }
        idx.trees_.push_back(std::move(tree));
    }
    if (!r.at_eof()) throw DataError("index: trailing bytes in " + path);
    return idx;
}

ResponseIndex build_response_index(
    const std::vector<std::string>& texts,
    const std::function<std::vector<real>(const std::string&)>& project, const AnnConfig& cfg) {
    if (texts.empty()) throw DataError("index build: empty response pool");
    std::vector<real> vectors;
    std::size_t dim = 0;
    for (std::size_t i = 0; i < texts.size(); ++i) {
        std::vector<real> v;
        try {
            v = project(texts[i]);
        } catch (const NumericError&) {
            throw NumericError("index build: zero projection for response: " + texts[i]);
        }
        if (i == 0) {
            dim = v.size();
            vectors.reserve(texts.size() * dim);
        }
        if (v.size() != dim) throw DimensionError("index build: inconsistent projection size");
        vectors.insert(vectors.end(), v.begin(), v.end());
    }
    return ResponseIndex::build(texts, std::move(vectors), dim, cfg);
}

}  // namespace mssnn
