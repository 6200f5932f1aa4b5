#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "mssnn/adam.hpp"
#include "mssnn/io.hpp"
#include "mssnn/model.hpp"

namespace mssnn {

// Checkpoint layout (all little-endian):
//   magic "MSSN", u32 version
//   config: u64 vocab,d,emb,hidden,pieces; f64 alpha,beta,gamma,lr; u64 seed
//   u64 epochs_done, u64 adam step counter
//   u64 tensor count, then per tensor:
//     u32 name length, name bytes, u32 rank, u64 dims..., f32 values
// Tensors are the parameters in registration order, then adam.m.<name> and
// adam.v.<name> for each (omitted when no optimizer state is attached).

inline constexpr char CKPT_MAGIC[4] = {'M', 'S', 'S', 'N'};
inline constexpr std::uint32_t CKPT_VERSION = 1;

namespace detail {

template <typename T>
void write_named_tensor(BinaryWriter& w, const std::string& name, const Array<T>& a) {
    w.str(name);
    w.u32(static_cast<std::uint32_t>(a.rank()));
    for (std::size_t d : a.shape) w.u64(d);
    for (const T& x : a.data) w.f32(static_cast<float>(x));
}

template <typename T>
std::pair<std::string, Array<T>> read_named_tensor(BinaryReader& r) {
    const std::string name = r.str();
    const std::uint32_t rank = r.u32();
    if (rank > 4) throw DataError("checkpoint: implausible tensor rank for " + name);
    Shape shape;
    for (std::uint32_t i = 0; i < rank; ++i) shape.push_back(r.u64());
    Array<T> a = Array<T>::zeros(shape);
    for (auto& x : a.data) x = static_cast<T>(r.f32());
    return {name, std::move(a)};
}

}  // namespace detail

template <typename T>
void save_checkpoint(const std::string& path, const Model<T>& model, const AdamState<T>* adam,
                     std::uint64_t epochs_done) {
    BinaryWriter w(path);
    w.bytes(CKPT_MAGIC, 4);
    w.u32(CKPT_VERSION);
    const ModelConfig& c = model.cfg;
    w.u64(c.vocab);
    w.u64(c.d);
    w.u64(c.emb);
    w.u64(c.hidden);
    w.u64(c.pieces);
    w.f64(c.alpha);
    w.f64(c.beta);
    w.f64(c.gamma);
    w.f64(c.lr);
    w.u64(c.seed);
    w.u64(epochs_done);
    w.u64(adam ? static_cast<std::uint64_t>(adam->step_count()) : 0);
    const auto& entries = model.params.entries();
    w.u64(entries.size() * (adam ? 3 : 1));
    for (const auto& e : entries) detail::write_named_tensor(w, e.name, e.value);
    if (adam) {
        for (std::size_t i = 0; i < entries.size(); ++i)
            detail::write_named_tensor(w, "adam.m." + entries[i].name, adam->m()[i]);
        for (std::size_t i = 0; i < entries.size(); ++i)
            detail::write_named_tensor(w, "adam.v." + entries[i].name, adam->v()[i]);
    }
    w.commit();
}

template <typename T>
struct Checkpoint {
    Model<T> model;
    AdamState<T> adam;
    bool has_adam = false;
    std::uint64_t epochs_done = 0;
};

template <typename T>
Checkpoint<T> load_checkpoint(const std::string& path) {
    BinaryReader r(path);
    char magic[4];
    r.bytes(magic, 4);
    if (std::string(magic, 4) != std::string(CKPT_MAGIC, 4))
        throw DataError("not a checkpoint file (bad magic): " + path);
    const std::uint32_t version = r.u32();
    if (version != CKPT_VERSION)
        throw DataError("checkpoint version " + std::to_string(version) + " unsupported");
    ModelConfig c;
    c.vocab = r.u64();
    c.d = r.u64();
    c.emb = r.u64();
    c.hidden = r.u64();
    c.pieces = r.u64();
    c.alpha = r.f64();
    c.beta = r.f64();
    c.gamma = r.f64();
    c.lr = r.f64();
    c.seed = r.u64();

    Checkpoint<T> ck;
    ck.model = Model<T>::skeleton(c);
    ck.epochs_done = r.u64();
    const std::uint64_t adam_steps = r.u64();
    const std::uint64_t count = r.u64();
    const std::size_t nparams = ck.model.params.size();
    if (count != nparams && count != 3 * nparams)
        throw DataError("checkpoint: expected " + std::to_string(nparams) + " or " +
                        std::to_string(3 * nparams) + " tensors, found " + std::to_string(count));
    ck.has_adam = count == 3 * nparams;
    ck.adam = AdamState<T>(AdamConfig<T>{static_cast<T>(c.lr)}, ck.model.params);
    ck.adam.set_step_count(static_cast<std::int64_t>(adam_steps));

    auto assign = [&](Array<T>& dst, const std::string& name, std::pair<std::string, Array<T>>& got) {
        if (got.first != name)
            throw DataError("checkpoint: expected tensor '" + name + "', found '" + got.first +
                            "'");
        if (!dst.same_shape(got.second))
            throw DataError("checkpoint: tensor '" + name + "' has shape " +
                            shape_str(got.second.shape) + ", expected " + shape_str(dst.shape));
        dst = std::move(got.second);
    };
    for (auto& e : ck.model.params.entries()) {
        auto got = detail::read_named_tensor<T>(r);
        assign(e.value, e.name, got);
    }
    if (ck.has_adam) {
        auto& entries = ck.model.params.entries();
        for (std::size_t i = 0; i < nparams; ++i) {
            auto got = detail::read_named_tensor<T>(r);
            assign(ck.adam.m()[i], "adam.m." + entries[i].name, got);
        }
        for (std::size_t i = 0; i < nparams; ++i) {
            auto got = detail::read_named_tensor<T>(r);
            assign(ck.adam.v()[i], "adam.v." + entries[i].name, got);
        }
    }
    if (!r.at_eof()) throw DataError("checkpoint: trailing bytes in " + path);
    return ck;
}

// Structural compatibility between a checkpoint's config and the run config;
// returns a human-readable diff of mismatched fields, empty when compatible.
inline std::string config_mismatch(const ModelConfig& file, const ModelConfig& expect) {
    std::string diff;
    auto cmp = [&](const char* name, std::size_t a, std::size_t b) {
        if (a != b)
            diff += std::string(diff.empty() ? "" : ", ") + name + ": checkpoint=" +
                    std::to_string(a) + " config=" + std::to_string(b);
    };
    cmp("vocab", file.vocab, expect.vocab);
    cmp("d", file.d, expect.d);
    cmp("emb", file.emb, expect.emb);
    cmp("hidden", file.hidden, expect.hidden);
    cmp("pieces", file.pieces, expect.pieces);
    return diff;
}

}  // namespace mssnn
