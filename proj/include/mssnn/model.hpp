#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "mssnn/batch.hpp"
#include "mssnn/params.hpp"
#include "mssnn/rng.hpp"
#include "mssnn/tape.hpp"

namespace mssnn {

struct ModelConfig {
    std::size_t vocab = 30000;  // |V|
    std::size_t d = 512;        // representation size (query/response vectors)
    std::size_t emb = 512;      // |E|
    std::size_t hidden = 1024;  // |H|
    std::size_t pieces = 2;     // maxout pieces
    double alpha = 1.0;         // generation loss weight
    double beta = 1.0;          // word-prediction loss weight
    double gamma = 1.0;         // ranking loss weight
    double lr = 0.0002;
    std::uint64_t seed = 0;

    void validate() const {
        if (vocab < 5 || d == 0 || emb == 0 || hidden == 0 || pieces == 0)
            throw ContractError("model config: sizes must be positive (vocab >= 5)");
    }
};

// One token embedding table serves the encoder input, the decoder input and
// the decoder output projection (logits = readout * emb^T). The predictor
// projection W doubles as the matcher's token embeddings (rows of W). Both
// sharings keep the parameter count at default dims near the 74M budget.
template <typename T>
class Model {
  public:
    ModelConfig cfg;
    ParamStore<T> params;

    static Model init(const ModelConfig& cfg) {
        cfg.validate();
        Model m;
        m.cfg = cfg;
        register_all(m.params, cfg);
        Rng rng = Rng::substream(cfg.seed, "init", 0);
        for (auto& e : m.params.entries())
            e.value = Array<T>::uniform(e.value.shape, rng, T(-0.08), T(0.08));
        return m;
    }

    // Shapes only (zero values); used by checkpoint loading.
    static Model skeleton(const ModelConfig& cfg) {
        cfg.validate();
        Model m;
        m.cfg = cfg;
        register_all(m.params, cfg);
        return m;
    }

    std::size_t param_count() const { return params.scalar_count(); }

  private:
    static void add_gru(ParamStore<T>& p, const std::string& prefix, std::size_t in,
                        std::size_t hid) {
        for (const char* gate : {"r", "z", "h"}) {
            p.add(prefix + ".W" + gate, Array<T>::zeros({in, hid}));
            p.add(prefix + ".U" + gate, Array<T>::zeros({hid, hid}));
            p.add(prefix + ".b" + gate, Array<T>::zeros({1, hid}));
        }
    }

    static void register_all(ParamStore<T>& p, const ModelConfig& c) {
        p.add("emb", Array<T>::zeros({c.vocab, c.emb}));
        add_gru(p, "enc.fw", c.emb, c.hidden);
        add_gru(p, "enc.bw", c.emb, c.hidden);
        add_gru(p, "enc.top", 2 * c.hidden, c.hidden);
        add_gru(p, "dec.gru1", c.emb, c.hidden);
        p.add("att.W", Array<T>::zeros({c.hidden, c.hidden}));
        p.add("att.U", Array<T>::zeros({c.hidden, c.hidden}));
        p.add("att.v", Array<T>::zeros({1, c.hidden}));
        add_gru(p, "dec.gru2", 2 * c.hidden, c.hidden);
        p.add("dec.M", Array<T>::zeros({2 * c.hidden + c.emb, c.pieces * c.emb}));
        p.add("pred.U", Array<T>::zeros({c.emb + c.hidden, c.pieces * c.d}));
        p.add("pred.W", Array<T>::zeros({c.vocab, c.d}));
        add_gru(p, "match", c.d, c.d);
    }
};

// Parameters mirrored onto a tape as leaves for one forward/backward pass.
template <typename T>
struct BoundModel {
    const Model<T>* model = nullptr;
    Tape<T>* tape = nullptr;
    std::vector<Var<T>> vars;  // parallel to params.entries()

    Var<T> get(const std::string& name) const {
        return vars[model->params.index_of(name)];
    }
};

template <typename T>
BoundModel<T> bind(const Model<T>& m, Tape<T>& tape, bool train = true) {
    BoundModel<T> b;
    b.model = &m;
    b.tape = &tape;
    for (const auto& e : m.params.entries()) b.vars.push_back(tape.leaf(e.value, train));
    return b;
}

template <typename T>
struct GruVars {
    Var<T> Wr, Ur, br, Wz, Uz, bz, Wh, Uh, bh;
};

template <typename T>
GruVars<T> gru_vars(const BoundModel<T>& m, const std::string& prefix) {
    return GruVars<T>{m.get(prefix + ".Wr"), m.get(prefix + ".Ur"), m.get(prefix + ".br"),
                      m.get(prefix + ".Wz"), m.get(prefix + ".Uz"), m.get(prefix + ".bz"),
                      m.get(prefix + ".Wh"), m.get(prefix + ".Uh"), m.get(prefix + ".bh")};
}

// Standard GRU update: r, z gates then tanh candidate; h' = h + z*(c - h).
template <typename T>
Var<T> gru_cell(const GruVars<T>& g, Var<T> x, Var<T> h) {
    Var<T> r = sigmoid(add_bias(add(matmul(x, g.Wr), matmul(h, g.Ur)), g.br));
    Var<T> z = sigmoid(add_bias(add(matmul(x, g.Wz), matmul(h, g.Uz)), g.bz));
    Var<T> c = tanh(add_bias(add(matmul(x, g.Wh), matmul(mul(r, h), g.Uh)), g.bh));
    return add(h, mul(z, sub(c, h)));
}

template <typename T>
struct EncOut {
    std::vector<Var<T>> emb_steps;  // per position, [b x E]
    std::vector<Var<T>> states;     // per position, [b x H] (top GRU outputs)
    std::vector<int> lengths;
    std::vector<std::uint8_t> mask;  // b x n, 1 at valid positions
};

namespace detail {

template <typename T>
Var<T> zeros_var(Tape<T>& t, std::size_t rows, std::size_t cols) {
    return t.constant(Array<T>::zeros({rows, cols}));
}

inline std::vector<int> column_ids(const PaddedSeqs& s, std::size_t col) {
    std::vector<int> ids(s.size);
    for (std::size_t i = 0; i < s.size; ++i) ids[i] = s.at(i, col);
    return ids;
}

}  // namespace detail

// Bidirectional GRU over the embedded query feeding a second, unidirectional
// GRU. The backward direction runs forward over each row's reversed valid
// prefix, so trailing pad never touches a valid state; per-position backward
// states are then gathered back into original order.
template <typename T>
EncOut<T> encode_query(const BoundModel<T>& m, const PaddedSeqs& q) {
    Tape<T>& tape = *m.tape;
    const std::size_t b = q.size, n = q.width, H = m.model->cfg.hidden;
    if (b == 0 || n == 0) throw ContractError("encode_query: empty batch");
    for (int L : q.len)
        if (L < 1) throw ContractError("encode_query: empty query row");

    EncOut<T> out;
    out.lengths = q.len;
    out.mask.assign(b * n, 0);
    for (std::size_t i = 0; i < b; ++i)
        for (std::size_t t = 0; t < static_cast<std::size_t>(q.len[i]); ++t)
            out.mask[i * n + t] = 1;

    Var<T> emb = m.get("emb");
    for (std::size_t t = 0; t < n; ++t)
        out.emb_steps.push_back(embedding_rows(emb, detail::column_ids(q, t)));

    GruVars<T> fw = gru_vars(m, "enc.fw");
    std::vector<Var<T>> fw_states;
    Var<T> h = detail::zeros_var(tape, b, H);
    for (std::size_t t = 0; t < n; ++t) {
        h = gru_cell(fw, out.emb_steps[t], h);
        fw_states.push_back(h);
    }

    // Reversed-prefix input for the backward direction.
    PaddedSeqs rev = q;
    for (std::size_t i = 0; i < b; ++i) {
        const std::size_t L = static_cast<std::size_t>(q.len[i]);
        for (std::size_t t = 0; t < L; ++t) rev.ids[i * n + t] = q.at(i, L - 1 - t);
    }
    GruVars<T> bw = gru_vars(m, "enc.bw");
    std::vector<Var<T>> rev_states;
    h = detail::zeros_var(tape, b, H);
    for (std::size_t t = 0; t < n; ++t) {
        h = gru_cell(bw, embedding_rows(m.get("emb"), detail::column_ids(rev, t)), h);
        rev_states.push_back(h);
    }

    GruVars<T> top = gru_vars(m, "enc.top");
    Var<T> s = detail::zeros_var(tape, b, H);
    for (std::size_t t = 0; t < n; ++t) {
        std::vector<int> back_pos(b, 0);
        for (std::size_t i = 0; i < b; ++i) {
            const int L = q.len[i];
            back_pos[i] = t < static_cast<std::size_t>(L) ? L - 1 - static_cast<int>(t) : 0;
        }
        Var<T> bw_t = gather_steps(rev_states, back_pos);
        s = gru_cell(top, concat_cols(fw_states[t], bw_t), s);
        out.states.push_back(s);
    }
    return out;
}

template <typename T>
struct DecOut {
    std::vector<Var<T>> logits;  // per decoder step, [b x V]
    std::vector<Var<T>> alphas;  // per decoder step, [b x n] attention weights
};

// Two stacked GRUs with additive attention: the first layer's hidden state
// scores encoder positions, the context feeds the second layer, and logits
// come from a maxout readout over [h2 | input embedding | context] projected
// through the shared embedding table.
template <typename T>
DecOut<T> decode_teacher_forced(const BoundModel<T>& m, const EncOut<T>& enc,
                                const PaddedSeqs& dec_in) {
    Tape<T>& tape = *m.tape;
    const ModelConfig& cfg = m.model->cfg;
    const std::size_t b = dec_in.size, steps = dec_in.width, n = enc.states.size();
    GruVars<T> g1 = gru_vars(m, "dec.gru1");
    GruVars<T> g2 = gru_vars(m, "dec.gru2");
    Var<T> attW = m.get("att.W"), attU = m.get("att.U"), attV = m.get("att.v");
    Var<T> M = m.get("dec.M");
    Var<T> emb = m.get("emb");

    std::vector<Var<T>> enc_proj;  // att.U * s_t, shared across decoder steps
    for (const auto& s : enc.states) enc_proj.push_back(matmul(s, attU));

    DecOut<T> out;
    Var<T> h1 = detail::zeros_var(tape, b, cfg.hidden);
    Var<T> h2 = detail::zeros_var(tape, b, cfg.hidden);
    for (std::size_t tau = 0; tau < steps; ++tau) {
        Var<T> e = embedding_rows(emb, detail::column_ids(dec_in, tau));
        h1 = gru_cell(g1, e, h1);
        Var<T> query = matmul(h1, attW);
        std::vector<Var<T>> scores;
        for (std::size_t t = 0; t < n; ++t)
            scores.push_back(matmul_nt(tanh(add(query, enc_proj[t])), attV));
        Var<T> alpha = softmax_rows_masked(concat_cols(scores), enc.mask);
        Var<T> ctx = attend(enc.states, alpha);
        h2 = gru_cell(g2, concat_cols(h1, ctx), h2);
        Var<T> readout = maxout_rows(matmul(concat_cols(h2, e, ctx), M), cfg.pieces);
        out.logits.push_back(matmul_nt(readout, emb));
        out.alphas.push_back(alpha);
    }
    return out;
}

// Mean over valid target positions of -log softmax(logits)[target].
template <typename T>
Var<T> nll_loss(Tape<T>& tape, const std::vector<Var<T>>& logits, const PaddedSeqs& target) {
    if (logits.size() != target.width) throw DimensionError("nll_loss: step count mismatch");
    const std::size_t b = target.size;
    std::size_t valid = 0;
    for (int L : target.len) valid += static_cast<std::size_t>(L);
    Var<T> acc = tape.constant(Array<T>::scalar(T(0)));
    for (std::size_t tau = 0; tau < target.width; ++tau) {
        Var<T> logp = log_softmax_rows(logits[tau]);
        Var<T> picked = pick_rows(logp, detail::column_ids(target, tau));
        Array<T> maskcol = Array<T>::zeros({b, 1});
        for (std::size_t i = 0; i < b; ++i)
            if (tau < static_cast<std::size_t>(target.len[i])) maskcol.data[i] = T(1);
        acc = add(acc, sum_all(mul(picked, tape.constant(std::move(maskcol)))));
    }
    return scale(acc, T(-1) / static_cast<T>(valid));
}

template <typename T>
struct PredictOut {
    Var<T> u;        // [b x d] query vector
    Var<T> wlogits;  // [b x |V|] word-prediction logits (pre-softmax)
};

// x = mean embeddings (+) mean encoder states over valid steps; u = maxout(Ux);
// word distribution = softmax(W u).
template <typename T>
PredictOut<T> predict_words(const BoundModel<T>& m, const EncOut<T>& enc) {
    Var<T> xe = mean_steps_masked(enc.emb_steps, enc.lengths);
    Var<T> xs = mean_steps_masked(enc.states, enc.lengths);
    Var<T> x = concat_cols(xe, xs);
    Var<T> u = maxout_rows(matmul(x, m.get("pred.U")), m.model->cfg.pieces);
    return PredictOut<T>{u, matmul_nt(u, m.get("pred.W"))};
}

template <typename T>
Var<T> kl_loss(Var<T> wlogits, const SparseTargets& targets) {
    return kl_sparse(log_softmax_rows(wlogits), targets);
}

// Matcher: tokens embed as rows of pred.W; a GRU of width d runs from a zero
// state; the response vector is the hidden state at each row's true length.
template <typename T>
Var<T> embed_response(const BoundModel<T>& m, const PaddedSeqs& r) {
    Tape<T>& tape = *m.tape;
    const std::size_t b = r.size;
    if (r.width == 0) throw ContractError("embed_response: empty response");
    for (int L : r.len)
        if (L < 1) throw ContractError("embed_response: empty response row");
    GruVars<T> g = gru_vars(m, "match");
    Var<T> W = m.get("pred.W");
    Var<T> h = detail::zeros_var(tape, b, m.model->cfg.d);
    std::vector<Var<T>> states;
    for (std::size_t t = 0; t < r.width; ++t) {
        h = gru_cell(g, embedding_rows(W, detail::column_ids(r, t)), h);
        states.push_back(h);
    }
    std::vector<int> last(b);
    for (std::size_t i = 0; i < b; ++i) last[i] = r.len[i] - 1;
    return gather_steps(states, last);
}

// mean over rows of max(0, 1 - cos(vq, vpos) + cos(vq, vneg)).
template <typename T>
Var<T> ranking_loss(Var<T> vq, Var<T> vpos, Var<T> vneg) {
    Var<T> cpos = cosine_rows(vq, vpos);
    Var<T> cneg = cosine_rows(vq, vneg);
    Var<T> hinge = relu(add(affine(cpos, T(-1), T(1)), cneg));
    const std::size_t b = vq.value().rows();
    return scale(sum_all(hinge), T(1) / static_cast<T>(b));
}

struct LossBreakdown {
    double nll = 0.0;
    double kl = 0.0;
    double rank = 0.0;
    double total = 0.0;
};

template <typename T>
struct JointOut {
    Var<T> total;
    Var<T> nll;
    Var<T> kl;
    Var<T> rank;
    LossBreakdown values() const {
        LossBreakdown lb;
        lb.nll = static_cast<double>(nll.value().data[0]);
        lb.kl = static_cast<double>(kl.value().data[0]);
        lb.rank = static_cast<double>(rank.value().data[0]);
        lb.total = static_cast<double>(total.value().data[0]);
        return lb;
    }
};

// All three task losses over one batch, sharing a single query encoding; the
// scalar result is alpha*nll + beta*kl + gamma*rank.
template <typename T>
JointOut<T> joint_loss(const BoundModel<T>& m, const Batch& batch) {
    const ModelConfig& cfg = m.model->cfg;
    EncOut<T> enc = encode_query(m, batch.q);
    DecOut<T> dec = decode_teacher_forced(m, enc, batch.dec_in);
    Var<T> nll = nll_loss(*m.tape, dec.logits, batch.dec_target);
    PredictOut<T> pred = predict_words(m, enc);
    Var<T> kl = kl_loss(pred.wlogits, batch.word_targets);
    Var<T> vpos = embed_response(m, batch.rpos);
    Var<T> vneg = embed_response(m, batch.rneg);
    Var<T> rank = ranking_loss(pred.u, vpos, vneg);
    Var<T> total = add(add(scale(nll, static_cast<T>(cfg.alpha)),
                           scale(kl, static_cast<T>(cfg.beta))),
                       scale(rank, static_cast<T>(cfg.gamma)));
    return JointOut<T>{total, nll, kl, rank};
}

// ---------------------------------------------------------------------------
// Inference helpers (no gradients)
// ---------------------------------------------------------------------------

inline PaddedSeqs single_row(const std::vector<int>& ids) {
    PaddedSeqs s;
    s.size = 1;
    s.width = ids.size();
    s.ids = ids;
    s.len = {static_cast<int>(ids.size())};
    return s;
}

// L2-normalized query vector phi(q) = u / |u|.
template <typename T>
Array<T> project_query(const Model<T>& m, const std::vector<int>& q_ids) {
    if (q_ids.empty()) throw ContractError("project_query: empty query");
    Tape<T> tape;
    BoundModel<T> bm = bind(m, tape, false);
    EncOut<T> enc = encode_query(bm, single_row(q_ids));
    PredictOut<T> p = predict_words(bm, enc);
    return l2_normalize_rows(p.u).value();
}

// L2-normalized response vector psi(r) = v_r / |v_r|.
template <typename T>
Array<T> project_response(const Model<T>& m, const std::vector<int>& r_ids) {
    if (r_ids.empty()) throw ContractError("project_response: empty response");
    Tape<T> tape;
    BoundModel<T> bm = bind(m, tape, false);
    return l2_normalize_rows(embed_response(bm, single_row(r_ids))).value();
}

// Word-prediction distribution over the vocabulary for one query.
template <typename T>
Array<T> predict_word_distribution(const Model<T>& m, const std::vector<int>& q_ids) {
    Tape<T> tape;
    BoundModel<T> bm = bind(m, tape, false);
    EncOut<T> enc = encode_query(bm, single_row(q_ids));
    PredictOut<T> p = predict_words(bm, enc);
    return softmax_rows(p.wlogits).value();
}

namespace detail {

// Descending by score; ties broken by lower id.
template <typename T>
std::vector<int> topk_ids(const T* scores, std::size_t n, std::size_t k) {
    std::vector<int> ids(n);
    for (std::size_t i = 0; i < n; ++i) ids[i] = static_cast<int>(i);
    std::partial_sort(ids.begin(), ids.begin() + static_cast<std::ptrdiff_t>(k), ids.end(),
                      [scores](int a, int b) {
                          const T sa = scores[a], sb = scores[b];
                          if (sa != sb) return sa > sb;
                          return a < b;
                      });
    ids.resize(k);
    return ids;
}

}  // namespace detail

// Top-k token ids, descending, from this query's word-prediction distribution.
template <typename T>
std::vector<int> predict_topk_words(const Model<T>& m, const std::vector<int>& q_ids,
                                    std::size_t k) {
    if (k > m.cfg.vocab) throw ContractError("predict_topk_words: k exceeds vocabulary");
    Array<T> dist = predict_word_distribution(m, q_ids);
    return detail::topk_ids(dist.data.data(), m.cfg.vocab, k);
}

// Distribution of the decoder's first step (BOS input, zero initial states).
template <typename T>
Array<T> first_step_distribution(const Model<T>& m, const std::vector<int>& q_ids) {
    Tape<T> tape;
    BoundModel<T> bm = bind(m, tape, false);
    EncOut<T> enc = encode_query(bm, single_row(q_ids));
    DecOut<T> dec = decode_teacher_forced(bm, enc, single_row({Vocabulary::BOS}));
    return softmax_rows(dec.logits[0]).value();
}

template <typename T>
std::vector<int> first_step_topk(const Model<T>& m, const std::vector<int>& q_ids,
                                 std::size_t k) {
    if (k > m.cfg.vocab)
        throw ContractError("first_step_topk: k " + std::to_string(k) + " exceeds vocabulary " +
                            std::to_string(m.cfg.vocab));
    Array<T> dist = first_step_distribution(m, q_ids);
    return detail::topk_ids(dist.data.data(), m.cfg.vocab, k);
}

// Greedy decoding: argmax token per step (ties to lower id) until EOS or
// max_len. Returns generated ids without BOS/EOS.
template <typename T>
std::vector<int> greedy_decode(const Model<T>& m, const std::vector<int>& q_ids,
                               std::size_t max_len = 50) {
    std::vector<int> out;
    std::vector<int> prefix{Vocabulary::BOS};
    for (std::size_t step = 0; step < max_len; ++step) {
        // Re-run teacher forcing over the growing prefix; desk-scale queries
        // keep this quadratic cost trivial.
        Tape<T> t2;
        BoundModel<T> bm2 = bind(m, t2, false);
        EncOut<T> enc2 = encode_query(bm2, single_row(q_ids));
        DecOut<T> dec = decode_teacher_forced(bm2, enc2, single_row(prefix));
        const Array<T>& logits = dec.logits.back().value();
        int best = 0;
        for (std::size_t j = 1; j < logits.numel(); ++j)
            if (logits.data[j] > logits.data[static_cast<std::size_t>(best)])
                best = static_cast<int>(j);
        if (best == Vocabulary::EOS) break;
        out.push_back(best);
        prefix.push_back(best);
    }
    return out;
}

}  // namespace mssnn
