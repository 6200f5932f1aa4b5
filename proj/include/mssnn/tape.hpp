#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <utility>
#include <vector>

#include "mssnn/tensor.hpp"

namespace mssnn {

template <typename T>
class Tape;

// Lightweight handle into a tape. Ops are free functions over handles; values
// are computed eagerly (define-by-run), backward rules are recorded on the
// tape and replayed in reverse creation order.
template <typename T>
struct Var {
    Tape<T>* tape = nullptr;
    int id = -1;

    const Array<T>& value() const;
    const Array<T>& grad() const;
};

template <typename T>
class Tape {
  public:
    using BackFn = std::function<void(Tape&, const Array<T>&)>;

    struct Node {
        Array<T> val;
        Array<T> grad;  // empty until a gradient reaches this node
        bool requires_grad = false;
        BackFn back;
    };

    Var<T> leaf(Array<T> v, bool requires_grad = true) {
        return emplace(std::move(v), requires_grad, nullptr);
    }

    Var<T> constant(Array<T> v) { return leaf(std::move(v), false); }

    Var<T> emplace(Array<T> v, bool requires_grad, BackFn back) {
        nodes_.push_back(Node{std::move(v), Array<T>{}, requires_grad, std::move(back)});
        return Var<T>{this, static_cast<int>(nodes_.size() - 1)};
    }

    const Array<T>& val(Var<T> v) const { return nodes_[v.id].val; }

    const Array<T>& grad(Var<T> v) const {
        const Node& n = nodes_[v.id];
        if (n.grad.data.empty())
            throw ContractError("gradient not populated; run backward() first");
        return n.grad;
    }

    // Null when no gradient reached this node.
    const Array<T>* grad_if_any(Var<T> v) const {
        const Node& n = nodes_[v.id];
        return n.grad.data.empty() ? nullptr : &n.grad;
    }

    bool needs_grad(int id) const { return nodes_[id].requires_grad; }

    // Zero-initialized gradient buffer for an operand, allocated on demand.
    Array<T>& grad_buffer(int id) {
        Node& n = nodes_[id];
        if (n.grad.data.empty()) n.grad = Array<T>::zeros(n.val.shape);
        return n.grad;
    }

    // Reverse sweep from a scalar root. Gradients accumulate in creation
    // order, so two backward passes over identical tapes are bit-identical.
    void backward(Var<T> root) {
        if (root.tape != this) throw ContractError("backward: var from another tape");
        if (nodes_[root.id].val.numel() != 1)
            throw ContractError("backward: root must be scalar, got shape " +
                                shape_str(nodes_[root.id].val.shape));
        for (Node& n : nodes_) n.grad = Array<T>{};
        grad_buffer(root.id).data[0] = T(1);
        for (int i = root.id; i >= 0; --i) {
            Node& n = nodes_[i];
            if (!n.requires_grad || !n.back || n.grad.data.empty()) continue;
            n.back(*this, n.grad);
        }
    }

    std::size_t size() const { return nodes_.size(); }

    int numeric_warnings = 0;

  private:
    std::vector<Node> nodes_;
};

template <typename T>
const Array<T>& Var<T>::value() const {
    return tape->val(*this);
}

template <typename T>
const Array<T>& Var<T>::grad() const {
    return tape->grad(*this);
}

namespace detail {

template <typename T>
Tape<T>& same_tape(Var<T> a, Var<T> b) {
    if (a.tape != b.tape) throw ContractError("operands belong to different tapes");
    return *a.tape;
}

template <typename T>
void axpy(Array<T>& dst, const Array<T>& src, T k = T(1)) {
    for (std::size_t i = 0; i < dst.data.size(); ++i) dst.data[i] += k * src.data[i];
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Elementwise ops
// ---------------------------------------------------------------------------

template <typename T>
Var<T> add(Var<T> a, Var<T> b) {
    Tape<T>& t = detail::same_tape(a, b);
    const Array<T>& av = t.val(a);
    const Array<T>& bv = t.val(b);
    require_same_shape(av, bv, "add");
    Array<T> out = av;
    for (std::size_t i = 0; i < out.data.size(); ++i) out.data[i] += bv.data[i];
    const int aid = a.id, bid = b.id;
    return t.emplace(std::move(out), t.needs_grad(aid) || t.needs_grad(bid),
                     [aid, bid](Tape<T>& tp, const Array<T>& g) {
                         if (tp.needs_grad(aid)) detail::axpy(tp.grad_buffer(aid), g);
                         if (tp.needs_grad(bid)) detail::axpy(tp.grad_buffer(bid), g);
                     });
}

template <typename T>
Var<T> sub(Var<T> a, Var<T> b) {
    Tape<T>& t = detail::same_tape(a, b);
    const Array<T>& av = t.val(a);
    const Array<T>& bv = t.val(b);
    require_same_shape(av, bv, "sub");
    Array<T> out = av;
    for (std::size_t i = 0; i < out.data.size(); ++i) out.data[i] -= bv.data[i];
    const int aid = a.id, bid = b.id;
    return t.emplace(std::move(out), t.needs_grad(aid) || t.needs_grad(bid),
                     [aid, bid](Tape<T>& tp, const Array<T>& g) {
                         if (tp.needs_grad(aid)) detail::axpy(tp.grad_buffer(aid), g);
                         if (tp.needs_grad(bid)) detail::axpy(tp.grad_buffer(bid), g, T(-1));
                     });
}

template <typename T>
Var<T> mul(Var<T> a, Var<T> b) {
    Tape<T>& t = detail::same_tape(a, b);
    const Array<T>& av = t.val(a);
    const Array<T>& bv = t.val(b);
    require_same_shape(av, bv, "mul");
    Array<T> out = av;
    for (std::size_t i = 0; i < out.data.size(); ++i) out.data[i] *= bv.data[i];
    const int aid = a.id, bid = b.id;
    return t.emplace(std::move(out), t.needs_grad(aid) || t.needs_grad(bid),
                     [aid, bid](Tape<T>& tp, const Array<T>& g) {
                         const Array<T>& av2 = tp.val(Var<T>{&tp, aid});
                         const Array<T>& bv2 = tp.val(Var<T>{&tp, bid});
                         if (tp.needs_grad(aid)) {
                             Array<T>& ga = tp.grad_buffer(aid);
                             for (std::size_t i = 0; i < g.data.size(); ++i)
                                 ga.data[i] += g.data[i] * bv2.data[i];
                         }
                         if (tp.needs_grad(bid)) {
                             Array<T>& gb = tp.grad_buffer(bid);
                             for (std::size_t i = 0; i < g.data.size(); ++i)
                                 gb.data[i] += g.data[i] * av2.data[i];
                         }
                     });
}

template <typename T>
Var<T> div(Var<T> a, Var<T> b) {
    Tape<T>& t = detail::same_tape(a, b);
    const Array<T>& av = t.val(a);
    const Array<T>& bv = t.val(b);
    require_same_shape(av, bv, "div");
    Array<T> out = av;
    for (std::size_t i = 0; i < out.data.size(); ++i) out.data[i] /= bv.data[i];
    const int aid = a.id, bid = b.id;
    return t.emplace(std::move(out), t.needs_grad(aid) || t.needs_grad(bid),
                     [aid, bid](Tape<T>& tp, const Array<T>& g) {
                         const Array<T>& av2 = tp.val(Var<T>{&tp, aid});
                         const Array<T>& bv2 = tp.val(Var<T>{&tp, bid});
                         if (tp.needs_grad(aid)) {
                             Array<T>& ga = tp.grad_buffer(aid);
                             for (std::size_t i = 0; i < g.data.size(); ++i)
                                 ga.data[i] += g.data[i] / bv2.data[i];
                         }
                         if (tp.needs_grad(bid)) {
                             Array<T>& gb = tp.grad_buffer(bid);
                             for (std::size_t i = 0; i < g.data.size(); ++i)
                                 gb.data[i] -= g.data[i] * av2.data[i] / (bv2.data[i] * bv2.data[i]);
                         }
                     });
}

// out = k*a + c, elementwise with scalar constants.
template <typename T>
Var<T> affine(Var<T> a, T k, T c) {
    Tape<T>& t = *a.tape;
    Array<T> out = t.val(a);
    for (auto& x : out.data) x = k * x + c;
    const int aid = a.id;
    return t.emplace(std::move(out), t.needs_grad(aid),
                     [aid, k](Tape<T>& tp, const Array<T>& g) {
                         if (tp.needs_grad(aid)) detail::axpy(tp.grad_buffer(aid), g, k);
                     });
}

template <typename T>
Var<T> scale(Var<T> a, T k) {
    return affine(a, k, T(0));
}

template <typename T>
Var<T> tanh(Var<T> a) {
    Tape<T>& t = *a.tape;
    Array<T> out = t.val(a);
    for (auto& x : out.data) x = std::tanh(x);
    const int aid = a.id;
    const int oid = static_cast<int>(t.size());  // id the new node will get
    return t.emplace(std::move(out), t.needs_grad(aid),
                     [aid, oid](Tape<T>& tp, const Array<T>& g) {
                         if (!tp.needs_grad(aid)) return;
                         const Array<T>& y = tp.val(Var<T>{&tp, oid});
                         Array<T>& ga = tp.grad_buffer(aid);
                         for (std::size_t i = 0; i < g.data.size(); ++i)
                             ga.data[i] += g.data[i] * (T(1) - y.data[i] * y.data[i]);
                     });
}

template <typename T>
Var<T> sigmoid(Var<T> a) {
    Tape<T>& t = *a.tape;
    Array<T> out = t.val(a);
    for (auto& x : out.data) {
        if (x >= T(0)) {
            x = T(1) / (T(1) + std::exp(-x));
        } else {
            const T e = std::exp(x);
            x = e / (T(1) + e);
        }
    }
    const int aid = a.id;
    const int oid = static_cast<int>(t.size());
    return t.emplace(std::move(out), t.needs_grad(aid),
                     [aid, oid](Tape<T>& tp, const Array<T>& g) {
                         if (!tp.needs_grad(aid)) return;
                         const Array<T>& y = tp.val(Var<T>{&tp, oid});
                         Array<T>& ga = tp.grad_buffer(aid);
                         for (std::size_t i = 0; i < g.data.size(); ++i)
                             ga.data[i] += g.data[i] * y.data[i] * (T(1) - y.data[i]);
                     });
}

template <typename T>
Var<T> log(Var<T> a) {
    Tape<T>& t = *a.tape;
    Array<T> out = t.val(a);
    for (auto& x : out.data) x = std::log(x);
    const int aid = a.id;
    return t.emplace(std::move(out), t.needs_grad(aid),
                     [aid](Tape<T>& tp, const Array<T>& g) {
                         if (!tp.needs_grad(aid)) return;
                         const Array<T>& av = tp.val(Var<T>{&tp, aid});
                         Array<T>& ga = tp.grad_buffer(aid);
                         for (std::size_t i = 0; i < g.data.size(); ++i)
                             ga.data[i] += g.data[i] / av.data[i];
                     });
}

template <typename T>
Var<T> sqrt(Var<T> a) {
    Tape<T>& t = *a.tape;
    Array<T> out = t.val(a);
    for (auto& x : out.data) x = std::sqrt(x);
    const int aid = a.id;
    const int oid = static_cast<int>(t.size());
    return t.emplace(std::move(out), t.needs_grad(aid),
                     [aid, oid](Tape<T>& tp, const Array<T>& g) {
                         if (!tp.needs_grad(aid)) return;
                         const Array<T>& y = tp.val(Var<T>{&tp, oid});
                         Array<T>& ga = tp.grad_buffer(aid);
                         for (std::size_t i = 0; i < g.data.size(); ++i)
                             ga.data[i] += g.data[i] / (T(2) * y.data[i]);
                     });
}

template <typename T>
Var<T> relu(Var<T> a) {
    Tape<T>& t = *a.tape;
    Array<T> out = t.val(a);
    for (auto& x : out.data) x = x > T(0) ? x : T(0);
    const int aid = a.id;
    return t.emplace(std::move(out), t.needs_grad(aid),
                     [aid](Tape<T>& tp, const Array<T>& g) {
                         if (!tp.needs_grad(aid)) return;
                         const Array<T>& av = tp.val(Var<T>{&tp, aid});
                         Array<T>& ga = tp.grad_buffer(aid);
                         for (std::size_t i = 0; i < g.data.size(); ++i)
                             if (av.data[i] > T(0)) ga.data[i] += g.data[i];
                     });
}

// ---------------------------------------------------------------------------
// Matrix ops
// ---------------------------------------------------------------------------

// C[m x n] = A[m x k] * B[k x n]; backward dA += dC*B^T, dB += A^T*dC.
template <typename T>
Var<T> matmul(Var<T> a, Var<T> b) {
    Tape<T>& t = detail::same_tape(a, b);
    const Array<T>& av = t.val(a);
    const Array<T>& bv = t.val(b);
    if (av.rank() != 2 || bv.rank() != 2 || av.shape[1] != bv.shape[0])
        throw DimensionError("matmul: incompatible shapes " + shape_str(av.shape) + " vs " +
                             shape_str(bv.shape));
    const std::size_t m = av.shape[0], k = av.shape[1], n = bv.shape[1];
    Array<T> out = Array<T>::zeros({m, n});
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t l = 0; l < k; ++l) {
            const T aval = av.data[i * k + l];
            if (aval == T(0)) continue;
            const T* brow = &bv.data[l * n];
            T* orow = &out.data[i * n];
            for (std::size_t j = 0; j < n; ++j) orow[j] += aval * brow[j];
        }
    const int aid = a.id, bid = b.id;
    return t.emplace(std::move(out), t.needs_grad(aid) || t.needs_grad(bid),
                     [aid, bid, m, k, n](Tape<T>& tp, const Array<T>& g) {
                         const Array<T>& A = tp.val(Var<T>{&tp, aid});
                         const Array<T>& B = tp.val(Var<T>{&tp, bid});
                         if (tp.needs_grad(aid)) {
                             Array<T>& ga = tp.grad_buffer(aid);
                             for (std::size_t i = 0; i < m; ++i)
                                 for (std::size_t l = 0; l < k; ++l) {
                                     T s = T(0);
                                     const T* grow = &g.data[i * n];
                                     const T* brow = &B.data[l * n];
                                     for (std::size_t j = 0; j < n; ++j) s += grow[j] * brow[j];
                                     ga.data[i * k + l] += s;
                                 }
                         }
                         if (tp.needs_grad(bid)) {
                             Array<T>& gb = tp.grad_buffer(bid);
                             for (std::size_t i = 0; i < m; ++i)
                                 for (std::size_t l = 0; l < k; ++l) {
                                     const T aval = A.data[i * k + l];
                                     if (aval == T(0)) continue;
                                     const T* grow = &g.data[i * n];
                                     T* gbrow = &gb.data[l * n];
                                     for (std::size_t j = 0; j < n; ++j) gbrow[j] += aval * grow[j];
                                 }
                         }
                     });
}

// C[m x n] = A[m x k] * B^T with B[n x k]; backward dA += dC*B, dB += dC^T*A.
template <typename T>
Var<T> matmul_nt(Var<T> a, Var<T> b) {
    Tape<T>& t = detail::same_tape(a, b);
    const Array<T>& av = t.val(a);
    const Array<T>& bv = t.val(b);
    if (av.rank() != 2 || bv.rank() != 2 || av.shape[1] != bv.shape[1])
        throw DimensionError("matmul_nt: incompatible shapes " + shape_str(av.shape) + " vs " +
                             shape_str(bv.shape));
    const std::size_t m = av.shape[0], k = av.shape[1], n = bv.shape[0];
    Array<T> out = Array<T>::zeros({m, n});
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) {
            T s = T(0);
            const T* arow = &av.data[i * k];
            const T* brow = &bv.data[j * k];
            for (std::size_t l = 0; l < k; ++l) s += arow[l] * brow[l];
            out.data[i * n + j] = s;
        }
    const int aid = a.id, bid = b.id;
    return t.emplace(std::move(out), t.needs_grad(aid) || t.needs_grad(bid),
                     [aid, bid, m, k, n](Tape<T>& tp, const Array<T>& g) {
                         const Array<T>& A = tp.val(Var<T>{&tp, aid});
                         const Array<T>& B = tp.val(Var<T>{&tp, bid});
                         if (tp.needs_grad(aid)) {
                             Array<T>& ga = tp.grad_buffer(aid);
                             for (std::size_t i = 0; i < m; ++i)
                                 for (std::size_t j = 0; j < n; ++j) {
                                     const T gval = g.data[i * n + j];
                                     if (gval == T(0)) continue;
                                     const T* brow = &B.data[j * k];
                                     T* garow = &ga.data[i * k];
                                     for (std::size_t l = 0; l < k; ++l) garow[l] += gval * brow[l];
                                 }
                         }
                         if (tp.needs_grad(bid)) {
                             Array<T>& gb = tp.grad_buffer(bid);
                             for (std::size_t i = 0; i < m; ++i)
                                 for (std::size_t j = 0; j < n; ++j) {
                                     const T gval = g.data[i * n + j];
                                     if (gval == T(0)) continue;
                                     const T* arow = &A.data[i * k];
                                     T* gbrow = &gb.data[j * k];
                                     for (std::size_t l = 0; l < k; ++l) gbrow[l] += gval * arow[l];
                                 }
                         }
                     });
}

// Broadcast-add a [1 x n] bias over the rows of a [m x n] matrix.
template <typename T>
Var<T> add_bias(Var<T> a, Var<T> bias) {
    Tape<T>& t = detail::same_tape(a, bias);
    const Array<T>& av = t.val(a);
    const Array<T>& bv = t.val(bias);
    const std::size_t n = av.cols();
    if (bv.numel() != n)
        throw DimensionError("add_bias: bias " + shape_str(bv.shape) + " vs matrix " +
                             shape_str(av.shape));
    Array<T> out = av;
    const std::size_t m = av.numel() / n;
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) out.data[i * n + j] += bv.data[j];
    const int aid = a.id, bid = bias.id;
    return t.emplace(std::move(out), t.needs_grad(aid) || t.needs_grad(bid),
                     [aid, bid, m, n](Tape<T>& tp, const Array<T>& g) {
                         if (tp.needs_grad(aid)) detail::axpy(tp.grad_buffer(aid), g);
                         if (tp.needs_grad(bid)) {
                             Array<T>& gb = tp.grad_buffer(bid);
                             for (std::size_t i = 0; i < m; ++i)
                                 for (std::size_t j = 0; j < n; ++j)
                                     gb.data[j] += g.data[i * n + j];
                         }
                     });
}

// ---------------------------------------------------------------------------
// Softmax family (row-wise over the last dimension, max-subtracted)
// ---------------------------------------------------------------------------

namespace detail {

template <typename T>
void check_finite_expsum(T sum) {
    // NaN anywhere in a row makes the exp-sum NaN; so does +inf input.
    if (std::isnan(sum)) throw NumericError("softmax: non-finite input");
}

}  // namespace detail

template <typename T>
Var<T> softmax_rows(Var<T> a) {
    Tape<T>& t = *a.tape;
    const Array<T>& av = t.val(a);
    const std::size_t n = av.cols();
    if (n < 1) throw DimensionError("softmax: empty last dimension");
    const std::size_t m = av.numel() / n;
    Array<T> out = av;
    for (std::size_t i = 0; i < m; ++i) {
        T* row = &out.data[i * n];
        T mx = row[0];
        for (std::size_t j = 1; j < n; ++j) mx = std::max(mx, row[j]);
        T sum = T(0);
        for (std::size_t j = 0; j < n; ++j) {
            row[j] = std::exp(row[j] - mx);
            sum += row[j];
        }
        detail::check_finite_expsum(sum);
        for (std::size_t j = 0; j < n; ++j) row[j] /= sum;
    }
    const int aid = a.id;
    const int oid = static_cast<int>(t.size());
    return t.emplace(std::move(out), t.needs_grad(aid),
                     [aid, oid, m, n](Tape<T>& tp, const Array<T>& g) {
                         if (!tp.needs_grad(aid)) return;
                         const Array<T>& y = tp.val(Var<T>{&tp, oid});
                         Array<T>& ga = tp.grad_buffer(aid);
                         for (std::size_t i = 0; i < m; ++i) {
                             const T* yrow = &y.data[i * n];
                             const T* grow = &g.data[i * n];
                             T dot = T(0);
                             for (std::size_t j = 0; j < n; ++j) dot += grow[j] * yrow[j];
                             for (std::size_t j = 0; j < n; ++j)
                                 ga.data[i * n + j] += yrow[j] * (grow[j] - dot);
                         }
                     });
}

// Softmax restricted to positions with mask==1; masked positions output 0.
// Used for attention over padded encoder states.
template <typename T>
Var<T> softmax_rows_masked(Var<T> a, std::vector<std::uint8_t> mask) {
    Tape<T>& t = *a.tape;
    const Array<T>& av = t.val(a);
    const std::size_t n = av.cols();
    const std::size_t m = av.numel() / n;
    if (mask.size() != av.numel())
        throw DimensionError("softmax_rows_masked: mask size mismatch");
    Array<T> out = av;
    for (std::size_t i = 0; i < m; ++i) {
        T* row = &out.data[i * n];
        const std::uint8_t* mrow = &mask[i * n];
        T mx = T(0);
        bool any = false;
        for (std::size_t j = 0; j < n; ++j)
            if (mrow[j]) {
                mx = any ? std::max(mx, row[j]) : row[j];
                any = true;
            }
        if (!any) throw ContractError("softmax_rows_masked: fully masked row");
        T sum = T(0);
        for (std::size_t j = 0; j < n; ++j) {
            if (mrow[j]) {
                row[j] = std::exp(row[j] - mx);
                sum += row[j];
            } else {
                row[j] = T(0);
            }
        }
        detail::check_finite_expsum(sum);
        for (std::size_t j = 0; j < n; ++j)
            if (mrow[j]) row[j] /= sum;
    }
    const int aid = a.id;
    const int oid = static_cast<int>(t.size());
    return t.emplace(std::move(out), t.needs_grad(aid),
                     [aid, oid, m, n, mask = std::move(mask)](Tape<T>& tp, const Array<T>& g) {
                         if (!tp.needs_grad(aid)) return;
                         const Array<T>& y = tp.val(Var<T>{&tp, oid});
                         Array<T>& ga = tp.grad_buffer(aid);
                         for (std::size_t i = 0; i < m; ++i) {
                             const T* yrow = &y.data[i * n];
                             const T* grow = &g.data[i * n];
                             const std::uint8_t* mrow = &mask[i * n];
                             T dot = T(0);
                             for (std::size_t j = 0; j < n; ++j)
                                 if (mrow[j]) dot += grow[j] * yrow[j];
                             for (std::size_t j = 0; j < n; ++j)
                                 if (mrow[j]) ga.data[i * n + j] += yrow[j] * (grow[j] - dot);
                         }
                     });
}

template <typename T>
Var<T> log_softmax_rows(Var<T> a) {
    Tape<T>& t = *a.tape;
    const Array<T>& av = t.val(a);
    const std::size_t n = av.cols();
    const std::size_t m = av.numel() / n;
    Array<T> out = av;
    for (std::size_t i = 0; i < m; ++i) {
        T* row = &out.data[i * n];
        T mx = row[0];
        for (std::size_t j = 1; j < n; ++j) mx = std::max(mx, row[j]);
        T sum = T(0);
        for (std::size_t j = 0; j < n; ++j) sum += std::exp(row[j] - mx);
        detail::check_finite_expsum(sum);
        const T lse = mx + std::log(sum);
        for (std::size_t j = 0; j < n; ++j) row[j] -= lse;
    }
    const int aid = a.id;
    const int oid = static_cast<int>(t.size());
    return t.emplace(std::move(out), t.needs_grad(aid),
                     [aid, oid, m, n](Tape<T>& tp, const Array<T>& g) {
                         if (!tp.needs_grad(aid)) return;
                         const Array<T>& y = tp.val(Var<T>{&tp, oid});
                         Array<T>& ga = tp.grad_buffer(aid);
                         for (std::size_t i = 0; i < m; ++i) {
                             const T* yrow = &y.data[i * n];
                             const T* grow = &g.data[i * n];
                             T gsum = T(0);
                             for (std::size_t j = 0; j < n; ++j) gsum += grow[j];
                             for (std::size_t j = 0; j < n; ++j)
                                 ga.data[i * n + j] += grow[j] - std::exp(yrow[j]) * gsum;
                         }
                     });
}

// ---------------------------------------------------------------------------
// Maxout: rows of width pieces*d reduce to width d, taking the elementwise
// max over `pieces` contiguous blocks. Gradient routes to the argmax piece
// (first piece wins ties).
// ---------------------------------------------------------------------------

template <typename T>
Var<T> maxout_rows(Var<T> a, std::size_t pieces) {
    Tape<T>& t = *a.tape;
    const Array<T>& av = t.val(a);
    const std::size_t w = av.cols();
    if (pieces < 1 || w % pieces != 0)
        throw DimensionError("maxout: width " + std::to_string(w) + " not divisible by " +
                             std::to_string(pieces) + " pieces");
    const std::size_t d = w / pieces;
    const std::size_t m = av.numel() / w;
    Shape oshape = av.shape;
    oshape.back() = d;
    Array<T> out = Array<T>::zeros(oshape);
    std::vector<std::uint32_t> argmax(m * d, 0);
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < d; ++j) {
            T best = av.data[i * w + j];
            std::uint32_t bp = 0;
            for (std::size_t p = 1; p < pieces; ++p) {
                const T v = av.data[i * w + p * d + j];
                if (v > best) {
                    best = v;
                    bp = static_cast<std::uint32_t>(p);
                }
            }
            out.data[i * d + j] = best;
            argmax[i * d + j] = bp;
        }
    const int aid = a.id;
    return t.emplace(std::move(out), t.needs_grad(aid),
                     [aid, m, d, w, argmax = std::move(argmax)](Tape<T>& tp, const Array<T>& g) {
                         if (!tp.needs_grad(aid)) return;
                         Array<T>& ga = tp.grad_buffer(aid);
                         for (std::size_t i = 0; i < m; ++i)
                             for (std::size_t j = 0; j < d; ++j)
                                 ga.data[i * w + argmax[i * d + j] * d + j] += g.data[i * d + j];
                     });
}

// ---------------------------------------------------------------------------
// Gather / scatter ops
// ---------------------------------------------------------------------------

// out[i,:] = table[ids[i],:]
template <typename T>
Var<T> embedding_rows(Var<T> table, std::vector<int> ids) {
    Tape<T>& t = *table.tape;
    const Array<T>& tv = t.val(table);
    if (tv.rank() != 2) throw DimensionError("embedding_rows: table must be rank 2");
    const std::size_t V = tv.shape[0], E = tv.shape[1];
    Array<T> out = Array<T>::zeros({ids.size(), E});
    for (std::size_t i = 0; i < ids.size(); ++i) {
        const int id = ids[i];
        if (id < 0 || static_cast<std::size_t>(id) >= V)
            throw ContractError("embedding_rows: id " + std::to_string(id) + " out of range");
        std::copy_n(&tv.data[static_cast<std::size_t>(id) * E], E, &out.data[i * E]);
    }
    const int tid = table.id;
    return t.emplace(std::move(out), t.needs_grad(tid),
                     [tid, E, ids = std::move(ids)](Tape<T>& tp, const Array<T>& g) {
                         if (!tp.needs_grad(tid)) return;
                         Array<T>& gt = tp.grad_buffer(tid);
                         for (std::size_t i = 0; i < ids.size(); ++i) {
                             T* row = &gt.data[static_cast<std::size_t>(ids[i]) * E];
                             const T* grow = &g.data[i * E];
                             for (std::size_t j = 0; j < E; ++j) row[j] += grow[j];
                         }
                     });
}

// out[i] = a[i, ids[i]]  (result shape [m x 1])
template <typename T>
Var<T> pick_rows(Var<T> a, std::vector<int> ids) {
    Tape<T>& t = *a.tape;
    const Array<T>& av = t.val(a);
    const std::size_t m = av.rows(), n = av.cols();
    if (ids.size() != m) throw DimensionError("pick_rows: ids length mismatch");
    Array<T> out = Array<T>::zeros({m, 1});
    for (std::size_t i = 0; i < m; ++i) {
        const int id = ids[i];
        if (id < 0 || static_cast<std::size_t>(id) >= n)
            throw ContractError("pick_rows: index out of range");
        out.data[i] = av.data[i * n + static_cast<std::size_t>(id)];
    }
    const int aid = a.id;
    return t.emplace(std::move(out), t.needs_grad(aid),
                     [aid, n, ids = std::move(ids)](Tape<T>& tp, const Array<T>& g) {
                         if (!tp.needs_grad(aid)) return;
                         Array<T>& ga = tp.grad_buffer(aid);
                         for (std::size_t i = 0; i < ids.size(); ++i)
                             ga.data[i * n + static_cast<std::size_t>(ids[i])] += g.data[i];
                     });
}

// Concatenate matrices with equal row counts along columns.
template <typename T>
Var<T> concat_cols(const std::vector<Var<T>>& parts) {
    if (parts.empty()) throw ContractError("concat_cols: no operands");
    Tape<T>& t = *parts[0].tape;
    const std::size_t m = t.val(parts[0]).rows();
    std::size_t total = 0;
    std::vector<std::size_t> widths;
    bool rg = false;
    for (const auto& p : parts) {
        if (p.tape != &t) throw ContractError("concat_cols: operands from different tapes");
        const Array<T>& pv = t.val(p);
        if (pv.rows() != m)
            throw DimensionError("concat_cols: row mismatch " + shape_str(pv.shape));
        widths.push_back(pv.cols());
        total += pv.cols();
        rg = rg || t.needs_grad(p.id);
    }
    Array<T> out = Array<T>::zeros({m, total});
    std::size_t off = 0;
    for (std::size_t k = 0; k < parts.size(); ++k) {
        const Array<T>& pv = t.val(parts[k]);
        for (std::size_t i = 0; i < m; ++i)
            std::copy_n(&pv.data[i * widths[k]], widths[k], &out.data[i * total + off]);
        off += widths[k];
    }
    std::vector<int> ids;
    for (const auto& p : parts) ids.push_back(p.id);
    return t.emplace(std::move(out), rg,
                     [ids = std::move(ids), widths = std::move(widths), m,
                      total](Tape<T>& tp, const Array<T>& g) {
                         std::size_t off = 0;
                         for (std::size_t k = 0; k < ids.size(); ++k) {
                             if (tp.needs_grad(ids[k])) {
                                 Array<T>& gp = tp.grad_buffer(ids[k]);
                                 for (std::size_t i = 0; i < m; ++i) {
                                     const T* grow = &g.data[i * total + off];
                                     T* prow = &gp.data[i * widths[k]];
                                     for (std::size_t j = 0; j < widths[k]; ++j) prow[j] += grow[j];
                                 }
                             }
                             off += widths[k];
                         }
                     });
}

template <typename T>
Var<T> concat_cols(Var<T> a, Var<T> b) {
    return concat_cols(std::vector<Var<T>>{a, b});
}

template <typename T>
Var<T> concat_cols(Var<T> a, Var<T> b, Var<T> c) {
    return concat_cols(std::vector<Var<T>>{a, b, c});
}

// ---------------------------------------------------------------------------
// Reductions
// ---------------------------------------------------------------------------

template <typename T>
Var<T> rowsum(Var<T> a) {
    Tape<T>& t = *a.tape;
    const Array<T>& av = t.val(a);
    const std::size_t m = av.rows(), n = av.cols();
    Array<T> out = Array<T>::zeros({m, 1});
    for (std::size_t i = 0; i < m; ++i) {
        T s = T(0);
        for (std::size_t j = 0; j < n; ++j) s += av.data[i * n + j];
        out.data[i] = s;
    }
    const int aid = a.id;
    return t.emplace(std::move(out), t.needs_grad(aid),
                     [aid, m, n](Tape<T>& tp, const Array<T>& g) {
                         if (!tp.needs_grad(aid)) return;
                         Array<T>& ga = tp.grad_buffer(aid);
                         for (std::size_t i = 0; i < m; ++i)
                             for (std::size_t j = 0; j < n; ++j) ga.data[i * n + j] += g.data[i];
                     });
}

template <typename T>
Var<T> sum_all(Var<T> a) {
    Tape<T>& t = *a.tape;
    const Array<T>& av = t.val(a);
    T s = T(0);
    for (const T& x : av.data) s += x;
    const int aid = a.id;
    return t.emplace(Array<T>::scalar(s), t.needs_grad(aid),
                     [aid](Tape<T>& tp, const Array<T>& g) {
                         if (!tp.needs_grad(aid)) return;
                         Array<T>& ga = tp.grad_buffer(aid);
                         for (auto& x : ga.data) x += g.data[0];
                     });
}

template <typename T>
Var<T> mean_all(Var<T> a) {
    const std::size_t n = a.tape->val(a).numel();
    return scale(sum_all(a), T(1) / static_cast<T>(n));
}

// ---------------------------------------------------------------------------
// Sequence ops: per-timestep matrices [b x D], valid lengths per row
// ---------------------------------------------------------------------------

// out[i,:] = mean over t < lengths[i] of steps[t][i,:]; padded steps ignored.
template <typename T>
Var<T> mean_steps_masked(const std::vector<Var<T>>& steps, const std::vector<int>& lengths) {
    if (steps.empty()) throw ContractError("mean_steps_masked: no steps");
    Tape<T>& t = *steps[0].tape;
    const Array<T>& s0 = t.val(steps[0]);
    const std::size_t b = s0.rows(), D = s0.cols();
    if (lengths.size() != b) throw DimensionError("mean_steps_masked: lengths size mismatch");
    bool rg = false;
    for (const auto& s : steps) {
        require_same_shape(t.val(s), s0, "mean_steps_masked");
        rg = rg || t.needs_grad(s.id);
    }
    Array<T> out = Array<T>::zeros({b, D});
    for (std::size_t i = 0; i < b; ++i) {
        const int L = lengths[i];
        if (L < 1 || static_cast<std::size_t>(L) > steps.size())
            throw ContractError("mean_steps_masked: invalid length " + std::to_string(L));
        for (int tt = 0; tt < L; ++tt) {
            const Array<T>& sv = t.val(steps[static_cast<std::size_t>(tt)]);
            for (std::size_t j = 0; j < D; ++j)
                out.data[i * D + j] += sv.data[i * D + j] / static_cast<T>(L);
        }
    }
    std::vector<int> ids;
    for (const auto& s : steps) ids.push_back(s.id);
    return t.emplace(std::move(out), rg,
                     [ids, lengths, b, D](Tape<T>& tp, const Array<T>& g) {
                         for (std::size_t tt = 0; tt < ids.size(); ++tt) {
                             if (!tp.needs_grad(ids[tt])) continue;
                             Array<T>& gs = tp.grad_buffer(ids[tt]);
                             for (std::size_t i = 0; i < b; ++i) {
                                 if (static_cast<int>(tt) >= lengths[i]) continue;
                                 const T inv = T(1) / static_cast<T>(lengths[i]);
                                 for (std::size_t j = 0; j < D; ++j)
                                     gs.data[i * D + j] += g.data[i * D + j] * inv;
                             }
                         }
                     });
}

// Attention-weighted sum: out[i,:] = sum_t alpha[i,t] * steps[t][i,:].
template <typename T>
Var<T> attend(const std::vector<Var<T>>& steps, Var<T> alpha) {
    if (steps.empty()) throw ContractError("attend: no steps");
    Tape<T>& t = *alpha.tape;
    const Array<T>& al = t.val(alpha);
    const Array<T>& s0 = t.val(steps[0]);
    const std::size_t b = s0.rows(), D = s0.cols(), n = steps.size();
    if (al.rows() != b || al.cols() != n)
        throw DimensionError("attend: alpha " + shape_str(al.shape) + " vs " +
                             std::to_string(n) + " steps of " + shape_str(s0.shape));
    bool rg = t.needs_grad(alpha.id);
    for (const auto& s : steps) {
        require_same_shape(t.val(s), s0, "attend");
        rg = rg || t.needs_grad(s.id);
    }
    Array<T> out = Array<T>::zeros({b, D});
    for (std::size_t tt = 0; tt < n; ++tt) {
        const Array<T>& sv = t.val(steps[tt]);
        for (std::size_t i = 0; i < b; ++i) {
            const T w = al.data[i * n + tt];
            if (w == T(0)) continue;
            for (std::size_t j = 0; j < D; ++j) out.data[i * D + j] += w * sv.data[i * D + j];
        }
    }
    std::vector<int> ids;
    for (const auto& s : steps) ids.push_back(s.id);
    const int alid = alpha.id;
    return t.emplace(std::move(out), rg,
                     [ids, alid, b, D, n](Tape<T>& tp, const Array<T>& g) {
                         const Array<T>& al2 = tp.val(Var<T>{&tp, alid});
                         for (std::size_t tt = 0; tt < n; ++tt) {
                             const Array<T>& sv = tp.val(Var<T>{&tp, ids[tt]});
                             if (tp.needs_grad(alid)) {
                                 Array<T>& gal = tp.grad_buffer(alid);
                                 for (std::size_t i = 0; i < b; ++i) {
                                     T s = T(0);
                                     for (std::size_t j = 0; j < D; ++j)
                                         s += g.data[i * D + j] * sv.data[i * D + j];
                                     gal.data[i * n + tt] += s;
                                 }
                             }
                             if (tp.needs_grad(ids[tt])) {
                                 Array<T>& gs = tp.grad_buffer(ids[tt]);
                                 for (std::size_t i = 0; i < b; ++i) {
                                     const T w = al2.data[i * n + tt];
                                     if (w == T(0)) continue;
                                     for (std::size_t j = 0; j < D; ++j)
                                         gs.data[i * D + j] += w * g.data[i * D + j];
                                 }
                             }
                         }
                     });
}

// out[i,:] = steps[index[i]][i,:] (e.g. final valid RNN state per row).
template <typename T>
Var<T> gather_steps(const std::vector<Var<T>>& steps, const std::vector<int>& index) {
    if (steps.empty()) throw ContractError("gather_steps: no steps");
    Tape<T>& t = *steps[0].tape;
    const Array<T>& s0 = t.val(steps[0]);
    const std::size_t b = s0.rows(), D = s0.cols();
    if (index.size() != b) throw DimensionError("gather_steps: index size mismatch");
    bool rg = false;
    for (const auto& s : steps) {
        require_same_shape(t.val(s), s0, "gather_steps");
        rg = rg || t.needs_grad(s.id);
    }
    Array<T> out = Array<T>::zeros({b, D});
    for (std::size_t i = 0; i < b; ++i) {
        const int k = index[i];
        if (k < 0 || static_cast<std::size_t>(k) >= steps.size())
            throw ContractError("gather_steps: index out of range");
        const Array<T>& sv = t.val(steps[static_cast<std::size_t>(k)]);
        std::copy_n(&sv.data[i * D], D, &out.data[i * D]);
    }
    std::vector<int> ids;
    for (const auto& s : steps) ids.push_back(s.id);
    return t.emplace(std::move(out), rg,
                     [ids, index, b, D](Tape<T>& tp, const Array<T>& g) {
                         for (std::size_t i = 0; i < b; ++i) {
                             const int k = index[i];
                             if (!tp.needs_grad(ids[static_cast<std::size_t>(k)])) continue;
                             Array<T>& gs = tp.grad_buffer(ids[static_cast<std::size_t>(k)]);
                             for (std::size_t j = 0; j < D; ++j)
                                 gs.data[i * D + j] += g.data[i * D + j];
                         }
                     });
}

// ---------------------------------------------------------------------------
// Normalization and sparse KL
// ---------------------------------------------------------------------------

template <typename T>
Var<T> l2_normalize_rows(Var<T> a) {
    Tape<T>& t = *a.tape;
    const Array<T>& av = t.val(a);
    const std::size_t m = av.rows(), n = av.cols();
    Array<T> out = av;
    std::vector<T> norms(m);
    for (std::size_t i = 0; i < m; ++i) {
        T s = T(0);
        for (std::size_t j = 0; j < n; ++j) s += av.data[i * n + j] * av.data[i * n + j];
        const T norm = std::sqrt(s);
        if (norm == T(0)) throw NumericError("l2_normalize: zero vector");
        norms[i] = norm;
        for (std::size_t j = 0; j < n; ++j) out.data[i * n + j] /= norm;
    }
    const int aid = a.id;
    const int oid = static_cast<int>(t.size());
    return t.emplace(std::move(out), t.needs_grad(aid),
                     [aid, oid, m, n, norms = std::move(norms)](Tape<T>& tp, const Array<T>& g) {
                         if (!tp.needs_grad(aid)) return;
                         const Array<T>& y = tp.val(Var<T>{&tp, oid});
                         Array<T>& ga = tp.grad_buffer(aid);
                         for (std::size_t i = 0; i < m; ++i) {
                             T dot = T(0);
                             for (std::size_t j = 0; j < n; ++j)
                                 dot += g.data[i * n + j] * y.data[i * n + j];
                             for (std::size_t j = 0; j < n; ++j)
                                 ga.data[i * n + j] +=
                                     (g.data[i * n + j] - y.data[i * n + j] * dot) / norms[i];
                         }
                     });
}

// Mean over rows of sum_j pi_j * (ln pi_j - logp[i, id_j]). Predictions below
// exp(LOG_FLOOR) are clamped (treated as constants) and counted as numeric
// warnings on the tape.
template <typename T>
Var<T> kl_sparse(Var<T> logp, const SparseTargets& targets) {
    Tape<T>& t = *logp.tape;
    const Array<T>& lv = t.val(logp);
    const std::size_t b = lv.rows(), V = lv.cols();
    if (targets.size() != b) throw DimensionError("kl_sparse: target rows mismatch");
    const T floor = std::log(T(1e-12));
    T total = T(0);
    // (row, id, weight) triples that actually receive gradient
    std::vector<std::pair<std::size_t, T>> grads;
    for (std::size_t i = 0; i < b; ++i) {
        for (const auto& [id, p] : targets[i]) {
            if (id < 0 || static_cast<std::size_t>(id) >= V)
                throw ContractError("kl_sparse: target id out of range");
            const T pi = static_cast<T>(p);
            T lp = lv.data[i * V + static_cast<std::size_t>(id)];
            if (lp < floor) {
                lp = floor;
                ++t.numeric_warnings;
                total += pi * (std::log(pi) - lp);
            } else {
                total += pi * (std::log(pi) - lp);
                grads.emplace_back(i * V + static_cast<std::size_t>(id), pi);
            }
        }
    }
    total /= static_cast<T>(b);
    const int lid = logp.id;
    return t.emplace(Array<T>::scalar(total), t.needs_grad(lid),
                     [lid, b, grads = std::move(grads)](Tape<T>& tp, const Array<T>& g) {
                         if (!tp.needs_grad(lid)) return;
                         Array<T>& gl = tp.grad_buffer(lid);
                         const T go = g.data[0] / static_cast<T>(b);
                         for (const auto& [idx, pi] : grads) gl.data[idx] -= pi * go;
                     });
}

// ---------------------------------------------------------------------------
// Composites
// ---------------------------------------------------------------------------

// Per-row cosine similarity of two [b x n] matrices -> [b x 1].
template <typename T>
Var<T> cosine_rows(Var<T> a, Var<T> b) {
    Tape<T>& t = detail::same_tape(a, b);
    const Array<T>& av = t.val(a);
    const Array<T>& bv = t.val(b);
    for (std::size_t i = 0; i < av.rows(); ++i) {
        T sa = T(0), sb = T(0);
        for (std::size_t j = 0; j < av.cols(); ++j) {
            sa += av.at(i, j) * av.at(i, j);
            sb += bv.at(i, j) * bv.at(i, j);
        }
        if (sa == T(0) || sb == T(0)) throw NumericError("cosine: zero vector");
    }
    Var<T> dot = rowsum(mul(a, b));
    Var<T> na = sqrt(rowsum(mul(a, a)));
    Var<T> nb = sqrt(rowsum(mul(b, b)));
    return div(dot, mul(na, nb));
}

}  // namespace mssnn
