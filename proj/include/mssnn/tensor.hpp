#pragma once

#include <cstddef>
#include <initializer_list>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "mssnn/common.hpp"
#include "mssnn/rng.hpp"

namespace mssnn {

using Shape = std::vector<std::size_t>;

inline std::string shape_str(const Shape& s) {
    std::ostringstream os;
    os << "[";
    for (std::size_t i = 0; i < s.size(); ++i) os << (i ? "x" : "") << s[i];
    os << "]";
    return os.str();
}

inline std::size_t shape_numel(const Shape& s) {
    std::size_t n = 1;
    for (auto d : s) n *= d;
    return n;
}

// Dense row-major n-d array. Rank 1 and 2 cover the whole model; the autodiff
// tape stores one of these per node for the value and one for the gradient.
template <typename T>
struct Array {
    Shape shape;
    std::vector<T> data;

    Array() = default;
    Array(Shape s, std::vector<T> d) : shape(std::move(s)), data(std::move(d)) {
        if (shape_numel(shape) != data.size())
            throw DimensionError("array data length " + std::to_string(data.size()) +
                                 " does not match shape " + shape_str(shape));
    }

    static Array zeros(Shape s) {
        auto n = shape_numel(s);
        return Array(std::move(s), std::vector<T>(n, T(0)));
    }

    static Array full(Shape s, T v) {
        auto n = shape_numel(s);
        return Array(std::move(s), std::vector<T>(n, v));
    }

    static Array scalar(T v) { return Array({1}, {v}); }

    static Array uniform(Shape s, Rng& rng, double lo, double hi) {
        auto n = shape_numel(s);
        std::vector<T> d(n);
        for (auto& x : d) x = static_cast<T>(rng.uniform(lo, hi));
        return Array(std::move(s), std::move(d));
    }

    std::size_t numel() const { return data.size(); }
    std::size_t rank() const { return shape.size(); }

    std::size_t rows() const { return shape.size() == 2 ? shape[0] : 1; }
    std::size_t cols() const { return shape.empty() ? 0 : shape.back(); }

    T& at(std::size_t r, std::size_t c) { return data[r * cols() + c]; }
    const T& at(std::size_t r, std::size_t c) const { return data[r * cols() + c]; }

    bool same_shape(const Array& o) const { return shape == o.shape; }

    void fill(T v) { std::fill(data.begin(), data.end(), v); }

    template <typename U>
    Array<U> cast() const {
        std::vector<U> d(data.size());
        for (std::size_t i = 0; i < d.size(); ++i) d[i] = static_cast<U>(data[i]);
        return Array<U>(shape, std::move(d));
    }
};

template <typename T>
void require_same_shape(const Array<T>& a, const Array<T>& b, const std::string& op) {
    if (!a.same_shape(b))
        throw DimensionError(op + ": shape mismatch " + shape_str(a.shape) +
                             " vs " + shape_str(b.shape));
}

}  // namespace mssnn
