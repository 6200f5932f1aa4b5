#include <cmath>

#include "doctest.h"
#include "mssnn/adam.hpp"
#include "mssnn/tape.hpp"
#include "test_util.hpp"

using namespace mssnn;
using testutil::grad_check;
using testutil::random_array;
using testutil::weighted_sum;

namespace {

constexpr int kInstances = 20;
constexpr double kTol = 1e-4;

// Runs the finite-difference suite over `instances` random draws.
void check_op(const char* name, const testutil::Build& f,
              const std::function<std::vector<Array<double>>(Rng&)>& draw,
              int instances = kInstances, double tol = kTol) {
    for (int i = 0; i < instances; ++i) {
        Rng rng(1000 + static_cast<std::uint64_t>(i));
        const double err = grad_check(f, draw(rng));
        INFO(name << " instance " << i << " err " << err);
        CHECK(err < tol);
    }
}

std::function<std::vector<Array<double>>(Rng&)> two_same(std::size_t r, std::size_t c) {
    return [r, c](Rng& rng) {
        return std::vector<Array<double>>{random_array({r, c}, rng), random_array({r, c}, rng)};
    };
}

}  // namespace

TEST_CASE("elementwise ops match finite differences") {
    check_op("add", [](Tape<double>& t, auto& v) { return weighted_sum(t, add(v[0], v[1])); },
             two_same(3, 4));
    check_op("sub", [](Tape<double>& t, auto& v) { return weighted_sum(t, sub(v[0], v[1])); },
             two_same(3, 4));
    check_op("mul", [](Tape<double>& t, auto& v) { return weighted_sum(t, mul(v[0], v[1])); },
             two_same(3, 4));
    check_op("div", [](Tape<double>& t, auto& v) { return weighted_sum(t, div(v[0], v[1])); },
             [](Rng& rng) {
                 return std::vector<Array<double>>{random_array({3, 4}, rng),
                                                   random_array({3, 4}, rng, 0.5, 2.0)};
             });
    check_op("affine",
             [](Tape<double>& t, auto& v) { return weighted_sum(t, affine(v[0], 1.7, -0.3)); },
             [](Rng& rng) { return std::vector<Array<double>>{random_array({3, 4}, rng)}; });
    check_op("scale", [](Tape<double>& t, auto& v) { return weighted_sum(t, scale(v[0], -2.5)); },
             [](Rng& rng) { return std::vector<Array<double>>{random_array({3, 4}, rng)}; });
}

TEST_CASE("activations match finite differences") {
    auto one = [](double lo, double hi) {
        return [lo, hi](Rng& rng) {
            return std::vector<Array<double>>{random_array({3, 4}, rng, lo, hi)};
        };
    };
    check_op("tanh", [](Tape<double>& t, auto& v) { return weighted_sum(t, tanh(v[0])); },
             one(-2, 2));
    check_op("sigmoid", [](Tape<double>& t, auto& v) { return weighted_sum(t, sigmoid(v[0])); },
             one(-4, 4));
    check_op("log", [](Tape<double>& t, auto& v) { return weighted_sum(t, log(v[0])); },
             one(0.2, 3.0));
    check_op("sqrt", [](Tape<double>& t, auto& v) { return weighted_sum(t, sqrt(v[0])); },
             one(0.2, 3.0));
    // Inputs kept away from the kink, where the subgradient is arbitrary.
    check_op("relu", [](Tape<double>& t, auto& v) { return weighted_sum(t, relu(v[0])); },
             [](Rng& rng) {
                 Array<double> a = random_array({3, 4}, rng);
                 for (auto& x : a.data) x += (x >= 0 ? 0.2 : -0.2);
                 return std::vector<Array<double>>{a};
             });
}

TEST_CASE("matrix ops match finite differences") {
    check_op("matmul", [](Tape<double>& t, auto& v) { return weighted_sum(t, matmul(v[0], v[1])); },
             [](Rng& rng) {
                 return std::vector<Array<double>>{random_array({5, 4}, rng),
                                                   random_array({4, 3}, rng)};
             });
    check_op("matmul_nt",
             [](Tape<double>& t, auto& v) { return weighted_sum(t, matmul_nt(v[0], v[1])); },
             [](Rng& rng) {
                 return std::vector<Array<double>>{random_array({5, 4}, rng),
                                                   random_array({3, 4}, rng)};
             });
    check_op("add_bias",
             [](Tape<double>& t, auto& v) { return weighted_sum(t, add_bias(v[0], v[1])); },
             [](Rng& rng) {
                 return std::vector<Array<double>>{random_array({5, 4}, rng),
                                                   random_array({1, 4}, rng)};
             });
}

TEST_CASE("softmax family matches finite differences") {
    auto one = [](Rng& rng) { return std::vector<Array<double>>{random_array({3, 7}, rng)}; };
    check_op("softmax_rows",
             [](Tape<double>& t, auto& v) { return weighted_sum(t, softmax_rows(v[0])); }, one);
    check_op("log_softmax_rows",
             [](Tape<double>& t, auto& v) { return weighted_sum(t, log_softmax_rows(v[0])); },
             one);
    check_op("softmax_rows_masked",
             [](Tape<double>& t, auto& v) {
                 std::vector<std::uint8_t> mask = {1, 1, 1, 0, 0, 1, 0, 1, 1, 1, 1, 0,
                                                   1, 1, 0, 1, 1, 1, 1, 0, 1};
                 return weighted_sum(t, softmax_rows_masked(v[0], std::move(mask)));
             },
             one);
}

TEST_CASE("structural ops match finite differences") {
    check_op("maxout_rows",
             [](Tape<double>& t, auto& v) { return weighted_sum(t, maxout_rows(v[0], 3)); },
             [](Rng& rng) {
                 // Distinct-enough entries keep the argmax stable under h.
                 Array<double> a = random_array({4, 6}, rng, -10, 10);
                 return std::vector<Array<double>>{a};
             });
    check_op("embedding_rows",
             [](Tape<double>& t, auto& v) {
                 return weighted_sum(t, embedding_rows(v[0], {2, 0, 2, 4}));
             },
             [](Rng& rng) { return std::vector<Array<double>>{random_array({5, 3}, rng)}; });
    check_op("pick_rows",
             [](Tape<double>& t, auto& v) {
                 return weighted_sum(t, pick_rows(v[0], {2, 0, 1, 0}));
             },
             [](Rng& rng) { return std::vector<Array<double>>{random_array({4, 3}, rng)}; });
    check_op("concat_cols",
             [](Tape<double>& t, auto& v) {
                 return weighted_sum(t, concat_cols(v[0], v[1], v[2]));
             },
             [](Rng& rng) {
                 return std::vector<Array<double>>{random_array({3, 2}, rng),
                                                   random_array({3, 4}, rng),
                                                   random_array({3, 1}, rng)};
             });
    check_op("rowsum", [](Tape<double>& t, auto& v) { return weighted_sum(t, rowsum(v[0])); },
             [](Rng& rng) { return std::vector<Array<double>>{random_array({4, 5}, rng)}; });
    check_op("sum_all", [](Tape<double>&, auto& v) { return sum_all(v[0]); },
             [](Rng& rng) { return std::vector<Array<double>>{random_array({4, 5}, rng)}; });
    check_op("mean_all", [](Tape<double>&, auto& v) { return mean_all(v[0]); },
             [](Rng& rng) { return std::vector<Array<double>>{random_array({4, 5}, rng)}; });
}

TEST_CASE("sequence ops match finite differences") {
    check_op("mean_steps_masked",
             [](Tape<double>& t, auto& v) {
                 std::vector<Var<double>> steps{v[0], v[1], v[2]};
                 return weighted_sum(t, mean_steps_masked(steps, {2, 3}));
             },
             [](Rng& rng) {
                 return std::vector<Array<double>>{random_array({2, 3}, rng),
                                                   random_array({2, 3}, rng),
                                                   random_array({2, 3}, rng)};
             });
    check_op("attend",
             [](Tape<double>& t, auto& v) {
                 std::vector<Var<double>> steps{v[0], v[1], v[2]};
                 return weighted_sum(t, attend(steps, softmax_rows(v[3])));
             },
             [](Rng& rng) {
                 return std::vector<Array<double>>{
                     random_array({2, 3}, rng), random_array({2, 3}, rng),
                     random_array({2, 3}, rng), random_array({2, 3}, rng)};
             });
    check_op("gather_steps",
             [](Tape<double>& t, auto& v) {
                 std::vector<Var<double>> steps{v[0], v[1], v[2]};
                 return weighted_sum(t, gather_steps(steps, {2, 0}));
             },
             [](Rng& rng) {
                 return std::vector<Array<double>>{random_array({2, 3}, rng),
                                                   random_array({2, 3}, rng),
                                                   random_array({2, 3}, rng)};
             });
    check_op("l2_normalize_rows",
             [](Tape<double>& t, auto& v) { return weighted_sum(t, l2_normalize_rows(v[0])); },
             [](Rng& rng) {
                 return std::vector<Array<double>>{random_array({3, 4}, rng, 0.3, 1.5)};
             });
    check_op("cosine_rows",
             [](Tape<double>& t, auto& v) { return weighted_sum(t, cosine_rows(v[0], v[1])); },
             [](Rng& rng) {
                 return std::vector<Array<double>>{random_array({3, 4}, rng, 0.3, 1.5),
                                                   random_array({3, 4}, rng, 0.3, 1.5)};
             });
    check_op("kl_sparse",
             [](Tape<double>&, auto& v) {
                 SparseTargets targets{{{0, 0.25}, {2, 0.75}}, {{1, 1.0}}};
                 return kl_sparse(log_softmax_rows(v[0]), targets);
             },
             [](Rng& rng) { return std::vector<Array<double>>{random_array({2, 5}, rng)}; });
}

TEST_CASE("matmul frozen examples") {
    Tape<double> t;
    auto a = t.leaf(Array<double>({2, 2}, {1, 0, 0, 1}));
    auto b = t.leaf(Array<double>({2, 1}, {3, 4}));
    auto c = matmul(a, b);
    CHECK(c.value().data == std::vector<double>{3, 4});

    auto d = t.leaf(Array<double>({1, 2}, {1, 2}));
    auto e = matmul(d, b);
    CHECK(e.value().data[0] == doctest::Approx(11).epsilon(1e-12));

    auto bad = t.leaf(Array<double>({3, 2}, {0, 0, 0, 0, 0, 0}));
    CHECK_THROWS_WITH_AS((void)matmul(b, bad), doctest::Contains("2x1"), DimensionError);
}

TEST_CASE("softmax frozen examples") {
    Tape<double> t;
    auto u = softmax_rows(t.leaf(Array<double>({1, 4}, {0, 0, 0, 0})));
    for (double x : u.value().data) CHECK(x == doctest::Approx(0.25).epsilon(1e-12));

    auto s = softmax_rows(t.leaf(Array<double>({1, 2}, {1000, 0})));
    CHECK(s.value().data[0] == doctest::Approx(1.0).epsilon(1e-9));
    CHECK(s.value().data[1] == doctest::Approx(0.0).epsilon(1e-9));

    Rng rng(7);
    auto r = softmax_rows(t.leaf(random_array({5, 9}, rng, -30, 30)));
    for (std::size_t i = 0; i < 5; ++i) {
        double sum = 0;
        for (std::size_t j = 0; j < 9; ++j) {
            const double p = r.value().at(i, j);
            CHECK(p >= 0.0);
            CHECK(p <= 1.0);
            sum += p;
        }
        CHECK(sum == doctest::Approx(1.0).epsilon(1e-9));
    }

    Array<double> nan_in({1, 3}, {0.0, std::nan(""), 1.0});
    CHECK_THROWS_AS((void)softmax_rows(t.leaf(nan_in)), NumericError);
}

TEST_CASE("maxout frozen examples") {
    Tape<double> t;
    // Two contiguous pieces [1,5] and [3,2]: elementwise max is [3,5].
    auto m = maxout_rows(t.leaf(Array<double>({1, 4}, {1, 5, 3, 2})), 2);
    CHECK(m.value().data == std::vector<double>{3, 5});

    auto ident = maxout_rows(t.leaf(Array<double>({1, 3}, {4, -1, 2})), 1);
    CHECK(ident.value().data == std::vector<double>{4, -1, 2});

    CHECK_THROWS_AS((void)maxout_rows(t.leaf(Array<double>({1, 4}, {0, 0, 0, 0})), 3),
                    DimensionError);

    Rng rng(19);
    Array<double> x = random_array({3, 8}, rng, -5, 5);
    auto out = maxout_rows(t.leaf(x), 4).value();
    for (std::size_t r = 0; r < 3; ++r)
        for (std::size_t p = 0; p < 4; ++p)
            for (std::size_t j = 0; j < 2; ++j) CHECK(out.at(r, j) >= x.at(r, p * 2 + j));
}

TEST_CASE("l2_normalize produces unit rows; zero rows rejected") {
    Tape<double> t;
    Rng rng(3);
    auto n = l2_normalize_rows(t.leaf(random_array({4, 6}, rng, -2, 2)));
    for (std::size_t i = 0; i < 4; ++i) {
        double s = 0;
        for (std::size_t j = 0; j < 6; ++j) s += n.value().at(i, j) * n.value().at(i, j);
        CHECK(std::sqrt(s) == doctest::Approx(1.0).epsilon(1e-9));
    }
    CHECK_THROWS_AS((void)l2_normalize_rows(t.leaf(Array<double>({1, 3}, {0, 0, 0}))),
                    NumericError);
}

TEST_CASE("two independent tapes produce bit-identical gradients") {
    Rng rng(11);
    const Array<double> a = random_array({4, 4}, rng);
    const Array<double> b = random_array({4, 4}, rng);
    auto run = [&]() {
        Tape<double> t;
        auto va = t.leaf(a);
        auto vb = t.leaf(b);
        auto loss = sum_all(mul(tanh(matmul(va, vb)), sigmoid(va)));
        t.backward(loss);
        return std::make_pair(va.grad().data, vb.grad().data);
    };
    auto [ga1, gb1] = run();
    auto [ga2, gb2] = run();
    CHECK(ga1 == ga2);
    CHECK(gb1 == gb2);
}

TEST_CASE("kl_sparse clamps vanishing predictions and counts a warning") {
    Tape<double> t;
    // Token 1 gets essentially zero probability; its log is clamped.
    auto logits = t.leaf(Array<double>({1, 3}, {0.0, -2000.0, 0.0}));
    auto lp = log_softmax_rows(logits);
    SparseTargets targets{{{1, 1.0}}};
    auto loss = kl_sparse(lp, targets);
    CHECK(t.numeric_warnings == 1);
    CHECK(loss.value().data[0] == doctest::Approx(-std::log(1e-12)).epsilon(1e-6));
}

TEST_CASE("adam frozen examples") {
    SUBCASE("zero gradient leaves parameters unchanged") {
        ParamStore<double> params;
        params.add("p", Array<double>({1, 3}, {1.0, -2.0, 0.5}));
        AdamState<double> adam(AdamConfig<double>{}, params);
        Array<double> g = Array<double>::zeros({1, 3});
        adam.step(params, {&g});
        CHECK(params.get("p").data == std::vector<double>{1.0, -2.0, 0.5});
        CHECK(adam.step_count() == 1);
    }
    SUBCASE("single step magnitude is the learning rate") {
        ParamStore<double> params;
        params.add("p", Array<double>({1, 1}, {1.0}));
        AdamState<double> adam(AdamConfig<double>{0.0002}, params);
        Array<double> g({1, 1}, {1.0});
        adam.step(params, {&g});
        // Bias-corrected m-hat = v-hat = 1, so the update is lr/(1+eps).
        CHECK(params.get("p").data[0] == doctest::Approx(1.0 - 0.0002).epsilon(1e-6));
    }
    SUBCASE(" converges on a quadratic") {
        ParamStore<double> params;
        params.add("p", Array<double>({1, 1}, {0.0}));
        AdamState<double> adam(AdamConfig<double>{0.05}, params);
        for (int i = 0; i < 200; ++i) {
            Array<double> g({1, 1}, {2 * (params.get("p").data[0] - 3.0)});
            adam.step(params, {&g});
        }
        CHECK(std::abs(params.get("p").data[0] - 3.0) < 0.05);
        CHECK(adam.step_count() == 200);
    }
    SUBCASE("missing gradient is a contract error") {
        ParamStore<double> params;
        params.add("p", Array<double>({1, 1}, {1.0}));
        AdamState<double> adam(AdamConfig<double>{}, params);
        CHECK_THROWS_WITH_AS(adam.step(params, {nullptr}), doctest::Contains("p"),
                             ContractError);
    }
}
