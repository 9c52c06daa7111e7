#include <doctest.h>

#include <cmath>

#include "oracles.hpp"
#include "uesa/gradcheck.hpp"
#include "uesa/ops.hpp"

using namespace uesa;

TEST_SUITE("tensor_core") {

TEST_CASE("tensor construction validates shape and values") {
    CHECK_THROWS_AS(Tensor({2, 0}, {}), std::invalid_argument);
    CHECK_THROWS_AS(Tensor({2}, {1.0}), std::invalid_argument);
    CHECK_THROWS_AS(Tensor({1}, {NAN}), NonFiniteError);
    Tensor t({2, 3}, {1, 2, 3, 4, 5, 6});
    CHECK(t.numel() == 6);
    CHECK(t.dim(1) == 3);
    CHECK(shape_to_string(t.shape()) == "[2,3]");
}

TEST_CASE("permute identity, involution and exhaustive index map") {
    Rng rng(1);
    Tensor a = oracle::random_tensor({2, 3}, rng);
    CHECK(oracle::bit_equal(permute(a, {0, 1}), a));
    CHECK(oracle::bit_equal(permute(permute(a, {1, 0}), {1, 0}), a));

    Tensor b = oracle::random_tensor({2, 3, 4}, rng);
    Tensor p = permute(b, {2, 0, 1});
    REQUIRE(p.shape() == Shape{4, 2, 3});
    int checked = 0;
    for (std::size_t i = 0; i < 2; ++i)
        for (std::size_t j = 0; j < 3; ++j)
            for (std::size_t k = 0; k < 4; ++k) {
                // out[k,i,j] = in[i,j,k]
                CHECK(p[(k * 2 + i) * 3 + j] == b[(i * 3 + j) * 4 + k]);
                ++checked;
            }
    CHECK(checked == 24);

    const std::vector<std::size_t> order{2, 0, 1};
    CHECK(oracle::bit_equal(permute(p, inverse_permutation(order)), b));
    CHECK_THROWS_AS(permute(b, {0, 0, 1}), std::invalid_argument);
    CHECK_THROWS_AS(permute(b, {0, 1}), std::invalid_argument);
}

TEST_CASE("matmul examples and naive oracle") {
    Tensor a({2, 2}, {1, 2, 3, 4});
    Tensor ones({2, 1}, {1, 1});
    Tensor r = matmul(a, ones);
    CHECK(r.shape() == Shape{2, 1});
    CHECK(r[0] == 3.0);
    CHECK(r[1] == 7.0);
    CHECK(oracle::bit_equal(matmul(a, Tensor({2, 2}, {1, 0, 0, 1})), a));
    CHECK_THROWS_AS(matmul(a, Tensor({3, 1}, {1, 1, 1})), std::invalid_argument);

    Rng rng(2);
    for (int trial = 0; trial < 20; ++trial) {
        const std::size_t n = 1 + rng.below(8), d = 1 + rng.below(8), m = 1 + rng.below(8);
        Tensor x = oracle::random_tensor({n, d}, rng), y = oracle::random_tensor({d, m}, rng);
        CHECK(oracle::max_abs_diff(matmul(x, y), oracle::matmul(oracle::values(x), oracle::values(y), n, d, m)) < 1e-12);
    }
}

TEST_CASE("softmax_rows examples and row sums") {
    Tensor eq = softmax_rows(Tensor({1, 4}, {2, 2, 2, 2}));
    for (double v : eq.data()) CHECK(v == doctest::Approx(0.25).epsilon(1e-15));
    Tensor single = softmax_rows(Tensor({3, 1}, {-5, 0, 9}));
    for (double v : single.data()) CHECK(v == 1.0);
    Tensor s = softmax_rows(Tensor({1, 2}, {0.0, std::log(3.0)}));
    CHECK(std::abs(s[0] - 0.25) < 1e-12);
    CHECK(std::abs(s[1] - 0.75) < 1e-12);

    Rng rng(3);
    for (int trial = 0; trial < 50; ++trial) {
        Tensor t = oracle::random_tensor({5, 7}, rng, -50.0, 50.0);
        Tensor y = softmax_rows(t);
        for (std::size_t i = 0; i < 5; ++i) {
            double row = 0.0;
            for (std::size_t j = 0; j < 7; ++j) row += y[i * 7 + j];
            CHECK(std::abs(row - 1.0) < 1e-9);
        }
    }
}

TEST_CASE("conv2d examples and naive oracle") {
    Tensor x({1, 3, 3}, {1, 2, 3, 4, 5, 6, 7, 8, 9});
    CHECK(oracle::bit_equal(conv2d(x, Tensor({1, 1, 1, 1}, {1.0}), Tensor({1}, {0.0})), x));

    Tensor nine = conv2d(Tensor::ones({1, 5, 5}), Tensor::ones({1, 1, 3, 3}), Tensor({1}, {0.0}));
    CHECK(nine.shape() == Shape{1, 3, 3});
    for (double v : nine.data()) CHECK(v == 9.0);

    CHECK_THROWS_AS(conv2d(Tensor::ones({1, 4, 4}), Tensor::ones({1, 1, 3, 3}), Tensor({1}, {0.0}), 2),
                    std::invalid_argument);

    Rng rng(4);
    struct Case {
        std::size_t k, stride, before, after;
    };
    const Case cases[] = {{1, 1, 0, 0}, {2, 1, 0, 1}, {3, 1, 1, 1}, {3, 1, 0, 0}, {2, 2, 0, 0}, {3, 1, 2, 2}};
    for (const auto& cs : cases)
        for (int trial = 0; trial < 5; ++trial) {
            const std::size_t c_in = 1 + rng.below(3), c_out = 1 + rng.below(3);
            const std::size_t h = 4 + 2 * rng.below(3), w = 4 + 2 * rng.below(3);
            Tensor in = oracle::random_tensor({c_in, h, w}, rng);
            Tensor k = oracle::random_tensor({c_out, c_in, cs.k, cs.k}, rng);
            Tensor b = oracle::random_tensor({c_out}, rng);
            std::size_t ho = 0, wo = 0;
            const auto ref = oracle::conv2d(oracle::values(in), c_in, h, w, oracle::values(k), oracle::values(b), c_out,
                                            cs.k, cs.stride, cs.before, cs.after, ho, wo);
            Tensor got = conv2d(in, k, b, cs.stride, Padding{cs.before, cs.after});
            REQUIRE(got.shape() == Shape{c_out, ho, wo});
            CHECK(oracle::max_abs_diff(got, ref) < 1e-12);
        }
}

TEST_CASE("same padding preserves size for every supported kernel") {
    for (std::size_t k : {1u, 2u, 3u}) {
        Tensor y = conv2d(Tensor::ones({2, 6, 6}), Tensor::ones({3, 2, k, k}), Tensor::zeros({3}), 1, Padding::same(k));
        CHECK(y.shape() == Shape{3, 6, 6});
    }
}

TEST_CASE("maxpool2d examples and oracle") {
    Tensor c = maxpool2d(Tensor::full({2, 4, 4}, 1.5));
    CHECK(c.shape() == Shape{2, 2, 2});
    for (double v : c.data()) CHECK(v == 1.5);
    CHECK(maxpool2d(Tensor({1, 2, 2}, {1, 2, 3, 4})).item() == 4.0);
    CHECK_THROWS_AS(maxpool2d(Tensor::ones({1, 3, 4})), std::invalid_argument);

    Rng rng(5);
    for (int trial = 0; trial < 20; ++trial) {
        const std::size_t ch = 1 + rng.below(3), h = 2 * (1 + rng.below(4)), w = 2 * (1 + rng.below(4));
        Tensor t = oracle::random_tensor({ch, h, w}, rng);
        CHECK(oracle::max_abs_diff(maxpool2d(t), oracle::maxpool(oracle::values(t), ch, h, w)) == 0.0);
    }
}

TEST_CASE("maxpool2d routes the gradient to the first maximum") {
    Tensor t = Tensor({1, 2, 2}, {7, 7, 7, 7}).requiring_grad();
    sum(maxpool2d(t)).backward();
    CHECK(t.grad()[0] == 1.0);
    CHECK(t.grad()[1] == 0.0);
    CHECK(t.grad()[2] == 0.0);
    CHECK(t.grad()[3] == 0.0);
}

TEST_CASE("upsample_nearest examples") {
    Tensor one = upsample_nearest(Tensor({1, 1, 1}, {2.5}));
    CHECK(one.shape() == Shape{1, 2, 2});
    for (double v : one.data()) CHECK(v == 2.5);

    Tensor b = upsample_nearest(Tensor({1, 2, 2}, {1, 2, 3, 4}));
    const auto ref = oracle::upsample({1, 2, 3, 4}, 1, 2, 2);
    CHECK(oracle::max_abs_diff(b, ref) == 0.0);
    const double expected[16] = {1, 1, 2, 2, 1, 1, 2, 2, 3, 3, 4, 4, 3, 3, 4, 4};
    for (std::size_t i = 0; i < 16; ++i) CHECK(b[i] == expected[i]);

    Rng rng(6);
    Tensor r = oracle::random_tensor({3, 4, 4}, rng);
    CHECK(oracle::bit_equal(maxpool2d(upsample_nearest(r)), r));
}

TEST_CASE("concat_channels stacks along the channel axis") {
    Tensor a({1, 1, 2}, {1, 2});
    Tensor b({2, 1, 2}, {3, 4, 5, 6});
    Tensor c = concat_channels({a, b});
    CHECK(c.shape() == Shape{3, 1, 2});
    for (std::size_t i = 0; i < 6; ++i) CHECK(c[i] == static_cast<double>(i + 1));
    CHECK_THROWS_AS(concat_channels({a, Tensor::ones({1, 2, 2})}), std::invalid_argument);
}

TEST_CASE("operations are deterministic") {
    Rng rng(7);
    Tensor x = oracle::random_tensor({3, 8, 8}, rng);
    Tensor k = oracle::random_tensor({4, 3, 3, 3}, rng);
    Tensor b = oracle::random_tensor({4}, rng);
    CHECK(oracle::bit_equal(conv2d(x, k, b, 1, 1), conv2d(x, k, b, 1, 1)));
    Tensor m = oracle::random_tensor({9, 5}, rng);
    CHECK(oracle::bit_equal(softmax_rows(matmul(m, transpose(m))), softmax_rows(matmul(m, transpose(m)))));
}

TEST_CASE("grad_check examples") {
    Rng rng(8);
    Tensor x = oracle::random_tensor({3, 4}, rng);
    const auto linear = grad_check([](const Tensor& t) { return sum(t); }, x);
    CHECK(linear.max_rel_error < 1e-10);
    const auto soft = grad_check([](const Tensor& t) { return sum(mul(softmax_rows(t), t)); }, x);
    CHECK(soft.max_rel_error < 1e-6);
    CHECK_THROWS_AS(grad_check([](const Tensor& t) { return sum(t); }, x, 1e-9), std::invalid_argument);
}

TEST_CASE("grad_check reports the op that produced a non-finite value") {
    Tensor x({2}, {1e300, 1e300});
    const auto r = grad_check([](const Tensor& t) { return sum(mul(t, t)); }, x);
    CHECK_FALSE(r.passed(1.0));
    CHECK(r.failed_op == "mul");
}

TEST_CASE("every differentiable op passes grad_check") {
    Rng rng(9);
    // Inputs stay away from relu/maxpool kinks so finite differences are valid.
    auto away_from_zero = [&rng](const Shape& s) {
        std::vector<double> v(shape_numel(s));
        for (auto& e : v) e = (rng.uniform() < 0.5 ? -1.0 : 1.0) * rng.uniform(0.2, 1.0);
        return Tensor(s, std::move(v));
    };
    Tensor w = oracle::random_tensor({2, 3, 4}, rng);
    Tensor x = away_from_zero({2, 3, 4});
    const double tol = 1e-6;
    auto check = [&](const char* name, const ScalarFunction& f, const Tensor& at) {
        const auto r = grad_check(f, at);
        INFO(name << " rel err " << r.max_rel_error);
        CHECK(r.passed(tol));
    };
    check("permute", [&](const Tensor& t) { return sum(mul(permute(t, {2, 0, 1}), permute(w, {2, 0, 1}))); }, x);
    check("reshape", [&](const Tensor& t) { return sum(mul(reshape(t, {6, 4}), reshape(w, {6, 4}))); }, x);
    check("add", [&](const Tensor& t) { return sum(mul(add(t, w), w)); }, x);
    check("mul", [&](const Tensor& t) { return sum(mul(t, t)); }, x);
    check("scale", [&](const Tensor& t) { return sum(mul(scale(t, -2.5), w)); }, x);
    check("relu", [&](const Tensor& t) { return sum(mul(relu(t), w)); }, x);
    check("sigmoid", [&](const Tensor& t) { return sum(mul(sigmoid(t), w)); }, x);
    check("mean", [&](const Tensor& t) { return mean(mul(t, t)); }, x);
    check("concat", [&](const Tensor& t) { return sum(mul(concat_channels({t, w}), concat_channels({w, t}))); }, x);

    Tensor m = oracle::random_tensor({3, 5}, rng);
    Tensor m2 = oracle::random_tensor({5, 2}, rng);
    check("matmul lhs", [&](const Tensor& t) { return sum(mul(matmul(t, m2), matmul(t, m2))); }, m);
    check("matmul rhs", [&](const Tensor& t) { return sum(mul(matmul(m, t), matmul(m, t))); }, m2);
    check("transpose", [&](const Tensor& t) { return sum(mul(transpose(t), transpose(m))); }, m);
    check("softmax_rows", [&](const Tensor& t) { return sum(mul(softmax_rows(t), m)); }, m);

    Tensor img = away_from_zero({2, 4, 4});
    Tensor kern = oracle::random_tensor({3, 2, 3, 3}, rng);
    Tensor bias = oracle::random_tensor({3}, rng);
    Tensor probe = oracle::random_tensor({3, 4, 4}, rng);
    check("conv2d input", [&](const Tensor& t) { return sum(mul(conv2d(t, kern, bias, 1, 1), probe)); }, img);
    check("conv2d kernel", [&](const Tensor& t) { return sum(mul(conv2d(img, t, bias, 1, 1), probe)); }, kern);
    check("conv2d bias", [&](const Tensor& t) { return sum(mul(conv2d(img, kern, t, 1, 1), probe)); }, bias);
    Tensor kern2 = oracle::random_tensor({3, 2, 2, 2}, rng);
    check("conv2d 2x2 same", [&](const Tensor& t) { return sum(mul(conv2d(t, kern2, bias, 1, Padding::same(2)), probe)); },
          img);
    Tensor probe_s2 = oracle::random_tensor({3, 2, 2}, rng);
    check("conv2d stride 2", [&](const Tensor& t) { return sum(mul(conv2d(t, kern2, bias, 2, 0), probe_s2)); }, img);

    // Distinct values keep every window's maximum unique.
    std::vector<double> distinct(32);
    for (std::size_t i = 0; i < distinct.size(); ++i) distinct[i] = 0.1 * static_cast<double>((i * 7) % 32) - 1.5;
    Tensor pool_in({2, 4, 4}, distinct);
    Tensor pool_probe = oracle::random_tensor({2, 2, 2}, rng);
    check("maxpool2d", [&](const Tensor& t) { return sum(mul(maxpool2d(t), pool_probe)); }, pool_in);
    Tensor up_probe = oracle::random_tensor({2, 8, 8}, rng);
    check("upsample", [&](const Tensor& t) { return sum(mul(upsample_nearest(t), up_probe)); }, img);

    Tensor gamma = oracle::random_tensor({2}, rng, 0.5, 1.5);
    Tensor beta = oracle::random_tensor({2}, rng);
    Tensor bn_probe = oracle::random_tensor({2, 4, 4}, rng);
    check("batch_norm_train x", [&](const Tensor& t) { return sum(mul(batch_norm_train(t, gamma, beta, 1e-5), bn_probe)); },
          img);
    check("batch_norm_train gamma",
          [&](const Tensor& t) { return sum(mul(batch_norm_train(img, t, beta, 1e-5), bn_probe)); }, gamma);
    check("batch_norm_train beta",
          [&](const Tensor& t) { return sum(mul(batch_norm_train(img, gamma, t, 1e-5), bn_probe)); }, beta);
    const ChannelStats running{{0.1, -0.2}, {0.8, 1.3}};
    check("batch_norm_eval",
          [&](const Tensor& t) { return sum(mul(batch_norm_eval(t, gamma, beta, running, 1e-5), bn_probe)); }, img);

    Tensor target = oracle::random_tensor({2, 4, 4}, rng, 0.0, 1.0);
    check("bce_with_logits", [&](const Tensor& t) { return bce_with_logits(t, target); }, img);
    check("soft_dice_loss", [&](const Tensor& t) { return soft_dice_loss(sigmoid(t), target); }, img);
}

TEST_CASE("batch_norm_train normalizes each channel") {
    Rng rng(10);
    Tensor x = oracle::random_tensor({3, 5, 5}, rng, -3.0, 7.0);
    ChannelStats stats;
    Tensor y = batch_norm_train(x, Tensor::ones({3}), Tensor::zeros({3}), 1e-5, &stats);
    for (std::size_t c = 0; c < 3; ++c) {
        double m = 0.0, v = 0.0;
        for (std::size_t i = 0; i < 25; ++i) m += x[c * 25 + i];
        m /= 25.0;
        for (std::size_t i = 0; i < 25; ++i) v += (x[c * 25 + i] - m) * (x[c * 25 + i] - m);
        v /= 25.0;
        CHECK(std::abs(stats.mean[c] - m) < 1e-12);
        CHECK(std::abs(stats.var[c] - v) < 1e-12);
        for (std::size_t i = 0; i < 25; ++i) CHECK(std::abs(y[c * 25 + i] - (x[c * 25 + i] - m) / std::sqrt(v + 1e-5)) < 1e-12);
    }
}

TEST_CASE("bce_with_logits matches the closed form and stays finite for large logits") {
    Tensor logits({1, 1, 3}, {-2.0, 0.0, 3.0});
    Tensor target({1, 1, 3}, {0.0, 1.0, 1.0});
    const double expected =
        (std::log(1.0 + std::exp(-2.0)) + std::log(2.0) + std::log(1.0 + std::exp(-3.0))) / 3.0;
    CHECK(std::abs(bce_with_logits(logits, target).item() - expected) < 1e-12);
    Tensor big({1, 1, 2}, {800.0, -800.0});
    CHECK(std::isfinite(bce_with_logits(big, Tensor({1, 1, 2}, {0.0, 1.0})).item()));
}

TEST_CASE("no-grad mode records no history") {
    Tensor x = Tensor({2}, {1.0, 2.0}).requiring_grad();
    {
        NoGradGuard guard;
        Tensor y = mul(x, x);
        CHECK_FALSE(y.requires_grad());
    }
    CHECK(mul(x, x).requires_grad());
}

TEST_CASE("gradients accumulate across shared subexpressions") {
    Tensor x = Tensor({1}, {3.0}).requiring_grad();
    Tensor y = add(mul(x, x), x);  // d/dx = 2x + 1
    y.backward();
    CHECK(x.grad()[0] == 7.0);
}

}  // TEST_SUITE
