#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "evlab/rng.hpp"
#include "evlab/tensor.hpp"
#include "gradcheck.hpp"

#include <cmath>
#include <stdexcept>

using namespace evlab;

namespace {

Tensor random_tensor(Rng& rng, Shape shape, bool param, double lo = -2.0, double hi = 2.0) {
    std::vector<double> v(shape_numel(shape));
    for (auto& x : v) x = rng.uniform(lo, hi);
    return param ? Tensor::param(shape, std::move(v)) : Tensor::from_data(shape, std::move(v));
}

} // namespace

TEST_CASE("forward op reference values") {
    CHECK(sigmoid(Tensor::zeros({1})).item() == 0.5);

    // 1x1 conv is a scalar product
    Tensor x = Tensor::from_data({1, 1, 1}, {2.0});
    Tensor w = Tensor::from_data({1, 1, 1, 1}, {3.0});
    CHECK(conv2d(x, w).item() == 6.0);

    Tensor a = Tensor::from_data({2, 2}, {1, 2, 3, 4});
    Tensor id = Tensor::from_data({2, 2}, {1, 0, 0, 1});
    Tensor r = matmul(a, id);
    CHECK(r.values() == std::vector<double>{1, 2, 3, 4});

    CHECK(mean(Tensor::from_data({4}, {1, 2, 3, 4})).item() == 2.5);
    CHECK(sum(Tensor::from_data({4}, {1, 2, 3, 4})).item() == 10.0);
}

TEST_CASE("shape mismatch diagnostics name the op and shapes") {
    Tensor a = Tensor::zeros({2, 3});
    Tensor b = Tensor::zeros({3, 3});
    try {
        add(a, b);
        FAIL("expected rejection");
    } catch (const std::invalid_argument& e) {
        const std::string msg = e.what();
        CHECK(msg.find("add") != std::string::npos);
        CHECK(msg.find("[2,3]") != std::string::npos);
        CHECK(msg.find("[3,3]") != std::string::npos);
    }
    CHECK_THROWS_AS(matmul(a, a), std::invalid_argument);
    CHECK_THROWS_AS(conv2d(Tensor::zeros({1, 4, 4}), Tensor::zeros({1, 2, 3, 3})),
                    std::invalid_argument);
}

TEST_CASE("backward basics") {
    // d(x^2)/dx at 3 is 6
    Tape tape;
    {
        TapeScope scope(tape);
        Tensor x = Tensor::param({1}, {3.0});
        Tensor loss = mul(x, x);
        backward(loss);
        CHECK(x.grad()[0] == doctest::Approx(6.0));
    }

    // sigma'(0) = 0.25 per element
    Tape tape2;
    {
        TapeScope scope(tape2);
        Tensor x = Tensor::param({3}, {0.0, 0.0, 0.0});
        Tensor loss = sum(sigmoid(x));
        backward(loss);
        for (double g : x.grad()) CHECK(g == doctest::Approx(0.25));
    }

    // non-scalar loss rejected
    Tape tape3;
    {
        TapeScope scope(tape3);
        Tensor x = Tensor::param({2}, {1.0, 2.0});
        Tensor y = add(x, x);
        CHECK_THROWS_AS(backward(y), std::invalid_argument);
    }
}

TEST_CASE("fan-out accumulates branch gradients") {
    Tape tape;
    TapeScope scope(tape);
    Tensor x = Tensor::param({1}, {1.5});
    // loss = x*x + 3x -> dloss/dx = 2x + 3 = 6
    Tensor loss = add(mul(x, x), scale(x, 3.0));
    backward(loss);
    CHECK(x.grad()[0] == doctest::Approx(6.0));
}

TEST_CASE("conv2d with delta kernel reproduces the input") {
    Rng rng(7);
    Tensor x = random_tensor(rng, {2, 5, 7}, false);
    // 3x3 delta kernels mapping channel i -> i
    std::vector<double> w(2 * 2 * 3 * 3, 0.0);
    w[(0 * 2 + 0) * 9 + 4] = 1.0;
    w[(1 * 2 + 1) * 9 + 4] = 1.0;
    Tensor k = Tensor::from_data({2, 2, 3, 3}, std::move(w));
    Tensor y = conv2d(x, k);
    for (std::size_t i = 0; i < x.numel(); ++i) CHECK(y.values()[i] == x.values()[i]);
}

TEST_CASE("gradients match finite differences on random conv net") {
    Rng rng(123);
    for (int trial = 0; trial < 3; ++trial) {
        Tensor x = random_tensor(rng, {2, 6, 6}, true);
        Tensor w1 = random_tensor(rng, {3, 2, 3, 3}, true, -0.5, 0.5);
        Tensor b1 = random_tensor(rng, {3}, true, -0.1, 0.1);
        Tensor w2 = random_tensor(rng, {2, 3, 3, 3}, true, -0.5, 0.5);
        Tensor w3 = random_tensor(rng, {1, 2, 1, 1}, true, -0.5, 0.5);

        auto forward_graph = [&]() {
            Tensor h1 = relu(conv2d(x, w1, b1));
            Tensor h2 = tanh_op(conv2d(h1, w2));
            Tensor h3 = sigmoid(conv2d(h2, w3));
            return mean(mul(h3, h3));
        };

        Tape tape;
        {
            TapeScope scope(tape);
            backward(forward_graph());
        }
        auto fwd = [&]() { return forward_graph().item(); };
        auto res = testing::finite_diff_check({x, w1, b1, w2, w3}, fwd, 1e-5, 12);
        CHECK_MESSAGE(res.max_rel_err < 1e-4, res.worst);
    }
}

TEST_CASE("gradients match finite differences per op") {
    Rng rng(99);
    struct Case {
        const char* name;
        std::function<Tensor(const Tensor&, const Tensor&)> build;
    };
    const Case cases[] = {
        {"add", [](const Tensor& a, const Tensor& b) { return add(a, b); }},
        {"sub", [](const Tensor& a, const Tensor& b) { return sub(a, b); }},
        {"mul", [](const Tensor& a, const Tensor& b) { return mul(a, b); }},
        {"sigmoid", [](const Tensor& a, const Tensor& b) { return sigmoid(add(a, b)); }},
        {"tanh", [](const Tensor& a, const Tensor& b) { return tanh_op(mul(a, b)); }},
        {"exp", [](const Tensor& a, const Tensor& b) { return exp_op(sub(a, b)); }},
        {"abs", [](const Tensor& a, const Tensor& b) { return abs_op(mul(a, b)); }},
        {"concat",
         [](const Tensor& a, const Tensor& b) {
             return mul(concat_ch(a, b), concat_ch(b, a));
         }},
        {"slice", [](const Tensor& a, const Tensor& b) { return slice_ch(mul(a, b), 1, 2); }},
        {"down2", [](const Tensor& a, const Tensor& b) { return down2_nearest(mul(a, b)); }},
        {"up2", [](const Tensor& a, const Tensor& b) { return up2_bilinear(mul(a, b)); }},
    };
    for (const auto& c : cases) {
        Tensor a = random_tensor(rng, {3, 4, 4}, true);
        Tensor b = random_tensor(rng, {3, 4, 4}, true);
        auto graph = [&]() { return mean(c.build(a, b)); };
        Tape tape;
        {
            TapeScope scope(tape);
            backward(graph());
        }
        auto res = testing::finite_diff_check({a, b}, [&]() { return graph().item(); }, 1e-5, 10);
        CHECK_MESSAGE(res.max_rel_err < 1e-4, c.name << ": " << res.worst);
    }

    // matmul, broadcast, reshape, mean/sum on their natural shapes
    {
        Tensor a = random_tensor(rng, {3, 4}, true);
        Tensor b = random_tensor(rng, {4, 2}, true);
        auto graph = [&]() { return mean(mul(matmul(a, b), matmul(a, b))); };
        Tape tape;
        {
            TapeScope scope(tape);
            backward(graph());
        }
        auto res = testing::finite_diff_check({a, b}, [&]() { return graph().item(); });
        CHECK_MESSAGE(res.max_rel_err < 1e-4, "matmul: " << res.worst);
    }
    {
        Tensor v = random_tensor(rng, {3}, true);
        Tensor m = random_tensor(rng, {3, 4, 4}, true);
        auto graph = [&]() { return mean(mul(broadcast_chw(v, 4, 4), m)); };
        Tape tape;
        {
            TapeScope scope(tape);
            backward(graph());
        }
        auto res = testing::finite_diff_check({v, m}, [&]() { return graph().item(); });
        CHECK_MESSAGE(res.max_rel_err < 1e-4, "broadcast: " << res.worst);
    }
    {
        Tensor a = random_tensor(rng, {2, 3, 4}, true);
        auto graph = [&]() { return sum(mul(reshape(a, {6, 4}), reshape(a, {6, 4}))); };
        Tape tape;
        {
            TapeScope scope(tape);
            backward(graph());
        }
        auto res = testing::finite_diff_check({a}, [&]() { return graph().item(); });
        CHECK_MESSAGE(res.max_rel_err < 1e-4, "reshape: " << res.worst);
    }
}

TEST_CASE("no-NaN property under random op graphs") {
    Rng rng(2024);
    for (int trial = 0; trial < 50; ++trial) {
        Tensor x = random_tensor(rng, {2, 4, 4}, false);
        Tensor y = random_tensor(rng, {2, 4, 4}, false);
        Tensor cur = x;
        for (int depth = 0; depth < 6; ++depth) {
            switch (rng.uniform_int(0, 5)) {
            case 0: cur = add(cur, y); break;
            case 1: cur = mul(cur, y); break;
            case 2: cur = sigmoid(cur); break;
            case 3: cur = tanh_op(cur); break;
            case 4: cur = relu(cur); break;
            default: cur = up2_bilinear(down2_nearest(cur)); break;
            }
        }
        for (double v : cur.values()) CHECK(std::isfinite(v));
    }
}

TEST_CASE("inference mode records nothing") {
    Tensor x = Tensor::param({2}, {1.0, 2.0});
    Tensor y = mul(x, x); // no tape in scope
    CHECK_FALSE(y.requires_grad());

    Tape tape;
    TapeScope scope(tape);
    Tensor z = mul(x, x);
    CHECK(z.requires_grad());
    CHECK(tape.size() == 1);
    {
        NoGradScope ng;
        Tensor w = mul(x, x);
        CHECK_FALSE(w.requires_grad());
    }
    CHECK(tape.size() == 1);
}
