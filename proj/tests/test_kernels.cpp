#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "evlab/kernels.hpp"
#include "evlab/rng.hpp"

#include <cmath>
#include <vector>

using namespace evlab;

namespace {

std::vector<double> random_vec(Rng& rng, std::size_t n, double lo = -2.0, double hi = 2.0) {
    std::vector<double> v(n);
    for (auto& x : v) x = rng.uniform(lo, hi);
    return v;
}

// sizes that exercise empty input, sub-vector tails and the unrolled path
const std::size_t kSizes[] = {0, 1, 3, 4, 5, 7, 8, 9, 31, 64, 257, 1000, 1023};

} // namespace

TEST_CASE("scalar and avx2 kernels are equivalent") {
    const auto* vec = kernels::avx2_ops();
    if (!vec) {
        MESSAGE("no AVX2 on this CPU, skipping equivalence checks");
        return;
    }
    const auto& sc = kernels::scalar_ops();
    Rng rng(42);

    for (std::size_t n : kSizes) {
        auto a = random_vec(rng, n);
        auto b = random_vec(rng, n);

        // pure elementwise ops perform identical IEEE operations: bit-exact
        std::vector<double> r1(n, 0.0), r2(n, 0.0);
        sc.add(a.data(), b.data(), r1.data(), n);
        vec->add(a.data(), b.data(), r2.data(), n);
        CHECK(r1 == r2);

        sc.sub(a.data(), b.data(), r1.data(), n);
        vec->sub(a.data(), b.data(), r2.data(), n);
        CHECK(r1 == r2);

        sc.mul(a.data(), b.data(), r1.data(), n);
        vec->mul(a.data(), b.data(), r2.data(), n);
        CHECK(r1 == r2);

        sc.scale(a.data(), 1.7, r1.data(), n);
        vec->scale(a.data(), 1.7, r2.data(), n);
        CHECK(r1 == r2);

        sc.relu(a.data(), r1.data(), n);
        vec->relu(a.data(), r2.data(), n);
        CHECK(r1 == r2);

        // FMA vs mul+add differ in rounding; reductions differ in association
        std::vector<double> y1 = b, y2 = b;
        sc.axpy(0.77, a.data(), y1.data(), n);
        vec->axpy(0.77, a.data(), y2.data(), n);
        for (std::size_t i = 0; i < n; ++i) CHECK(y1[i] == doctest::Approx(y2[i]).epsilon(1e-13));

        y1 = b;
        y2 = b;
        sc.addc(0.31, y1.data(), n);
        vec->addc(0.31, y2.data(), n);
        CHECK(y1 == y2);

        CHECK(sc.sum(a.data(), n) == doctest::Approx(vec->sum(a.data(), n)).epsilon(1e-12));
        CHECK(sc.dot(a.data(), b.data(), n) ==
              doctest::Approx(vec->dot(a.data(), b.data(), n)).epsilon(1e-12));
        CHECK(sc.sqdiff_sum(a.data(), b.data(), n) ==
              doctest::Approx(vec->sqdiff_sum(a.data(), b.data(), n)).epsilon(1e-12));

        std::vector<double> g = random_vec(rng, n);
        std::vector<double> d1(n, 0.5), d2(n, 0.5);
        sc.relu_grad(a.data(), g.data(), d1.data(), n);
        vec->relu_grad(a.data(), g.data(), d2.data(), n);
        CHECK(d1 == d2);
    }
}

TEST_CASE("kernel reference values") {
    const auto& K = kernels::active();
    std::vector<double> a = {1.0, 2.0, 3.0};
    std::vector<double> b = {0.5, -1.0, 2.0};
    CHECK(K.sum(a.data(), 3) == 6.0);
    CHECK(K.dot(a.data(), b.data(), 3) == doctest::Approx(4.5));
    CHECK(K.sqdiff_sum(a.data(), b.data(), 3) == doctest::Approx(0.25 + 9.0 + 1.0));

    std::vector<double> y = {1.0, 1.0, 1.0};
    K.axpy(2.0, a.data(), y.data(), 3);
    CHECK(y == std::vector<double>{3.0, 5.0, 7.0});
}

TEST_CASE("dispatch reports a usable table") {
    const auto& K = kernels::active();
    CHECK(K.name != nullptr);
    std::vector<double> a = {1.0, -1.0};
    std::vector<double> out(2, 0.0);
    K.relu(a.data(), out.data(), 2);
    CHECK(out[0] == 1.0);
    CHECK(out[1] == 0.0);
}
