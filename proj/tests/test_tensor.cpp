#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "vcmr/gradcheck.hpp"
#include "vcmr/tensor.hpp"

using namespace vcmr;

// exact-math unit tests run at 64-bit; f32-specific cases set their own guard
static PrecisionGuard g_test_precision(Precision::f64);

namespace {

Tensor leaf(std::vector<int> shape, std::vector<double> data) {
    return Tensor::parameter(std::move(shape), std::move(data));
}

}  // namespace

TEST_CASE("softmax of uniform logits is uniform") {
    Tensor x = Tensor::constant({3}, {0.0, 0.0, 0.0});
    Tensor s = softmax(x, 0);
    for (int i = 0; i < 3; ++i) CHECK(s.at(i) == doctest::Approx(1.0 / 3).epsilon(1e-12));
}

TEST_CASE("softmax sums to one and is strictly positive") {
    std::mt19937_64 rng(7);
    std::normal_distribution<double> d(0.0, 3.0);
    for (int trial = 0; trial < 50; ++trial) {
        std::vector<double> v(24);
        for (double& x : v) x = d(rng);
        Tensor s = softmax(Tensor::constant({4, 6}, v), 1);
        for (int r = 0; r < 4; ++r) {
            double sum = 0;
            for (int c = 0; c < 6; ++c) {
                const double p = s.at(r * 6 + c);
                CHECK(p > 0.0);
                sum += p;
            }
            CHECK(std::abs(sum - 1.0) < 1e-6);
        }
    }
}

TEST_CASE("matmul shape rule") {
    Tensor a = Tensor::constant({2, 3}, std::vector<double>(6, 1.0));
    Tensor b = Tensor::constant({3, 4}, std::vector<double>(12, 1.0));
    Tensor c = matmul(a, b);
    CHECK(c.shape() == std::vector<int>{2, 4});
    CHECK(c.at(0) == 3.0);
    CHECK_THROWS_AS(matmul(b, a), ShapeError);
}

TEST_CASE("conv1d same padding keeps sequence length") {
    Tensor x = Tensor::constant({10, 2}, std::vector<double>(20, 1.0));
    Tensor w = Tensor::constant({1, 2, 5}, std::vector<double>(10, 0.1));
    Tensor y = conv1d_same(x, w);
    CHECK(y.shape() == std::vector<int>{10, 1});
    // interior positions see the full kernel
    CHECK(y.at(5) == doctest::Approx(1.0));
    // edge positions see zero padding
    CHECK(y.at(0) == doctest::Approx(0.6));
}

TEST_CASE("backward of sum gives ones") {
    Tensor x = leaf({3}, {5.0, -1.0, 2.0});
    backward(sum_all(x));
    CHECK(x.grad() == std::vector<double>{1.0, 1.0, 1.0});
}

TEST_CASE("backward of sum of squares") {
    Tensor x = leaf({2}, {1.0, 2.0});
    backward(sum_all(mul(x, x)));
    CHECK(x.grad()[0] == doctest::Approx(2.0));
    CHECK(x.grad()[1] == doctest::Approx(4.0));
}

TEST_CASE("composite loss matches central finite differences") {
    PrecisionGuard p64(Precision::f64);
    std::mt19937_64 rng(42);
    std::normal_distribution<double> d(0.0, 1.0);
    const double eps = 1e-5;
    for (int trial = 0; trial < 5; ++trial) {
        std::vector<double> v(5);
        for (double& x : v) x = d(rng);

        auto loss_of = [&](const std::vector<double>& vals) {
            Tensor x = leaf({5}, vals);
            return sum_all(mul(gelu(x), softmax(x, 0)));
        };
        Tensor x = leaf({5}, v);
        Tensor loss = sum_all(mul(gelu(x), softmax(x, 0)));
        backward(loss);
        for (int i = 0; i < 5; ++i) {
            std::vector<double> vp = v, vm = v;
            vp[static_cast<size_t>(i)] += eps;
            vm[static_cast<size_t>(i)] -= eps;
            const double fd = (loss_of(vp).item() - loss_of(vm).item()) / (2 * eps);
            const double a = x.grad()[static_cast<size_t>(i)];
            CHECK(std::abs(a - fd) / std::max({1.0, std::abs(a), std::abs(fd)}) < 1e-4);
        }
    }
}

TEST_CASE("gradient of a leaf sums over all paths") {
    Tensor x = leaf({2}, {3.0, 4.0});
    Tensor y = add(mul(x, x), scale(x, 2.0));  // x^2 + 2x, x used twice
    backward(sum_all(y));
    CHECK(x.grad()[0] == doctest::Approx(8.0));   // 2*3 + 2
    CHECK(x.grad()[1] == doctest::Approx(10.0));  // 2*4 + 2
}

TEST_CASE("masked positions contribute exactly zero gradient") {
    Tensor x = leaf({2, 3}, {1.0, 2.0, 3.0, 4.0, 5.0, 6.0});
    std::vector<std::uint8_t> keep{1, 0, 1};
    Tensor y = masked_fill(x, keep, 1, -1e9);
    backward(sum_all(softmax(y, 1)));
    CHECK(x.grad()[1] == 0.0);
    CHECK(x.grad()[4] == 0.0);
}

TEST_CASE("backward errors") {
    Tensor x = leaf({3}, {1.0, 2.0, 3.0});
    Tensor y = mul(x, x);
    CHECK_THROWS_AS(backward(y), InvalidArgument);  // non-scalar
    Tensor loss = sum_all(y);
    backward(loss);
    CHECK_THROWS_AS(backward(loss), InvalidArgument);  // already consumed
}

TEST_CASE("non-finite forward output is surfaced") {
    Tensor x = Tensor::constant({2}, {1.0, -1.0});
    CHECK_THROWS_AS(log(x), FiniteError);
    Tensor big = Tensor::constant({1}, {1e300});
    CHECK_THROWS_AS(mul(big, big), FiniteError);
}

TEST_CASE("identical inputs produce bitwise identical outputs per precision mode") {
    auto run = [](Precision p) {
        PrecisionGuard g(p);
        Tensor x = Tensor::constant({3, 3}, {0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9});
        Tensor y = matmul(softmax(x, 1), transpose(gelu(x)));
        return y.values();
    };
    CHECK(run(Precision::f32) == run(Precision::f32));
    CHECK(run(Precision::f64) == run(Precision::f64));
    CHECK(run(Precision::f32) != run(Precision::f64));
}

TEST_CASE("f32 mode rounds op outputs to float precision") {
    PrecisionGuard g(Precision::f32);
    Tensor x = Tensor::constant({1}, {1.0});
    Tensor y = scale(x, 1.0 / 3.0);
    CHECK(y.at(0) == static_cast<double>(static_cast<float>(1.0 / 3.0)));
}

TEST_CASE("broadcasting add and mul") {
    Tensor m = Tensor::constant({2, 3}, {1, 2, 3, 4, 5, 6});
    Tensor row = Tensor::constant({3}, {10, 20, 30});
    Tensor col = Tensor::constant({2, 1}, {100, 200});
    Tensor y = add(add(m, row), col);
    CHECK(y.at(0) == 111.0);
    CHECK(y.at(5) == 236.0);
    Tensor s = mul(m, Tensor::scalar(2.0));
    CHECK(s.at(3) == 8.0);
    CHECK_THROWS_AS(add(m, Tensor::constant({4}, {1, 2, 3, 4})), ShapeError);
}

TEST_CASE("reductions and structure ops") {
    Tensor m = Tensor::constant({2, 3}, {1, 5, 3, 4, 2, 6});
    CHECK(reduce_max(m, 1).values() == std::vector<double>{5, 6});
    CHECK(reduce_sum(m, 0).values() == std::vector<double>{5, 7, 9});
    CHECK(reduce_mean(m, 1).values() == std::vector<double>{3, 4});
    CHECK(transpose(m).values() == std::vector<double>{1, 4, 5, 2, 3, 6});
    CHECK(slice_cols(m, 1, 2).values() == std::vector<double>{5, 3, 2, 6});
    CHECK(gather_rows(m, {1, 0}).values() == std::vector<double>{4, 2, 6, 1, 5, 3});
    CHECK(outer(Tensor::constant({2}, {1, 2}), Tensor::constant({2}, {3, 4})).values() ==
          std::vector<double>{3, 4, 6, 8});
}

TEST_CASE("layer_norm rows have zero mean unit variance") {
    std::mt19937_64 rng(3);
    std::normal_distribution<double> d(2.0, 5.0);
    std::vector<double> v(32);
    for (double& x : v) x = d(rng);
    Tensor y = layer_norm(Tensor::constant({4, 8}, v));
    for (int r = 0; r < 4; ++r) {
        double mean = 0, var = 0;
        for (int c = 0; c < 8; ++c) mean += y.at(r * 8 + c);
        mean /= 8;
        for (int c = 0; c < 8; ++c) {
            const double dd = y.at(r * 8 + c) - mean;
            var += dd * dd;
        }
        var /= 8;
        CHECK(std::abs(mean) < 1e-4);
        CHECK(std::abs(var - 1.0) < 1e-4);
    }
}

TEST_CASE("per-op finite difference checks (reduced seeds)") {
    auto results = run_op_gradchecks(3);
    for (const auto& r : results) {
        INFO(r.name, " max_err=", r.max_err);
        CHECK(r.pass);
    }
}

TEST_CASE("cross entropy with index matches -log softmax") {
    Tensor logits = Tensor::constant({4}, {0.5, -1.0, 2.0, 0.0});
    Tensor loss = cross_entropy_with_index(logits, 2);
    double sum = 0;
    for (int i = 0; i < 4; ++i) sum += std::exp(logits.at(i));
    CHECK(loss.item() == doctest::Approx(-std::log(std::exp(2.0) / sum)).epsilon(1e-12));
}
