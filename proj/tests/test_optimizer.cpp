#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "vcmr/optimizer.hpp"

using namespace vcmr;

TEST_CASE("zero gradient and zero weight decay leave parameters unchanged") {
    ParamStore ps(1);
    Tensor w = ps.weight("w", 2, 2);
    const auto before = w.values();
    ps.zero_grad();
    AdamW opt(ps, {.lr = 1e-2, .weight_decay = 0.0});
    opt.step();
    CHECK(w.values() == before);
}

TEST_CASE("first step with constant unit gradient moves by about -lr") {
    ParamStore ps(1);
    Tensor w = ps.zeros("w", {1});
    ps.zero_grad();
    backward(sum_all(w));  // d/dw sum(w) = 1
    AdamW opt(ps, {.lr = 1e-4, .weight_decay = 0.01});
    opt.step();
    // bias-corrected mhat = vhat = 1 on the first step; w starts at 0 so
    // decoupled decay contributes nothing
    CHECK(w.values()[0] == doctest::Approx(-1e-4).epsilon(1e-6));
}

TEST_CASE("missing gradient is an error") {
    ParamStore ps(1);
    ps.weight("w", 2, 2);
    AdamW opt(ps, {});
    CHECK_THROWS_AS(opt.step(), InvalidArgument);
}

TEST_CASE("converges on a quadratic") {
    ParamStore ps(1);
    Tensor w = ps.zeros("w", {1});
    AdamW opt(ps, {.lr = 0.05, .weight_decay = 0.0});
    auto dist_to_3 = [&]() { return std::abs(w.values()[0] - 3.0); };
    const double start = dist_to_3();
    for (int step = 0; step < 100; ++step) {
        ps.zero_grad();
        Tensor diff = sub(w, Tensor::constant({1}, {3.0}));
        backward(sum_all(mul(diff, diff)));
        opt.step();
    }
    CHECK(dist_to_3() < start);
    CHECK(dist_to_3() < 1.0);
}

TEST_CASE("decoupled weight decay shrinks parameters without gradients") {
    ParamStore ps(1);
    Tensor w = ps.ones("w", {1});
    ps.zero_grad();
    AdamW opt(ps, {.lr = 0.1, .weight_decay = 0.5});
    opt.step();
    CHECK(w.values()[0] == doctest::Approx(1.0 - 0.1 * 0.5));
}

TEST_CASE("moment buffers shape-match their parameters across steps") {
    ParamStore ps(1);
    Tensor a = ps.weight("a", 3, 2);
    Tensor b = ps.vector("b", 5);
    AdamW opt(ps, {.lr = 1e-3});
    for (int i = 0; i < 3; ++i) {
        ps.zero_grad();
        backward(add(sum_all(mul(a, a)), sum_all(mul(b, b))));
        opt.step();
    }
    CHECK(opt.step_count() == 3);
    CHECK(a.values().size() == 6);
    CHECK(b.values().size() == 5);
}
