#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "vcmr/heads.hpp"

using namespace vcmr;

// exact-math unit tests run at 64-bit; f32-specific cases set their own guard
static PrecisionGuard g_test_precision(Precision::f64);

namespace {

ModelConfig cfg_of(bool identity) {
    ModelConfig cfg;
    cfg.hidden = 4;
    cfg.heads = 2;
    cfg.layers = 1;
    cfg.max_clips = 8;
    cfg.max_tokens = 4;
    cfg.dim_visual = 6;
    cfg.dim_textual = 5;
    cfg.clusters = 2;
    cfg.conv_kernel = 5;
    cfg.identity_transformers = identity;
    return cfg;
}

Tensor rand_features(int L, int width, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> g(0.0, 1.0);
    std::vector<double> v(static_cast<size_t>(L) * width);
    for (double& x : v) x = g(rng);
    return Tensor::constant({L, width}, std::move(v));
}

std::vector<std::uint8_t> all_ones(int n) {
    return std::vector<std::uint8_t>(static_cast<size_t>(n), 1);
}

}  // namespace

TEST_CASE("ml head outputs begin and end of length L") {
    ModelConfig cfg = cfg_of(false);
    ParamStore ps(1);
    MlHeadWeights w = MlHeadWeights::create(ps, cfg, 4 * cfg.hidden);
    const int L = 6;
    auto ms = ml_head(rand_features(L, 16, 2), all_ones(L), w);
    CHECK(ms.begin.shape() == std::vector<int>{L});
    CHECK(ms.end.shape() == std::vector<int>{L});
    CHECK(ms.n_clips == L);
}

TEST_CASE("identical clip features give position-invariant interior begin scores") {
    PrecisionGuard p64(Precision::f64);
    ModelConfig cfg = cfg_of(false);
    ParamStore ps(5);
    MlHeadWeights w = MlHeadWeights::create(ps, cfg, 4 * cfg.hidden);
    const int L = 8;
    std::mt19937_64 rng(7);
    std::normal_distribution<double> g(0.0, 1.0);
    std::vector<double> row(16);
    for (double& x : row) x = g(rng);
    std::vector<double> flat;
    for (int i = 0; i < L; ++i) flat.insert(flat.end(), row.begin(), row.end());
    auto ms = ml_head(Tensor::constant({L, 16}, flat), all_ones(L), w);
    // kernel 5: interior = positions with full kernel support [2, L-3]
    for (int i = 3; i <= L - 3; ++i)
        CHECK(ms.begin.at(i) == doctest::Approx(ms.begin.at(2)).epsilon(1e-5));
}

TEST_CASE("masked tail clips carry the sentinel and near-zero probability") {
    ModelConfig cfg = cfg_of(false);
    ParamStore ps(3);
    MlHeadWeights w = MlHeadWeights::create(ps, cfg, 4 * cfg.hidden);
    const int L = 6;
    std::vector<std::uint8_t> mask{1, 1, 1, 1, 0, 0};
    auto ms = ml_head(rand_features(L, 16, 9), mask, w);
    CHECK(ms.begin.at(4) == kMaskSentinel);
    CHECK(ms.begin.at(5) == kMaskSentinel);
    CHECK(ms.end.at(4) == kMaskSentinel);
    Tensor p = softmax(ms.begin, 0);
    CHECK(p.at(4) < 1e-30);
    CHECK(p.at(5) < 1e-30);
}

TEST_CASE("scores depend on the head input features") {
    ModelConfig cfg = cfg_of(false);
    ParamStore ps(11);
    MlHeadWeights w = MlHeadWeights::create(ps, cfg, 4 * cfg.hidden);
    const int L = 5;
    auto a = ml_head(rand_features(L, 16, 100), all_ones(L), w);
    auto b = ml_head(rand_features(L, 16, 200), all_ones(L), w);
    bool any_diff = false;
    for (int i = 0; i < L; ++i) any_diff = any_diff || a.begin.at(i) != b.begin.at(i);
    CHECK(any_diff);
}

TEST_CASE("with identity transformers a clip perturbs begin scores only within conv reach") {
    PrecisionGuard p64(Precision::f64);
    ModelConfig cfg = cfg_of(true);
    ParamStore ps(13);
    MlHeadWeights w = MlHeadWeights::create(ps, cfg, 4 * cfg.hidden);
    const int L = 8, j = 4;
    Tensor base_feats = rand_features(L, 16, 17);
    auto base = ml_head(base_feats, all_ones(L), w);

    std::vector<double> perturbed = base_feats.values();
    for (int c = 0; c < 16; ++c) perturbed[static_cast<size_t>(j * 16 + c)] += 2.5;
    auto moved = ml_head(Tensor::constant({L, 16}, perturbed), all_ones(L), w);

    for (int i = 0; i < L; ++i) {
        const bool in_reach = std::abs(i - j) <= 2;
        const bool changed =
            std::abs(base.begin.at(i) - moved.begin.at(i)) > 1e-12;
        if (in_reach)
            CHECK(changed);
        else
            CHECK(!changed);
    }
}

TEST_CASE("vs head pools a single clip to its own row") {
    ModelConfig cfg = cfg_of(true);  // identity so R = projected input
    ParamStore ps(19);
    VsHeadWeights w = VsHeadWeights::create(ps, cfg, 4 * cfg.hidden);
    Tensor feats = rand_features(1, 16, 23);
    Tensor score = vs_head(feats, all_ones(1), w);
    // by hand: projected row, then linear regression
    std::vector<double> proj(static_cast<size_t>(cfg.hidden), 0.0);
    for (int j = 0; j < cfg.hidden; ++j) {
        proj[static_cast<size_t>(j)] = w.in_proj_b.at(j);
        for (int i = 0; i < 16; ++i)
            proj[static_cast<size_t>(j)] += feats.at(i) * w.in_proj_w.at(i * cfg.hidden + j);
    }
    double want = w.out_b.at(0);
    for (int j = 0; j < cfg.hidden; ++j) want += proj[static_cast<size_t>(j)] * w.out_w.at(j);
    CHECK(score.item() == doctest::Approx(want).epsilon(1e-9));
}

TEST_CASE("duplicating clips leaves the max-pool score unchanged") {
    ModelConfig cfg = cfg_of(true);
    ParamStore ps(29);
    VsHeadWeights w = VsHeadWeights::create(ps, cfg, 4 * cfg.hidden);
    Tensor feats = rand_features(3, 16, 31);
    std::vector<double> doubled = feats.values();
    doubled.insert(doubled.end(), feats.values().begin(), feats.values().end());
    Tensor score1 = vs_head(feats, all_ones(3), w);
    Tensor score2 = vs_head(Tensor::constant({6, 16}, doubled), all_ones(6), w);
    CHECK(score1.item() == doctest::Approx(score2.item()).epsilon(1e-12));
}

TEST_CASE("vs head pooled vector equals brute-force componentwise max") {
    ModelConfig cfg = cfg_of(true);
    ParamStore ps(37);
    VsHeadWeights w = VsHeadWeights::create(ps, cfg, 4 * cfg.hidden);
    Tensor feats = rand_features(3, 16, 41);

    // brute force through the identity stacks: R = proj(feats)
    Matrix r(3, cfg.hidden);
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < cfg.hidden; ++j) {
            r.at(i, j) = w.in_proj_b.at(j);
            for (int c = 0; c < 16; ++c)
                r.at(i, j) += feats.at(i * 16 + c) * w.in_proj_w.at(c * cfg.hidden + j);
        }
    double want = w.out_b.at(0);
    for (int j = 0; j < cfg.hidden; ++j) {
        double mx = r.at(0, j);
        for (int i = 1; i < 3; ++i) mx = std::max(mx, r.at(i, j));
        want += mx * w.out_w.at(j);
    }
    CHECK(vs_head(feats, all_ones(3), w).item() == doctest::Approx(want).epsilon(1e-9));
}

TEST_CASE("vs head is permutation invariant with identity transformers") {
    ModelConfig cfg = cfg_of(true);
    ParamStore ps(43);
    VsHeadWeights w = VsHeadWeights::create(ps, cfg, 4 * cfg.hidden);
    Tensor feats = rand_features(4, 16, 47);
    std::vector<double> perm;
    for (int i : {2, 0, 3, 1})
        perm.insert(perm.end(), feats.values().begin() + i * 16,
                    feats.values().begin() + (i + 1) * 16);
    CHECK(vs_head(feats, all_ones(4), w).item() ==
          doctest::Approx(vs_head(Tensor::constant({4, 16}, perm), all_ones(4), w).item())
              .epsilon(1e-12));
}

TEST_CASE("vs head rejects a fully masked video") {
    ModelConfig cfg = cfg_of(false);
    ParamStore ps(53);
    VsHeadWeights w = VsHeadWeights::create(ps, cfg, 4 * cfg.hidden);
    CHECK_THROWS_AS(vs_head(rand_features(2, 16, 59), {0, 0}, w), InvalidArgument);
}
