#include "vcmr/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <functional>
#include <random>

#include "vcmr/model.hpp"
#include "vcmr/training.hpp"

namespace vcmr {

namespace {

constexpr double kEps = 1e-5;

double err_metric(double analytic, double fd) {
    return std::abs(analytic - fd) / std::max({1.0, std::abs(analytic), std::abs(fd)});
}

using LossBuilder = std::function<Tensor(const std::vector<Tensor>&)>;

struct LeafSpec {
    std::vector<int> shape;
    // 0: standard normal, 1: positive (0.5..1.5), 2: away from zero,
    // 3: well separated (for max)
    int gen = 0;
};

std::vector<double> gen_values(const LeafSpec& spec, std::mt19937_64& rng) {
    int64_t n = 1;
    for (int d : spec.shape) n *= d;
    std::vector<double> v(static_cast<size_t>(n));
    std::normal_distribution<double> normal(0.0, 1.0);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    switch (spec.gen) {
        case 1:
            for (double& x : v) x = 0.5 + unit(rng);
            break;
        case 2:
            for (double& x : v) {
                const double mag = 0.1 + unit(rng);
                x = unit(rng) < 0.5 ? -mag : mag;
            }
            break;
        case 3: {
            for (size_t i = 0; i < v.size(); ++i)
                v[i] = 0.11 * static_cast<double>(i) + 0.01 * normal(rng);
            std::shuffle(v.begin(), v.end(), rng);
            break;
        }
        default:
            for (double& x : v) x = normal(rng);
    }
    return v;
}

// One finite-difference sweep over every coordinate of every leaf.
double fd_sweep(const std::vector<LeafSpec>& specs, const LossBuilder& build,
                std::mt19937_64& rng) {
    std::vector<std::vector<double>> values;
    for (const LeafSpec& s : specs) values.push_back(gen_values(s, rng));

    auto eval = [&](int perturb_leaf, int64_t coord, double delta, std::vector<Tensor>* out_leaves) {
        std::vector<Tensor> leaves;
        for (size_t i = 0; i < specs.size(); ++i) {
            std::vector<double> v = values[i];
            if (static_cast<int>(i) == perturb_leaf) v[static_cast<size_t>(coord)] += delta;
            leaves.push_back(Tensor::parameter(specs[i].shape, std::move(v)));
        }
        Tensor loss = build(leaves);
        if (out_leaves) *out_leaves = leaves;
        return loss;
    };

    std::vector<Tensor> leaves;
    Tensor loss = eval(-1, 0, 0.0, &leaves);
    for (Tensor& l : leaves) l.zero_grad();
    backward(loss);
    std::vector<std::vector<double>> analytic;
    for (const Tensor& l : leaves) analytic.push_back(l.grad());

    double max_err = 0.0;
    for (size_t li = 0; li < specs.size(); ++li) {
        for (int64_t c = 0; c < static_cast<int64_t>(values[li].size()); ++c) {
            const double fp = eval(static_cast<int>(li), c, kEps, nullptr).item();
            const double fm = eval(static_cast<int>(li), c, -kEps, nullptr).item();
            const double fd = (fp - fm) / (2.0 * kEps);
            max_err = std::max(max_err, err_metric(analytic[li][static_cast<size_t>(c)], fd));
        }
    }
    return max_err;
}

// Random projection to a scalar so every output coordinate is exercised.
Tensor project_loss(const Tensor& out, std::mt19937_64& rng) {
    std::normal_distribution<double> normal(0.0, 1.0);
    std::vector<double> w(static_cast<size_t>(out.size()));
    for (double& x : w) x = normal(rng);
    return sum_all(mul(out, Tensor::constant(out.shape(), std::move(w))));
}

struct OpCase {
    std::string name;
    std::vector<LeafSpec> specs;
    std::function<Tensor(const std::vector<Tensor>&, std::mt19937_64&)> build;
};

std::vector<OpCase> op_cases() {
    std::vector<OpCase> cases;
    auto add_case = [&](std::string name, std::vector<LeafSpec> specs,
                        std::function<Tensor(const std::vector<Tensor>&, std::mt19937_64&)> f) {
        cases.push_back({std::move(name), std::move(specs), std::move(f)});
    };

    add_case("add", {{{3, 4}}, {{3, 4}}},
             [](const std::vector<Tensor>& l, std::mt19937_64& r) {
                 return project_loss(add(l[0], l[1]), r);
             });
    add_case("add_broadcast", {{{3, 4}}, {{1, 4}}},
             [](const std::vector<Tensor>& l, std::mt19937_64& r) {
                 return project_loss(add(l[0], l[1]), r);
             });
    add_case("sub", {{{2, 5}}, {{2, 5}}},
             [](const std::vector<Tensor>& l, std::mt19937_64& r) {
                 return project_loss(sub(l[0], l[1]), r);
             });
    add_case("mul", {{{3, 4}}, {{3, 4}}},
             [](const std::vector<Tensor>& l, std::mt19937_64& r) {
                 return project_loss(mul(l[0], l[1]), r);
             });
    add_case("mul_broadcast_scalar", {{{3, 4}}, {{}}},
             [](const std::vector<Tensor>& l, std::mt19937_64& r) {
                 return project_loss(mul(l[0], l[1]), r);
             });
    add_case("div", {{{3, 4}}, {{3, 4}, 1}},
             [](const std::vector<Tensor>& l, std::mt19937_64& r) {
                 return project_loss(divide(l[0], l[1]), r);
             });
    add_case("matmul", {{{2, 3}}, {{3, 4}}},
             [](const std::vector<Tensor>& l, std::mt19937_64& r) {
                 return project_loss(matmul(l[0], l[1]), r);
             });
    add_case("transpose", {{{3, 5}}},
             [](const std::vector<Tensor>& l, std::mt19937_64& r) {
                 return project_loss(transpose(l[0]), r);
             });
    add_case("outer", {{{4}}, {{3}}},
             [](const std::vector<Tensor>& l, std::mt19937_64& r) {
                 return project_loss(outer(l[0], l[1]), r);
             });
    add_case("concat_rows", {{{2, 3}}, {{4, 3}}},
             [](const std::vector<Tensor>& l, std::mt19937_64& r) {
                 std::vector<Tensor> xs{l[0], l[1]};
                 return project_loss(concat(xs, 0), r);
             });
    add_case("concat_cols", {{{3, 2}}, {{3, 4}}},
             [](const std::vector<Tensor>& l, std::mt19937_64& r) {
                 std::vector<Tensor> xs{l[0], l[1]};
                 return project_loss(concat(xs, 1), r);
             });
    add_case("concat_vec", {{{4}}, {{3}}},
             [](const std::vector<Tensor>& l, std::mt19937_64& r) {
                 std::vector<Tensor> xs{l[0], l[1]};
                 return project_loss(concat(xs, 0), r);
             });
    add_case("reshape", {{{3, 4}}},
             [](const std::vector<Tensor>& l, std::mt19937_64& r) {
                 return project_loss(reshape(l[0], {4, 3}), r);
             });
    add_case("slice_rows", {{{5, 3}}},
             [](const std::vector<Tensor>& l, std::mt19937_64& r) {
                 return project_loss(slice_rows(l[0], 1, 3), r);
             });
    add_case("slice_cols", {{{3, 6}}},
             [](const std::vector<Tensor>& l, std::mt19937_64& r) {
                 return project_loss(slice_cols(l[0], 2, 3), r);
             });
    add_case("embedding_lookup", {{{5, 3}}},
             [](const std::vector<Tensor>& l, std::mt19937_64& r) {
                 // repeated index exercises gradient accumulation
                 return project_loss(gather_rows(l[0], {0, 2, 2, 4}), r);
             });
    add_case("element_at", {{{3, 3}}},
             [](const std::vector<Tensor>& l, std::mt19937_64& r) {
                 return project_loss(element_at(l[0], 4), r);
             });
    add_case("softmax_rows", {{{3, 5}}},
             [](const std::vector<Tensor>& l, std::mt19937_64& r) {
                 return project_loss(softmax(l[0], 1), r);
             });
    add_case("softmax_cols", {{{3, 5}}},
             [](const std::vector<Tensor>& l, std::mt19937_64& r) {
                 return project_loss(softmax(l[0], 0), r);
             });
    add_case("log", {{{3, 4}, 1}},
             [](const std::vector<Tensor>& l, std::mt19937_64& r) {
                 return project_loss(log(l[0]), r);
             });
    add_case("exp", {{{3, 4}}},
             [](const std::vector<Tensor>& l, std::mt19937_64& r) {
                 return project_loss(exp(l[0]), r);
             });
    add_case("sqrt", {{{3, 4}, 1}},
             [](const std::vector<Tensor>& l, std::mt19937_64& r) {
                 return project_loss(sqrt(l[0]), r);
             });
    add_case("relu", {{{3, 4}, 2}},
             [](const std::vector<Tensor>& l, std::mt19937_64& r) {
                 return project_loss(relu(l[0]), r);
             });
    add_case("gelu", {{{3, 4}}},
             [](const std::vector<Tensor>& l, std::mt19937_64& r) {
                 return project_loss(gelu(l[0]), r);
             });
    add_case("layernorm", {{{3, 6}}},
             [](const std::vector<Tensor>& l, std::mt19937_64& r) {
                 return project_loss(layer_norm(l[0]), r);
             });
    add_case("max_rows", {{{3, 5}, 3}},
             [](const std::vector<Tensor>& l, std::mt19937_64& r) {
                 return project_loss(reduce_max(l[0], 1), r);
             });
    add_case("max_cols", {{{3, 5}, 3}},
             [](const std::vector<Tensor>& l, std::mt19937_64& r) {
                 return project_loss(reduce_max(l[0], 0), r);
             });
    add_case("sum", {{{3, 5}}},
             [](const std::vector<Tensor>& l, std::mt19937_64& r) {
                 return project_loss(reduce_sum(l[0], 1), r);
             });
    add_case("mean", {{{3, 5}}},
             [](const std::vector<Tensor>& l, std::mt19937_64& r) {
                 return project_loss(reduce_mean(l[0], 0), r);
             });
    add_case("sum_all", {{{3, 5}}},
             [](const std::vector<Tensor>& l, std::mt19937_64&) { return sum_all(l[0]); });
    add_case("scale", {{{3, 5}}},
             [](const std::vector<Tensor>& l, std::mt19937_64& r) {
                 return project_loss(scale(l[0], -1.7), r);
             });
    add_case("masked_fill", {{{4, 5}}},
             [](const std::vector<Tensor>& l, std::mt19937_64& r) {
                 std::vector<std::uint8_t> keep{1, 0, 1, 1, 0};
                 return project_loss(softmax(masked_fill(l[0], keep, 1, -1e9), 1), r);
             });
    add_case("conv1d", {{{6, 3}}, {{2, 3, 3}}},
             [](const std::vector<Tensor>& l, std::mt19937_64& r) {
                 return project_loss(conv1d_same(l[0], l[1]), r);
             });
    add_case("conv1d_bias", {{{6, 3}}, {{2, 3, 3}}, {{2}}},
             [](const std::vector<Tensor>& l, std::mt19937_64& r) {
                 return project_loss(conv1d_same(l[0], l[1], l[2]), r);
             });
    add_case("linear", {{{4, 3}}, {{3, 5}}, {{5}}},
             [](const std::vector<Tensor>& l, std::mt19937_64& r) {
                 return project_loss(linear(l[0], l[1], l[2]), r);
             });
    add_case("cross_entropy_index", {{{7}}},
             [](const std::vector<Tensor>& l, std::mt19937_64&) {
                 return cross_entropy_with_index(l[0], 3);
             });
    return cases;
}

}  // namespace

std::vector<GradCheckResult> run_op_gradchecks(int seeds, double tol) {
    PrecisionGuard p64(Precision::f64);
    std::vector<GradCheckResult> results;
    for (const OpCase& c : op_cases()) {
        double max_err = 0.0;
        for (int s = 0; s < seeds; ++s) {
            std::mt19937_64 rng(0x9E3779B9u + 977u * static_cast<std::uint64_t>(s));
            LossBuilder build = [&](const std::vector<Tensor>& leaves) {
                std::mt19937_64 wrng(0xB5297A4Du + static_cast<std::uint64_t>(s));
                return c.build(leaves, wrng);
            };
            max_err = std::max(max_err, fd_sweep(c.specs, build, rng));
        }
        results.push_back({c.name, max_err, max_err < tol});
    }
    return results;
}

GradCheckResult run_composite_gradcheck(int seeds, double tol) {
    PrecisionGuard p64(Precision::f64);
    double max_err = 0.0;
    for (int s = 0; s < seeds; ++s) {
        ModelConfig cfg;
        cfg.hidden = 4;
        cfg.heads = 2;
        cfg.layers = 1;
        cfg.max_clips = 4;
        cfg.max_tokens = 3;
        cfg.dim_visual = 6;
        cfg.dim_textual = 5;
        cfg.clusters = 2;
        cfg.conv_kernel = 3;
        cfg.vs_head = true;
        Model model(cfg, 1000 + static_cast<std::uint64_t>(s));

        std::mt19937_64 rng(2000 + static_cast<std::uint64_t>(s));
        std::normal_distribution<double> normal(0.0, 1.0);
        auto rand_matrix = [&](int r, int c) {
            Matrix m(r, c);
            for (double& v : m.data) v = normal(rng);
            return m;
        };
        const Matrix pos_vis = rand_matrix(3, cfg.dim_visual);
        const Matrix pos_txt = rand_matrix(3, cfg.dim_textual);
        const Matrix neg_vis = rand_matrix(4, cfg.dim_visual);
        const Matrix neg_txt = rand_matrix(4, cfg.dim_textual);
        const Matrix tokens = rand_matrix(2, cfg.dim_textual);
        const int b_gt = 1, e_gt = 2;

        auto build = [&]() {
            QueryContext qc = model.make_query_context(tokens);
            Model::VideoOutput pos = model.forward_video(model.encode(pos_vis, pos_txt), qc);
            Model::VideoOutput neg = model.forward_video(model.encode(neg_vis, neg_txt), qc);
            std::vector<const MomentScores*> ms{&pos.scores, &neg.scores};
            Tensor loss = scale(shared_softmax_loss(ms, b_gt, e_gt), 1e-2);
            std::vector<Tensor> vs{pos.video_score, neg.video_score};
            return add(loss, scale(video_ce_loss(vs), 5e-2));
        };

        model.params().zero_grad();
        backward(build());
        std::vector<std::vector<double>> analytic;
        for (const Parameter& p : model.params().all()) analytic.push_back(p.tensor.grad());

        for (size_t pi = 0; pi < model.params().all().size(); ++pi) {
            auto& vals = model.params().all()[pi].tensor.mutable_values();
            for (size_t ci = 0; ci < vals.size(); ++ci) {
                const double orig = vals[ci];
                vals[ci] = orig + kEps;
                const double fp = build().item();
                vals[ci] = orig - kEps;
                const double fm = build().item();
                vals[ci] = orig;
                const double fd = (fp - fm) / (2.0 * kEps);
                max_err = std::max(max_err, err_metric(analytic[pi][ci], fd));
            }
        }
    }
    return {"composite_pipeline_loss", max_err, max_err < tol};
}

std::string gradcheck_table(const std::vector<GradCheckResult>& results) {
    std::string out;
    char buf[128];
    std::snprintf(buf, sizeof(buf), "%-24s %-14s %s\n", "op", "max_rel_err", "status");
    out += buf;
    for (const GradCheckResult& r : results) {
        std::snprintf(buf, sizeof(buf), "%-24s %-14.3e %s\n", r.name.c_str(), r.max_err,
                      r.pass ? "pass" : "FAIL");
        out += buf;
    }
    return out;
}

}  // namespace vcmr
