#pragma once

#include "vcmr/encoders.hpp"

namespace vcmr {

struct NetVladWeights {
    Tensor centers;   // K x H cluster centers
    Tensor assign_w;  // H x K soft-assignment projection
    Tensor assign_b;  // K

    static NetVladWeights create(ParamStore& ps, const ModelConfig& cfg);
};

struct FusionHeadWeights {
    Tensor w;  // (K*H) x 2
    Tensor b;  // 2

    static FusionHeadWeights create(ParamStore& ps, const ModelConfig& cfg);
};

// Softmax pair on the 1-simplex: mu_v + mu_t = 1, both >= 0.
struct FusionWeights {
    Tensor mu_v;  // scalar
    Tensor mu_t;  // scalar

    static FusionWeights average();  // fixed 0.5/0.5 ablation
};

// Assignment-weighted residual aggregation over unmasked tokens; each cluster
// block intra-normalized, whole descriptor L2-normalized. Returns rank-1 K*H.
Tensor netvlad_aggregate(const ContextualizedQuery& query, const NetVladWeights& w);

FusionWeights fusion_weights(const Tensor& descriptor, const FusionHeadWeights& w);

// gamma_i = mu_v * visual_i + mu_t * textual_i, exactly.
Tensor fuse(const ContextualizedVideo& video, const FusionWeights& w);

}  // namespace vcmr
