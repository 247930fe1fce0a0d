#pragma once

#include "vcmr/nn.hpp"
#include "vcmr/model_config.hpp"

namespace vcmr {

// Raw begin/end score sequences over L_v clips. Masked positions carry the
// sentinel; raw values are kept for disjoint scoring and shared
// normalization.
struct MomentScores {
    Tensor begin;  // L_v
    Tensor end;    // L_v
    std::vector<std::uint8_t> clip_mask;
    int n_clips = 0;
};

struct MlHeadWeights {
    Tensor in_proj_w, in_proj_b;  // D_in -> 2H
    TransformerStack t1;          // at 2H
    TransformerStack t2, t3;      // at 4H
    Tensor conv_begin, conv_end;  // {1, 4H, k}, bias-free

    static MlHeadWeights create(ParamStore& ps, const ModelConfig& cfg, int input_dim);
};

struct VsHeadWeights {
    Tensor in_proj_w, in_proj_b;  // D_in -> H
    TransformerStack t1, t2;      // at H
    Tensor out_w, out_b;          // H -> 1

    static VsHeadWeights create(ParamStore& ps, const ModelConfig& cfg, int input_dim);
};

// Transformer-1 over the projected input (2H); G = [transformer output;
// projection] (4H); transformer-2 over G feeds the begin detector,
// transformer-3 over transformer-2's output feeds the end detector.
MomentScores ml_head(const Tensor& features, const std::vector<std::uint8_t>& clip_mask,
                     const MlHeadWeights& w);

// Two-transformer contextualization to L_v x H, max-pool over unmasked
// clips, linear regression to a scalar similarity.
Tensor vs_head(const Tensor& features, const std::vector<std::uint8_t>& clip_mask,
               const VsHeadWeights& w);

}  // namespace vcmr
