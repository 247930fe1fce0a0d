#pragma once

#include "vcmr/model_config.hpp"
#include "vcmr/nn.hpp"
#include "vcmr/types.hpp"

namespace vcmr {

// Inter-clip contextualized video streams, both L_v x H. Rows past the real
// clip count come from zero-vector inputs plus the temporal and modality
// embeddings; the mask marks real clips.
struct ContextualizedVideo {
    Tensor visual;   // V-hat
    Tensor textual;  // S-hat
    std::vector<std::uint8_t> clip_mask;
    int n_clips = 0;
};

struct ContextualizedQuery {
    Tensor tokens;  // Q-hat, L_q x H
    std::vector<std::uint8_t> token_mask;
    int n_tokens = 0;
};

struct EncoderWeights {
    Tensor visual_proj_w, visual_proj_b;
    Tensor textual_proj_w, textual_proj_b;
    Tensor query_proj_w, query_proj_b;
    Tensor temporal_video;  // L_v x H
    Tensor temporal_query;  // L_q x H
    Tensor modality;        // 2 x H (row 0 visual, row 1 textual)
    TransformerStack mmt;       // joint stack over [visual; textual], length 2*L_v
    TransformerStack query_tr;  // token stack

    static EncoderWeights create(ParamStore& ps, const ModelConfig& cfg);
};

// Projects both clip streams to H, adds temporal + modality embeddings, pads
// to L_v, and contextualizes jointly over the 2*L_v interleaved sequence.
ContextualizedVideo encode_video(const Matrix& visual, const Matrix& textual,
                                 const ModelConfig& cfg, const EncoderWeights& w);

// Per-token projection + temporal embedding (no modality), transformer over
// tokens with padding masked.
ContextualizedQuery encode_query(const Matrix& tokens, const ModelConfig& cfg,
                                 const EncoderWeights& w);

}  // namespace vcmr
