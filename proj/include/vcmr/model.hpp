#pragma once

#include <string>

#include "vcmr/encoders.hpp"
#include "vcmr/heads.hpp"
#include "vcmr/qal.hpp"
#include "vcmr/qdf.hpp"

namespace vcmr {

// Everything derived from one query that is reused across candidate videos.
struct QueryContext {
    ContextualizedQuery query;
    FusionWeights fusion;
    Tensor descriptor;  // NetVLAD aggregate; undefined in average-fusion mode
};

// Full second-stage model: encoders, query-dependent fusion, query-aware
// coupling and the two scoring heads, plus the pooling vectors used by the
// simplified first-stage retriever and the no-QAL ablation.
class Model {
   public:
    Model(ModelConfig cfg, std::uint64_t seed);

    const ModelConfig& config() const { return cfg_; }
    ParamStore& params() { return params_; }
    const ParamStore& params() const { return params_; }

    ContextualizedVideo encode(const Matrix& visual, const Matrix& textual) const {
        return encode_video(visual, textual, cfg_, enc_);
    }
    QueryContext make_query_context(const Matrix& tokens) const;

    // Fused + query-aware per-clip features feeding the heads:
    // L_v x 4H with QAL on, L_v x H with the baseline coupling.
    Tensor clip_features(const ContextualizedVideo& video, const QueryContext& q) const;

    struct VideoOutput {
        MomentScores scores;
        Tensor video_score;  // defined only when the VS head is enabled
    };
    VideoOutput forward_video(const ContextualizedVideo& video, const QueryContext& q) const;

    // Simplified first-stage similarity: cosine of two self-attention pooled
    // query vectors against mean-pooled V-hat / S-hat, combined by the
    // fusion weights.
    double stage1_similarity(const ContextualizedVideo& video, const QueryContext& q) const;

    void save(const std::string& path) const;
    void load(const std::string& path);

    const EncoderWeights& encoder_weights() const { return enc_; }
    const TrilinearWeights& trilinear_weights() const { return qal_; }

   private:
    ModelConfig cfg_;
    ParamStore params_;
    EncoderWeights enc_;
    NetVladWeights vlad_;
    FusionHeadWeights fusion_;
    TrilinearWeights qal_;
    MlHeadWeights ml_;
    VsHeadWeights vs_;
    Tensor stage1_pool_visual_, stage1_pool_textual_;
    Tensor baseline_pool_;
};

}  // namespace vcmr
