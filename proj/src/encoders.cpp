#include "vcmr/encoders.hpp"

namespace vcmr {

EncoderWeights EncoderWeights::create(ParamStore& ps, const ModelConfig& cfg) {
    EncoderWeights w;
    w.visual_proj_w = ps.weight("enc.visual_proj.w", cfg.dim_visual, cfg.hidden);
    w.visual_proj_b = ps.zeros("enc.visual_proj.b", {cfg.hidden});
    w.textual_proj_w = ps.weight("enc.textual_proj.w", cfg.dim_textual, cfg.hidden);
    w.textual_proj_b = ps.zeros("enc.textual_proj.b", {cfg.hidden});
    w.query_proj_w = ps.weight("enc.query_proj.w", cfg.dim_textual, cfg.hidden);
    w.query_proj_b = ps.zeros("enc.query_proj.b", {cfg.hidden});
    w.temporal_video = ps.embedding("enc.temporal_video", cfg.max_clips, cfg.hidden);
    w.temporal_query = ps.embedding("enc.temporal_query", cfg.max_tokens, cfg.hidden);
    w.modality = ps.embedding("enc.modality", 2, cfg.hidden);
    w.mmt = TransformerStack::create(ps, "enc.mmt", cfg.layers, cfg.hidden, cfg.heads,
                                     cfg.identity_transformers);
    w.query_tr = TransformerStack::create(ps, "enc.qtr", cfg.layers, cfg.hidden, cfg.heads,
                                          cfg.identity_transformers);
    return w;
}

namespace {

// Project n real rows, pad with zeros to `total`, add the temporal table and
// one modality row.
Tensor embed_stream(const Matrix& feats, const Tensor& proj_w, const Tensor& proj_b, int total,
                    const Tensor& temporal, const Tensor& modality_row) {
    Tensor x = linear(tensor_from_matrix(feats), proj_w, proj_b);  // n x H
    if (feats.rows < total) {
        Tensor pad = Tensor::zeros({total - feats.rows, proj_w.dim(1)});
        std::vector<Tensor> parts{x, pad};
        x = concat(parts, 0);
    }
    return add(add(x, temporal), modality_row);
}

}  // namespace

ContextualizedVideo encode_video(const Matrix& visual, const Matrix& textual,
                                 const ModelConfig& cfg, const EncoderWeights& w) {
    const int n = visual.rows;
    if (n > cfg.max_clips)
        throw InvalidArgument("encode_video: " + std::to_string(n) + " clips exceeds max_clips " +
                              std::to_string(cfg.max_clips));
    if (textual.rows != n)
        throw ShapeError("encode_video: visual/textual clip counts differ");
    if (visual.cols != cfg.dim_visual)
        throw ShapeError("encode_video: visual dim " + std::to_string(visual.cols) +
                         " != configured " + std::to_string(cfg.dim_visual));
    if (textual.cols != cfg.dim_textual)
        throw ShapeError("encode_video: textual dim " + std::to_string(textual.cols) +
                         " != configured " + std::to_string(cfg.dim_textual));

    const int L = cfg.max_clips;
    Tensor mod_vis = slice_rows(w.modality, 0, 1);
    Tensor mod_txt = slice_rows(w.modality, 1, 1);
    Tensor vis = embed_stream(visual, w.visual_proj_w, w.visual_proj_b, L, w.temporal_video, mod_vis);
    Tensor txt = embed_stream(textual, w.textual_proj_w, w.textual_proj_b, L, w.temporal_video, mod_txt);

    std::vector<std::uint8_t> clip_mask(static_cast<size_t>(L), 0);
    for (int i = 0; i < n; ++i) clip_mask[static_cast<size_t>(i)] = 1;

    // Joint MMT pass over the concatenated streams; padding masked in both.
    std::vector<Tensor> streams{vis, txt};
    Tensor joint = concat(streams, 0);
    std::vector<std::uint8_t> joint_mask = clip_mask;
    joint_mask.insert(joint_mask.end(), clip_mask.begin(), clip_mask.end());
    joint = w.mmt.apply(joint, joint_mask);

    ContextualizedVideo out;
    out.visual = slice_rows(joint, 0, L);
    out.textual = slice_rows(joint, L, L);
    out.clip_mask = std::move(clip_mask);
    out.n_clips = n;
    return out;
}

ContextualizedQuery encode_query(const Matrix& tokens, const ModelConfig& cfg,
                                 const EncoderWeights& w) {
    const int m = tokens.rows;
    if (m > cfg.max_tokens)
        throw InvalidArgument("encode_query: " + std::to_string(m) + " tokens exceeds max_tokens " +
                              std::to_string(cfg.max_tokens));
    if (m < 1) throw InvalidArgument("encode_query: empty query");
    if (tokens.cols != cfg.dim_textual)
        throw ShapeError("encode_query: token dim " + std::to_string(tokens.cols) +
                         " != configured " + std::to_string(cfg.dim_textual));

    const int L = cfg.max_tokens;
    Tensor x = linear(tensor_from_matrix(tokens), w.query_proj_w, w.query_proj_b);
    if (m < L) {
        Tensor pad = Tensor::zeros({L - m, cfg.hidden});
        std::vector<Tensor> parts{x, pad};
        x = concat(parts, 0);
    }
    x = add(x, w.temporal_query);

    std::vector<std::uint8_t> token_mask(static_cast<size_t>(L), 0);
    for (int i = 0; i < m; ++i) token_mask[static_cast<size_t>(i)] = 1;

    ContextualizedQuery out;
    out.tokens = w.query_tr.apply(x, token_mask);
    out.token_mask = std::move(token_mask);
    out.n_tokens = m;
    return out;
}

}  // namespace vcmr
