#include "vcmr/heads.hpp"

namespace vcmr {

MlHeadWeights MlHeadWeights::create(ParamStore& ps, const ModelConfig& cfg, int input_dim) {
    MlHeadWeights w;
    const int h2 = 2 * cfg.hidden;
    w.in_proj_w = ps.weight("ml.in_proj.w", input_dim, h2);
    w.in_proj_b = ps.zeros("ml.in_proj.b", {h2});
    w.t1 = TransformerStack::create(ps, "ml.t1", cfg.layers, h2, cfg.heads,
                                    cfg.identity_transformers);
    w.t2 = TransformerStack::create(ps, "ml.t2", cfg.layers, 2 * h2, cfg.heads,
                                    cfg.identity_transformers);
    w.t3 = TransformerStack::create(ps, "ml.t3", cfg.layers, 2 * h2, cfg.heads,
                                    cfg.identity_transformers);
    w.conv_begin = ps.conv_weight("ml.conv_begin.w", 1, 2 * h2, cfg.conv_kernel);
    w.conv_end = ps.conv_weight("ml.conv_end.w", 1, 2 * h2, cfg.conv_kernel);
    return w;
}

VsHeadWeights VsHeadWeights::create(ParamStore& ps, const ModelConfig& cfg, int input_dim) {
    VsHeadWeights w;
    w.in_proj_w = ps.weight("vs.in_proj.w", input_dim, cfg.hidden);
    w.in_proj_b = ps.zeros("vs.in_proj.b", {cfg.hidden});
    w.t1 = TransformerStack::create(ps, "vs.t1", cfg.layers, cfg.hidden, cfg.heads,
                                    cfg.identity_transformers);
    w.t2 = TransformerStack::create(ps, "vs.t2", cfg.layers, cfg.hidden, cfg.heads,
                                    cfg.identity_transformers);
    w.out_w = ps.weight("vs.out.w", cfg.hidden, 1);
    w.out_b = ps.zeros("vs.out.b", {1});
    return w;
}

MomentScores ml_head(const Tensor& features, const std::vector<std::uint8_t>& clip_mask,
                     const MlHeadWeights& w) {
    const int L = features.dim(0);
    Tensor proj = linear(features, w.in_proj_w, w.in_proj_b);   // L x 2H
    Tensor ctx = w.t1.apply(proj, clip_mask);
    std::vector<Tensor> gparts{ctx, proj};
    Tensor g = concat(gparts, 1);                               // L x 4H
    Tensor g2 = w.t2.apply(g, clip_mask);
    Tensor b = reshape(conv1d_same(g2, w.conv_begin), {L});
    Tensor g3 = w.t3.apply(g2, clip_mask);
    Tensor e = reshape(conv1d_same(g3, w.conv_end), {L});

    MomentScores out;
    out.begin = masked_fill(b, clip_mask, 0, kMaskSentinel);
    out.end = masked_fill(e, clip_mask, 0, kMaskSentinel);
    out.clip_mask = clip_mask;
    for (auto k : clip_mask) out.n_clips += k ? 1 : 0;
    return out;
}

Tensor vs_head(const Tensor& features, const std::vector<std::uint8_t>& clip_mask,
               const VsHeadWeights& w) {
    bool any = false;
    for (auto k : clip_mask) any = any || k;
    if (!any) throw InvalidArgument("vs_head: fully masked video");

    Tensor r = w.t2.apply(w.t1.apply(linear(features, w.in_proj_w, w.in_proj_b), clip_mask),
                          clip_mask);                            // L x H
    // Max-pool over unmasked clips only.
    Tensor masked = masked_fill(r, clip_mask, 0, kMaskSentinel);
    Tensor pooled = reduce_max(masked, 0);                       // H
    return reshape(linear(reshape(pooled, {1, r.dim(1)}), w.out_w, w.out_b), {});
}

}  // namespace vcmr
