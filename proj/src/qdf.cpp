#include "vcmr/qdf.hpp"

namespace vcmr {

NetVladWeights NetVladWeights::create(ParamStore& ps, const ModelConfig& cfg) {
    NetVladWeights w;
    w.centers = ps.embedding("qdf.vlad.centers", cfg.clusters, cfg.hidden);
    w.assign_w = ps.weight("qdf.vlad.assign.w", cfg.hidden, cfg.clusters);
    w.assign_b = ps.zeros("qdf.vlad.assign.b", {cfg.clusters});
    return w;
}

FusionHeadWeights FusionHeadWeights::create(ParamStore& ps, const ModelConfig& cfg) {
    FusionHeadWeights w;
    w.w = ps.weight("qdf.fusion.w", cfg.clusters * cfg.hidden, 2);
    w.b = ps.zeros("qdf.fusion.b", {2});
    return w;
}

FusionWeights FusionWeights::average() {
    return {Tensor::scalar(0.5), Tensor::scalar(0.5)};
}

Tensor netvlad_aggregate(const ContextualizedQuery& query, const NetVladWeights& w) {
    if (query.n_tokens < 1) throw InvalidArgument("netvlad: empty query");
    const int K = w.centers.dim(0);
    const int L = query.tokens.dim(0);
    constexpr double kNormEps = 1e-12;

    // Soft assignments per token, masked tokens zeroed out entirely.
    Tensor logits = linear(query.tokens, w.assign_w, w.assign_b);  // L x K
    Tensor assign = softmax(logits, 1);
    std::vector<double> maskcol(static_cast<size_t>(L));
    for (int i = 0; i < L; ++i) maskcol[static_cast<size_t>(i)] = query.token_mask[static_cast<size_t>(i)] ? 1.0 : 0.0;
    assign = mul(assign, Tensor::constant({L, 1}, maskcol));

    // Residual aggregation: block_k = sum_j a_jk * (phi_j - c_k)
    //                              = (A^T Phi)_k - colsum(A)_k * c_k.
    Tensor agg = matmul(transpose(assign), query.tokens);           // K x H
    Tensor colsum = reduce_sum(assign, 0);                          // K
    Tensor blocks = sub(agg, mul(w.centers, reshape(colsum, {K, 1})));

    // Intra-normalize each cluster block, then L2-normalize the flattened
    // descriptor. Epsilon keeps all-zero blocks at zero.
    Tensor row_norm = sqrt(add(reduce_sum(mul(blocks, blocks), 1), Tensor::scalar(kNormEps)));
    Tensor intra = divide(blocks, reshape(row_norm, {K, 1}));
    Tensor flat = reshape(intra, {K * query.tokens.dim(1)});
    Tensor norm = sqrt(add(sum_all(mul(flat, flat)), Tensor::scalar(kNormEps)));
    return divide(flat, norm);
}

FusionWeights fusion_weights(const Tensor& descriptor, const FusionHeadWeights& w) {
    Tensor logits = linear(reshape(descriptor, {1, descriptor.dim(0)}), w.w, w.b);  // 1 x 2
    Tensor p = softmax(reshape(logits, {2}), 0);
    return {element_at(p, 0), element_at(p, 1)};
}

Tensor fuse(const ContextualizedVideo& video, const FusionWeights& w) {
    return add(mul(video.visual, w.mu_v), mul(video.textual, w.mu_t));
}

}  // namespace vcmr
