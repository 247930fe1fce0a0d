#include "vcmr/qal.hpp"

#include "vcmr/nn.hpp"

namespace vcmr {

namespace {

void require_any(const std::vector<std::uint8_t>& mask, const char* what) {
    for (auto k : mask)
        if (k) return;
    throw InvalidArgument(std::string("qal: fully masked ") + what);
}

Tensor mask_column(const std::vector<std::uint8_t>& mask) {
    std::vector<double> col(mask.size());
    for (size_t i = 0; i < mask.size(); ++i) col[i] = mask[i] ? 1.0 : 0.0;
    return Tensor::constant({static_cast<int>(mask.size()), 1}, std::move(col));
}

}  // namespace

TrilinearWeights TrilinearWeights::create(ParamStore& ps, const ModelConfig& cfg) {
    TrilinearWeights w;
    w.w1 = ps.vector("qal.w1", cfg.hidden);
    w.w2 = ps.vector("qal.w2", cfg.hidden);
    w.w3 = ps.vector("qal.w3", cfg.hidden);
    return w;
}

Tensor similarity_matrix(const Tensor& gamma, const Tensor& phi, const TrilinearWeights& w,
                         const std::vector<std::uint8_t>& clip_mask,
                         const std::vector<std::uint8_t>& token_mask) {
    const int H = gamma.dim(1);
    Tensor clip_term = matmul(gamma, reshape(w.w1, {H, 1}));   // L_v x 1
    Tensor token_term = matmul(phi, reshape(w.w2, {H, 1}));    // L_q x 1
    Tensor cross = matmul(mul(gamma, reshape(w.w3, {1, H})), transpose(phi));  // L_v x L_q
    Tensor a = add(add(cross, clip_term), transpose(token_term));
    a = masked_fill(a, token_mask, 1, kMaskSentinel);
    return masked_fill(a, clip_mask, 0, kMaskSentinel);
}

Tensor v2q_attend(const Tensor& a, const Tensor& phi,
                  const std::vector<std::uint8_t>& token_mask) {
    require_any(token_mask, "query");
    return matmul(softmax(a, 1), phi);
}

Tensor q2v_attend(const Tensor& a, const Tensor& gamma,
                  const std::vector<std::uint8_t>& clip_mask) {
    require_any(clip_mask, "video");
    Tensor b = reduce_max(a, 1);                         // L_v
    Tensor p = softmax(b, 0);
    return matmul(reshape(p, {1, a.dim(0)}), gamma);     // 1 x H
}

Tensor assemble_qal(const Tensor& gamma, const Tensor& eta, const Tensor& q_v,
                    const std::vector<std::uint8_t>& clip_mask) {
    std::vector<Tensor> parts{gamma, eta, mul(gamma, eta), mul(gamma, q_v)};
    return mul(concat(parts, 1), mask_column(clip_mask));
}

Tensor baseline_couple(const Tensor& gamma, const Tensor& phi, const Tensor& pool_w,
                       const std::vector<std::uint8_t>& token_mask,
                       const std::vector<std::uint8_t>& clip_mask) {
    Tensor pooled = attention_pool(phi, pool_w, token_mask);  // 1 x H
    return mul(mul(gamma, pooled), mask_column(clip_mask));
}

}  // namespace vcmr
