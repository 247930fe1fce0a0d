#include "vcmr/nn.hpp"

#include <cmath>

namespace vcmr {

TransformerBlock TransformerBlock::create(ParamStore& ps, const std::string& prefix, int hidden,
                                          int heads, int ff_mult) {
    if (hidden % heads != 0)
        throw InvalidArgument("transformer: hidden " + std::to_string(hidden) +
                              " not divisible by heads " + std::to_string(heads));
    TransformerBlock b;
    b.hidden = hidden;
    b.heads = heads;
    b.wq = ps.weight(prefix + ".attn.wq", hidden, hidden);
    b.bq = ps.zeros(prefix + ".attn.bq", {hidden});
    b.wk = ps.weight(prefix + ".attn.wk", hidden, hidden);
    b.bk = ps.zeros(prefix + ".attn.bk", {hidden});
    b.wv = ps.weight(prefix + ".attn.wv", hidden, hidden);
    b.bv = ps.zeros(prefix + ".attn.bv", {hidden});
    b.wo = ps.weight(prefix + ".attn.wo", hidden, hidden);
    b.bo = ps.zeros(prefix + ".attn.bo", {hidden});
    b.ln1_g = ps.ones(prefix + ".ln1.g", {hidden});
    b.ln1_b = ps.zeros(prefix + ".ln1.b", {hidden});
    b.ln2_g = ps.ones(prefix + ".ln2.g", {hidden});
    b.ln2_b = ps.zeros(prefix + ".ln2.b", {hidden});
    const int ff = hidden * ff_mult;
    b.ff_w1 = ps.weight(prefix + ".ffn.w1", hidden, ff);
    b.ff_b1 = ps.zeros(prefix + ".ffn.b1", {ff});
    b.ff_w2 = ps.weight(prefix + ".ffn.w2", ff, hidden);
    b.ff_b2 = ps.zeros(prefix + ".ffn.b2", {hidden});
    return b;
}

Tensor TransformerBlock::apply(const Tensor& x, const std::vector<std::uint8_t>& key_keep) const {
    const int dh = hidden / heads;
    Tensor q = linear(x, wq, bq);
    Tensor k = linear(x, wk, bk);
    Tensor v = linear(x, wv, bv);
    std::vector<Tensor> head_out;
    for (int h = 0; h < heads; ++h) {
        Tensor qh = slice_cols(q, h * dh, dh);
        Tensor kh = slice_cols(k, h * dh, dh);
        Tensor vh = slice_cols(v, h * dh, dh);
        Tensor scores = scale(matmul(qh, transpose(kh)), 1.0 / std::sqrt(static_cast<double>(dh)));
        scores = masked_fill(scores, key_keep, 1, kMaskSentinel);
        head_out.push_back(matmul(softmax(scores, 1), vh));
    }
    Tensor attn = linear(concat(head_out, 1), wo, bo);
    Tensor h1 = layer_norm_affine(add(x, attn), ln1_g, ln1_b);
    Tensor ff = linear(gelu(linear(h1, ff_w1, ff_b1)), ff_w2, ff_b2);
    return layer_norm_affine(add(h1, ff), ln2_g, ln2_b);
}

TransformerStack TransformerStack::create(ParamStore& ps, const std::string& prefix, int n_layers,
                                          int hidden, int heads, bool identity) {
    TransformerStack s;
    s.identity = identity;
    for (int i = 0; i < n_layers; ++i)
        s.layers.push_back(
            TransformerBlock::create(ps, prefix + ".layer" + std::to_string(i), hidden, heads));
    return s;
}

Tensor TransformerStack::apply(const Tensor& x, const std::vector<std::uint8_t>& key_keep) const {
    if (identity) return x;
    Tensor y = x;
    for (const TransformerBlock& b : layers) y = b.apply(y, key_keep);
    return y;
}

Tensor layer_norm_affine(const Tensor& x, const Tensor& gain, const Tensor& bias) {
    return add(mul(layer_norm(x), gain), bias);
}

Tensor attention_pool(const Tensor& x, const Tensor& w,
                      const std::vector<std::uint8_t>& keep) {
    bool any = false;
    for (auto k : keep) any = any || k;
    if (!any) throw InvalidArgument("attention_pool: all rows masked");
    Tensor logits = matmul(x, reshape(w, {w.dim(0), 1}));            // L x 1
    logits = masked_fill(reshape(logits, {x.dim(0)}), keep, 0, kMaskSentinel);
    Tensor alpha = softmax(logits, 0);
    return matmul(reshape(alpha, {1, x.dim(0)}), x);                 // 1 x H
}

Tensor tensor_from_matrix(const Matrix& m) {
    return Tensor::constant({m.rows, m.cols}, m.data);
}

}  // namespace vcmr
