#pragma once

#include <string>
#include <vector>

#include "vcmr/params.hpp"
#include "vcmr/tensor.hpp"
#include "vcmr/types.hpp"

namespace vcmr {

// Pre-softmax sentinel for masked attention logits; keeps masked weight
// below 1e-30 without producing NaN.
constexpr double kMaskSentinel = -1e9;

// Post-norm transformer encoder block: LN(x + MHA(x)) then LN(y + FFN(y)),
// with learned affine after each normalization and gelu in the feed-forward.
struct TransformerBlock {
    int hidden = 0;
    int heads = 0;
    Tensor wq, bq, wk, bk, wv, bv, wo, bo;
    Tensor ln1_g, ln1_b, ln2_g, ln2_b;
    Tensor ff_w1, ff_b1, ff_w2, ff_b2;

    static TransformerBlock create(ParamStore& ps, const std::string& prefix, int hidden,
                                   int heads, int ff_mult = 4);

    // key_keep masks attention keys; query rows are computed regardless and
    // must be masked by the consumer.
    Tensor apply(const Tensor& x, const std::vector<std::uint8_t>& key_keep) const;
};

struct TransformerStack {
    std::vector<TransformerBlock> layers;
    bool identity = false;  // ablation: pass input through untouched

    static TransformerStack create(ParamStore& ps, const std::string& prefix, int n_layers,
                                   int hidden, int heads, bool identity);
    Tensor apply(const Tensor& x, const std::vector<std::uint8_t>& key_keep) const;
};

// Affine layer-norm helper: layer_norm(x) * gain + bias.
Tensor layer_norm_affine(const Tensor& x, const Tensor& gain, const Tensor& bias);

// Self-attention pooling: softmax(x . w) over kept rows, then the weighted
// row sum. Returns a 1 x H row.
Tensor attention_pool(const Tensor& x, const Tensor& w,
                      const std::vector<std::uint8_t>& keep);

Tensor tensor_from_matrix(const Matrix& m);

}  // namespace vcmr
