#pragma once

#include "vcmr/encoders.hpp"

namespace vcmr {

struct TrilinearWeights {
    Tensor w1, w2, w3;  // each H

    static TrilinearWeights create(ParamStore& ps, const ModelConfig& cfg);
};

// a_ij = w1.gamma_i + w2.phi_j + w3.(gamma_i * phi_j), with masked clip rows
// and token columns set to the sentinel before any softmax.
Tensor similarity_matrix(const Tensor& gamma, const Tensor& phi, const TrilinearWeights& w,
                         const std::vector<std::uint8_t>& clip_mask,
                         const std::vector<std::uint8_t>& token_mask);

// Row-softmax over tokens, then weighted token sum: eta, L_v x H.
Tensor v2q_attend(const Tensor& a, const Tensor& phi,
                  const std::vector<std::uint8_t>& token_mask);

// Per-clip max over tokens, softmax over clips, weighted clip sum: q_v, 1 x H.
Tensor q2v_attend(const Tensor& a, const Tensor& gamma,
                  const std::vector<std::uint8_t>& clip_mask);

// Per-clip concatenation [gamma; eta; gamma*eta; gamma*q_v], masked clips
// zeroed. L_v x 4H.
Tensor assemble_qal(const Tensor& gamma, const Tensor& eta, const Tensor& q_v,
                    const std::vector<std::uint8_t>& clip_mask);

// No-QAL ablation coupling: gamma_i * (self-attention pooled query), L_v x H.
Tensor baseline_couple(const Tensor& gamma, const Tensor& phi, const Tensor& pool_w,
                       const std::vector<std::uint8_t>& token_mask,
                       const std::vector<std::uint8_t>& clip_mask);

}  // namespace vcmr
