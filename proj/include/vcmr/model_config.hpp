#pragma once

#include <cstdint>

#include "vcmr/error.hpp"

namespace vcmr {

enum class QdfMode { learned, average };
enum class Scoring { general, exclusive, disjoint };

struct ModelConfig {
    int hidden = 32;        // H (768 at paper scale)
    int heads = 4;
    int layers = 1;         // per transformer stack
    int max_clips = 100;    // L_v
    int max_tokens = 30;    // L_q
    int dim_visual = 4352;  // D_v
    int dim_textual = 768;  // D_t
    int clusters = 32;      // NetVLAD codebook size
    int conv_kernel = 5;
    QdfMode qdf = QdfMode::learned;
    bool qal = true;
    bool vs_head = false;
    bool identity_transformers = false;  // ablation: transformers pass through

    void validate() const {
        if (hidden < 1 || heads < 1 || hidden % heads != 0)
            throw ConfigError("hidden must be a positive multiple of heads");
        if (layers < 1) throw ConfigError("layers must be >= 1");
        if (max_clips < 1 || max_tokens < 1)
            throw ConfigError("max_clips and max_tokens must be >= 1");
        if (dim_visual < 1 || dim_textual < 1)
            throw ConfigError("feature dims must be >= 1");
        if (clusters < 1) throw ConfigError("clusters must be >= 1");
        if (conv_kernel < 1 || conv_kernel % 2 == 0)
            throw ConfigError("conv_kernel must be odd and >= 1");
    }
};

}  // namespace vcmr
