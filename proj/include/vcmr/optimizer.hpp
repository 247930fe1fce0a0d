#pragma once

#include "vcmr/params.hpp"

namespace vcmr {

// Adaptive moment estimation with decoupled weight decay.
struct AdamWConfig {
    double lr = 1e-4;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    double weight_decay = 0.01;
};

class AdamW {
   public:
    AdamW(ParamStore& params, AdamWConfig cfg);

    // Applies one update from the accumulated gradients. Throws if a
    // parameter has no gradient buffer.
    void step();
    int64_t step_count() const { return step_; }

   private:
    ParamStore& params_;
    AdamWConfig cfg_;
    int64_t step_ = 0;
    std::vector<std::vector<double>> m_;
    std::vector<std::vector<double>> v_;
};

}  // namespace vcmr
