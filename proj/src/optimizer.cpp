#include "vcmr/optimizer.hpp"

#include <cmath>

namespace vcmr {

AdamW::AdamW(ParamStore& params, AdamWConfig cfg) : params_(params), cfg_(cfg) {
    for (const Parameter& p : params_.all()) {
        m_.emplace_back(p.tensor.values().size(), 0.0);
        v_.emplace_back(p.tensor.values().size(), 0.0);
    }
}

void AdamW::step() {
    ++step_;
    const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(step_));
    const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(step_));
    for (size_t pi = 0; pi < params_.all().size(); ++pi) {
        Parameter& p = params_.all()[pi];
        const auto& g = p.tensor.grad();
        if (g.empty()) throw InvalidArgument("optimizer: missing gradient for " + p.name);
        auto& w = p.tensor.mutable_values();
        auto& m = m_[pi];
        auto& v = v_[pi];
        for (size_t i = 0; i < w.size(); ++i) {
            m[i] = cfg_.beta1 * m[i] + (1.0 - cfg_.beta1) * g[i];
            v[i] = cfg_.beta2 * v[i] + (1.0 - cfg_.beta2) * g[i] * g[i];
            const double mhat = m[i] / bc1;
            const double vhat = v[i] / bc2;
            w[i] -= cfg_.lr * (mhat / (std::sqrt(vhat) + cfg_.eps) + cfg_.weight_decay * w[i]);
        }
    }
}

}  // namespace vcmr
