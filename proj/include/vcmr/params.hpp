#pragma once

#include <random>
#include <string>
#include <vector>

#include "vcmr/tensor.hpp"

namespace vcmr {

// Named trainable leaf. The Tensor node persists across training steps;
// the optimizer mutates its values between graph builds.
struct Parameter {
    std::string name;
    Tensor tensor;
};

// Owns all parameters of a model in creation order (deterministic given the
// seed, which keeps checkpoints and seeded runs reproducible).
class ParamStore {
   public:
    explicit ParamStore(std::uint64_t seed) : rng_(seed) {}

    // Xavier-uniform weight matrix, fan = (rows, cols).
    Tensor weight(const std::string& name, int rows, int cols);
    // Conv kernel {cout, cin, k}; fan_in = cin*k, fan_out = cout*k.
    Tensor conv_weight(const std::string& name, int cout, int cin, int k);
    // N(0, 0.02) embedding table.
    Tensor embedding(const std::string& name, int rows, int cols);
    Tensor zeros(const std::string& name, std::vector<int> shape);
    Tensor ones(const std::string& name, std::vector<int> shape);
    // N(0, 0.02) vector.
    Tensor vector(const std::string& name, int n);

    std::vector<Parameter>& all() { return params_; }
    const std::vector<Parameter>& all() const { return params_; }
    std::size_t count() const { return params_.size(); }
    int64_t scalar_count() const;

    void zero_grad();
    std::vector<std::vector<double>> snapshot() const;
    void restore(const std::vector<std::vector<double>>& snap);

   private:
    Tensor track(const std::string& name, std::vector<int> shape, std::vector<double> data);

    std::mt19937_64 rng_;
    std::vector<Parameter> params_;
};

}  // namespace vcmr
