#include "vcmr/params.hpp"

#include <cmath>

namespace vcmr {

Tensor ParamStore::track(const std::string& name, std::vector<int> shape,
                         std::vector<double> data) {
    for (const Parameter& p : params_)
        if (p.name == name) throw InvalidArgument("duplicate parameter name: " + name);
    Tensor t = Tensor::parameter(std::move(shape), std::move(data));
    params_.push_back({name, t});
    return t;
}

Tensor ParamStore::weight(const std::string& name, int rows, int cols) {
    const double bound = std::sqrt(6.0 / (rows + cols));
    std::uniform_real_distribution<double> dist(-bound, bound);
    std::vector<double> d(static_cast<size_t>(rows) * cols);
    for (double& v : d) v = dist(rng_);
    return track(name, {rows, cols}, std::move(d));
}

Tensor ParamStore::conv_weight(const std::string& name, int cout, int cin, int k) {
    const double bound = std::sqrt(6.0 / (cin * k + cout * k));
    std::uniform_real_distribution<double> dist(-bound, bound);
    std::vector<double> d(static_cast<size_t>(cout) * cin * k);
    for (double& v : d) v = dist(rng_);
    return track(name, {cout, cin, k}, std::move(d));
}

Tensor ParamStore::embedding(const std::string& name, int rows, int cols) {
    std::normal_distribution<double> dist(0.0, 0.02);
    std::vector<double> d(static_cast<size_t>(rows) * cols);
    for (double& v : d) v = dist(rng_);
    return track(name, {rows, cols}, std::move(d));
}

Tensor ParamStore::zeros(const std::string& name, std::vector<int> shape) {
    int64_t n = 1;
    for (int d : shape) n *= d;
    return track(name, std::move(shape), std::vector<double>(static_cast<size_t>(n), 0.0));
}

Tensor ParamStore::ones(const std::string& name, std::vector<int> shape) {
    int64_t n = 1;
    for (int d : shape) n *= d;
    return track(name, std::move(shape), std::vector<double>(static_cast<size_t>(n), 1.0));
}

Tensor ParamStore::vector(const std::string& name, int n) {
    std::normal_distribution<double> dist(0.0, 0.02);
    std::vector<double> d(static_cast<size_t>(n));
    for (double& v : d) v = dist(rng_);
    return track(name, {n}, std::move(d));
}

int64_t ParamStore::scalar_count() const {
    int64_t n = 0;
    for (const Parameter& p : params_) n += p.tensor.size();
    return n;
}

void ParamStore::zero_grad() {
    for (Parameter& p : params_) p.tensor.zero_grad();
}

std::vector<std::vector<double>> ParamStore::snapshot() const {
    std::vector<std::vector<double>> snap;
    snap.reserve(params_.size());
    for (const Parameter& p : params_) snap.push_back(p.tensor.values());
    return snap;
}

void ParamStore::restore(const std::vector<std::vector<double>>& snap) {
    if (snap.size() != params_.size()) throw InvalidArgument("snapshot does not match store");
    for (size_t i = 0; i < snap.size(); ++i) {
        if (snap[i].size() != params_[i].tensor.values().size())
            throw InvalidArgument("snapshot shape mismatch for " + params_[i].name);
        params_[i].tensor.mutable_values() = snap[i];
    }
}

}  // namespace vcmr
